#include "mesh.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <fstream>
#include <sstream>

namespace stokesmg {

namespace {

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

std::array<int, 3> sorted3(int a, int b, int c) {
  std::array<int, 3> f = {a, b, c};
  std::sort(f.begin(), f.end());
  return f;
}

BoundaryTag stronger(BoundaryTag a, BoundaryTag b) {
  auto rank = [](BoundaryTag t) {
    switch (t) {
      case BoundaryTag::none: return 0;
      case BoundaryTag::outflow: return 1;
      case BoundaryTag::freeslip: return 2;
      case BoundaryTag::dirichlet: return 3;
    }
    return 0;
  };
  return rank(a) >= rank(b) ? a : b;
}

}  // namespace

const char* to_string(BoundaryTag t) {
  switch (t) {
    case BoundaryTag::none: return "none";
    case BoundaryTag::dirichlet: return "dirichlet";
    case BoundaryTag::outflow: return "outflow";
    case BoundaryTag::freeslip: return "freeslip";
  }
  return "?";
}

void CoarseMesh::validate() const {
  const int nv = static_cast<int>(vertices.size());
  STOKESMG_REQUIRE(!tets.empty(), MeshError, "mesh has no tetrahedra");
  std::map<std::array<int, 3>, int> face_count;
  for (std::size_t t = 0; t < tets.size(); ++t) {
    const auto& tet = tets[t];
    for (int v : tet)
      STOKESMG_REQUIRE(v >= 0 && v < nv, MeshError,
                       "tet " + std::to_string(t) + ": vertex index out of range");
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b)
        STOKESMG_REQUIRE(tet[a] != tet[b], MeshError,
                         "tet " + std::to_string(t) + ": repeated vertex");
    const double vol = signed_volume(vertices[tet[0]], vertices[tet[1]],
                                     vertices[tet[2]], vertices[tet[3]]);
    STOKESMG_REQUIRE(vol > 0.0, MeshError,
                     "tet " + std::to_string(t) + ": non-positive signed volume");
    const int loc[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
    for (const auto& f : loc) ++face_count[sorted3(tet[f[0]], tet[f[1]], tet[f[2]])];
  }
  for (const auto& [f, c] : face_count)
    STOKESMG_REQUIRE(c <= 2, MeshError, "non-conforming mesh: face shared by " +
                                            std::to_string(c) + " tetrahedra");
  for (const auto& [f, tag] : boundary_tags) {
    auto it = face_count.find(f);
    STOKESMG_REQUIRE(it != face_count.end() && it->second == 1, MeshError,
                     "boundary tag on a face that is not a boundary face");
    STOKESMG_REQUIRE(tag != BoundaryTag::none, MeshError, "invalid boundary tag");
  }
}

CoarseMesh load_coarse_mesh(const std::string& path) {
  std::ifstream in(path);
  STOKESMG_REQUIRE(in.good(), MeshError, "cannot open mesh file: " + path);
  CoarseMesh mesh;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  auto fail = [&](const std::string& msg) {
    throw MeshError(path + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok) || tok[0] == '#') continue;
    if (!have_header) {
      int version = 0;
      if (tok != "tetmesh" || !(ls >> version) || version != 1)
        fail("expected header 'tetmesh 1'");
      have_header = true;
      continue;
    }
    if (tok == "v") {
      Vec3 p;
      if (!(ls >> p.x >> p.y >> p.z)) fail("malformed vertex line");
      mesh.vertices.push_back(p);
    } else if (tok == "t") {
      std::array<int, 4> t;
      if (!(ls >> t[0] >> t[1] >> t[2] >> t[3])) fail("malformed tetrahedron line");
      mesh.tets.push_back(t);
    } else if (tok == "b") {
      int i, j, k;
      std::string tag;
      if (!(ls >> i >> j >> k >> tag)) fail("malformed boundary line");
      BoundaryTag bt;
      if (tag == "dirichlet")
        bt = BoundaryTag::dirichlet;
      else if (tag == "outflow")
        bt = BoundaryTag::outflow;
      else if (tag == "freeslip")
        bt = BoundaryTag::freeslip;
      else {
        fail("unknown boundary tag '" + tag + "'");
        return mesh;  // unreachable
      }
      auto key = sorted3(i, j, k);
      auto it = mesh.boundary_tags.find(key);
      if (it != mesh.boundary_tags.end() && it->second != bt)
        fail("conflicting tags for one boundary face");
      mesh.boundary_tags[key] = bt;
    } else {
      fail("unknown record '" + tok + "'");
    }
  }
  STOKESMG_REQUIRE(have_header, MeshError, path + ": missing 'tetmesh 1' header");
  try {
    mesh.validate();
  } catch (const MeshError& e) {
    throw MeshError(path + ": " + e.what());
  }
  return mesh;
}

CoarseMesh unit_cube_mesh() {
  CoarseMesh mesh;
  mesh.vertices.resize(8);
  for (int i = 0; i < 8; ++i)
    mesh.vertices[i] = {static_cast<double>(i & 1), static_cast<double>((i >> 1) & 1),
                        static_cast<double>((i >> 2) & 1)};
  mesh.tets = {{0, 1, 3, 7}, {0, 5, 1, 7}, {0, 3, 2, 7},
               {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 6, 4, 7}};
  mesh.validate();  // untagged boundary defaults to dirichlet downstream
  return mesh;
}

CoarseMesh octa_ball_mesh() {
  CoarseMesh mesh;
  mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                   {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (int sx : {1, -1})
    for (int sy : {1, -1})
      for (int sz : {1, -1}) {
        int a = sx > 0 ? 1 : 2, b = sy > 0 ? 3 : 4, c = sz > 0 ? 5 : 6;
        if (sx * sy * sz < 0) std::swap(b, c);
        mesh.tets.push_back({0, a, b, c});
        mesh.boundary_tags[sorted3(a, b, c)] = BoundaryTag::freeslip;
      }
  mesh.validate();
  return mesh;
}

int PrimitiveGraph::edge_id(int a, int b) const {
  if (a > b) std::swap(a, b);
  auto it = edge_lookup.find({a, b});
  STOKESMG_REQUIRE(it != edge_lookup.end(), MeshError, "unknown macro edge");
  return it->second;
}

int PrimitiveGraph::face_id(int a, int b, int c) const {
  auto it = face_lookup.find(sorted3(a, b, c));
  STOKESMG_REQUIRE(it != face_lookup.end(), MeshError, "unknown macro face");
  return it->second;
}

PrimitiveGraph build_primitive_graph(const CoarseMesh& mesh) {
  mesh.validate();
  PrimitiveGraph g;
  g.n_vertices = static_cast<int>(mesh.vertices.size());
  g.n_volumes = static_cast<int>(mesh.tets.size());

  std::map<std::array<int, 3>, int> face_tets;
  for (const auto& tet : mesh.tets) {
    const int loc_e[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    for (const auto& e : loc_e) {
      int a = tet[e[0]], b = tet[e[1]];
      if (a > b) std::swap(a, b);
      if (g.edge_lookup.emplace(std::array<int, 2>{a, b},
                                static_cast<int>(g.edges.size())).second)
        g.edges.push_back({a, b});
    }
    const int loc_f[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
    for (const auto& f : loc_f) {
      auto key = sorted3(tet[f[0]], tet[f[1]], tet[f[2]]);
      if (g.face_lookup.emplace(key, static_cast<int>(g.faces.size())).second)
        g.faces.push_back(key);
      ++face_tets[key];
    }
  }

  for (const auto& f : g.faces)
    g.face_edge_ids.push_back(
        {g.edge_id(f[0], f[1]), g.edge_id(f[0], f[2]), g.edge_id(f[1], f[2])});
  for (const auto& tet : mesh.tets) {
    g.vol_edge_ids.push_back({g.edge_id(tet[0], tet[1]), g.edge_id(tet[0], tet[2]),
                              g.edge_id(tet[0], tet[3]), g.edge_id(tet[1], tet[2]),
                              g.edge_id(tet[1], tet[3]), g.edge_id(tet[2], tet[3])});
    g.vol_face_ids.push_back({g.face_id(tet[1], tet[2], tet[3]),
                              g.face_id(tet[0], tet[2], tet[3]),
                              g.face_id(tet[0], tet[1], tet[3]),
                              g.face_id(tet[0], tet[1], tet[2])});
  }

  g.vertex_tag.assign(static_cast<std::size_t>(g.n_vertices), BoundaryTag::none);
  g.edge_tag.assign(g.edges.size(), BoundaryTag::none);
  g.face_tag.assign(g.faces.size(), BoundaryTag::none);
  for (std::size_t f = 0; f < g.faces.size(); ++f) {
    if (face_tets[g.faces[f]] != 1) continue;  // interior face
    auto it = mesh.boundary_tags.find(g.faces[f]);
    const BoundaryTag tag =
        it != mesh.boundary_tags.end() ? it->second : BoundaryTag::dirichlet;
    g.face_tag[f] = tag;
    for (int e : g.face_edge_ids[f]) g.edge_tag[e] = stronger(g.edge_tag[e], tag);
    for (int v : g.faces[f]) g.vertex_tag[v] = stronger(g.vertex_tag[v], tag);
  }
  return g;
}

std::size_t predict_node_count(const PrimitiveGraph& prims, int level) {
  const std::size_t k = std::size_t{1} << (level + 2);
  auto per_face = (k - 1) * (k - 2) / 2;
  auto per_vol = k >= 3 ? (k - 1) * (k - 2) * (k - 3) / 6 : 0;
  return static_cast<std::size_t>(prims.n_vertices) + prims.edges.size() * (k - 1) +
         prims.faces.size() * per_face + static_cast<std::size_t>(prims.n_volumes) * per_vol;
}

namespace {

// Node-id directory for one refinement scale k. Global ids are laid out
// container by container: macro vertices, then edge, face, volume interiors,
// each in lexicographic lattice order.
struct LevelDirectory {
  int k = 1;
  std::size_t edge_base = 0, face_base = 0, vol_base = 0;
  std::size_t edge_sz = 0, face_sz = 0, vol_sz = 0;
  std::vector<std::size_t> face_row_off;  // by i
  std::vector<std::size_t> vol_a_off;     // by a
  std::size_t total = 0;

  void init(const PrimitiveGraph& g, int kk) {
    k = kk;
    edge_sz = static_cast<std::size_t>(k - 1);
    face_sz = static_cast<std::size_t>(k - 1) * (k - 2) / 2;
    vol_sz = k >= 3 ? static_cast<std::size_t>(k - 1) * (k - 2) * (k - 3) / 6 : 0;
    edge_base = static_cast<std::size_t>(g.n_vertices);
    face_base = edge_base + g.edges.size() * edge_sz;
    vol_base = face_base + g.faces.size() * face_sz;
    total = vol_base + static_cast<std::size_t>(g.n_volumes) * vol_sz;
    face_row_off.assign(static_cast<std::size_t>(std::max(0, k)), 0);
    std::size_t off = 0;
    for (int i = 1; i <= k - 2; ++i) {
      face_row_off[static_cast<std::size_t>(i)] = off;
      off += static_cast<std::size_t>(k - 1 - i);
    }
    vol_a_off.assign(static_cast<std::size_t>(std::max(0, k)), 0);
    off = 0;
    for (int a = 1; a <= k - 3; ++a) {
      vol_a_off[static_cast<std::size_t>(a)] = off;
      const std::size_t m = static_cast<std::size_t>(k - 1 - a);  // b + c <= m
      off += m >= 2 ? (m - 1) * m / 2 : 0;
    }
  }

  std::size_t face_local(int i, int j) const {
    return face_row_off[static_cast<std::size_t>(i)] + static_cast<std::size_t>(j - 1);
  }
  std::size_t vol_local(int a, int b, int c) const {
    const std::size_t row =
        static_cast<std::size_t>(b - 1) * static_cast<std::size_t>(k - 1 - a) -
        static_cast<std::size_t>(b - 1) * static_cast<std::size_t>(b) / 2;
    return vol_a_off[static_cast<std::size_t>(a)] + row + static_cast<std::size_t>(c - 1);
  }
};

// Per-macro-tet lookup tables so lattice points resolve without map queries.
struct TetFrame {
  std::array<int, 4> fv;   // frame vertex ids (diagonal-relabeled order)
  std::array<Vec3, 4> fp;  // their positions
  struct EdgeRef {
    int id;
    int lo_slot;  // frame slot holding the canonical first endpoint
  };
  std::array<EdgeRef, 6> edges;  // by pair index of frame slots
  struct FaceRef {
    int id;
    std::array<int, 3> canon_slot;  // frame slots of canonical v0,v1,v2
  };
  std::array<FaceRef, 4> faces;  // by opposite (zero-weight) frame slot
};

int pair_index(int s, int t) {
  static const int tbl[4][4] = {{-1, 0, 1, 2}, {0, -1, 3, 4}, {1, 3, -1, 5}, {2, 4, 5, -1}};
  return tbl[s][t];
}

TetFrame make_frame(const CoarseMesh& mesh, const PrimitiveGraph& g,
                    const std::array<int, 4>& tet) {
  // Shortest interior diagonal of the midpoint octahedron, relabeled so the
  // chosen diagonal becomes the (m02, m13) pair of the refinement rule.
  const Vec3 v[4] = {mesh.vertices[tet[0]], mesh.vertices[tet[1]],
                     mesh.vertices[tet[2]], mesh.vertices[tet[3]]};
  const double d1 = ((v[2] + v[3]) * 0.5 - (v[0] + v[1]) * 0.5).norm();
  const double d2 = ((v[1] + v[3]) * 0.5 - (v[0] + v[2]) * 0.5).norm();
  const double d3 = ((v[1] + v[2]) * 0.5 - (v[0] + v[3]) * 0.5).norm();
  std::array<int, 4> order;
  if (d2 <= d1 && d2 <= d3)
    order = {0, 1, 2, 3};
  else if (d1 <= d3)
    order = {0, 2, 1, 3};
  else
    order = {0, 1, 3, 2};

  TetFrame f;
  for (int s = 0; s < 4; ++s) {
    f.fv[s] = tet[order[s]];
    f.fp[s] = mesh.vertices[f.fv[s]];
  }
  for (int s = 0; s < 4; ++s)
    for (int t = s + 1; t < 4; ++t) {
      auto& e = f.edges[pair_index(s, t)];
      e.id = g.edge_id(f.fv[s], f.fv[t]);
      e.lo_slot = f.fv[s] < f.fv[t] ? s : t;
    }
  for (int o = 0; o < 4; ++o) {
    std::array<int, 3> slots;
    int n = 0;
    for (int s = 0; s < 4; ++s)
      if (s != o) slots[n++] = s;
    std::sort(slots.begin(), slots.end(),
              [&](int a, int b) { return f.fv[a] < f.fv[b]; });
    f.faces[o].id = g.face_id(f.fv[slots[0]], f.fv[slots[1]], f.fv[slots[2]]);
    f.faces[o].canon_slot = slots;
  }
  return f;
}

using LatPoint = std::array<int, 3>;  // (a,b,c) frame lattice coords

std::int64_t resolve_point(const LevelDirectory& dir, const TetFrame& frame, int vol_id,
                           const LatPoint& p) {
  const int k = dir.k;
  const int w[4] = {k - p[0] - p[1] - p[2], p[0], p[1], p[2]};
  int nz[4], n = 0;
  for (int s = 0; s < 4; ++s)
    if (w[s] != 0) nz[n++] = s;
  switch (n) {
    case 1:
      return frame.fv[nz[0]];
    case 2: {
      const auto& e = frame.edges[pair_index(nz[0], nz[1])];
      const int i = e.lo_slot == nz[0] ? w[nz[1]] : w[nz[0]];
      return static_cast<std::int64_t>(dir.edge_base) +
             static_cast<std::int64_t>(e.id) * static_cast<std::int64_t>(dir.edge_sz) +
             (i - 1);
    }
    case 3: {
      const int o = 6 - nz[0] - nz[1] - nz[2];  // the zero-weight slot
      const auto& fc = frame.faces[o];
      const int i = w[fc.canon_slot[1]], j = w[fc.canon_slot[2]];
      return static_cast<std::int64_t>(dir.face_base) +
             static_cast<std::int64_t>(fc.id) * static_cast<std::int64_t>(dir.face_sz) +
             static_cast<std::int64_t>(dir.face_local(i, j));
    }
    default:
      return static_cast<std::int64_t>(dir.vol_base) +
             static_cast<std::int64_t>(vol_id) * static_cast<std::int64_t>(dir.vol_sz) +
             static_cast<std::int64_t>(dir.vol_local(p[0], p[1], p[2]));
  }
}

struct LatTet {
  std::int32_t macro;
  std::array<LatPoint, 4> p;
};

// 1:8 split with doubled lattice coordinates. Child vertex orderings follow
// the stable scheme, octahedron diagonal fixed at (m02, m13).
void bey_children(const LatTet& t, std::array<LatTet, 8>& out) {
  LatPoint q[4], m[4][4];
  for (int a = 0; a < 4; ++a)
    for (int d = 0; d < 3; ++d) q[a][d] = 2 * t.p[a][d];
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b)
      for (int d = 0; d < 3; ++d) m[a][b][d] = t.p[a][d] + t.p[b][d];
  auto set = [&](int idx, const LatPoint& a, const LatPoint& b, const LatPoint& c,
                 const LatPoint& d) {
    out[idx] = {t.macro, {a, b, c, d}};
  };
  set(0, q[0], m[0][1], m[0][2], m[0][3]);
  set(1, m[0][1], q[1], m[1][2], m[1][3]);
  set(2, m[0][2], m[1][2], q[2], m[2][3]);
  set(3, m[0][3], m[1][3], m[2][3], q[3]);
  set(4, m[0][1], m[0][2], m[0][3], m[1][3]);
  set(5, m[0][1], m[0][2], m[1][2], m[1][3]);
  set(6, m[0][2], m[0][3], m[1][3], m[2][3]);
  set(7, m[0][2], m[1][2], m[1][3], m[2][3]);
}

Vec3 lattice_pos(const TetFrame& f, int k, const LatPoint& p) {
  const double ik = 1.0 / static_cast<double>(k);
  return f.fp[0] + (f.fp[1] - f.fp[0]) * (p[0] * ik) + (f.fp[2] - f.fp[0]) * (p[1] * ik) +
         (f.fp[3] - f.fp[0]) * (p[2] * ik);
}

void emit_metadata(GridLevel& lv, const CoarseMesh& mesh, const PrimitiveGraph& g,
                   const std::vector<TetFrame>& frames, const LevelDirectory& dir) {
  const int k = dir.k;
  const std::size_t n = dir.total;
  lv.pos.resize(n);
  lv.owner.resize(n);
  lv.lattice.resize(n);
  lv.bc_tag.resize(n);
  lv.containers.clear();

  std::size_t id = 0;
  for (int v = 0; v < g.n_vertices; ++v) {
    lv.pos[id] = mesh.vertices[static_cast<std::size_t>(v)];
    lv.owner[id] = {PrimKind::vertex, v};
    lv.lattice[id] = {0, 0, 0};
    lv.bc_tag[id] = g.vertex_tag[static_cast<std::size_t>(v)];
    lv.containers.push_back({PrimKind::vertex, v, static_cast<std::int32_t>(id),
                             static_cast<std::int32_t>(id + 1)});
    ++id;
  }
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto beg = id;
    const Vec3 a = mesh.vertices[static_cast<std::size_t>(g.edges[e][0])];
    const Vec3 b = mesh.vertices[static_cast<std::size_t>(g.edges[e][1])];
    for (int i = 1; i <= k - 1; ++i, ++id) {
      lv.pos[id] = a + (b - a) * (static_cast<double>(i) / k);
      lv.owner[id] = {PrimKind::edge, static_cast<std::int32_t>(e)};
      lv.lattice[id] = {static_cast<std::uint16_t>(i), 0, 0};
      lv.bc_tag[id] = g.edge_tag[e];
    }
    lv.containers.push_back({PrimKind::edge, static_cast<std::int32_t>(e),
                             static_cast<std::int32_t>(beg), static_cast<std::int32_t>(id)});
  }
  for (std::size_t f = 0; f < g.faces.size(); ++f) {
    const auto beg = id;
    const Vec3 a = mesh.vertices[static_cast<std::size_t>(g.faces[f][0])];
    const Vec3 b = mesh.vertices[static_cast<std::size_t>(g.faces[f][1])];
    const Vec3 c = mesh.vertices[static_cast<std::size_t>(g.faces[f][2])];
    for (int i = 1; i <= k - 2; ++i)
      for (int j = 1; j <= k - 1 - i; ++j, ++id) {
        lv.pos[id] = a + (b - a) * (static_cast<double>(i) / k) +
                     (c - a) * (static_cast<double>(j) / k);
        lv.owner[id] = {PrimKind::face, static_cast<std::int32_t>(f)};
        lv.lattice[id] = {static_cast<std::uint16_t>(i), static_cast<std::uint16_t>(j), 0};
        lv.bc_tag[id] = g.face_tag[f];
      }
    lv.containers.push_back({PrimKind::face, static_cast<std::int32_t>(f),
                             static_cast<std::int32_t>(beg), static_cast<std::int32_t>(id)});
  }
  for (int t = 0; t < g.n_volumes; ++t) {
    const auto beg = id;
    const auto& fr = frames[static_cast<std::size_t>(t)];
    for (int a = 1; a <= k - 3; ++a)
      for (int b = 1; b <= k - 2 - a; ++b)
        for (int c = 1; c <= k - 1 - a - b; ++c, ++id) {
          lv.pos[id] = lattice_pos(fr, k, {a, b, c});
          lv.owner[id] = {PrimKind::volume, t};
          lv.lattice[id] = {static_cast<std::uint16_t>(a), static_cast<std::uint16_t>(b),
                            static_cast<std::uint16_t>(c)};
          lv.bc_tag[id] = BoundaryTag::none;
        }
    lv.containers.push_back({PrimKind::volume, t, static_cast<std::int32_t>(beg),
                             static_cast<std::int32_t>(id)});
  }
  assert(id == n);
}

}  // namespace

GridHierarchy refine_hierarchy(const CoarseMesh& mesh, int L, std::size_t node_cap) {
  STOKESMG_REQUIRE(L >= 0, ConfigError, "refinement level must be >= 0");
  GridHierarchy h;
  h.coarse = mesh;
  h.prims = build_primitive_graph(mesh);
  {
    const std::size_t n = predict_node_count(h.prims, L);
    STOKESMG_REQUIRE(n <= node_cap, MeshError,
                     "predicted node count " + std::to_string(n) + " at level " +
                         std::to_string(L) + " exceeds cap " + std::to_string(node_cap));
  }

  std::vector<TetFrame> frames;
  frames.reserve(mesh.tets.size());
  for (const auto& tet : mesh.tets) frames.push_back(make_frame(mesh, h.prims, tet));

  // Twice-refined input: internal scales k=1 (input) and k=2 precede level 0.
  LevelDirectory dir_prev;
  dir_prev.init(h.prims, 1);
  std::vector<LatTet> elems;
  elems.reserve(mesh.tets.size());
  for (std::size_t t = 0; t < mesh.tets.size(); ++t)
    elems.push_back({static_cast<std::int32_t>(t),
                     {LatPoint{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}});

  h.levels.reserve(static_cast<std::size_t>(L) + 1);
  for (int ell = -1; ell <= L; ++ell) {
    LevelDirectory dir;
    dir.init(h.prims, 1 << (ell + 2));

    GridLevel lv;
    lv.level = ell;
    lv.k = dir.k;
    const bool keep = ell >= 0;
    if (keep) {
      emit_metadata(lv, mesh, h.prims, frames, dir);
      if (ell >= 1) lv.parent.assign(dir.total, {-1, -1});
    }

    std::vector<LatTet> next;
    next.reserve(elems.size() * 8);
    lv.elem_nodes.reserve(keep ? elems.size() * 8 : 0);
    lv.elem_class.reserve(keep ? elems.size() * 8 : 0);
    std::map<std::array<int, 10>, std::int32_t> class_ids;

    std::array<LatTet, 8> kids;
    for (const auto& parent : elems) {
      const auto& fr = frames[static_cast<std::size_t>(parent.macro)];
      bey_children(parent, kids);
      if (keep && ell >= 1) {
        // Parent bookkeeping: corners copy, midpoints average two endpoints.
        std::int32_t prev_id[4];
        for (int a = 0; a < 4; ++a)
          prev_id[a] = static_cast<std::int32_t>(
              resolve_point(dir_prev, fr, parent.macro, parent.p[a]));
        for (int a = 0; a < 4; ++a) {
          LatPoint q = {2 * parent.p[a][0], 2 * parent.p[a][1], 2 * parent.p[a][2]};
          lv.parent[static_cast<std::size_t>(resolve_point(dir, fr, parent.macro, q))] = {
              prev_id[a], -1};
        }
        for (int a = 0; a < 4; ++a)
          for (int b = a + 1; b < 4; ++b) {
            LatPoint m = {parent.p[a][0] + parent.p[b][0], parent.p[a][1] + parent.p[b][1],
                          parent.p[a][2] + parent.p[b][2]};
            lv.parent[static_cast<std::size_t>(resolve_point(dir, fr, parent.macro, m))] = {
                prev_id[a], prev_id[b]};
          }
      }
      for (const auto& kid : kids) {
        if (keep) {
          std::array<std::int32_t, 4> ids;
          for (int a = 0; a < 4; ++a)
            ids[a] =
                static_cast<std::int32_t>(resolve_point(dir, fr, kid.macro, kid.p[a]));
          lv.elem_nodes.push_back(ids);
          std::array<int, 10> key;
          key[0] = kid.macro;
          for (int a = 0; a < 3; ++a)
            for (int d = 0; d < 3; ++d)
              key[static_cast<std::size_t>(1 + 3 * a + d)] =
                  kid.p[a + 1][d] - kid.p[0][d];
          auto [it, inserted] =
              class_ids.emplace(key, static_cast<std::int32_t>(lv.classes.size()));
          if (inserted) {
            GridLevel::ElemClass ec;
            for (int a = 0; a < 4; ++a) ec.rep[a] = lattice_pos(fr, dir.k, kid.p[a]);
            ec.macro_tet = kid.macro;
            ec.volume = std::abs(signed_volume(ec.rep[0], ec.rep[1], ec.rep[2], ec.rep[3]));
            STOKESMG_REQUIRE(ec.volume > 0.0, MeshError, "degenerate refined element");
            ec.h_t = std::cbrt(ec.volume);
            lv.classes.push_back(ec);
          }
          lv.elem_class.push_back(it->second);
        }
        next.push_back(kid);
      }
    }

    if (keep) {
      lv.h_min = lv.classes.front().h_t;
      lv.h_ell = lv.classes.front().h_t;
      for (const auto& c : lv.classes) {
        lv.h_min = std::min(lv.h_min, c.h_t);
        lv.h_ell = std::max(lv.h_ell, c.h_t);
      }
      h.levels.push_back(std::move(lv));
    }
    elems = std::move(next);
    dir_prev = dir;
  }
  return h;
}

NodeCounts node_counts(const GridLevel& level) {
  return {3 * level.n_nodes(), level.n_nodes()};
}

NodeCounts free_dof_counts(const GridLevel& level) {
  std::size_t dir = 0;
  for (auto t : level.bc_tag)
    if (t == BoundaryTag::dirichlet) ++dir;
  return {3 * (level.n_nodes() - dir), level.n_nodes()};
}

}  // namespace stokesmg
