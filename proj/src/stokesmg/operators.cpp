#include "operators.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <fstream>

namespace stokesmg {

const char* to_string(OperatorTag t) {
  switch (t) {
    case OperatorTag::A1: return "A1";
    case OperatorTag::A2: return "A2";
    case OperatorTag::B: return "B";
    case OperatorTag::Bt: return "Bt";
    case OperatorTag::C: return "C";
    case OperatorTag::M: return "M";
  }
  return "?";
}

const char* to_string(Formulation f) {
  return f == Formulation::laplace ? "laplace" : "dop";
}

Formulation formulation_from_string(const std::string& s) {
  if (s == "laplace") return Formulation::laplace;
  if (s == "dop" || s == "d") return Formulation::dop;
  throw ConfigError("unknown formulation '" + s + "'");
}

void OpCounters::reset(int n_levels) {
  n_levels_ = n_levels;
  for (auto& per_ctx : counts_)
    for (auto& per_tag : per_ctx)
      per_tag.assign(static_cast<std::size_t>(n_levels), 0);
}

void OpCounters::add(OperatorTag tag, int level) {
  auto& v = counts_[static_cast<std::size_t>(context)][static_cast<std::size_t>(tag)];
  if (level >= 0 && level < static_cast<int>(v.size())) ++v[static_cast<std::size_t>(level)];
}

std::int64_t OpCounters::get(CountContext ctx, OperatorTag tag, int level) const {
  const auto& v = counts_[static_cast<std::size_t>(ctx)][static_cast<std::size_t>(tag)];
  if (level < 0 || level >= static_cast<int>(v.size())) return 0;
  return v[static_cast<std::size_t>(level)];
}

std::int64_t OpCounters::solver_count(OperatorTag tag, int level) const {
  return get(CountContext::cycle, tag, level) + get(CountContext::coarse, tag, level);
}

std::size_t LevelStencils::entry(std::int32_t row, std::int32_t colid) const {
  const auto* beg = col.data() + row_ptr[static_cast<std::size_t>(row)];
  const auto* end = col.data() + row_ptr[static_cast<std::size_t>(row) + 1];
  const auto* it = std::lower_bound(beg, end, colid);
  assert(it != end && *it == colid);
  return static_cast<std::size_t>(it - col.data());
}

namespace {

// P1 element geometry: gradients of the four hat functions and the volume.
struct ElemGeom {
  std::array<Vec3, 4> grad;
  double volume;
};

ElemGeom elem_geometry(const std::array<Vec3, 4>& v) {
  const Vec3 e1 = v[1] - v[0], e2 = v[2] - v[0], e3 = v[3] - v[0];
  const double det = e1.dot(e2.cross(e3));
  STOKESMG_REQUIRE(std::abs(det) > 0.0, MeshError, "degenerate element");
  const double inv = 1.0 / det;
  ElemGeom g;
  // rows of the inverse Jacobian
  g.grad[1] = e2.cross(e3) * inv;
  g.grad[2] = e3.cross(e1) * inv;
  g.grad[3] = e1.cross(e2) * inv;
  g.grad[0] = Vec3{0, 0, 0} - g.grad[1] - g.grad[2] - g.grad[3];
  g.volume = std::abs(det) / 6.0;
  return g;
}

// Degree-2 tetrahedron quadrature (4 interior points, equal weights V/4).
struct QuadRule4 {
  std::array<std::array<double, 4>, 4> bary;
};

const QuadRule4& quad4() {
  static const QuadRule4 rule = [] {
    QuadRule4 r;
    const double a = 0.5854101966249685, b = 0.1381966011250105;
    for (int q = 0; q < 4; ++q)
      for (int i = 0; i < 4; ++i) r.bary[q][i] = q == i ? a : b;
    return r;
  }();
  return rule;
}

}  // namespace

StokesOperators::StokesOperators(const GridHierarchy& hierarchy, Formulation formulation,
                                 double nu)
    : hier_(&hierarchy), form_(formulation), nu_(nu) {
  STOKESMG_REQUIRE(nu > 0.0, ConfigError, "viscosity must be positive");
  const auto n = hierarchy.levels.size();
  levels_.resize(n);
  graph_built_.assign(n, 0);
  bc_.resize(n);
  counters_.reset(static_cast<int>(n));
}

void StokesOperators::build_graph(int level) const {
  if (graph_built_[static_cast<std::size_t>(level)]) return;
  const GridLevel& lv = hier_->lv(level);
  LevelStencils& s = levels_[static_cast<std::size_t>(level)];
  const std::size_t n = lv.n_nodes();

  // Two passes: neighbor counts (upper bound), then fill + sort + unique.
  std::vector<std::int32_t> count(n + 1, 0);
  for (const auto& e : lv.elem_nodes)
    for (int a = 0; a < 4; ++a) count[static_cast<std::size_t>(e[a]) + 1] += 4;
  std::vector<std::int64_t> start(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) start[i + 1] = start[i] + count[i + 1];
  std::vector<std::int32_t> cols(static_cast<std::size_t>(start[n]));
  std::vector<std::int64_t> cursor(start.begin(), start.end() - 1);
  for (const auto& e : lv.elem_nodes)
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        cols[static_cast<std::size_t>(cursor[static_cast<std::size_t>(e[a])]++)] = e[b];

  s.row_ptr.assign(n + 1, 0);
  std::vector<std::int32_t> packed;
  packed.reserve(static_cast<std::size_t>(start[n]) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    auto* beg = cols.data() + start[i];
    auto* end = cols.data() + start[i + 1];
    std::sort(beg, end);
    auto* last = std::unique(beg, end);
    s.row_ptr[i + 1] = s.row_ptr[i] + static_cast<std::int32_t>(last - beg);
    packed.insert(packed.end(), beg, last);
  }
  s.col = std::move(packed);
  graph_built_[static_cast<std::size_t>(level)] = 1;
}

void StokesOperators::assemble(OperatorTag tag, int level) const {
  build_graph(level);
  const GridLevel& lv = hier_->lv(level);
  LevelStencils& s = levels_[static_cast<std::size_t>(level)];
  const std::size_t n = lv.n_nodes();
  const std::size_t nnz = s.col.size();

  // Local matrices per element congruence class.
  const std::size_t ncls = lv.classes.size();
  std::vector<ElemGeom> geom(ncls);
  for (std::size_t c = 0; c < ncls; ++c) geom[c] = elem_geometry(lv.classes[c].rep);

  switch (tag) {
    case OperatorTag::A1: {
      if (s.has_a1) return;
      std::vector<std::array<double, 16>> loc(ncls);
      for (std::size_t c = 0; c < ncls; ++c)
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b)
            loc[c][static_cast<std::size_t>(4 * a + b)] =
                nu_ * geom[c].volume * geom[c].grad[a].dot(geom[c].grad[b]);
      s.a1.assign(nnz, 0.0);
      for (std::size_t e = 0; e < lv.n_elems(); ++e) {
        const auto& nodes = lv.elem_nodes[e];
        const auto& m = loc[static_cast<std::size_t>(lv.elem_class[e])];
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b)
            s.a1[s.entry(nodes[a], nodes[b])] += m[static_cast<std::size_t>(4 * a + b)];
      }
      s.a1_diag.resize(n);
      for (std::size_t i = 0; i < n; ++i)
        s.a1_diag[i] = s.a1[s.entry(static_cast<std::int32_t>(i), static_cast<std::int32_t>(i))];
      s.has_a1 = true;
      return;
    }
    case OperatorTag::A2: {
      if (s.has_a2) return;
      // block (a,i),(b,j): nu V (delta_ij ga.gb + gb_i ga_j)
      std::vector<std::array<std::array<double, 9>, 16>> loc(ncls);
      for (std::size_t c = 0; c < ncls; ++c) {
        const auto& g = geom[c];
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b) {
            auto& blk = loc[c][static_cast<std::size_t>(4 * a + b)];
            const double lap = g.grad[a].dot(g.grad[b]);
            const double ga[3] = {g.grad[a].x, g.grad[a].y, g.grad[a].z};
            const double gb[3] = {g.grad[b].x, g.grad[b].y, g.grad[b].z};
            for (int i = 0; i < 3; ++i)
              for (int j = 0; j < 3; ++j)
                blk[static_cast<std::size_t>(3 * i + j)] =
                    nu_ * g.volume * ((i == j ? lap : 0.0) + gb[i] * ga[j]);
          }
      }
      s.a2.assign(nnz, std::array<double, 9>{});
      for (std::size_t e = 0; e < lv.n_elems(); ++e) {
        const auto& nodes = lv.elem_nodes[e];
        const auto& m = loc[static_cast<std::size_t>(lv.elem_class[e])];
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b) {
            auto& dst = s.a2[s.entry(nodes[a], nodes[b])];
            const auto& src = m[static_cast<std::size_t>(4 * a + b)];
            for (int q = 0; q < 9; ++q) dst[static_cast<std::size_t>(q)] += src[static_cast<std::size_t>(q)];
          }
      }
      s.a2_diag_inv.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& d = s.a2[s.entry(static_cast<std::int32_t>(i), static_cast<std::int32_t>(i))];
        // inverse of the 3x3 diagonal block
        const double a00 = d[0], a01 = d[1], a02 = d[2], a10 = d[3], a11 = d[4],
                     a12 = d[5], a20 = d[6], a21 = d[7], a22 = d[8];
        const double det = a00 * (a11 * a22 - a12 * a21) - a01 * (a10 * a22 - a12 * a20) +
                           a02 * (a10 * a21 - a11 * a20);
        STOKESMG_REQUIRE(std::abs(det) > 0.0, NumericsError, "singular A2 diagonal block");
        const double id = 1.0 / det;
        s.a2_diag_inv[i] = {id * (a11 * a22 - a12 * a21), id * (a02 * a21 - a01 * a22),
                            id * (a01 * a12 - a02 * a11), id * (a12 * a20 - a10 * a22),
                            id * (a00 * a22 - a02 * a20), id * (a02 * a10 - a00 * a12),
                            id * (a10 * a21 - a11 * a20), id * (a01 * a20 - a00 * a21),
                            id * (a00 * a11 - a01 * a10)};
      }
      s.has_a2 = true;
      return;
    }
    case OperatorTag::B:
    case OperatorTag::Bt: {
      if (s.has_b) return;
      // b(u,q) = -<div u, q>; pressure row a, velocity column (b,j):
      // -(V/4) grad_b[j]. Bt is the transpose, stored row-wise as well.
      s.b.assign(nnz, std::array<double, 3>{});
      s.bt.assign(nnz, std::array<double, 3>{});
      for (std::size_t e = 0; e < lv.n_elems(); ++e) {
        const auto& nodes = lv.elem_nodes[e];
        const auto& g = geom[static_cast<std::size_t>(lv.elem_class[e])];
        const double w = -0.25 * g.volume;
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b) {
            const std::size_t eab = s.entry(nodes[a], nodes[b]);
            s.b[eab][0] += w * g.grad[b].x;
            s.b[eab][1] += w * g.grad[b].y;
            s.b[eab][2] += w * g.grad[b].z;
            // transpose: velocity row a gets w * grad_a against pressure col b
            s.bt[eab][0] += w * g.grad[a].x;
            s.bt[eab][1] += w * g.grad[a].y;
            s.bt[eab][2] += w * g.grad[a].z;
          }
      }
      s.has_b = true;
      return;
    }
    case OperatorTag::C: {
      if (s.has_c) return;
      s.c.assign(nnz, 0.0);
      for (std::size_t e = 0; e < lv.n_elems(); ++e) {
        const auto& nodes = lv.elem_nodes[e];
        const auto& cls = lv.classes[static_cast<std::size_t>(lv.elem_class[e])];
        const auto& g = geom[static_cast<std::size_t>(lv.elem_class[e])];
        const double w = kStabilizationDelta * cls.h_t * cls.h_t * g.volume;
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b)
            s.c[s.entry(nodes[a], nodes[b])] += w * g.grad[a].dot(g.grad[b]);
      }
      s.c_diag.resize(n);
      for (std::size_t i = 0; i < n; ++i)
        s.c_diag[i] = s.c[s.entry(static_cast<std::int32_t>(i), static_cast<std::int32_t>(i))];
      s.has_c = true;
      return;
    }
    case OperatorTag::M: {
      if (s.has_m) return;
      s.m.assign(n, 0.0);
      for (std::size_t e = 0; e < lv.n_elems(); ++e) {
        const auto& nodes = lv.elem_nodes[e];
        const double w =
            0.25 * lv.classes[static_cast<std::size_t>(lv.elem_class[e])].volume;
        for (int a = 0; a < 4; ++a) s.m[static_cast<std::size_t>(nodes[a])] += w;
      }
      s.has_m = true;
      return;
    }
  }
}

void StokesOperators::ensure(OperatorTag tag, int level) const { assemble(tag, level); }

const LevelStencils& StokesOperators::stencils(int level) const {
  build_graph(level);
  return levels_[static_cast<std::size_t>(level)];
}

void StokesOperators::apply_a(int level, std::span<const double> u,
                              std::span<double> out) const {
  apply_tag(a_tag(), level, u, out);
}

void StokesOperators::apply_tag(OperatorTag tag, int level, std::span<const double> in,
                                std::span<double> out) const {
  ensure(tag, level);
  const LevelStencils& s = levels_[static_cast<std::size_t>(level)];
  const std::size_t n = s.n_nodes();
  counters_.add(tag, level);
  switch (tag) {
    case OperatorTag::A1: {
      STOKESMG_REQUIRE(in.size() == 3 * n && out.size() == 3 * n, NumericsError,
                       "apply A1: size mismatch");
      for (std::size_t i = 0; i < n; ++i) {
        double ax = 0, ay = 0, az = 0;
        for (std::int32_t e = s.row_ptr[i]; e < s.row_ptr[i + 1]; ++e) {
          const double w = s.a1[static_cast<std::size_t>(e)];
          const std::size_t j = static_cast<std::size_t>(s.col[static_cast<std::size_t>(e)]);
          ax += w * in[3 * j];
          ay += w * in[3 * j + 1];
          az += w * in[3 * j + 2];
        }
        out[3 * i] = ax;
        out[3 * i + 1] = ay;
        out[3 * i + 2] = az;
      }
      return;
    }
    case OperatorTag::A2: {
      STOKESMG_REQUIRE(in.size() == 3 * n && out.size() == 3 * n, NumericsError,
                       "apply A2: size mismatch");
      for (std::size_t i = 0; i < n; ++i) {
        double ax = 0, ay = 0, az = 0;
        for (std::int32_t e = s.row_ptr[i]; e < s.row_ptr[i + 1]; ++e) {
          const auto& blk = s.a2[static_cast<std::size_t>(e)];
          const std::size_t j = static_cast<std::size_t>(s.col[static_cast<std::size_t>(e)]);
          const double ux = in[3 * j], uy = in[3 * j + 1], uz = in[3 * j + 2];
          ax += blk[0] * ux + blk[1] * uy + blk[2] * uz;
          ay += blk[3] * ux + blk[4] * uy + blk[5] * uz;
          az += blk[6] * ux + blk[7] * uy + blk[8] * uz;
        }
        out[3 * i] = ax;
        out[3 * i + 1] = ay;
        out[3 * i + 2] = az;
      }
      return;
    }
    case OperatorTag::B: {
      STOKESMG_REQUIRE(in.size() == 3 * n && out.size() == n, NumericsError,
                       "apply B: size mismatch");
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0;
        for (std::int32_t e = s.row_ptr[i]; e < s.row_ptr[i + 1]; ++e) {
          const auto& w = s.b[static_cast<std::size_t>(e)];
          const std::size_t j = static_cast<std::size_t>(s.col[static_cast<std::size_t>(e)]);
          acc += w[0] * in[3 * j] + w[1] * in[3 * j + 1] + w[2] * in[3 * j + 2];
        }
        out[i] = acc;
      }
      return;
    }
    case OperatorTag::Bt: {
      STOKESMG_REQUIRE(in.size() == n && out.size() == 3 * n, NumericsError,
                       "apply Bt: size mismatch");
      for (std::size_t i = 0; i < n; ++i) {
        double ax = 0, ay = 0, az = 0;
        for (std::int32_t e = s.row_ptr[i]; e < s.row_ptr[i + 1]; ++e) {
          const auto& w = s.bt[static_cast<std::size_t>(e)];
          const double pj = in[static_cast<std::size_t>(s.col[static_cast<std::size_t>(e)])];
          ax += w[0] * pj;
          ay += w[1] * pj;
          az += w[2] * pj;
        }
        out[3 * i] = ax;
        out[3 * i + 1] = ay;
        out[3 * i + 2] = az;
      }
      return;
    }
    case OperatorTag::C: {
      STOKESMG_REQUIRE(in.size() == n && out.size() == n, NumericsError,
                       "apply C: size mismatch");
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0;
        for (std::int32_t e = s.row_ptr[i]; e < s.row_ptr[i + 1]; ++e)
          acc += s.c[static_cast<std::size_t>(e)] *
                 in[static_cast<std::size_t>(s.col[static_cast<std::size_t>(e)])];
        out[i] = acc;
      }
      return;
    }
    case OperatorTag::M: {
      STOKESMG_REQUIRE(in.size() == n && out.size() == n, NumericsError,
                       "apply M: size mismatch");
      for (std::size_t i = 0; i < n; ++i) out[i] = s.m[i] * in[i];
      return;
    }
  }
}

void StokesOperators::apply_b(int level, std::span<const double> u,
                              std::span<double> out_p) const {
  apply_tag(OperatorTag::B, level, u, out_p);
}
void StokesOperators::apply_bt(int level, std::span<const double> p,
                               std::span<double> out_u) const {
  apply_tag(OperatorTag::Bt, level, p, out_u);
}
void StokesOperators::apply_c(int level, std::span<const double> p,
                              std::span<double> out) const {
  apply_tag(OperatorTag::C, level, p, out);
}
void StokesOperators::apply_m(int level, std::span<const double> p,
                              std::span<double> out) const {
  apply_tag(OperatorTag::M, level, p, out);
}

void StokesOperators::apply_saddle(int level, const StokesVector& x, StokesVector& out) const {
  STOKESMG_REQUIRE(x.level() == level && out.level() == level, NumericsError,
                   "apply_saddle: level mismatch");
  apply_a(level, x.u.data, out.u.data);
  std::vector<double> btp(x.u.data.size());
  apply_bt(level, x.p.data, btp);
  axpy(1.0, btp, out.u.data);
  apply_b(level, x.u.data, out.p.data);
  std::vector<double> cp(x.p.data.size());
  apply_c(level, x.p.data, cp);
  axpy(-1.0, cp, out.p.data);
}

std::span<const double> StokesOperators::lumped_mass(int level) const {
  ensure(OperatorTag::M, level);
  return levels_[static_cast<std::size_t>(level)].m;
}

void StokesOperators::build_bc(int level) const {
  auto& slot = bc_[static_cast<std::size_t>(level)];
  if (slot) return;
  const GridLevel& lv = hier_->lv(level);
  auto bc = std::make_unique<LevelBC>();
  bc->velocity_pinned.assign(lv.n_nodes(), 0);
  for (std::size_t i = 0; i < lv.n_nodes(); ++i) {
    if (lv.bc_tag[i] == BoundaryTag::dirichlet) bc->velocity_pinned[i] = 1;
    if (lv.bc_tag[i] == BoundaryTag::freeslip)
      bc->freeslip_nodes.push_back(static_cast<std::int32_t>(i));
  }
  if (!bc->freeslip_nodes.empty())
    bc->freeslip_normal = freeslip_normals(*this, level, bc->freeslip_nodes);
  slot = std::move(bc);
}

const LevelBC& StokesOperators::bc(int level) const {
  build_bc(level);
  return *bc_[static_cast<std::size_t>(level)];
}

void StokesOperators::zero_pinned(int level, std::span<double> u) const {
  const LevelBC& b = bc(level);
  for (std::size_t i = 0; i < b.velocity_pinned.size(); ++i)
    if (b.velocity_pinned[i]) u[3 * i] = u[3 * i + 1] = u[3 * i + 2] = 0.0;
}

void StokesOperators::pin_velocity(int level, std::span<double> u,
                                   const std::function<Vec3(const Vec3&)>& values) const {
  const LevelBC& b = bc(level);
  const GridLevel& lv = hier_->lv(level);
  for (std::size_t i = 0; i < b.velocity_pinned.size(); ++i) {
    if (!b.velocity_pinned[i]) continue;
    const Vec3 v = values ? values(lv.pos[i]) : Vec3{};
    u[3 * i] = v.x;
    u[3 * i + 1] = v.y;
    u[3 * i + 2] = v.z;
  }
}

void StokesOperators::project_freeslip(int level, std::span<double> u) const {
  const LevelBC& b = bc(level);
  for (std::size_t k = 0; k < b.freeslip_nodes.size(); ++k) {
    const std::size_t i = static_cast<std::size_t>(b.freeslip_nodes[k]);
    const Vec3& nrm = b.freeslip_normal[k];
    const double un = u[3 * i] * nrm.x + u[3 * i + 1] * nrm.y + u[3 * i + 2] * nrm.z;
    u[3 * i] -= un * nrm.x;
    u[3 * i + 1] -= un * nrm.y;
    u[3 * i + 2] -= un * nrm.z;
  }
}

std::vector<Vec3> freeslip_normals(const StokesOperators& ops, int level,
                                   std::span<const std::int32_t> nodes) {
  const std::size_t n = ops.hierarchy().lv(level).n_nodes();
  std::vector<double> ones(n, 1.0), bt1(3 * n);
  {
    CounterScope scope(ops.counters(), CountContext::monitor);
    ops.apply_bt(level, ones, bt1);
  }
  std::vector<Vec3> out;
  out.reserve(nodes.size());
  for (std::int32_t node : nodes) {
    const std::size_t i = static_cast<std::size_t>(node);
    // <grad phi_i, 1> = -(B^T 1)_i, pointing outward on the boundary
    Vec3 v = {-bt1[3 * i], -bt1[3 * i + 1], -bt1[3 * i + 2]};
    const double len = v.norm();
    STOKESMG_REQUIRE(len > 0.0, NumericsError,
                     "zero-length raw normal at node " + std::to_string(node));
    out.push_back(v * (1.0 / len));
  }
  return out;
}

StokesVector assemble_rhs(const StokesOperators& ops, int level, const AnalyticProblem& prob) {
  const GridLevel& lv = ops.hierarchy().lv(level);
  StokesVector rhs = make_stokes_vector(lv);
  if (prob.force) {
    const auto& rule = quad4();
    for (std::size_t e = 0; e < lv.n_elems(); ++e) {
      const auto& nodes = lv.elem_nodes[e];
      const auto& cls = lv.classes[static_cast<std::size_t>(lv.elem_class[e])];
      const Vec3 x0 = lv.pos[static_cast<std::size_t>(nodes[0])];
      const Vec3 x1 = lv.pos[static_cast<std::size_t>(nodes[1])];
      const Vec3 x2 = lv.pos[static_cast<std::size_t>(nodes[2])];
      const Vec3 x3 = lv.pos[static_cast<std::size_t>(nodes[3])];
      const double wq = cls.volume / 4.0;
      Vec3 fint{};  // element integral of f
      std::array<Vec3, 4> fphi{};
      for (int q = 0; q < 4; ++q) {
        const auto& ba = rule.bary[q];
        const Vec3 xq = x0 * ba[0] + x1 * ba[1] + x2 * ba[2] + x3 * ba[3];
        const Vec3 fq = prob.force(xq);
        fint = fint + fq * wq;
        for (int a = 0; a < 4; ++a) fphi[a] = fphi[a] + fq * (wq * ba[a]);
      }
      for (int a = 0; a < 4; ++a) {
        const std::size_t i = static_cast<std::size_t>(nodes[a]);
        rhs.u.data[3 * i] += fphi[a].x;
        rhs.u.data[3 * i + 1] += fphi[a].y;
        rhs.u.data[3 * i + 2] += fphi[a].z;
      }
      // g = -delta_T h_T^2 <f, grad q>_T
      const ElemGeom g = elem_geometry({x0, x1, x2, x3});
      const double w = -kStabilizationDelta * cls.h_t * cls.h_t;
      for (int a = 0; a < 4; ++a)
        rhs.p.data[static_cast<std::size_t>(nodes[a])] += w * fint.dot(g.grad[a]);
    }
  }
  // identity-row convention on pinned velocity rows
  ops.pin_velocity(level, rhs.u.data, prob.dirichlet_values);
  return rhs;
}

void apply_dirichlet(const StokesOperators& ops, int level, StokesVector& x,
                     const AnalyticProblem& prob) {
  ops.pin_velocity(level, x.u.data, prob.dirichlet_values);
}

void StokesOperators::dump_matrix_market(OperatorTag tag, int level,
                                         const std::string& path) const {
  STOKESMG_REQUIRE(level <= 1, ConfigError, "matrix dumps are limited to levels 0 and 1");
  ensure(tag, level);
  const LevelStencils& s = levels_[static_cast<std::size_t>(level)];
  const std::size_t n = s.n_nodes();
  std::ofstream out(path);
  STOKESMG_REQUIRE(out.good(), ConfigError, "cannot open " + path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out.precision(17);
  std::vector<std::array<double, 1>> dummy;
  auto rows = [&](auto&& emit) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::int32_t e = s.row_ptr[i]; e < s.row_ptr[i + 1]; ++e)
        emit(i, static_cast<std::size_t>(s.col[static_cast<std::size_t>(e)]),
             static_cast<std::size_t>(e));
  };
  std::vector<std::string> lines;
  std::size_t nr = 0, nc = 0;
  auto add = [&](std::size_t r, std::size_t c, double v) {
    if (v == 0.0) return;
    lines.push_back(std::to_string(r + 1) + " " + std::to_string(c + 1) + " " +
                    std::to_string(v));
  };
  switch (tag) {
    case OperatorTag::A1:
      nr = nc = 3 * n;
      rows([&](std::size_t i, std::size_t j, std::size_t e) {
        for (int d = 0; d < 3; ++d) add(3 * i + static_cast<std::size_t>(d),
                                        3 * j + static_cast<std::size_t>(d),
                                        s.a1[e]);
      });
      break;
    case OperatorTag::A2:
      nr = nc = 3 * n;
      rows([&](std::size_t i, std::size_t j, std::size_t e) {
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c)
            add(3 * i + static_cast<std::size_t>(r), 3 * j + static_cast<std::size_t>(c),
                s.a2[e][static_cast<std::size_t>(3 * r + c)]);
      });
      break;
    case OperatorTag::B:
      nr = n;
      nc = 3 * n;
      rows([&](std::size_t i, std::size_t j, std::size_t e) {
        for (int c = 0; c < 3; ++c)
          add(i, 3 * j + static_cast<std::size_t>(c), s.b[e][static_cast<std::size_t>(c)]);
      });
      break;
    case OperatorTag::Bt:
      nr = 3 * n;
      nc = n;
      rows([&](std::size_t i, std::size_t j, std::size_t e) {
        for (int r = 0; r < 3; ++r)
          add(3 * i + static_cast<std::size_t>(r), j, s.bt[e][static_cast<std::size_t>(r)]);
      });
      break;
    case OperatorTag::C:
      nr = nc = n;
      rows([&](std::size_t i, std::size_t j, std::size_t e) { add(i, j, s.c[e]); });
      break;
    case OperatorTag::M:
      nr = nc = n;
      for (std::size_t i = 0; i < n; ++i) add(i, i, s.m[i]);
      break;
  }
  out << nr << " " << nc << " " << lines.size() << "\n";
  for (const auto& l : lines) out << l << "\n";
}

}  // namespace stokesmg
