#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core.hpp"

namespace stokesmg {

enum class BoundaryTag : std::uint8_t { none = 0, dirichlet = 1, outflow = 2, freeslip = 3 };

const char* to_string(BoundaryTag t);

// Conforming tetrahedral input mesh. Vertex ordering of each tetrahedron must
// give positive signed volume.
struct CoarseMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 4>> tets;
  // Sorted vertex triple of a boundary face -> tag. Untagged boundary faces
  // default to dirichlet during validation.
  std::map<std::array<int, 3>, BoundaryTag> boundary_tags;

  void validate() const;
};

// Line-oriented text format: "tetmesh 1" header, then
//   v x y z
//   t i0 i1 i2 i3
//   b i j k TAG        (TAG in {dirichlet, outflow, freeslip})
CoarseMesh load_coarse_mesh(const std::string& path);

// (0,1)^3 tiled by the standard 6-tetrahedra split, all faces dirichlet.
CoarseMesh unit_cube_mesh();

// Octahedral ball around the origin; the eight outer faces are tagged
// freeslip. Used as the curved-boundary fixture for normal-vector checks.
CoarseMesh octa_ball_mesh();

enum class PrimKind : std::uint8_t { vertex = 0, edge = 1, face = 2, volume = 3 };

// Macro primitives of the coarse mesh: vertices, edges, faces, volumes plus
// downward adjacency and boundary tags.
struct PrimitiveGraph {
  int n_vertices = 0;
  std::vector<std::array<int, 2>> edges;   // sorted vertex pairs
  std::vector<std::array<int, 3>> faces;   // sorted vertex triples
  int n_volumes = 0;                       // == tets of the coarse mesh

  std::vector<std::array<int, 3>> face_edge_ids;
  std::vector<std::array<int, 6>> vol_edge_ids;
  std::vector<std::array<int, 4>> vol_face_ids;

  // Boundary flags/tags; edges and vertices inherit from incident boundary
  // faces with precedence dirichlet > freeslip > outflow.
  std::vector<BoundaryTag> vertex_tag, edge_tag, face_tag;

  int edge_id(int a, int b) const;
  int face_id(int a, int b, int c) const;

  std::map<std::array<int, 2>, int> edge_lookup;
  std::map<std::array<int, 3>, int> face_lookup;
};

PrimitiveGraph build_primitive_graph(const CoarseMesh& mesh);

struct PrimRef {
  PrimKind kind;
  std::int32_t id;
};

// One uniformly refined level. Nodes are stored in per-primitive containers
// (all macro-vertex nodes first, then edge, face, volume containers), each
// ordered lexicographically by the structured lattice index inside its
// primitive.
struct GridLevel {
  int level = 0;  // ell
  int k = 0;      // subdivisions per macro edge, k = 2^(ell+2)
  double h_ell = 0.0;
  double h_min = 0.0;

  std::vector<Vec3> pos;
  std::vector<PrimRef> owner;
  std::vector<std::array<std::uint16_t, 3>> lattice;  // owner-local coords
  std::vector<BoundaryTag> bc_tag;                    // none = interior node
  // For level >= 1: parent node ids on the previous level. Copy nodes store
  // {coarse_id, -1}; edge-midpoint nodes store both endpoints.
  std::vector<std::array<std::int32_t, 2>> parent;

  struct Container {
    PrimKind kind;
    std::int32_t prim;
    std::int32_t begin, end;
  };
  std::vector<Container> containers;

  std::vector<std::array<std::int32_t, 4>> elem_nodes;
  std::vector<std::int32_t> elem_class;

  struct ElemClass {
    std::array<Vec3, 4> rep;  // representative vertex coordinates
    int macro_tet;
    double volume;
    double h_t;  // volume^(1/3)
  };
  std::vector<ElemClass> classes;

  std::size_t n_nodes() const { return pos.size(); }
  std::size_t n_elems() const { return elem_nodes.size(); }
  bool is_dirichlet(std::int32_t n) const { return bc_tag[n] == BoundaryTag::dirichlet; }
  int lattice_parity(std::int32_t n) const {
    const auto& c = lattice[n];
    return (c[0] + c[1] + c[2]) & 1;
  }
};

struct GridHierarchy {
  CoarseMesh coarse;
  PrimitiveGraph prims;
  std::vector<GridLevel> levels;  // 0..L

  int finest() const { return static_cast<int>(levels.size()) - 1; }
  const GridLevel& lv(int ell) const { return levels.at(static_cast<std::size_t>(ell)); }
};

// Node count of a level before building it (closed form).
std::size_t predict_node_count(const PrimitiveGraph& prims, int level);

constexpr std::size_t kDefaultNodeCap = 60'000'000;

// Builds levels 0..L, where level 0 is the twice-refined input mesh. Each
// refinement splits every tetrahedron 1:8 with a fixed interior diagonal
// chosen per macro-tet (shortest octahedron diagonal).
GridHierarchy refine_hierarchy(const CoarseMesh& mesh, int L,
                               std::size_t node_cap = kDefaultNodeCap);

// Vector-layout sizes: n_u = 3 * nodes, n_p = nodes (constrained nodes are
// kept in the layout and handled by the boundary-condition operator).
struct NodeCounts {
  std::size_t n_u;
  std::size_t n_p;
};
NodeCounts node_counts(const GridLevel& level);

// Unknowns actually solved for: dirichlet velocity nodes excluded, all
// pressure nodes included. Matches the usual reporting convention.
NodeCounts free_dof_counts(const GridLevel& level);

}  // namespace stokesmg
