#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fields.hpp"
#include "mesh.hpp"

namespace stokesmg {

enum class OperatorTag : int { A1 = 0, A2 = 1, B = 2, Bt = 3, C = 4, M = 5 };
enum class Formulation { laplace, dop };

const char* to_string(OperatorTag t);
const char* to_string(Formulation f);
Formulation formulation_from_string(const std::string& s);

// Operator-evaluation bookkeeping per (tag, level). Applications are counted
// in one of three contexts so that coarse-grid work and convergence
// monitoring can be separated from cycle work.
enum class CountContext : int { cycle = 0, coarse = 1, monitor = 2 };

class OpCounters {
 public:
  void reset(int n_levels);
  void add(OperatorTag tag, int level);
  std::int64_t get(CountContext ctx, OperatorTag tag, int level) const;
  // cycle + coarse (monitoring excluded)
  std::int64_t solver_count(OperatorTag tag, int level) const;
  int n_levels() const { return n_levels_; }

  CountContext context = CountContext::cycle;

 private:
  int n_levels_ = 0;
  std::array<std::array<std::vector<std::int64_t>, 6>, 3> counts_;
};

// RAII context switch for OpCounters.
class CounterScope {
 public:
  CounterScope(OpCounters& c, CountContext ctx) : c_(c), prev_(c.context) {
    c_.context = ctx;
  }
  ~CounterScope() { c_.context = prev_; }

 private:
  OpCounters& c_;
  CountContext prev_;
};

// Nodal stencil rows for one level, shared node adjacency (self included).
struct LevelStencils {
  std::vector<std::int32_t> row_ptr;  // n+1
  std::vector<std::int32_t> col;      // nnz, sorted per row

  std::vector<double> a1;                      // nnz
  std::vector<std::array<double, 9>> a2;       // nnz, row-major 3x3 blocks
  std::vector<std::array<double, 3>> b;        // nnz, pressure row <- velocity cols
  std::vector<std::array<double, 3>> bt;       // nnz, velocity rows <- pressure col
  std::vector<double> c;                       // nnz
  std::vector<double> m;                       // n, lumped mass

  std::vector<double> a1_diag;                  // n
  std::vector<std::array<double, 9>> a2_diag_inv;  // n
  std::vector<double> c_diag;                   // n

  bool has_a1 = false, has_a2 = false, has_b = false, has_c = false, has_m = false;

  std::size_t n_nodes() const { return row_ptr.empty() ? 0 : row_ptr.size() - 1; }
  std::size_t entry(std::int32_t row, std::int32_t colid) const;
};

struct LevelBC {
  std::vector<std::uint8_t> velocity_pinned;  // dirichlet mask per node
  std::vector<std::int32_t> freeslip_nodes;
  std::vector<Vec3> freeslip_normal;  // unit outward, per freeslip node
};

// Matrix-free discrete Stokes operators on every level of a hierarchy.
// Stencils are assembled per level on first use by summing reference-element
// contributions over the element congruence classes.
class StokesOperators {
 public:
  StokesOperators(const GridHierarchy& hierarchy, Formulation formulation, double nu = 1.0);

  const GridHierarchy& hierarchy() const { return *hier_; }
  Formulation formulation() const { return form_; }
  double nu() const { return nu_; }
  OperatorTag a_tag() const {
    return form_ == Formulation::laplace ? OperatorTag::A1 : OperatorTag::A2;
  }

  // Velocity-velocity block of the active formulation.
  void apply_a(int level, std::span<const double> u, std::span<double> out) const;
  void apply_b(int level, std::span<const double> u, std::span<double> out_p) const;
  void apply_bt(int level, std::span<const double> p, std::span<double> out_u) const;
  void apply_c(int level, std::span<const double> p, std::span<double> out) const;
  void apply_m(int level, std::span<const double> p, std::span<double> out) const;
  void apply_tag(OperatorTag tag, int level, std::span<const double> in,
                 std::span<double> out) const;

  // out_u = A u + B^T p, out_p = B u - C p (raw rows, no constraints).
  void apply_saddle(int level, const StokesVector& x, StokesVector& out) const;

  std::span<const double> lumped_mass(int level) const;

  const LevelBC& bc(int level) const;
  // Zero the dirichlet components of a velocity block (projection P).
  void zero_pinned(int level, std::span<double> u) const;
  void pin_velocity(int level, std::span<double> u,
                    const std::function<Vec3(const Vec3&)>& values) const;
  // u -= (u.n) n at every freeslip node.
  void project_freeslip(int level, std::span<double> u) const;

  const LevelStencils& stencils(int level) const;
  void ensure(OperatorTag tag, int level) const;
  OpCounters& counters() const { return counters_; }

  // Debug dump of an assembled block in Matrix Market coordinate format
  // (levels 0 and 1 only; oracle cross-checks).
  void dump_matrix_market(OperatorTag tag, int level, const std::string& path) const;

 private:
  void build_graph(int level) const;
  void assemble(OperatorTag tag, int level) const;
  void build_bc(int level) const;

  const GridHierarchy* hier_;
  Formulation form_;
  double nu_;
  mutable std::vector<LevelStencils> levels_;
  mutable std::vector<std::uint8_t> graph_built_;
  mutable std::vector<std::unique_ptr<LevelBC>> bc_;
  mutable OpCounters counters_;
};

// Mass-conservative boundary normals: n_i ~ <grad phi_i, 1>, evaluated as
// -B^T applied to the all-ones pressure vector, normalized to unit length.
std::vector<Vec3> freeslip_normals(const StokesOperators& ops, int level,
                                   std::span<const std::int32_t> nodes);

struct AnalyticProblem {
  std::function<Vec3(const Vec3&)> force;            // may be null -> zero
  std::function<Vec3(const Vec3&)> dirichlet_values; // may be null -> zero
  double nu = 1.0;
};

// Velocity block: load vector <f, v> (4-point quadrature); pressure block:
// stabilization term g = -sum_T delta_T h_T^2 <f, grad q>_T. Rows of pinned
// nodes carry the dirichlet values (identity-row convention).
StokesVector assemble_rhs(const StokesOperators& ops, int level, const AnalyticProblem& prob);

// Pins x.u at dirichlet nodes to the problem's boundary values.
void apply_dirichlet(const StokesOperators& ops, int level, StokesVector& x,
                     const AnalyticProblem& prob);

constexpr double kStabilizationDelta = 1.0 / 12.0;

}  // namespace stokesmg
