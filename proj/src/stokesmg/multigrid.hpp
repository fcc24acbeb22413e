#pragma once

#include <functional>
#include <span>
#include <vector>

#include "operators.hpp"
#include "smoothers.hpp"

namespace stokesmg {

struct CoarseSolverSpec {
  enum class Kind { cg_on_a, pminres_saddle };
  Kind kind = Kind::cg_on_a;
  double rel_tol = 1e-3;  // pminres default is 5e-3
  int max_iters = 500;
  bool fixed_iters = false;  // run exactly fixed_count iterations
  int fixed_count = 5;
};

struct CycleSpec {
  enum class Kind { v, vvar };
  Kind kind = Kind::v;
  int n_pre = 3, n_post = 3;
  CoarseSolverSpec coarse;

  // smoothing steps on a level, counted from the cycle's top level
  int steps(int n_base, int level, int top) const {
    return n_base + (kind == Kind::vvar ? 2 * (top - level) : 0);
  }
};

// P1 interpolation between consecutive levels (fine >= 1): copied nodes take
// the coarse value, edge midpoints average their two endpoints.
void prolongate_scalar(const GridHierarchy& h, int fine, std::span<const double> coarse,
                       std::span<double> out_fine);
void prolongate_velocity(const GridHierarchy& h, int fine, std::span<const double> coarse,
                         std::span<double> out_fine);
// R = P^T (full weighting).
void restrict_scalar(const GridHierarchy& h, int fine, std::span<const double> fine_in,
                     std::span<double> out_coarse);
void restrict_velocity(const GridHierarchy& h, int fine, std::span<const double> fine_in,
                       std::span<double> out_coarse);
// Row-normalized variant of P^T; preserves constants (injection-style
// averaging for nested solution transfer).
void restrict_scalar_normalized(const GridHierarchy& h, int fine,
                                std::span<const double> fine_in,
                                std::span<double> out_coarse);

struct KrylovResult {
  int iterations = 0;
  double rel_residual = 1.0;
  bool converged = false;
  bool breakdown = false;
};

// Plain CG on the velocity block (dirichlet rows projected out).
KrylovResult cg_velocity(const StokesOperators& ops, int level, std::span<double> u,
                         std::span<const double> rhs, double rel_tol, int max_iters,
                         int fixed_iters = 0);

// Preconditioned MINRES on the saddle system restricted to free velocity
// DoFs and mean-zero pressure. prec(r, z) must apply an SPD approximation of
// the block-diagonal preconditioner. When monitor is non-null it is invoked
// once per iteration with the current iterate and may request a stop by
// returning true.
KrylovResult pminres_saddle(
    const StokesOperators& ops, int level, StokesVector& x, const StokesVector& rhs,
    const std::function<void(const StokesVector& r, StokesVector& z)>& prec,
    double rel_tol, int max_iters, int fixed_iters = 0,
    const std::function<bool(int iter, const StokesVector& x)>& monitor = nullptr);

// Block-diagonally preconditioned MINRES coarse solve: a few CG iterations
// approximate the velocity block, the lumped mass diagonal the Schur block.
KrylovResult coarse_solve_saddle(const StokesOperators& ops, StokesVector& x,
                                 const StokesVector& rhs, const CoarseSolverSpec& spec);
KrylovResult coarse_solve_velocity(const StokesOperators& ops, std::span<double> u,
                                   std::span<const double> rhs, const CoarseSolverSpec& spec);

// Optional structured trace of cycle activity for harness consumption.
struct CycleTrace {
  std::function<void(int level, int pre, int post, double res_before, double res_after)>
      on_level;
};

// Velocity-block multigrid cycle: FHGS pre-smoothing, BHGS post-smoothing,
// CG on the coarsest level.
void vcycle_velocity(const StokesOperators& ops, int level, int top, std::span<double> u,
                     std::span<const double> rhs, const CycleSpec& spec,
                     std::vector<int>* coarse_iters = nullptr);

// All-at-once saddle cycle with Uzawa smoothing steps and a PMINRES coarse
// solve.
void vcycle_saddle(const StokesOperators& ops, int level, int top, StokesVector& x,
                   const StokesVector& rhs, const CycleSpec& spec,
                   std::vector<int>* coarse_iters = nullptr,
                   const CycleTrace* trace = nullptr);

struct FmgOptions {
  int inner_cycles = 1;  // cycles per level (1 or 2)
  int n_pre = 2, n_post = 2;
  CoarseSolverSpec coarse{CoarseSolverSpec::Kind::pminres_saddle, 5e-3, 500};
};

// Full multigrid: level-0 solve, then prolongate the solution and run
// inner_cycles variable V-cycles on each level up to top_level. The right
// hand side is re-assembled on every level. Starts from a zero vector (plus
// pinned boundary values). per_level is invoked with each level's solution.
StokesVector fmg_solve(
    const StokesOperators& ops, const AnalyticProblem& prob, int top_level,
    const FmgOptions& opt,
    const std::function<void(int level, const StokesVector&)>& per_level = nullptr,
    std::vector<int>* coarse_iters = nullptr);

}  // namespace stokesmg
