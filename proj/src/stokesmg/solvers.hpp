#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "multigrid.hpp"

namespace stokesmg {

enum class SolverKind { scg, pminres, umg };

const char* to_string(SolverKind k);
SolverKind solver_from_string(const std::string& s);

struct SolverConfig {
  SolverKind kind = SolverKind::umg;
  Formulation formulation = Formulation::laplace;
  double eps = 1e-8;
  // Schur-complement CG loop structure
  int n_a = 3, n_s = 3, n_i = 1;
  std::uint64_t seed = 1;
  int max_outer = 0;  // 0 -> per-kind default
  // coarse-grid solver mode: tolerance-based or a fixed 5 iterations
  bool coarse_fixed5 = false;
  double coarse_tol_cg = 1e-3;
  double coarse_tol_minres = 5e-3;

  int default_max_outer() const {
    switch (kind) {
      case SolverKind::scg: return 200;
      case SolverKind::pminres: return 600;
      case SolverKind::umg: return 60;
    }
    return 100;
  }
  CoarseSolverSpec coarse_velocity_spec() const {
    CoarseSolverSpec s;
    s.kind = CoarseSolverSpec::Kind::cg_on_a;
    s.rel_tol = coarse_tol_cg;
    s.fixed_iters = coarse_fixed5;
    s.fixed_count = 5;
    return s;
  }
  CoarseSolverSpec coarse_saddle_spec() const {
    CoarseSolverSpec s;
    s.kind = CoarseSolverSpec::Kind::pminres_saddle;
    s.rel_tol = coarse_tol_minres;
    s.fixed_iters = coarse_fixed5;
    s.fixed_count = 5;
    return s;
  }
};

struct RunResult {
  SolverKind kind = SolverKind::umg;
  Formulation formulation = Formulation::laplace;
  int level = 0;
  std::size_t dofs = 0;  // free velocity DoFs + pressure nodes
  int iterations = 0;
  std::vector<int> coarse_iterations;
  std::vector<double> residual_history;  // relative residual per outer iteration
  double wall_time = 0.0;
  bool converged = false;
  // raw per-(tag, level) counts; [tag][level]
  std::array<std::vector<std::int64_t>, 6> op_counts;        // cycle + coarse
  std::array<std::vector<std::int64_t>, 6> op_counts_cycle;  // coarse excluded
  double memory_model_bytes = 0.0;
};

// Relative saddle residual of the shared stopping criterion: Euclidean norm
// over free velocity DoFs with the pressure block reduced to zero mean,
// evaluated outside the operator-count contexts.
double saddle_residual_norm(const StokesOperators& ops, int level, const StokesVector& x,
                            const StokesVector& rhs);

struct StopCheck {
  double r0 = 0.0;
  double eps = 1e-8;
  // returns (relative residual, converged)
  std::pair<double, bool> operator()(const StokesOperators& ops, int level,
                                     const StokesVector& x, const StokesVector& rhs) const;
};

RunResult solve_scg(const SolverConfig& cfg, const StokesOperators& ops, int level,
                    const StokesVector& rhs, const AnalyticProblem& prob,
                    const StokesVector* x0 = nullptr, StokesVector* solution = nullptr);
RunResult solve_pminres(const SolverConfig& cfg, const StokesOperators& ops, int level,
                        const StokesVector& rhs, const AnalyticProblem& prob,
                        const StokesVector* x0 = nullptr, StokesVector* solution = nullptr);
RunResult solve_umg(const SolverConfig& cfg, const StokesOperators& ops, int level,
                    const StokesVector& rhs, const AnalyticProblem& prob,
                    const StokesVector* x0 = nullptr, StokesVector* solution = nullptr);

RunResult solve(const SolverConfig& cfg, const StokesOperators& ops, int level,
                const StokesVector& rhs, const AnalyticProblem& prob,
                const StokesVector* x0 = nullptr, StokesVector* solution = nullptr);

}  // namespace stokesmg
