#include "solvers.hpp"

#include <chrono>
#include <cmath>

#include "metrics.hpp"

namespace stokesmg {

const char* to_string(SolverKind k) {
  switch (k) {
    case SolverKind::scg: return "scg";
    case SolverKind::pminres: return "pminres";
    case SolverKind::umg: return "umg";
  }
  return "?";
}

SolverKind solver_from_string(const std::string& s) {
  if (s == "scg") return SolverKind::scg;
  if (s == "pminres" || s == "minres") return SolverKind::pminres;
  if (s == "umg" || s == "uzawa") return SolverKind::umg;
  throw ConfigError("unknown solver '" + s + "'");
}

double saddle_residual_norm(const StokesOperators& ops, int level, const StokesVector& x,
                            const StokesVector& rhs) {
  CounterScope scope(ops.counters(), CountContext::monitor);
  StokesVector r = make_stokes_vector(ops.hierarchy().lv(level));
  ops.apply_saddle(level, x, r);
  for (std::size_t i = 0; i < r.u.data.size(); ++i)
    r.u.data[i] = rhs.u.data[i] - r.u.data[i];
  for (std::size_t i = 0; i < r.p.data.size(); ++i)
    r.p.data[i] = rhs.p.data[i] - r.p.data[i];
  ops.zero_pinned(level, r.u.data);
  mean_zero_uniform_inplace(r.p.data);
  return std::sqrt(dot(r, r));
}

std::pair<double, bool> StopCheck::operator()(const StokesOperators& ops, int level,
                                              const StokesVector& x,
                                              const StokesVector& rhs) const {
  if (r0 == 0.0) return {0.0, true};
  const double rel = saddle_residual_norm(ops, level, x, rhs) / r0;
  return {rel, rel <= eps};
}

namespace {

struct RunScaffold {
  StokesVector x;
  StopCheck stop;
  RunResult result;
  std::chrono::steady_clock::time_point t0;
};

RunScaffold start_run(const SolverConfig& cfg, const StokesOperators& ops, int level,
                      const StokesVector& rhs, const AnalyticProblem& prob,
                      const StokesVector* x0) {
  RunScaffold s;
  ops.counters().reset(static_cast<int>(ops.hierarchy().levels.size()));
  s.x = x0 ? *x0 : random_initial(ops.hierarchy(), level, cfg.seed);
  apply_dirichlet(ops, level, s.x, prob);
  ops.project_freeslip(level, s.x.u.data);
  s.stop.eps = cfg.eps;
  s.stop.r0 = saddle_residual_norm(ops, level, s.x, rhs);
  s.result.kind = cfg.kind;
  s.result.formulation = ops.formulation();
  s.result.level = level;
  const NodeCounts nc = free_dof_counts(ops.hierarchy().lv(level));
  s.result.dofs = nc.n_u + nc.n_p;
  s.result.memory_model_bytes = memory_model(static_cast<double>(nc.n_u),
                                             static_cast<double>(nc.n_p), level, false);
  s.t0 = std::chrono::steady_clock::now();
  return s;
}

void finish_run(RunScaffold& s, const StokesOperators& ops, int level,
                StokesVector* solution) {
  s.result.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - s.t0).count();
  const int n_levels = static_cast<int>(ops.hierarchy().levels.size());
  for (int t = 0; t < 6; ++t) {
    auto& all = s.result.op_counts[static_cast<std::size_t>(t)];
    auto& cyc = s.result.op_counts_cycle[static_cast<std::size_t>(t)];
    all.assign(static_cast<std::size_t>(n_levels), 0);
    cyc.assign(static_cast<std::size_t>(n_levels), 0);
    for (int l = 0; l < n_levels; ++l) {
      const auto tag = static_cast<OperatorTag>(t);
      all[static_cast<std::size_t>(l)] = ops.counters().solver_count(tag, l);
      cyc[static_cast<std::size_t>(l)] = ops.counters().get(CountContext::cycle, tag, l);
    }
  }
  if (solution) {
    mean_zero_project_inplace(s.x.p.data, ops.lumped_mass(level));
    *solution = std::move(s.x);
  }
}

}  // namespace

RunResult solve_scg(const SolverConfig& cfg, const StokesOperators& ops, int level,
                    const StokesVector& rhs, const AnalyticProblem& prob,
                    const StokesVector* x0, StokesVector* solution) {
  RunScaffold s = start_run(cfg, ops, level, rhs, prob, x0);
  const std::size_t nu = s.x.u.data.size();
  const std::size_t np = s.x.p.data.size();
  const int max_outer = cfg.max_outer > 0 ? cfg.max_outer : cfg.default_max_outer();
  const auto mass = ops.lumped_mass(level);

  CycleSpec cyc;
  cyc.kind = CycleSpec::Kind::v;
  cyc.n_pre = cyc.n_post = 3;
  cyc.coarse = cfg.coarse_velocity_spec();

  if (s.stop.r0 == 0.0) {
    s.result.converged = true;
    finish_run(s, ops, level, solution);
    return s.result;
  }

  std::vector<double> w_u(nu), tmp_u(nu), r_p(np), cq(np);
  for (int outer = 0; outer < max_outer; ++outer) {
    // velocity half-step: n_a multigrid iterations on A u = f - B^T p
    ops.apply_bt(level, s.x.p.data, w_u);
    for (std::size_t i = 0; i < nu; ++i) w_u[i] = rhs.u.data[i] - w_u[i];
    for (int it = 0; it < cfg.n_a; ++it)
      vcycle_velocity(ops, level, level, s.x.u.data, w_u, cyc,
                      &s.result.coarse_iterations);

    // pressure half-step: n_s CG steps on the Schur complement, initial
    // residual B u - C p - g, preconditioned by the lumped mass matrix
    ops.apply_b(level, s.x.u.data, r_p);
    ops.apply_c(level, s.x.p.data, cq);
    for (std::size_t i = 0; i < np; ++i) r_p[i] = r_p[i] - cq[i] - rhs.p.data[i];
    mean_zero_uniform_inplace(r_p);

    std::vector<double> z(np), pdir(np), sq(np), av(nu);
    for (std::size_t i = 0; i < np; ++i) z[i] = r_p[i] / mass[i];
    mean_zero_uniform_inplace(z);
    double rz = dot(std::span<const double>(r_p), std::span<const double>(z));
    pdir = z;
    for (int it = 0; it < cfg.n_s && rz > 0.0; ++it) {
      // S q = B (A^-1 (B^T q)) + C q with A^-1 approximated by n_i cycles
      ops.apply_bt(level, pdir, w_u);
      ops.zero_pinned(level, w_u);
      std::fill(av.begin(), av.end(), 0.0);
      for (int k = 0; k < cfg.n_i; ++k)
        vcycle_velocity(ops, level, level, av, w_u, cyc, &s.result.coarse_iterations);
      ops.apply_b(level, av, sq);
      ops.apply_c(level, pdir, cq);
      for (std::size_t i = 0; i < np; ++i) sq[i] += cq[i];
      mean_zero_uniform_inplace(sq);
      const double psq = dot(std::span<const double>(pdir), std::span<const double>(sq));
      if (psq <= 0.0) break;
      const double alpha = rz / psq;
      for (std::size_t i = 0; i < np; ++i) {
        s.x.p.data[i] += alpha * pdir[i];
        r_p[i] -= alpha * sq[i];
      }
      for (std::size_t i = 0; i < np; ++i) z[i] = r_p[i] / mass[i];
      mean_zero_uniform_inplace(z);
      const double rz_new = dot(std::span<const double>(r_p), std::span<const double>(z));
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < np; ++i) pdir[i] = z[i] + beta * pdir[i];
    }
    mean_zero_project_inplace(s.x.p.data, mass);

    ++s.result.iterations;
    const auto [rel, done] = s.stop(ops, level, s.x, rhs);
    s.result.residual_history.push_back(rel);
    if (done) {
      s.result.converged = true;
      break;
    }
  }
  finish_run(s, ops, level, solution);
  return s.result;
}

RunResult solve_pminres(const SolverConfig& cfg, const StokesOperators& ops, int level,
                        const StokesVector& rhs, const AnalyticProblem& prob,
                        const StokesVector* x0, StokesVector* solution) {
  RunScaffold s = start_run(cfg, ops, level, rhs, prob, x0);
  const int max_outer = cfg.max_outer > 0 ? cfg.max_outer : cfg.default_max_outer();
  const auto mass = ops.lumped_mass(level);

  CycleSpec cyc;
  cyc.kind = CycleSpec::Kind::v;
  cyc.n_pre = cyc.n_post = 1;
  cyc.coarse = cfg.coarse_velocity_spec();

  if (s.stop.r0 == 0.0) {
    s.result.converged = true;
    finish_run(s, ops, level, solution);
    return s.result;
  }

  auto prec = [&](const StokesVector& r, StokesVector& z) {
    std::fill(z.u.data.begin(), z.u.data.end(), 0.0);
    vcycle_velocity(ops, level, level, z.u.data, r.u.data, cyc,
                    &s.result.coarse_iterations);
    for (std::size_t i = 0; i < z.p.data.size(); ++i) z.p.data[i] = r.p.data[i] / mass[i];
  };
  auto monitor = [&](int, const StokesVector& xk) {
    const auto [rel, done] = s.stop(ops, level, xk, rhs);
    s.result.residual_history.push_back(rel);
    ++s.result.iterations;
    return done;
  };
  const KrylovResult kr =
      pminres_saddle(ops, level, s.x, rhs, prec, cfg.eps, max_outer, 0, monitor);
  s.result.converged = kr.converged && !kr.breakdown;
  STOKESMG_REQUIRE(!kr.breakdown, NumericsError,
                   "pminres: preconditioner indefiniteness detected");
  mean_zero_project_inplace(s.x.p.data, mass);
  finish_run(s, ops, level, solution);
  return s.result;
}

RunResult solve_umg(const SolverConfig& cfg, const StokesOperators& ops, int level,
                    const StokesVector& rhs, const AnalyticProblem& prob,
                    const StokesVector* x0, StokesVector* solution) {
  RunScaffold s = start_run(cfg, ops, level, rhs, prob, x0);
  const int max_outer = cfg.max_outer > 0 ? cfg.max_outer : cfg.default_max_outer();
  const auto mass = ops.lumped_mass(level);

  CycleSpec cyc;
  cyc.kind = CycleSpec::Kind::vvar;
  cyc.n_pre = cyc.n_post = 3;
  cyc.coarse = cfg.coarse_saddle_spec();

  if (s.stop.r0 == 0.0) {
    s.result.converged = true;
    finish_run(s, ops, level, solution);
    return s.result;
  }

  for (int outer = 0; outer < max_outer; ++outer) {
    vcycle_saddle(ops, level, level, s.x, rhs, cyc, &s.result.coarse_iterations);
    mean_zero_project_inplace(s.x.p.data, mass);
    ++s.result.iterations;
    const auto [rel, done] = s.stop(ops, level, s.x, rhs);
    s.result.residual_history.push_back(rel);
    if (done) {
      s.result.converged = true;
      break;
    }
  }
  finish_run(s, ops, level, solution);
  return s.result;
}

RunResult solve(const SolverConfig& cfg, const StokesOperators& ops, int level,
                const StokesVector& rhs, const AnalyticProblem& prob,
                const StokesVector* x0, StokesVector* solution) {
  switch (cfg.kind) {
    case SolverKind::scg: return solve_scg(cfg, ops, level, rhs, prob, x0, solution);
    case SolverKind::pminres:
      return solve_pminres(cfg, ops, level, rhs, prob, x0, solution);
    case SolverKind::umg: return solve_umg(cfg, ops, level, rhs, prob, x0, solution);
  }
  throw ConfigError("unknown solver kind");
}

}  // namespace stokesmg
