#include "multigrid.hpp"

#include <algorithm>
#include <cmath>

namespace stokesmg {

namespace {

void check_fine(const GridHierarchy& h, int fine) {
  STOKESMG_REQUIRE(fine >= 1 && fine <= h.finest(), ConfigError,
                   "transfer requires consecutive levels with fine >= 1");
  STOKESMG_REQUIRE(!h.lv(fine).parent.empty(), ConfigError,
                   "fine level is missing parent maps");
}

}  // namespace

void prolongate_scalar(const GridHierarchy& h, int fine, std::span<const double> coarse,
                       std::span<double> out_fine) {
  check_fine(h, fine);
  const auto& par = h.lv(fine).parent;
  for (std::size_t i = 0; i < par.size(); ++i) {
    const auto& p = par[i];
    out_fine[i] = p[1] < 0 ? coarse[static_cast<std::size_t>(p[0])]
                           : 0.5 * (coarse[static_cast<std::size_t>(p[0])] +
                                    coarse[static_cast<std::size_t>(p[1])]);
  }
}

void prolongate_velocity(const GridHierarchy& h, int fine, std::span<const double> coarse,
                         std::span<double> out_fine) {
  check_fine(h, fine);
  const auto& par = h.lv(fine).parent;
  for (std::size_t i = 0; i < par.size(); ++i) {
    const auto& p = par[i];
    const std::size_t a = 3 * static_cast<std::size_t>(p[0]);
    if (p[1] < 0) {
      for (int d = 0; d < 3; ++d)
        out_fine[3 * i + static_cast<std::size_t>(d)] = coarse[a + static_cast<std::size_t>(d)];
    } else {
      const std::size_t b = 3 * static_cast<std::size_t>(p[1]);
      for (int d = 0; d < 3; ++d)
        out_fine[3 * i + static_cast<std::size_t>(d)] =
            0.5 * (coarse[a + static_cast<std::size_t>(d)] + coarse[b + static_cast<std::size_t>(d)]);
    }
  }
}

void restrict_scalar(const GridHierarchy& h, int fine, std::span<const double> fine_in,
                     std::span<double> out_coarse) {
  check_fine(h, fine);
  std::fill(out_coarse.begin(), out_coarse.end(), 0.0);
  const auto& par = h.lv(fine).parent;
  for (std::size_t i = 0; i < par.size(); ++i) {
    const auto& p = par[i];
    if (p[1] < 0) {
      out_coarse[static_cast<std::size_t>(p[0])] += fine_in[i];
    } else {
      out_coarse[static_cast<std::size_t>(p[0])] += 0.5 * fine_in[i];
      out_coarse[static_cast<std::size_t>(p[1])] += 0.5 * fine_in[i];
    }
  }
}

void restrict_velocity(const GridHierarchy& h, int fine, std::span<const double> fine_in,
                       std::span<double> out_coarse) {
  check_fine(h, fine);
  std::fill(out_coarse.begin(), out_coarse.end(), 0.0);
  const auto& par = h.lv(fine).parent;
  for (std::size_t i = 0; i < par.size(); ++i) {
    const auto& p = par[i];
    if (p[1] < 0) {
      const std::size_t a = 3 * static_cast<std::size_t>(p[0]);
      for (int d = 0; d < 3; ++d)
        out_coarse[a + static_cast<std::size_t>(d)] += fine_in[3 * i + static_cast<std::size_t>(d)];
    } else {
      const std::size_t a = 3 * static_cast<std::size_t>(p[0]);
      const std::size_t b = 3 * static_cast<std::size_t>(p[1]);
      for (int d = 0; d < 3; ++d) {
        const double v = 0.5 * fine_in[3 * i + static_cast<std::size_t>(d)];
        out_coarse[a + static_cast<std::size_t>(d)] += v;
        out_coarse[b + static_cast<std::size_t>(d)] += v;
      }
    }
  }
}

void restrict_scalar_normalized(const GridHierarchy& h, int fine,
                                std::span<const double> fine_in,
                                std::span<double> out_coarse) {
  check_fine(h, fine);
  std::vector<double> den(out_coarse.size(), 0.0);
  std::fill(out_coarse.begin(), out_coarse.end(), 0.0);
  const auto& par = h.lv(fine).parent;
  for (std::size_t i = 0; i < par.size(); ++i) {
    const auto& p = par[i];
    if (p[1] < 0) {
      out_coarse[static_cast<std::size_t>(p[0])] += fine_in[i];
      den[static_cast<std::size_t>(p[0])] += 1.0;
    } else {
      out_coarse[static_cast<std::size_t>(p[0])] += 0.5 * fine_in[i];
      out_coarse[static_cast<std::size_t>(p[1])] += 0.5 * fine_in[i];
      den[static_cast<std::size_t>(p[0])] += 0.5;
      den[static_cast<std::size_t>(p[1])] += 0.5;
    }
  }
  for (std::size_t i = 0; i < den.size(); ++i)
    if (den[i] > 0.0) out_coarse[i] /= den[i];
}

KrylovResult cg_velocity(const StokesOperators& ops, int level, std::span<double> u,
                         std::span<const double> rhs, double rel_tol, int max_iters,
                         int fixed_iters) {
  const std::size_t n = u.size();
  std::vector<double> r(n), q(n), z(n);
  ops.apply_a(level, u, r);
  for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - r[i];
  ops.zero_pinned(level, r);
  const double r0 = norm2(r);
  KrylovResult res;
  if (r0 == 0.0) {
    res.converged = true;
    res.rel_residual = 0.0;
    return res;
  }
  std::vector<double> p(r.begin(), r.end());
  double rr = r0 * r0;
  const int iters = fixed_iters > 0 ? fixed_iters : max_iters;
  for (int it = 0; it < iters; ++it) {
    ops.apply_a(level, p, q);
    ops.zero_pinned(level, q);
    const double pq = dot(std::span<const double>(p), std::span<const double>(q));
    if (pq <= 0.0) {
      res.breakdown = true;
      break;
    }
    const double alpha = rr / pq;
    for (std::size_t i = 0; i < n; ++i) {
      u[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    const double rr_new = dot(std::span<const double>(r), std::span<const double>(r));
    ++res.iterations;
    res.rel_residual = std::sqrt(rr_new) / r0;
    if (fixed_iters <= 0 && res.rel_residual <= rel_tol) {
      res.converged = true;
      break;
    }
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
  }
  if (fixed_iters > 0) res.converged = true;
  return res;
}

namespace {

// Restricts a saddle vector to the solvable subspace: dirichlet velocity
// rows zeroed, pressure component reduced to zero mean.
void project_subspace(const StokesOperators& ops, int level, StokesVector& v) {
  ops.zero_pinned(level, v.u.data);
  mean_zero_uniform_inplace(v.p.data);
}

void apply_saddle_projected(const StokesOperators& ops, int level, const StokesVector& x,
                            StokesVector& out) {
  ops.apply_saddle(level, x, out);
  project_subspace(ops, level, out);
}

}  // namespace

KrylovResult pminres_saddle(
    const StokesOperators& ops, int level, StokesVector& x, const StokesVector& rhs,
    const std::function<void(const StokesVector& r, StokesVector& z)>& prec,
    double rel_tol, int max_iters, int fixed_iters,
    const std::function<bool(int iter, const StokesVector& x)>& monitor) {
  const GridLevel& lv = ops.hierarchy().lv(level);
  KrylovResult res;

  StokesVector r1 = make_stokes_vector(lv);
  apply_saddle_projected(ops, level, x, r1);
  StokesVector rhs_p = rhs;
  project_subspace(ops, level, rhs_p);
  axpy(-1.0, rhs_p, r1);
  for (auto& v : r1.u.data) v = -v;
  for (auto& v : r1.p.data) v = -v;  // r1 = rhs - K x

  StokesVector z = make_stokes_vector(lv);
  prec(r1, z);
  project_subspace(ops, level, z);
  const double beta1_sq = dot(r1, z);
  if (beta1_sq < 0.0) {
    res.breakdown = true;
    return res;
  }
  const double beta1 = std::sqrt(beta1_sq);
  if (beta1 == 0.0) {
    res.converged = true;
    res.rel_residual = 0.0;
    return res;
  }

  StokesVector r2 = r1;
  StokesVector v = make_stokes_vector(lv), y = make_stokes_vector(lv);
  StokesVector w = make_stokes_vector(lv), w1 = make_stokes_vector(lv),
               w2 = make_stokes_vector(lv);

  double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0, phibar = beta1;
  double cs = -1.0, sn = 0.0, oldeps = 0.0;

  const int iters = fixed_iters > 0 ? fixed_iters : max_iters;
  for (int it = 1; it <= iters; ++it) {
    // Lanczos step
    const double ib = 1.0 / beta;
    for (std::size_t i = 0; i < v.u.data.size(); ++i) v.u.data[i] = z.u.data[i] * ib;
    for (std::size_t i = 0; i < v.p.data.size(); ++i) v.p.data[i] = z.p.data[i] * ib;
    apply_saddle_projected(ops, level, v, y);
    if (it >= 2) axpy(-beta / oldb, r1, y);
    const double alfa = dot(v, y);
    axpy(-alfa / beta, r2, y);
    r1 = r2;
    r2 = y;
    prec(r2, z);
    project_subspace(ops, level, z);
    oldb = beta;
    const double bsq = dot(r2, z);
    if (bsq < 0.0) {
      res.breakdown = true;
      break;
    }
    beta = std::sqrt(bsq);

    // Givens rotation
    oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    double gamma = std::sqrt(gbar * gbar + beta * beta);
    gamma = std::max(gamma, 1e-300);
    cs = gbar / gamma;
    sn = beta / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;

    // solution update
    w1 = w2;
    w2 = w;
    const double denom = 1.0 / gamma;
    for (std::size_t i = 0; i < w.u.data.size(); ++i)
      w.u.data[i] = denom * (v.u.data[i] - oldeps * w1.u.data[i] - delta * w2.u.data[i]);
    for (std::size_t i = 0; i < w.p.data.size(); ++i)
      w.p.data[i] = denom * (v.p.data[i] - oldeps * w1.p.data[i] - delta * w2.p.data[i]);
    axpy(phi, w, x);

    ++res.iterations;
    res.rel_residual = phibar / beta1;
    if (monitor && monitor(it, x)) {
      res.converged = true;
      break;
    }
    if (!monitor && fixed_iters <= 0 && res.rel_residual <= rel_tol) {
      res.converged = true;
      break;
    }
  }
  if (fixed_iters > 0 && !res.breakdown) res.converged = true;
  return res;
}

KrylovResult coarse_solve_velocity(const StokesOperators& ops, std::span<double> u,
                                   std::span<const double> rhs,
                                   const CoarseSolverSpec& spec) {
  CounterScope scope(ops.counters(), CountContext::coarse);
  return cg_velocity(ops, 0, u, rhs, spec.rel_tol, spec.max_iters,
                     spec.fixed_iters ? spec.fixed_count : 0);
}

KrylovResult coarse_solve_saddle(const StokesOperators& ops, StokesVector& x,
                                 const StokesVector& rhs, const CoarseSolverSpec& spec) {
  CounterScope scope(ops.counters(), CountContext::coarse);
  const auto mass = ops.lumped_mass(0);
  auto prec = [&](const StokesVector& r, StokesVector& z) {
    // velocity: a few CG iterations on A from zero; pressure: lumped mass
    std::fill(z.u.data.begin(), z.u.data.end(), 0.0);
    cg_velocity(ops, 0, z.u.data, r.u.data, 0.0, 0, 3);
    for (std::size_t i = 0; i < z.p.data.size(); ++i) z.p.data[i] = r.p.data[i] / mass[i];
  };
  return pminres_saddle(ops, 0, x, rhs, prec, spec.rel_tol, spec.max_iters,
                        spec.fixed_iters ? spec.fixed_count : 0);
}

void vcycle_velocity(const StokesOperators& ops, int level, int top, std::span<double> u,
                     std::span<const double> rhs, const CycleSpec& spec,
                     std::vector<int>* coarse_iters) {
  if (level == 0) {
    const KrylovResult r = coarse_solve_velocity(ops, u, rhs, spec.coarse);
    if (coarse_iters) coarse_iters->push_back(r.iterations);
    return;
  }
  const GridHierarchy& h = ops.hierarchy();
  const int pre = spec.steps(spec.n_pre, level, top);
  const int post = spec.steps(spec.n_post, level, top);
  for (int i = 0; i < pre; ++i)
    hybrid_gs_sweep_velocity(ops, level, u, rhs, SmootherKind::fhgs);

  const std::size_t n = u.size();
  std::vector<double> r(n);
  ops.apply_a(level, u, r);
  for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - r[i];
  ops.zero_pinned(level, r);

  const std::size_t nc = h.lv(level - 1).n_nodes();
  std::vector<double> rc(3 * nc), ec(3 * nc, 0.0);
  restrict_velocity(h, level, r, rc);
  ops.zero_pinned(level - 1, rc);
  vcycle_velocity(ops, level - 1, top, ec, rc, spec, coarse_iters);

  std::vector<double> ef(n);
  prolongate_velocity(h, level, ec, ef);
  ops.zero_pinned(level, ef);
  axpy(1.0, ef, u);
  if (!ops.bc(level).freeslip_nodes.empty()) ops.project_freeslip(level, u);

  for (int i = 0; i < post; ++i)
    hybrid_gs_sweep_velocity(ops, level, u, rhs, SmootherKind::bhgs);
}

void vcycle_saddle(const StokesOperators& ops, int level, int top, StokesVector& x,
                   const StokesVector& rhs, const CycleSpec& spec,
                   std::vector<int>* coarse_iters, const CycleTrace* trace) {
  if (level == 0) {
    const KrylovResult r = coarse_solve_saddle(ops, x, rhs, spec.coarse);
    if (coarse_iters) coarse_iters->push_back(r.iterations);
    return;
  }
  const GridHierarchy& h = ops.hierarchy();
  const GridLevel& lv = h.lv(level);
  const int pre = spec.steps(spec.n_pre, level, top);
  const int post = spec.steps(spec.n_post, level, top);

  for (int i = 0; i < pre; ++i) uzawa_step(ops, level, x, rhs);

  // residual and coarse correction
  StokesVector r = make_stokes_vector(lv);
  ops.apply_saddle(level, x, r);
  for (std::size_t i = 0; i < r.u.data.size(); ++i) r.u.data[i] = rhs.u.data[i] - r.u.data[i];
  for (std::size_t i = 0; i < r.p.data.size(); ++i) r.p.data[i] = rhs.p.data[i] - r.p.data[i];
  ops.zero_pinned(level, r.u.data);

  const GridLevel& clv = h.lv(level - 1);
  StokesVector rc = make_stokes_vector(clv), ec = make_stokes_vector(clv);
  restrict_velocity(h, level, r.u.data, rc.u.data);
  restrict_scalar(h, level, r.p.data, rc.p.data);
  ops.zero_pinned(level - 1, rc.u.data);
  mean_zero_uniform_inplace(rc.p.data);
  vcycle_saddle(ops, level - 1, top, ec, rc, spec, coarse_iters, trace);

  StokesVector ef = make_stokes_vector(lv);
  prolongate_velocity(h, level, ec.u.data, ef.u.data);
  prolongate_scalar(h, level, ec.p.data, ef.p.data);
  ops.zero_pinned(level, ef.u.data);
  axpy(1.0, ef, x);
  if (!ops.bc(level).freeslip_nodes.empty()) ops.project_freeslip(level, x.u.data);

  for (int i = 0; i < post; ++i) uzawa_step(ops, level, x, rhs);

  if (trace && trace->on_level) trace->on_level(level, pre, post, 0.0, 0.0);
}

StokesVector fmg_solve(const StokesOperators& ops, const AnalyticProblem& prob,
                       int top_level, const FmgOptions& opt,
                       const std::function<void(int level, const StokesVector&)>& per_level,
                       std::vector<int>* coarse_iters) {
  const GridHierarchy& h = ops.hierarchy();
  STOKESMG_REQUIRE(top_level >= 1 && top_level <= h.finest(), ConfigError,
                   "fmg needs at least two levels");

  StokesVector x = make_stokes_vector(h.lv(0));
  apply_dirichlet(ops, 0, x, prob);
  ops.project_freeslip(0, x.u.data);
  {
    StokesVector rhs0 = assemble_rhs(ops, 0, prob);
    const KrylovResult r = coarse_solve_saddle(ops, x, rhs0, opt.coarse);
    if (coarse_iters) coarse_iters->push_back(r.iterations);
  }
  mean_zero_project_inplace(x.p.data, ops.lumped_mass(0));
  if (per_level) per_level(0, x);

  CycleSpec cyc;
  cyc.kind = CycleSpec::Kind::vvar;
  cyc.n_pre = opt.n_pre;
  cyc.n_post = opt.n_post;
  cyc.coarse = opt.coarse;

  for (int m = 1; m <= top_level; ++m) {
    StokesVector xm = make_stokes_vector(h.lv(m));
    prolongate_velocity(h, m, x.u.data, xm.u.data);
    prolongate_scalar(h, m, x.p.data, xm.p.data);
    apply_dirichlet(ops, m, xm, prob);
    ops.project_freeslip(m, xm.u.data);

    const StokesVector rhs_m = assemble_rhs(ops, m, prob);
    for (int c = 0; c < opt.inner_cycles; ++c)
      vcycle_saddle(ops, m, m, xm, rhs_m, cyc, coarse_iters);
    mean_zero_project_inplace(xm.p.data, ops.lumped_mass(m));
    if (per_level) per_level(m, xm);
    x = std::move(xm);
  }
  return x;
}

}  // namespace stokesmg
