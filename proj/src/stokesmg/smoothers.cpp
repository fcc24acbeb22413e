#include "smoothers.hpp"

#include <vector>

namespace stokesmg {

namespace {

// Visits containers class by class; pre_class fires before the first
// primitive of each class so callers can snapshot the field state.
template <typename PreClass, typename Visit>
void traverse(const GridLevel& lv, bool backward, PreClass&& pre_class, Visit&& visit) {
  std::size_t ci = 0;
  const std::size_t nc = lv.containers.size();
  for (int cls = 0; cls < 4; ++cls) {
    const std::size_t cbegin = ci;
    while (ci < nc && static_cast<int>(lv.containers[ci].kind) == cls) ++ci;
    if (cbegin == ci) continue;
    pre_class();
    for (std::size_t c = cbegin; c < ci; ++c) {
      const auto& ct = lv.containers[c];
      if (!backward) {
        for (std::int32_t n = ct.begin; n < ct.end; ++n)
          if (lv.lattice_parity(n) == 0) visit(n);
        for (std::int32_t n = ct.begin; n < ct.end; ++n)
          if (lv.lattice_parity(n) == 1) visit(n);
      } else {
        for (std::int32_t n = ct.end - 1; n >= ct.begin; --n)
          if (lv.lattice_parity(n) == 1) visit(n);
        for (std::int32_t n = ct.end - 1; n >= ct.begin; --n)
          if (lv.lattice_parity(n) == 0) visit(n);
      }
    }
  }
}

struct SweepBuffers {
  std::vector<double> snapshot;
};

}  // namespace

void hybrid_gs_sweep_velocity(const StokesOperators& ops, int level, std::span<double> u,
                              std::span<const double> rhs, SmootherKind kind, double omega) {
  if (kind == SmootherKind::shgs) {
    hybrid_gs_sweep_velocity(ops, level, u, rhs, SmootherKind::fhgs, omega);
    hybrid_gs_sweep_velocity(ops, level, u, rhs, SmootherKind::bhgs, omega);
    return;
  }
  const bool backward = kind == SmootherKind::bhgs;
  const GridLevel& lv = ops.hierarchy().lv(level);
  const OperatorTag tag = ops.a_tag();
  ops.ensure(tag, level);
  const LevelStencils& s = ops.stencils(level);
  const LevelBC& bc = ops.bc(level);
  ops.counters().add(tag, level);

  std::vector<double> snapshot;
  auto take_snapshot = [&] { snapshot.assign(u.begin(), u.end()); };

  const auto& owner = lv.owner;
  if (tag == OperatorTag::A1) {
    traverse(
        lv, backward, take_snapshot,
        [&](std::int32_t i) {
          if (bc.velocity_pinned[static_cast<std::size_t>(i)]) return;
          const PrimRef oi = owner[static_cast<std::size_t>(i)];
          double rx = rhs[3 * static_cast<std::size_t>(i)];
          double ry = rhs[3 * static_cast<std::size_t>(i) + 1];
          double rz = rhs[3 * static_cast<std::size_t>(i) + 2];
          for (std::int32_t e = s.row_ptr[static_cast<std::size_t>(i)];
               e < s.row_ptr[static_cast<std::size_t>(i) + 1]; ++e) {
            const std::int32_t j = s.col[static_cast<std::size_t>(e)];
            const PrimRef oj = owner[static_cast<std::size_t>(j)];
            const double* src =
                (oj.kind == oi.kind && oj.id != oi.id) ? snapshot.data() : u.data();
            const double w = s.a1[static_cast<std::size_t>(e)];
            rx -= w * src[3 * static_cast<std::size_t>(j)];
            ry -= w * src[3 * static_cast<std::size_t>(j) + 1];
            rz -= w * src[3 * static_cast<std::size_t>(j) + 2];
          }
          const double d = s.a1_diag[static_cast<std::size_t>(i)];
          STOKESMG_REQUIRE(d != 0.0, NumericsError, "zero smoother diagonal");
          const double inv = omega / d;
          u[3 * static_cast<std::size_t>(i)] += inv * rx;
          u[3 * static_cast<std::size_t>(i) + 1] += inv * ry;
          u[3 * static_cast<std::size_t>(i) + 2] += inv * rz;
        });
  } else {
    traverse(
        lv, backward, take_snapshot,
        [&](std::int32_t i) {
          if (bc.velocity_pinned[static_cast<std::size_t>(i)]) return;
          const PrimRef oi = owner[static_cast<std::size_t>(i)];
          double rx = rhs[3 * static_cast<std::size_t>(i)];
          double ry = rhs[3 * static_cast<std::size_t>(i) + 1];
          double rz = rhs[3 * static_cast<std::size_t>(i) + 2];
          for (std::int32_t e = s.row_ptr[static_cast<std::size_t>(i)];
               e < s.row_ptr[static_cast<std::size_t>(i) + 1]; ++e) {
            const std::int32_t j = s.col[static_cast<std::size_t>(e)];
            const PrimRef oj = owner[static_cast<std::size_t>(j)];
            const double* src =
                (oj.kind == oi.kind && oj.id != oi.id) ? snapshot.data() : u.data();
            const auto& blk = s.a2[static_cast<std::size_t>(e)];
            const double ux = src[3 * static_cast<std::size_t>(j)];
            const double uy = src[3 * static_cast<std::size_t>(j) + 1];
            const double uz = src[3 * static_cast<std::size_t>(j) + 2];
            rx -= blk[0] * ux + blk[1] * uy + blk[2] * uz;
            ry -= blk[3] * ux + blk[4] * uy + blk[5] * uz;
            rz -= blk[6] * ux + blk[7] * uy + blk[8] * uz;
          }
          const auto& inv = s.a2_diag_inv[static_cast<std::size_t>(i)];
          u[3 * static_cast<std::size_t>(i)] +=
              omega * (inv[0] * rx + inv[1] * ry + inv[2] * rz);
          u[3 * static_cast<std::size_t>(i) + 1] +=
              omega * (inv[3] * rx + inv[4] * ry + inv[5] * rz);
          u[3 * static_cast<std::size_t>(i) + 2] +=
              omega * (inv[6] * rx + inv[7] * ry + inv[8] * rz);
        });
  }
  if (!bc.freeslip_nodes.empty()) ops.project_freeslip(level, u);
}

void hybrid_gs_sweep_pressure(const StokesOperators& ops, int level, std::span<double> p,
                              std::span<const double> rhs, SmootherKind kind, double omega) {
  if (kind == SmootherKind::shgs) {
    hybrid_gs_sweep_pressure(ops, level, p, rhs, SmootherKind::fhgs, omega);
    hybrid_gs_sweep_pressure(ops, level, p, rhs, SmootherKind::bhgs, omega);
    return;
  }
  const bool backward = kind == SmootherKind::bhgs;
  const GridLevel& lv = ops.hierarchy().lv(level);
  ops.ensure(OperatorTag::C, level);
  const LevelStencils& s = ops.stencils(level);
  ops.counters().add(OperatorTag::C, level);

  std::vector<double> snapshot;
  auto take_snapshot = [&] { snapshot.assign(p.begin(), p.end()); };
  const auto& owner = lv.owner;
  traverse(lv, backward, take_snapshot, [&](std::int32_t i) {
    const PrimRef oi = owner[static_cast<std::size_t>(i)];
    double r = rhs[static_cast<std::size_t>(i)];
    for (std::int32_t e = s.row_ptr[static_cast<std::size_t>(i)];
         e < s.row_ptr[static_cast<std::size_t>(i) + 1]; ++e) {
      const std::int32_t j = s.col[static_cast<std::size_t>(e)];
      const PrimRef oj = owner[static_cast<std::size_t>(j)];
      const double* src =
          (oj.kind == oi.kind && oj.id != oi.id) ? snapshot.data() : p.data();
      r -= s.c[static_cast<std::size_t>(e)] * src[static_cast<std::size_t>(j)];
    }
    const double d = s.c_diag[static_cast<std::size_t>(i)];
    STOKESMG_REQUIRE(d != 0.0, NumericsError, "zero smoother diagonal");
    p[static_cast<std::size_t>(i)] += omega * r / d;
  });
}

void uzawa_step(const StokesOperators& ops, int level, StokesVector& x,
                const StokesVector& rhs, int n_sweeps, double omega_pressure) {
  const std::size_t nu = x.u.data.size();
  const std::size_t np = x.p.data.size();
  // momentum target: A u = f - B^T p
  std::vector<double> w_u(nu);
  ops.apply_bt(level, x.p.data, w_u);
  for (std::size_t i = 0; i < nu; ++i) w_u[i] = rhs.u.data[i] - w_u[i];
  for (int sweep = 0; sweep < n_sweeps; ++sweep)
    hybrid_gs_sweep_velocity(ops, level, x.u.data, w_u, SmootherKind::shgs);
  // stabilization target: C p = B u_new - g
  std::vector<double> w_p(np);
  ops.apply_b(level, x.u.data, w_p);
  for (std::size_t i = 0; i < np; ++i) w_p[i] -= rhs.p.data[i];
  for (int sweep = 0; sweep < n_sweeps; ++sweep)
    hybrid_gs_sweep_pressure(ops, level, x.p.data, w_p, SmootherKind::fhgs_relaxed,
                             omega_pressure);
}

void uzawa_step_custom(const StokesOperators& ops, int level, StokesVector& x,
                       const StokesVector& rhs, const BlockCorrection& a_hat,
                       const BlockCorrection& s_hat) {
  const std::size_t nu = x.u.data.size();
  const std::size_t np = x.p.data.size();
  std::vector<double> r_u(nu), tmp(nu);
  ops.apply_a(level, x.u.data, r_u);
  ops.apply_bt(level, x.p.data, tmp);
  for (std::size_t i = 0; i < nu; ++i) r_u[i] = rhs.u.data[i] - r_u[i] - tmp[i];
  ops.zero_pinned(level, r_u);
  const std::vector<double> du = a_hat(r_u);
  axpy(1.0, du, x.u.data);
  std::vector<double> r_p(np), cp(np);
  ops.apply_b(level, x.u.data, r_p);
  ops.apply_c(level, x.p.data, cp);
  for (std::size_t i = 0; i < np; ++i) r_p[i] = r_p[i] - cp[i] - rhs.p.data[i];
  const std::vector<double> dp = s_hat(r_p);
  axpy(1.0, dp, x.p.data);
}

}  // namespace stokesmg
