#pragma once

#include <functional>
#include <span>

#include "operators.hpp"

namespace stokesmg {

enum class SmootherKind { fhgs, bhgs, shgs, fhgs_relaxed };

// One hybrid Gauss-Seidel sweep for the velocity block (A1 or A2 per the
// active formulation). Primitive classes are traversed vertex -> edge ->
// face -> volume; within one class, primitives are decoupled by reading a
// pre-sweep snapshot of the other primitives of that class. Within each
// primitive the nodes are visited red (even lattice index sum) then black,
// ascending; bhgs reverses the within-primitive ordering only. Dirichlet
// nodes are skipped. shgs runs fhgs then bhgs.
void hybrid_gs_sweep_velocity(const StokesOperators& ops, int level, std::span<double> u,
                              std::span<const double> rhs, SmootherKind kind,
                              double omega = 1.0);

// Same sweep structure for the pressure stabilization block C.
void hybrid_gs_sweep_pressure(const StokesOperators& ops, int level, std::span<double> p,
                              std::span<const double> rhs, SmootherKind kind,
                              double omega = 1.0);

// Inexact Uzawa smoothing step: n_sweeps SHGS velocity sweeps on the momentum
// residual equation, then n_sweeps under-relaxed FHGS pressure sweeps on the
// C block. Per step (n_sweeps = 1) this evaluates A twice, B/Bt twice and C
// once.
void uzawa_step(const StokesOperators& ops, int level, StokesVector& x,
                const StokesVector& rhs, int n_sweeps = 1, double omega_pressure = 0.3);

// Structure of the Uzawa step with caller-provided approximate solvers;
// correct(residual) must return the correction increment. Used to validate
// the step against exact triangular-preconditioned iterations.
using BlockCorrection =
    std::function<std::vector<double>(std::span<const double> residual)>;
void uzawa_step_custom(const StokesOperators& ops, int level, StokesVector& x,
                       const StokesVector& rhs, const BlockCorrection& a_hat,
                       const BlockCorrection& s_hat);

}  // namespace stokesmg
