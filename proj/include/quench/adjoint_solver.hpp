// ============================================================================
// quench/adjoint_solver.hpp - backward adjoint system around a computed state
//
//   -d_t p - Lap q + gamma p + (G'' + F'')(phi) q - lambda d_t r = g
//    q = -Lap p
//   -d_t r - Lap(kappa1 r + kappa2 s) - b q = f_adj,     s = int_t^T r
//    p(T) = pi,  r(T) = rho,  s(T) = 0
//
// Sources:
//   f_adj = beta3 (1 (*) (w - w_Q)) + beta5 (v - w'_Q) + beta4 (w(T) - w_Omega)
//   g     = beta1 (phi - phi_Q)
//   rho   = beta6 (v(T) - w'_Omega),   pi = beta2 (phi(T) - phi_Omega) - lambda rho
//
// Backward Euler in reverse time, mirroring the forward splitting: each reverse
// step first solves the r-equation (DCT diagonal, s by the trapezoid rule, b q
// from the previous level), then the (p, q) block with the fresh r. Writing
// p = mean(p) + N q, the mean-free part solves the SPD system
//   (c N - Lap + P G''(phi) P) q = P rhs,   c = 1/dt + gamma,
// by DCT-preconditioned CG, with F''(phi) q taken from the previous level just
// as the forward step treats F' explicitly. The mean follows from a scalar update.
// ============================================================================
#pragma once

#include "quench/grid.hpp"
#include "quench/potentials.hpp"
#include "quench/state_solver.hpp"

#include <array>

namespace quench {

struct CostSpec {
    std::array<double, 6> beta{};
    double nu = 0.0;
    TimeSeries phi_q, w_q, wprime_q;
    Field phi_omega, w_omega, wprime_omega;

    /// Zero weights and zero targets on the given grids.
    static CostSpec zeros(const Grid& g, const TimeGrid& tg);
    /// Throws Error unless all weights are nonnegative and not all zero, and
    /// targets match the grids.
    void validate(const Grid& g, const TimeGrid& tg) const;
};

struct AdjointSources {
    TimeSeries f_adj;
    TimeSeries g_adj;
    Field rho;
    Field pi;
};

AdjointSources build_sources(const StateTrajectory& state, const CostSpec& cost, const PhysParams& params);

struct AdjointTrajectory {
    Grid grid;
    TimeGrid time;
    TimeSeries p, q, r, s;
    std::vector<int> linear_iterations; // per level, 0 at T
};

class LinearSolveFailure : public SolveError {
public:
    using SolveError::SolveError;
};

struct AdjointOptions {
    double rel_tol = 1e-11;
    int max_linear = 5000;
};

/// (G'' + F'')(phi) on one level; G'' is the penalty's second derivative in
/// obstacle mode.
Field adjoint_coefficient(const Potential& pot, const Field& phi);

AdjointTrajectory solve_adjoint(const StateTrajectory& state, const CostSpec& cost, const PhysParams& params,
                                const Potential& pot, const AdjointOptions& opts = {});

/// mean p(t_n) minus
///   mean pi + lambda mean rho - lambda mean r(t_n)
///   + int_{t_n}^T [mean g - gamma mean p - mean((G''+F'') q)]   (trapezoid)
std::vector<double> mean_p_identity_residual(const AdjointTrajectory& adj, const StateTrajectory& state,
                                             const CostSpec& cost, const PhysParams& params,
                                             const Potential& pot);

/// alpha * int_Q h''(phi) |q|^2 (trapezoid in time). Log mode only.
double slackness_value(const AdjointTrajectory& adj, const StateTrajectory& state, const Potential& pot);

/// N q(t_n) per level. Throws Error if p - mean p differs from N q by more
/// than 1e-9 ||p||_inf at any level; NonZeroMean if a q level is not mean-free.
TimeSeries reduced_nq_diagnostics(const AdjointTrajectory& adj);

} // namespace quench
