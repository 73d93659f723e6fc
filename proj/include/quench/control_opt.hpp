// ============================================================================
// quench/control_opt.hpp - reduced cost, adjoint gradient, projected gradient
//
//   J(u) = beta1/2 |phi - phi_Q|_Q^2 + beta2/2 |phi(T) - phi_Omega|^2
//        + beta3/2 |w - w_Q|_Q^2     + beta4/2 |w(T) - w_Omega|^2
//        + beta5/2 |v - w'_Q|_Q^2    + beta6/2 |v(T) - w'_Omega|^2 + nu/2 |u|_Q^2
//
// with the adapted variant J + 1/2 |u - u*|_Q^2. Space-time norms use the
// trapezoid rule in time and cell quadrature in space; the gradient is the
// L2(Q) representative r + nu u (+ u - u*).
// ============================================================================
#pragma once

#include "quench/adjoint_solver.hpp"
#include "quench/state_solver.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace quench {

struct ControlField {
    TimeSeries u;
    ControlBox bounds;

    bool feasible() const;
};

/// Pointwise clamp to [lower, upper]; the lower bound wins at crossed bounds.
TimeSeries project_box(const TimeSeries& u_raw, const ControlBox& box);

/// Everything a reduced-cost evaluation needs.
struct ControlProblem {
    Grid grid;
    TimeGrid time;
    PhysParams params;
    Potential potential;
    ProblemData data;
    ControlBox box;
    CostSpec cost;
    SolverOptions solver;
    AdjointOptions adjoint;
};

double eval_cost(const StateTrajectory& state, const TimeSeries& u, const CostSpec& cost);
/// Throws Error when the anchor is missing.
double eval_adapted_cost(const StateTrajectory& state, const TimeSeries& u, const CostSpec& cost,
                         const std::optional<TimeSeries>& anchor);

TimeSeries reduced_gradient(const AdjointTrajectory& adj, const TimeSeries& u, const CostSpec& cost,
                            const std::optional<TimeSeries>& anchor = std::nullopt);

/// || u - P(u - g) ||_inf
double stationarity(const TimeSeries& u, const TimeSeries& g, const ControlBox& box);

struct Evaluation {
    StateTrajectory state;
    double cost = 0.0;
    std::optional<AdjointTrajectory> adjoint;
    TimeSeries gradient;
};

Evaluation evaluate(const ControlProblem& prob, const TimeSeries& u, bool with_gradient,
                    const std::optional<TimeSeries>& anchor = std::nullopt);

struct OptimizerConfig {
    int max_iters = 200;
    double step0 = 1.0;
    double armijo_c = 1e-4;
    double shrink = 0.5;
    double stat_tol = 1e-6;
    int max_backtracks = 30;
    /// When Armijo backtracking on J underflows before stat_tol is reached,
    /// continue with projected steps accepted on decrease of the stationarity
    /// residual (the adjoint gradient is only O(dt)-consistent with J).
    bool polish = true;
    std::optional<TimeSeries> anchor;

    void validate() const;
};

struct HistoryRow {
    int iter = 0;
    double cost = 0.0;
    double stationarity = 0.0;
    double step = 0.0;
    int forward_solves = 0;
    int backward_solves = 0;
};

struct OptimizeResult {
    TimeSeries u;
    Evaluation eval; // state, adjoint and gradient at u
    std::vector<HistoryRow> history;
    double stationarity = 0.0;
    bool converged = false;
    bool line_search_stall = false;
    /// First iteration of the polishing phase, -1 if never entered.
    int polish_start = -1;
    int forward_solves = 0;
    int backward_solves = 0;
};

/// Projected gradient with Barzilai-Borwein trial steps and Armijo
/// backtracking. Starts from project_box(u0) or project_box(0).
OptimizeResult optimize(const ControlProblem& prob, const OptimizerConfig& cfg,
                        const std::optional<TimeSeries>& u0 = std::nullopt);

// ----------------------------------------------------------------------------
// certificates

/// || u - clamp(-r/nu) ||_inf; requires nu > 0.
double clamp_residual(const TimeSeries& u, const TimeSeries& r, double nu, const ControlBox& box);

struct ViSample {
    double value = 0.0; // int_Q g (v - u)
    double scale = 0.0; // ||v - u||_{L1(Q)}
};

/// Variational-inequality values for `count` random admissible v (pointwise
/// uniform in the box, seeded).
std::vector<ViSample> vi_samples(const TimeSeries& u, const TimeSeries& g, const ControlBox& box,
                                 const TimeGrid& tg, int count, std::uint64_t seed);

// ----------------------------------------------------------------------------
// gradient check

/// Smooth random direction: a few seeded products of cosines in x, y and t.
TimeSeries smooth_direction(const Grid& g, const TimeGrid& tg, std::uint64_t seed);

struct GradCheckReport {
    std::vector<double> fd;
    std::vector<double> ad;
    std::vector<double> rel_err;
    double max_rel_err = 0.0;
};

/// Central differences (J(u + tau d) - J(u - tau d)) / (2 tau) against <g, d>
/// for `count` smooth directions. Perturbed solves run in parallel.
GradCheckReport gradient_check(const ControlProblem& prob, const TimeSeries& u, int count, double tau,
                               std::uint64_t seed, const std::optional<TimeSeries>& anchor = std::nullopt);

} // namespace quench
