// ============================================================================
// quench/quench_study.hpp - deep-quench continuation studies
//
// State rate study: for a fixed control, solve along a decreasing alpha
// schedule and measure pairwise differences
//   E_phi = max_n |dphi(t_n)|_{V*} + |dphi|_{L2(0,T;V)}
//   E_w   = |dw|_{H1(0,T;H)} + max_n |dw(t_n)|_V
// with V = H1 (discrete: cell L2 plus forward-difference gradient), then fit
// log E against log(alpha_i - alpha_j).
//
// Control continuation: solve the adapted problems J + 1/2 |u - u*|^2 along
// the schedule, warm starting each from the previous solution, and track the
// distance to the anchor u* and the gap between adapted and anchor costs.
// ============================================================================
#pragma once

#include "quench/control_opt.hpp"

#include <optional>
#include <string>
#include <vector>

namespace quench {

struct QuenchSchedule {
    std::vector<double> alphas;

    /// alpha0 * 2^{-k}, k = 0..count-1.
    static QuenchSchedule geometric(double alpha0, int count);
    /// Throws Error unless nonempty, all in (0, 1] and strictly decreasing.
    void validate() const;
};

struct StateDistance {
    double phi_dual_max = 0.0;
    double phi_l2v = 0.0;
    double w_h1h = 0.0;
    double w_c0v = 0.0;

    double phi() const { return phi_dual_max + phi_l2v; }
    double w() const { return w_h1h + w_c0v; }
    double combined() const { return phi() + w(); }
};

StateDistance state_distance(const StateTrajectory& a, const StateTrajectory& b);

/// Least-squares line through (log x, log y); residual is the RMS of the
/// log-space residuals.
struct LogFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;
    int points = 0;
};

/// Throws Error with fewer than two points or nonpositive data.
LogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

struct PairError {
    double alpha_i = 0.0;
    double alpha_j = 0.0;
    StateDistance dist;
    /// Difference at the level of the solver tolerance; excluded from fits.
    bool inactive = false;
};

struct ReferenceError {
    double alpha = 0.0;
    StateDistance dist;
};

struct RateOptions {
    /// Pairs with combined E below this are reported as inactive.
    double inactive_tol = 1e-8;
    /// eps of the penalized obstacle solve used as surrogate alpha = 0
    /// reference; no reference when empty.
    std::optional<double> reference_eps;
};

struct RateReport {
    std::vector<PairError> pairs; // consecutive schedule entries
    std::optional<LogFit> combined, phi, w;
    std::vector<SeparationBounds> separation; // per alpha
    /// r_high nondecreasing as alpha decreases (reported, not asserted).
    bool separation_monotone = true;
    std::optional<double> reference_eps;
    std::vector<ReferenceError> reference;
};

/// Forward solves at each alpha of the schedule (in parallel), with the base
/// problem's concave part, data and solver options. Solver errors are
/// rethrown as SolveError tagged with the failing alpha.
RateReport state_rate_study(const ControlProblem& base, const TimeSeries& u, const QuenchSchedule& schedule,
                            const RateOptions& opts = {});

/// Identity followed by project_box; project_box(0) when there is no previous control.
TimeSeries warm_start(const std::optional<TimeSeries>& previous, const ControlBox& box, const Grid& g,
                      const TimeGrid& tg);

struct ContinuationStep {
    double alpha = 0.0;
    TimeSeries u;
    bool converged = false;
    int iterations = 0;
    double stationarity = 0.0;
    double distance = 0.0;      // |u - u*|_{L2(Q)}
    double adapted_cost = 0.0;  // J(S_alpha(u), u) + 1/2 |u - u*|^2
    double gap = 0.0;           // |adapted_cost - anchor_cost|
    std::string error;          // nonempty if the optimizer threw
};

struct ContinuationReport {
    std::string anchor_source;
    double anchor_cost = 0.0;
    std::vector<ContinuationStep> steps;
    /// |u_k - u_{k+1}|_{L2(Q)} for consecutive successful steps.
    std::vector<double> control_distances;
    bool distances_monotone = true;

    const ContinuationStep* first_ok() const;
    const ContinuationStep* last_ok() const;
};

ContinuationReport control_continuation(const ControlProblem& base, const QuenchSchedule& schedule,
                                        const TimeSeries& anchor, double anchor_cost, const OptimizerConfig& cfg,
                                        const std::string& anchor_source);

struct Anchor {
    TimeSeries u;
    double cost = 0.0;
    std::string source;
    OptimizeResult result;
};

/// Optimal control of the penalized obstacle problem (alpha = 0, given eps),
/// used as the continuation anchor.
Anchor obstacle_anchor(const ControlProblem& base, double eps, const OptimizerConfig& cfg);

} // namespace quench
