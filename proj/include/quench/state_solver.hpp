// ============================================================================
// quench/state_solver.hpp - forward integration of the phase-field /
// thermal-displacement system
//
//   d_t phi - Lap mu + gamma phi = f
//   mu = -Lap phi + G'(phi) + F'(phi) + a - b d_t w
//   d_tt w - Lap(kappa1 d_t w + kappa2 w) + lambda d_t phi = u
//
// with homogeneous Neumann data and phi(0)=phi0, w(0)=w0, d_t w(0)=w1.
// G is the convex part: alpha*h (log) or its Moreau-Yosida envelope (penalty).
//
// One time step is a staggered splitting:
//   (i)  phase sub-step, implicit in phi for G, explicit for F' and b*v;
//        the mean is advanced by the exact scalar recurrence and the mean-free
//        part solves a convex problem by damped Newton + preconditioned CG
//        (in log mode on the dual variable y = G'(phi), phi = tanh(y/2alpha));
//   (ii) thermal sub-step, one DCT diagonal solve for v^{n+1}, then
//        w^{n+1} = w^n + dt v^{n+1}.
// ============================================================================
#pragma once

#include "quench/grid.hpp"
#include "quench/potentials.hpp"

#include <functional>
#include <string>
#include <vector>

namespace quench {

struct PhysParams {
    double gamma = 1.0;
    double a = 1.0;
    double b = 1.0;
    double kappa1 = 1.0;
    double kappa2 = 1.0;
    double lambda = 1.0;
};

struct Potential {
    potential::ConcavePart concave;
    potential::ConvexMode convex = potential::LogQuench{1.0};
};

struct ProblemData {
    TimeSeries f; // source, one field per time node
    Field phi0;
    Field w0;
    Field w1;
};

/// Pointwise control bounds on every time node.
struct ControlBox {
    TimeSeries lower;
    TimeSeries upper;
};

ControlBox constant_box(const Grid& g, const TimeGrid& tg, double lo, double hi);

struct Violation {
    std::string code; // "structural-positivity", "control-box-order", "initial-interior", ...
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    /// Smallest distance of the initial-interior quantities to +-1.
    double margin = 0.0;
    double rho = 0.0;
    bool ok() const { return violations.empty(); }
    std::string summary() const;
};

ValidationReport validate_assumptions(const PhysParams& params, const ProblemData& data,
                                      const ControlBox& box);

class SolveError : public Error {
public:
    SolveError(const std::string& what, int step) : Error(what), step_(step) {}
    int step() const { return step_; }

private:
    int step_;
};

class NewtonDiverged : public SolveError {
public:
    using SolveError::SolveError;
};

class SeparationLoss : public SolveError {
public:
    using SolveError::SolveError;
};

class InvalidProblem : public Error {
public:
    explicit InvalidProblem(ValidationReport r) : Error(r.summary()), report_(std::move(r)) {}
    const ValidationReport& report() const { return report_; }

private:
    ValidationReport report_;
};

struct StepStats {
    double mean_phi = 0.0;
    double min_phi = 0.0;
    double max_phi = 0.0;
    int newton_iterations = 0;
    int linear_iterations = 0;
    /// (mean phi^{n+1} - mean phi^n)/dt + gamma mean phi^{n+1} - mean f^{n+1}
    double mass_residual = 0.0;
};

/// Fields at one time level.
struct StateLevel {
    Field phi, mu, w, v, xi;
};

struct StateTrajectory {
    Grid grid;
    TimeGrid time;
    TimeSeries phi, mu, w, v;
    /// Convex-part multiplier G'(phi): h_alpha'(phi) in log mode, the penalty
    /// term in obstacle mode (an eps-approximation of the obstacle multiplier).
    TimeSeries xi;
    std::vector<StepStats> stats; // stats[0] describes the initial level
    bool obstacle = false;
    double final_eps = 0.0;

    /// Temperature d_t w.
    const Field& temperature(int n) const { return v[n]; }
    StateLevel level(int n) const { return {phi[n], mu[n], w[n], v[n], xi[n]}; }
};

/// Source S = f - gamma*phi at time node n.
Field source_term(const StateTrajectory& traj, const ProblemData& data, const PhysParams& params, int n);

struct SolverOptions {
    int max_newton = 50;
    /// Newton stops when ||R||_inf <= newton_tol * (1 + ||f^{n+1}||_inf).
    double newton_tol = 1e-10;
    /// Iterates must satisfy |phi| < 1 - interior_margin in log mode.
    double interior_margin = 1e-14;
    int max_linear = 5000;
    /// Penalty continuation: values above the target eps are visited first.
    std::vector<double> eps_schedule = {1e-2, 1e-3, 1e-4};
    /// Run validate_assumptions (without a control box) before solving and
    /// throw InvalidProblem on violations.
    bool validate = true;
    /// Called after every completed level (including n = 0).
    std::function<void(int, double, const StateLevel&)> observer;
};

class StateSolver {
public:
    StateSolver(const Grid& grid, const TimeGrid& time, const PhysParams& params, const Potential& pot,
                SolverOptions opts = {});

    /// Advances one step; `f_next` and `u_next` are sampled at t_{n+1}.
    StateLevel step(const StateLevel& prev, const Field& f_next, const Field& u_next,
                    StepStats* stats = nullptr, int step_index = 0) const;

    StateTrajectory solve(const ProblemData& data, const TimeSeries& u) const;

    const Grid& grid() const { return grid_; }
    const TimeGrid& time() const { return time_; }
    const PhysParams& params() const { return params_; }
    const Potential& potential() const { return pot_; }

private:
    Field newton_phase(const Field& phi_prev, const Field& v_prev, const Field& f_next, double mean_next,
                       const potential::ConvexMode& mode, Field psi, StepStats& st, int step_index,
                       Field* xi = nullptr) const;

    Grid grid_;
    TimeGrid time_;
    PhysParams params_;
    Potential pot_;
    SolverOptions opts_;
};

StateTrajectory solve_state(const PhysParams& params, const ProblemData& data, const TimeSeries& u,
                            const Potential& pot, const TimeGrid& time, const SolverOptions& opts = {});

struct SeparationBounds {
    double low = 0.0;
    double high = 0.0;
    double margin() const;
};

/// Min and max of phi over all nodes and cells.
SeparationBounds separation_report(const StateTrajectory& traj);

} // namespace quench
