// ============================================================================
// quench/commands.hpp - the quenchctl subcommands as library calls
//
// Every command writes config.resolved.json, its CSV tables and summary.json
// into the output directory. The summary lists each hard check with value,
// limit and verdict; the exit code is 0 when all pass, 1 otherwise.
//
// CSV tables (all values %.17g):
//   simulate      diagnostics.csv   step,t,mean_phi,min_phi,max_phi,newton_iterations,
//                                   linear_iterations,mass_residual
//   optimize      history.csv       iter,cost,stationarity,step,forward_solves,backward_solves
//                 vi_samples.csv    sample,value,scale
//   gradcheck     gradcheck.csv     nt,direction,fd,ad,rel_err
//   quench-study  rate_pairs.csv    alpha_i,alpha_j,dalpha,phi_dual_max,phi_l2v,w_h1h,w_c0v,
//                                   phi,w,combined,inactive
//                 rate_fit.csv      quantity,slope,intercept,residual,points
//                 separation.csv    alpha,low,high,margin
//                 reference.csv     alpha,eps,phi_dual_max,phi_l2v,w_h1h,w_c0v,combined
//                 continuation.csv  alpha,converged,iterations,stationarity,distance,
//                                   adapted_cost,gap,error
//                 control_distances.csv  alpha_from,alpha_to,distance
// Snapshots (output.snapshot_stride > 0) go to <out>/snapshots.
// ============================================================================
#pragma once

#include "quench/config.hpp"

#include <optional>
#include <string>
#include <vector>

namespace quench {

enum ExitCode { kExitPass = 0, kExitAssertion = 1, kExitConfig = 2 };

struct Check {
    std::string name;
    double value = 0.0;
    double limit = 0.0;
    std::string relation; // "<=", ">=", "<", ">" or "in" (limit..limit_hi)
    double limit_hi = 0.0;
    bool pass = false;
};

struct CommandResult {
    int exit_code = kExitPass;
    std::vector<Check> checks;
    std::vector<std::string> files; // written, relative to the output directory
    std::string summary;            // summary.json content

    bool passed() const { return exit_code == kExitPass; }
    const Check* find(const std::string& name) const;
};

struct SimulateOutcome {
    StateTrajectory state;
    double max_mass_residual = 0.0;
    double max_recurrence_error = 0.0;
};

struct OptimizeOutcome {
    OptimizeResult result;
    std::optional<double> clamp;
    std::vector<ViSample> vi;
    std::optional<double> slackness;
};

struct GradcheckOutcome {
    std::vector<int> nts;
    std::vector<GradCheckReport> reports;
    std::optional<double> ratio; // error(nt) / error(2 nt)
};

struct StudyOutcome {
    RateReport rate;
    std::optional<Anchor> anchor;
    std::optional<ContinuationReport> continuation;
};

CommandResult run_validate(const RunConfig& cfg, const std::string& out_dir);
CommandResult run_simulate(const RunConfig& cfg, const std::string& out_dir, SimulateOutcome* outcome = nullptr);
CommandResult run_optimize(const RunConfig& cfg, const std::string& out_dir, OptimizeOutcome* outcome = nullptr);
CommandResult run_gradcheck(const RunConfig& cfg, const std::string& out_dir, GradcheckOutcome* outcome = nullptr);
CommandResult run_quench_study(const RunConfig& cfg, const std::string& out_dir, StudyOutcome* outcome = nullptr);

/// Dispatch by subcommand name; throws Error for unknown names.
CommandResult run_command(const std::string& name, const RunConfig& cfg, const std::string& out_dir);

/// (mean phi^{n+1} - mean phi^n)/dt + gamma mean phi^{n+1} = mean f^{n+1}, solved for the means
/// starting from mean phi0.
std::vector<double> mean_recurrence(const ProblemData& data, const PhysParams& params, const TimeGrid& tg);

} // namespace quench
