#include "quench/commands.hpp"

#include "quench/io.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>

namespace quench {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

const Check* CommandResult::find(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

std::vector<double> mean_recurrence(const ProblemData& data, const PhysParams& params, const TimeGrid& tg) {
    const double dt = tg.dt();
    std::vector<double> m(tg.nodes());
    m[0] = mean_value(data.phi0);
    for (int n = 0; n < tg.nt; ++n) m[n + 1] = (m[n] / dt + mean_value(data.f[n + 1])) / (1.0 / dt + params.gamma);
    return m;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double series_inf(const TimeSeries& s) {
    double m = 0.0;
    for (const auto& f : s) m = std::max(m, f.norm_inf());
    return m;
}

// Output directory, resolved-config echo, checks and summary for one command.
class Run {
public:
    Run(const RunConfig& cfg, std::string out, std::string command)
        : cfg_(cfg), out_(std::move(out)), t0_(std::chrono::steady_clock::now()) {
        ensure_directory(out_);
        write_text(path("config.resolved.json"), resolved_json(cfg));
        res_.files.push_back("config.resolved.json");
        summary_["command"] = std::move(command);
        summary_["config"] = cfg.origin;
    }

    std::string path(const std::string& name) const { return (fs::path(out_) / name).string(); }
    std::string snapshot_dir() const { return path("snapshots"); }

    CsvWriter csv(const std::string& name, const std::vector<std::string>& header) {
        res_.files.push_back(name);
        return CsvWriter(path(name), header);
    }

    void series(const std::string& field, const TimeSeries& s, const TimeGrid& tg) {
        if (cfg_.snapshot_stride > 0) write_series(snapshot_dir(), field, s, tg, cfg_.snapshot_stride);
    }

    void check(const std::string& name, double value, const std::string& rel, double limit, double hi = 0.0) {
        bool pass = false;
        if (rel == "<=") pass = value <= limit;
        else if (rel == "<") pass = value < limit;
        else if (rel == ">=") pass = value >= limit;
        else if (rel == ">") pass = value > limit;
        else pass = value >= limit && value <= hi;
        res_.checks.push_back({name, value, limit, rel, hi, pass});
    }

    void fail(const std::string& name, const std::string& message) {
        res_.checks.push_back({name, kNaN, 0.0, "ok", 0.0, false});
        summary_["errors"][name] = message;
    }

    ojson& summary() { return summary_; }

    CommandResult finish(int forced = -1) {
        bool all = true;
        ojson checks = ojson::array();
        for (const auto& c : res_.checks) {
            all = all && c.pass;
            ojson j;
            j["name"] = c.name;
            j["value"] = c.value;
            j["relation"] = c.relation;
            if (c.relation == "in") j["limit"] = {c.limit, c.limit_hi};
            else if (c.relation != "ok") j["limit"] = c.limit;
            j["pass"] = c.pass;
            checks.push_back(std::move(j));
        }
        res_.exit_code = forced >= 0 ? forced : (all ? kExitPass : kExitAssertion);
        summary_["checks"] = std::move(checks);
        summary_["passed"] = res_.exit_code == kExitPass;
        summary_["elapsed_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
        res_.summary = summary_.dump(2) + "\n";
        write_text(path("summary.json"), res_.summary);
        res_.files.push_back("summary.json");
        return std::move(res_);
    }

private:
    const RunConfig& cfg_;
    std::string out_;
    std::chrono::steady_clock::time_point t0_;
    CommandResult res_;
    ojson summary_;
};

} // namespace

CommandResult run_validate(const RunConfig& cfg, const std::string& out_dir) {
    Run run(cfg, out_dir, "validate");
    const ValidationReport rep = check_config(cfg);
    ojson v = ojson::array();
    for (const auto& x : rep.violations) v.push_back({{"code", x.code}, {"message", x.message}});
    run.summary()["violations"] = std::move(v);
    run.summary()["interior_margin"] = rep.margin;
    run.summary()["rho"] = rep.rho;
    return run.finish(rep.ok() ? kExitPass : kExitConfig);
}

CommandResult run_simulate(const RunConfig& cfg, const std::string& out_dir, SimulateOutcome* outcome) {
    Run run(cfg, out_dir, "simulate");
    const ControlProblem p = cfg.problem();
    const TimeSeries u = cfg.initial_control();

    StateTrajectory st;
    try {
        st = solve_state(p.params, p.data, u, p.potential, p.time, p.solver);
    } catch (const SolveError& e) {
        run.fail("forward_solve", e.what());
        return run.finish();
    }

    CsvWriter diag = run.csv("diagnostics.csv", {"step", "t", "mean_phi", "min_phi", "max_phi", "newton_iterations",
                                                 "linear_iterations", "mass_residual"});
    const std::vector<double> means = mean_recurrence(p.data, p.params, p.time);
    double mass = 0.0, recurrence = 0.0;
    for (int n = 0; n <= p.time.nt; ++n) {
        const StepStats& s = st.stats[n];
        diag.row({(long long)n, p.time.t(n), s.mean_phi, s.min_phi, s.max_phi, (long long)s.newton_iterations,
                  (long long)s.linear_iterations, s.mass_residual});
        mass = std::max(mass, std::abs(s.mass_residual));
        recurrence = std::max(recurrence, std::abs(mean_value(st.phi[n]) - means[n]));
    }
    diag.close();

    run.series("u", u, p.time);
    run.series("phi", st.phi, p.time);
    run.series("mu", st.mu, p.time);
    run.series("w", st.w, p.time);
    run.series("v", st.v, p.time);
    run.series("xi", st.xi, p.time);

    run.check("mass_residual_max", mass, "<=", 1e-12);
    run.check("mean_recurrence_error", recurrence, "<=", 1e-12);
    const SeparationBounds sep = separation_report(st);
    run.summary()["phi_min"] = sep.low;
    run.summary()["phi_max"] = sep.high;
    if (st.obstacle) {
        run.summary()["xi_note"] = "penalty-mode xi is the Moreau-Yosida slope at the final eps";
        run.summary()["final_eps"] = st.final_eps;
    } else {
        run.summary()["separation_margin"] = sep.margin();
        run.check("max_abs_phi", std::max(std::abs(sep.low), std::abs(sep.high)), "<", 1.0);
    }

    if (outcome) *outcome = {std::move(st), mass, recurrence};
    return run.finish();
}

CommandResult run_optimize(const RunConfig& cfg, const std::string& out_dir, OptimizeOutcome* outcome) {
    const ControlProblem p = cfg.problem();
    try {
        p.cost.validate(p.grid, p.time);
    } catch (const Error& e) {
        throw ParseError("/cost", e.what());
    }
    Run run(cfg, out_dir, "optimize");

    OptimizeOutcome out;
    try {
        out.result = optimize(p, cfg.optimizer, cfg.initial_control());
    } catch (const SolveError& e) {
        run.fail("optimize", e.what());
        return run.finish();
    }
    const OptimizeResult& res = out.result;

    CsvWriter hist = run.csv("history.csv", {"iter", "cost", "stationarity", "step", "forward_solves",
                                             "backward_solves"});
    for (const auto& h : res.history)
        hist.row({(long long)h.iter, h.cost, h.stationarity, h.step, (long long)h.forward_solves,
                  (long long)h.backward_solves});
    hist.close();

    const double tol = cfg.optimizer.stat_tol;
    const double unorm = series_inf(res.u);
    run.check("stationarity", res.stationarity, "<=", tol);
    if (cfg.nu > 0.0) {
        out.clamp = clamp_residual(res.u, res.eval.adjoint->r, cfg.nu, p.box);
        run.check("clamp_identity", *out.clamp, "<=", 10.0 * tol * (1.0 + unorm));
    } else {
        run.summary()["clamp_identity"] = "skipped (nu = 0)";
    }

    out.vi = vi_samples(res.u, res.eval.gradient, p.box, p.time, cfg.certificates.vi_samples, cfg.certificates.seed);
    CsvWriter vi = run.csv("vi_samples.csv", {"sample", "value", "scale"});
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < out.vi.size(); ++k) {
        vi.row({(long long)k, out.vi[k].value, out.vi[k].scale});
        if (out.vi[k].scale > 0.0) worst = std::min(worst, out.vi[k].value / out.vi[k].scale);
    }
    vi.close();
    if (!out.vi.empty()) run.check("vi_min_normalized", worst, ">=", -10.0 * tol);

    if (potential::is_log(p.potential.convex)) {
        out.slackness = slackness_value(*res.eval.adjoint, res.eval.state, p.potential);
        run.check("slackness", *out.slackness, ">=", 0.0);
    }

    run.series("u", res.u, p.time);
    run.series("phi", res.eval.state.phi, p.time);
    run.series("p", res.eval.adjoint->p, p.time);
    run.series("q", res.eval.adjoint->q, p.time);
    run.series("r", res.eval.adjoint->r, p.time);

    ojson& s = run.summary();
    s["cost"] = res.eval.cost;
    s["iterations"] = res.history.empty() ? 0 : res.history.back().iter;
    s["converged"] = res.converged;
    s["line_search_stall"] = res.line_search_stall;
    s["polish_start"] = res.polish_start;
    s["forward_solves"] = res.forward_solves;
    s["backward_solves"] = res.backward_solves;
    s["u_inf"] = unorm;

    if (outcome) *outcome = std::move(out);
    return run.finish();
}

CommandResult run_gradcheck(const RunConfig& cfg, const std::string& out_dir, GradcheckOutcome* outcome) {
    Run run(cfg, out_dir, "gradcheck");
    GradcheckOutcome out;
    out.nts.push_back(cfg.time.nt);
    if (cfg.gradcheck.refine) out.nts.push_back(2 * cfg.time.nt);

    CsvWriter csv = run.csv("gradcheck.csv", {"nt", "direction", "fd", "ad", "rel_err"});
    for (int nt : out.nts) {
        RunConfig c = cfg;
        c.time = TimeGrid(cfg.time.t_final, nt);
        const ControlProblem p = c.problem();
        try {
            p.cost.validate(p.grid, p.time);
        } catch (const Error& e) {
            throw ParseError("/cost", e.what());
        }
        try {
            out.reports.push_back(gradient_check(p, c.initial_control(), cfg.gradcheck.directions,
                                                 cfg.gradcheck.tau, cfg.gradcheck.seed));
        } catch (const SolveError& e) {
            run.fail("gradcheck_nt" + std::to_string(nt), e.what());
            csv.close();
            return run.finish();
        }
        const GradCheckReport& r = out.reports.back();
        for (std::size_t k = 0; k < r.fd.size(); ++k)
            csv.row({(long long)nt, (long long)k, r.fd[k], r.ad[k], r.rel_err[k]});
    }
    csv.close();

    ojson errs = ojson::object();
    for (std::size_t k = 0; k < out.nts.size(); ++k) errs[std::to_string(out.nts[k])] = out.reports[k].max_rel_err;
    run.summary()["max_rel_err"] = errs;
    run.check("max_rel_err", out.reports[0].max_rel_err, "<=", cfg.gradcheck.tolerance);
    if (out.reports.size() == 2) {
        out.ratio = out.reports[0].max_rel_err / out.reports[1].max_rel_err;
        run.check("refinement_ratio", *out.ratio, ">=", cfg.gradcheck.min_ratio);
    }
    if (outcome) *outcome = std::move(out);
    return run.finish();
}

CommandResult run_quench_study(const RunConfig& cfg, const std::string& out_dir, StudyOutcome* outcome) {
    Run run(cfg, out_dir, "quench-study");
    const ControlProblem p = cfg.problem();
    const TimeSeries u = cfg.initial_control();
    const auto& alphas = cfg.study.schedule.alphas;
    StudyOutcome out;

    RateOptions ro;
    ro.inactive_tol = cfg.study.inactive_tol;
    ro.reference_eps = cfg.study.reference_eps;
    try {
        out.rate = state_rate_study(p, u, cfg.study.schedule, ro);
    } catch (const SolveError& e) {
        run.fail("rate_study", e.what());
        return run.finish();
    }
    const RateReport& rate = out.rate;

    CsvWriter pairs = run.csv("rate_pairs.csv", {"alpha_i", "alpha_j", "dalpha", "phi_dual_max", "phi_l2v", "w_h1h",
                                                 "w_c0v", "phi", "w", "combined", "inactive"});
    for (const auto& pe : rate.pairs) {
        const StateDistance& d = pe.dist;
        pairs.row({pe.alpha_i, pe.alpha_j, pe.alpha_i - pe.alpha_j, d.phi_dual_max, d.phi_l2v, d.w_h1h, d.w_c0v,
                   d.phi(), d.w(), d.combined(), (long long)pe.inactive});
    }
    pairs.close();

    CsvWriter fit = run.csv("rate_fit.csv", {"quantity", "slope", "intercept", "residual", "points"});
    const std::pair<const char*, const std::optional<LogFit>*> fits[] = {
        {"combined", &rate.combined}, {"phi", &rate.phi}, {"w", &rate.w}};
    for (const auto& [name, f] : fits)
        if (f->has_value())
            fit.row({std::string(name), (*f)->slope, (*f)->intercept, (*f)->residual, (long long)(*f)->points});
    fit.close();

    CsvWriter sep = run.csv("separation.csv", {"alpha", "low", "high", "margin"});
    double min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < rate.separation.size(); ++k) {
        const SeparationBounds& b = rate.separation[k];
        sep.row({alphas[k], b.low, b.high, b.margin()});
        min_margin = std::min(min_margin, b.margin());
    }
    sep.close();

    CsvWriter ref = run.csv("reference.csv", {"alpha", "eps", "phi_dual_max", "phi_l2v", "w_h1h", "w_c0v", "combined"});
    for (const auto& r : rate.reference)
        ref.row({r.alpha, *rate.reference_eps, r.dist.phi_dual_max, r.dist.phi_l2v, r.dist.w_h1h, r.dist.w_c0v,
                 r.dist.combined()});
    ref.close();

    run.check("separation_margin_min", min_margin, ">", 0.0);
    if (rate.combined) {
        run.check("rate_slope", rate.combined->slope, "in", cfg.study.slope_min, cfg.study.slope_max);
        run.check("rate_fit_residual", rate.combined->residual, "<=", cfg.study.max_fit_residual);
    } else {
        run.fail("rate_slope", "fewer than two active pairs; inactive-obstacle regime");
    }
    ojson& s = run.summary();
    s["alphas"] = alphas;
    s["separation_monotone"] = rate.separation_monotone;
    int inactive = 0;
    for (const auto& pe : rate.pairs) inactive += pe.inactive;
    s["inactive_pairs"] = inactive;
    if (rate.combined) s["rate"] = {{"slope", rate.combined->slope}, {"residual", rate.combined->residual}};

    if (cfg.study.continuation) {
        const ControlProblem cp = cfg.problem();
        try {
            cp.cost.validate(cp.grid, cp.time);
        } catch (const Error& e) {
            throw ParseError("/cost", e.what());
        }
        try {
            out.anchor = obstacle_anchor(cp, cfg.study.anchor_eps, cfg.optimizer);
        } catch (const SolveError& e) {
            run.fail("continuation_anchor", e.what());
            if (outcome) *outcome = std::move(out);
            return run.finish();
        }
        const Anchor& a = *out.anchor;
        out.continuation =
            control_continuation(cp, cfg.study.schedule, a.u, a.cost, cfg.optimizer, a.source);
        const ContinuationReport& rep = *out.continuation;

        CsvWriter cont = run.csv("continuation.csv", {"alpha", "converged", "iterations", "stationarity", "distance",
                                                      "adapted_cost", "gap", "error"});
        for (const auto& st : rep.steps)
            cont.row({st.alpha, (long long)st.converged, (long long)st.iterations, st.stationarity, st.distance,
                      st.adapted_cost, st.gap, st.error});
        cont.close();

        CsvWriter dist = run.csv("control_distances.csv", {"alpha_from", "alpha_to", "distance"});
        std::vector<const ContinuationStep*> ok;
        for (const auto& st : rep.steps)
            if (st.error.empty()) ok.push_back(&st);
        for (std::size_t k = 0; k < rep.control_distances.size() && k + 1 < ok.size(); ++k)
            dist.row({ok[k]->alpha, ok[k + 1]->alpha, rep.control_distances[k]});
        dist.close();

        s["anchor"] = {{"source", rep.anchor_source},
                       {"cost", rep.anchor_cost},
                       {"converged", a.result.converged},
                       {"stationarity", a.result.stationarity}};
        s["distances_monotone"] = rep.distances_monotone;
        const ContinuationStep* first = rep.first_ok();
        const ContinuationStep* last = rep.last_ok();
        if (first && last && first != last) {
            run.check("continuation_distance", last->distance, "<=", first->distance);
            run.check("continuation_gap_ratio", first->gap > 0.0 ? last->gap / first->gap : kNaN, "<=", 0.1);
        } else {
            run.fail("continuation", "fewer than two successful continuation steps");
        }
    }

    if (outcome) *outcome = std::move(out);
    return run.finish();
}

CommandResult run_command(const std::string& name, const RunConfig& cfg, const std::string& out_dir) {
    if (name == "validate") return run_validate(cfg, out_dir);
    if (name == "simulate") return run_simulate(cfg, out_dir);
    if (name == "optimize") return run_optimize(cfg, out_dir);
    if (name == "gradcheck") return run_gradcheck(cfg, out_dir);
    if (name == "quench-study") return run_quench_study(cfg, out_dir);
    throw Error("unknown subcommand '" + name + "'");
}

} // namespace quench
