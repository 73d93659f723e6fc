// Acceptance run: one PASS/FAIL line per criterion, a final tally line and
// acceptance_out/acceptance.json. The exit status is the number of failed
// criteria (capped at 100).

#include "quench/commands.hpp"
#include "quench/io.hpp"
#include "quench/parallel.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>

using namespace quench;
namespace fs = std::filesystem;

namespace {

const std::string kConfigs = QUENCH_SOURCE_DIR "/configs/";
const fs::path kOut = fs::current_path() / "acceptance_out";

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int digits = 3) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

RunConfig config(const std::string& name) { return load_config(kConfigs + name); }

std::string out_dir(const std::string& name) { return (kOut / name).string(); }

// Margins of every log-mode state seen by the run, for criterion 3.
std::vector<std::pair<std::string, double>> g_margins;

Verdict n_identities() {
    const auto t0 = std::chrono::steady_clock::now();
    const Grid g(64, 64, 1.0, 1.0);
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> nd;
    auto random_field = [&] {
        Field f(g);
        for (std::size_t k = 0; k < f.size(); ++k) f[k] = nd(rng);
        return remove_mean(f);
    };
    double sym = 0.0, energy = 0.0, round = 0.0;
    for (int k = 0; k < 20; ++k) {
        const Field psi = random_field(), phi = random_field();
        const Field npsi = inv_neumann_laplacian(psi), nphi = inv_neumann_laplacian(phi);
        // relative to the Cauchy-Schwarz bound, since <N psi, phi> itself can be near zero
        sym = std::max(sym, std::abs(inner(npsi, phi) - inner(psi, nphi)) / (norm_l2(npsi) * norm_l2(phi)));
        energy = std::max(energy, rel(grad_norm_sq(npsi), inner(psi, npsi)));
        Field z = random_field();
        z += 0.7; // nonzero mean, removed by the round trip
        const Field back = inv_neumann_laplacian(laplacian_neumann(z) * -1.0);
        round = std::max(round, (back - remove_mean(z)).norm_inf() / z.norm_inf());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = sym <= 1e-10 && energy <= 1e-10 && round <= 1e-10 && secs < 1.0;
    return {ok, "64x64, 20 fields: symmetry " + fmt(sym) + ", energy " + fmt(energy) + ", round trip " +
                    fmt(round) + " (tol 1e-10), " + fmt(secs, 2) + " s (limit 1 s)"};
}

Verdict mass_balance() {
    const auto t0 = std::chrono::steady_clock::now();
    const RunConfig c = config("rate_benchmark.json");
    SimulateOutcome out;
    const CommandResult res = run_simulate(c, out_dir("c2_simulate"), &out);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (res.find("forward_solve")) return {false, "forward solve failed, see " + out_dir("c2_simulate")};
    const SeparationBounds b = separation_report(out.state);
    g_margins.emplace_back("simulate alpha=" + fmt(c.alpha), b.margin());
    const bool ok = out.max_mass_residual <= 1e-12 && out.max_recurrence_error <= 1e-12 && secs < 30.0;
    return {ok, std::to_string(c.grid.nx) + "x" + std::to_string(c.grid.ny) + ", nt " + std::to_string(c.time.nt) +
                    ": max step residual " + fmt(out.max_mass_residual) + ", mean vs recurrence " +
                    fmt(out.max_recurrence_error) + " (tol 1e-12), " + fmt(secs, 3) + " s (limit 30 s)"};
}

StudyOutcome g_rate;

Verdict rate() {
    const RunConfig c = config("rate_benchmark.json");
    const CommandResult res = run_quench_study(c, out_dir("c4_rate"), &g_rate);
    if (res.find("rate_study") && !res.find("rate_study")->pass) return {false, "rate study failed"};
    const auto& alphas = c.study.schedule.alphas;
    for (std::size_t k = 0; k < g_rate.rate.separation.size(); ++k)
        g_margins.emplace_back("rate alpha=" + fmt(alphas[k]), g_rate.rate.separation[k].margin());
    if (!g_rate.rate.combined) return {false, "no active pairs (inactive-obstacle regime)"};
    const LogFit& f = *g_rate.rate.combined;
    const bool ok = f.slope >= 0.45 && f.slope <= 1.6 && f.residual <= 0.15;
    return {ok, "slope " + fmt(f.slope) + " (window [0.45, 1.6]), log residual " + fmt(f.residual) +
                    " (limit 0.15), " + std::to_string(f.points) + " pairs"};
}

Verdict gradient() {
    const RunConfig c = config("gradcheck_benchmark.json");
    GradcheckOutcome out;
    run_gradcheck(c, out_dir("c5_gradcheck"), &out);
    if (out.reports.size() != 2) return {false, "gradient check did not complete"};
    const double e0 = out.reports[0].max_rel_err, e1 = out.reports[1].max_rel_err;
    const double ratio = e0 / e1;
    const bool ok = e0 <= 1e-2 && ratio >= 1.5;
    return {ok, "max rel err " + fmt(e0) + " at nt " + std::to_string(out.nts[0]) + " (tol 1e-2), " + fmt(e1) +
                    " at nt " + std::to_string(out.nts[1]) + ", ratio " + fmt(ratio) + " (min 1.5)"};
}

OptimizeOutcome g_opt;

Verdict optimality() {
    const RunConfig c = config("optimize_benchmark.json");
    const CommandResult res = run_optimize(c, out_dir("c6_optimize"), &g_opt);
    if (res.find("optimize")) return {false, "optimizer failed"};
    const OptimizeResult& r = g_opt.result;
    g_margins.emplace_back("optimize alpha=" + fmt(c.alpha), separation_report(r.eval.state).margin());
    double unorm = 0.0;
    for (const auto& f : r.u) unorm = std::max(unorm, f.norm_inf());
    const double clamp = g_opt.clamp.value_or(INFINITY);
    const double clamp_tol = 1e-5 * (1.0 + unorm);
    double worst = INFINITY;
    bool vi_ok = g_opt.vi.size() == 20;
    for (const auto& s : g_opt.vi) {
        vi_ok = vi_ok && s.value >= -1e-5 * s.scale;
        if (s.scale > 0.0) worst = std::min(worst, s.value / s.scale);
    }
    const bool ok = r.converged && r.stationarity <= 1e-6 && clamp <= clamp_tol && vi_ok;
    return {ok, std::string(r.converged ? "converged" : "NOT converged") + " in " +
                    std::to_string(r.history.back().iter) + " iterations (stationarity " + fmt(r.stationarity) +
                    "), clamp " + fmt(clamp) + " (tol " + fmt(clamp_tol) + "), min VI/scale over " +
                    std::to_string(g_opt.vi.size()) + " samples " + fmt(worst) + " (tol -1e-5)"};
}

Verdict slackness() {
    const RunConfig c = config("optimize_benchmark.json");
    ControlProblem p = c.problem();
    const TimeSeries u = g_opt.result.u.empty() ? make_series(p.grid, p.time) : g_opt.result.u;
    double min_value = INFINITY, lin = 0.0;
    int solves = 0;
    for (double alpha : {0.3, 0.15, 0.075}) {
        p.potential.convex = potential::LogQuench{alpha};
        const Evaluation ev = evaluate(p, u, true);
        g_margins.emplace_back("adjoint alpha=" + fmt(alpha), separation_report(ev.state).margin());
        const double s = slackness_value(*ev.adjoint, ev.state, p.potential);
        min_value = std::min(min_value, s);
        ++solves;
        for (double scale : {0.5, 0.25, 3.0}) {
            Potential q = p.potential;
            q.convex = potential::LogQuench{alpha * scale};
            lin = std::max(lin, rel(slackness_value(*ev.adjoint, ev.state, q), scale * s));
        }
    }
    if (g_opt.slackness) {
        min_value = std::min(min_value, *g_opt.slackness);
        ++solves;
    }
    const bool ok = min_value >= 0.0 && lin <= 1e-13;
    return {ok, "min slackness over " + std::to_string(solves) + " adjoint solves " + fmt(min_value) +
                    " (>= 0), linearity in alpha rel err " + fmt(lin) + " (tol 1e-13)"};
}

Verdict mean_p() {
    const RunConfig base = config("gradcheck_benchmark.json");
    std::vector<double> worst;
    double at_T = 0.0;
    std::string series;
    for (int nt : {32, 64, 128}) {
        RunConfig c = base;
        c.time = TimeGrid(base.time.t_final, nt);
        const ControlProblem p = c.problem();
        const Evaluation ev = evaluate(p, c.initial_control(), true);
        const auto res = mean_p_identity_residual(*ev.adjoint, ev.state, p.cost, p.params, p.potential);
        double m = 0.0;
        for (double v : res) m = std::max(m, std::abs(v));
        worst.push_back(m);
        at_T = std::max(at_T, std::abs(res.back()));
        series += (series.empty() ? "" : ", ") + fmt(m) + " (C = " + fmt(m / c.time.dt()) + ")";
    }
    bool ok = at_T <= 1e-12;
    std::string ratios;
    for (std::size_t k = 0; k + 1 < worst.size(); ++k) {
        const double r = worst[k] / worst[k + 1];
        ok = ok && r >= 1.5 && r <= 2.5;
        ratios += (ratios.empty() ? "" : ", ") + fmt(r);
    }
    return {ok, "max residual at nt 32/64/128: " + series + "; ratios " + ratios + " (window [1.5, 2.5]); at T " +
                    fmt(at_T) + " (tol 1e-12)"};
}

Verdict continuation() {
    const RunConfig c = config("continuation_benchmark.json");
    StudyOutcome out;
    run_quench_study(c, out_dir("c9_continuation"), &out);
    if (!out.continuation) return {false, "anchor solve failed"};
    const ContinuationReport& rep = *out.continuation;
    const ContinuationStep* first = rep.first_ok();
    const ContinuationStep* last = rep.last_ok();
    if (!first || !last || first == last) return {false, "fewer than two successful continuation steps"};
    std::string dists, gaps;
    for (const auto& s : rep.steps) {
        dists += (dists.empty() ? "" : " -> ") + (s.error.empty() ? fmt(s.distance) : std::string("err"));
        gaps += (gaps.empty() ? "" : " -> ") + (s.error.empty() ? fmt(s.gap) : std::string("err"));
    }
    const double ratio = last->gap / first->gap;
    const bool ok = last->distance <= first->distance && ratio <= 0.1;
    return {ok, "anchor " + rep.anchor_source + ", distance " + dists + " (final <= initial: " +
                    (last->distance <= first->distance ? "yes" : "no") + "), gap " + gaps + ", ratio " +
                    fmt(ratio) + " (limit 0.1)"};
}

Verdict determinism() {
    const RunConfig c = config("study_small.json");
    const int threads = thread_count();
    set_thread_count(1);
    const CommandResult a = run_quench_study(c, out_dir("c10_run1"));
    set_thread_count(std::max(2, threads));
    const CommandResult b = run_quench_study(c, out_dir("c10_run2"));
    set_thread_count(threads);
    int compared = 0;
    std::string differ;
    for (const auto& name : a.files) {
        if (fs::path(name).extension() != ".csv") continue;
        ++compared;
        if (read_text((kOut / "c10_run1" / name).string()) != read_text((kOut / "c10_run2" / name).string()))
            differ += " " + name;
    }
    const bool ok = compared > 0 && differ.empty() && a.files == b.files;
    return {ok, std::to_string(compared) + " CSV files compared byte for byte (1 vs " +
                    std::to_string(std::max(2, threads)) + " threads)" + (differ.empty() ? "" : "; differ:" + differ)};
}

Verdict separation() {
    double worst = INFINITY;
    std::string list;
    for (const auto& [name, m] : g_margins) {
        worst = std::min(worst, m);
        list += (list.empty() ? "" : ", ") + name + " " + fmt(m);
    }
    return {!g_margins.empty() && worst > 0.0, "margin 1 - max|phi| per solve: " + list};
}

} // namespace

int main() {
    fs::create_directories(kOut);
    struct Item {
        int id;
        const char* name;
        std::function<Verdict()> run;
    };
    // separation (3) is evaluated last, over the solves of the others
    const std::vector<Item> items = {
        {1, "N-operator identities", n_identities},     {2, "mass balance", mass_balance},
        {4, "deep-quench rate", rate},                  {5, "gradient correctness", gradient},
        {6, "optimality structure", optimality},        {7, "slackness", slackness},
        {8, "mean-p identity", mean_p},                 {9, "control continuation", continuation},
        {10, "pipeline determinism", determinism},      {3, "strict separation", separation},
    };

    nlohmann::ordered_json report = nlohmann::ordered_json::array();
    int failed = 0;
    for (const auto& it : items) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = it.run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !v.pass;
        char head[96];
        std::snprintf(head, sizeof head, "criterion %2d %s  %-22s ", it.id, v.pass ? "PASS" : "FAIL", it.name);
        std::string line = head + v.detail + "  [" + fmt(secs, 3) + " s]";
        std::printf("%s\n", line.c_str());
        std::fflush(stdout);
        report.push_back({{"criterion", it.id}, {"name", it.name}, {"pass", v.pass}, {"detail", v.detail},
                          {"seconds", secs}});
    }
    write_text((kOut / "acceptance.json").string(), report.dump(2) + "\n");
    std::printf("acceptance: %zu criteria evaluated, %zu passed, %d failed\n", items.size(), items.size() - failed,
                failed);
    return std::min(failed, 100);
}
