#include "quench/control_opt.hpp"

#include "quench/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace quench {

namespace {

TimeSeries diff(const TimeSeries& a, const TimeSeries& b) {
    TimeSeries out(a.size());
    for (std::size_t n = 0; n < a.size(); ++n) out[n] = a[n] - b[n];
    return out;
}

// a + s*b
TimeSeries axpy(const TimeSeries& a, double s, const TimeSeries& b) {
    TimeSeries out = a;
    for (std::size_t n = 0; n < a.size(); ++n) out[n].axpy(s, b[n]);
    return out;
}

double sq_q(const TimeSeries& a, const TimeGrid& tg) { return inner_q(a, a, tg); }

double norm_inf(const TimeSeries& a) {
    double m = 0.0;
    for (const auto& f : a) m = std::max(m, f.norm_inf());
    return m;
}

} // namespace

bool ControlField::feasible() const {
    if (u.size() != bounds.lower.size() || u.size() != bounds.upper.size()) return false;
    for (std::size_t n = 0; n < u.size(); ++n)
        for (std::size_t k = 0; k < u[n].size(); ++k)
            if (u[n][k] < bounds.lower[n][k] || u[n][k] > bounds.upper[n][k]) return false;
    return true;
}

TimeSeries project_box(const TimeSeries& u_raw, const ControlBox& box) {
    if (box.lower.size() != u_raw.size() || box.upper.size() != u_raw.size())
        throw ShapeMismatch("project_box: bounds and control have different lengths");
    TimeSeries out = u_raw;
    for (std::size_t n = 0; n < out.size(); ++n) {
        require_same_grid(out[n], box.lower[n], "project_box");
        for (std::size_t k = 0; k < out[n].size(); ++k) {
            const double lo = box.lower[n][k], hi = box.upper[n][k];
            double& x = out[n][k];
            if (x > hi) x = hi;
            if (x < lo) x = lo;
        }
    }
    return out;
}

double eval_cost(const StateTrajectory& st, const TimeSeries& u, const CostSpec& cost) {
    const TimeGrid& tg = st.time;
    const int nt = tg.nt;
    require_series(u, tg, "eval_cost: control");
    const auto& b = cost.beta;
    double j = 0.0;
    if (b[0] != 0.0) j += 0.5 * b[0] * sq_q(diff(st.phi, cost.phi_q), tg);
    if (b[1] != 0.0) j += 0.5 * b[1] * std::pow(norm_l2(st.phi[nt] - cost.phi_omega), 2);
    if (b[2] != 0.0) j += 0.5 * b[2] * sq_q(diff(st.w, cost.w_q), tg);
    if (b[3] != 0.0) j += 0.5 * b[3] * std::pow(norm_l2(st.w[nt] - cost.w_omega), 2);
    if (b[4] != 0.0) j += 0.5 * b[4] * sq_q(diff(st.v, cost.wprime_q), tg);
    if (b[5] != 0.0) j += 0.5 * b[5] * std::pow(norm_l2(st.v[nt] - cost.wprime_omega), 2);
    if (cost.nu != 0.0) j += 0.5 * cost.nu * sq_q(u, tg);
    return j;
}

double eval_adapted_cost(const StateTrajectory& st, const TimeSeries& u, const CostSpec& cost,
                         const std::optional<TimeSeries>& anchor) {
    if (!anchor) throw Error("eval_adapted_cost: anchor control missing");
    require_series(*anchor, st.time, "eval_adapted_cost: anchor");
    return eval_cost(st, u, cost) + 0.5 * sq_q(diff(u, *anchor), st.time);
}

TimeSeries reduced_gradient(const AdjointTrajectory& adj, const TimeSeries& u, const CostSpec& cost,
                            const std::optional<TimeSeries>& anchor) {
    require_series(u, adj.time, "reduced_gradient: control");
    TimeSeries g = axpy(adj.r, cost.nu, u);
    if (anchor) {
        require_series(*anchor, adj.time, "reduced_gradient: anchor");
        for (std::size_t n = 0; n < g.size(); ++n) {
            g[n] += u[n];
            g[n] -= (*anchor)[n];
        }
    }
    return g;
}

double stationarity(const TimeSeries& u, const TimeSeries& g, const ControlBox& box) {
    return norm_inf(diff(u, project_box(axpy(u, -1.0, g), box)));
}

Evaluation evaluate(const ControlProblem& prob, const TimeSeries& u, bool with_gradient,
                    const std::optional<TimeSeries>& anchor) {
    Evaluation e;
    e.state = StateSolver(prob.grid, prob.time, prob.params, prob.potential, prob.solver).solve(prob.data, u);
    e.cost = anchor ? eval_adapted_cost(e.state, u, prob.cost, anchor) : eval_cost(e.state, u, prob.cost);
    if (with_gradient) {
        e.adjoint = solve_adjoint(e.state, prob.cost, prob.params, prob.potential, prob.adjoint);
        e.gradient = reduced_gradient(*e.adjoint, u, prob.cost, anchor);
    }
    return e;
}

void OptimizerConfig::validate() const {
    if (max_iters < 0) throw Error("optimizer: max_iters must be nonnegative");
    if (!(step0 > 0.0)) throw Error("optimizer: step0 must be positive");
    if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw Error("optimizer: armijo_c must lie in (0,1)");
    if (!(shrink > 0.0 && shrink < 1.0)) throw Error("optimizer: shrink must lie in (0,1)");
    if (!(stat_tol > 0.0)) throw Error("optimizer: stat_tol must be positive");
    if (max_backtracks < 1) throw Error("optimizer: max_backtracks must be positive");
}

OptimizeResult optimize(const ControlProblem& prob, const OptimizerConfig& cfg, const std::optional<TimeSeries>& u0) {
    cfg.validate();
    const TimeGrid& tg = prob.time;
    const auto& anchor = cfg.anchor;

    OptimizeResult res;
    res.u = project_box(u0 ? *u0 : make_series(prob.grid, tg), prob.box);
    res.eval = evaluate(prob, res.u, true, anchor);
    res.forward_solves = res.backward_solves = 1;

    auto try_eval = [&](const TimeSeries& u, bool grad) -> std::optional<Evaluation> {
        ++res.forward_solves;
        if (grad) ++res.backward_solves;
        try {
            return evaluate(prob, u, grad, anchor);
        } catch (const SolveError&) {
            return std::nullopt;
        }
    };

    // polishing acceptance uses the L2(Q) residual: for small steps it decreases
    // whenever the gradient map has a positive definite symmetric part
    auto residual_l2 = [&](const TimeSeries& u, const TimeSeries& g) {
        return std::sqrt(sq_q(diff(u, project_box(axpy(u, -1.0, g), prob.box)), tg));
    };

    TimeSeries u_prev, g_prev;
    double last_step = 0.0;
    double tau = cfg.step0;
    bool polishing = false;

    for (int iter = 0;; ++iter) {
        const TimeSeries& g = res.eval.gradient;
        res.stationarity = stationarity(res.u, g, prob.box);
        res.history.push_back({iter, res.eval.cost, res.stationarity, last_step, res.forward_solves,
                               res.backward_solves});
        if (res.stationarity <= cfg.stat_tol) {
            res.converged = true;
            break;
        }
        if (iter >= cfg.max_iters) break;

        if (!u_prev.empty()) {
            const TimeSeries s = diff(res.u, u_prev), y = diff(g, g_prev);
            const double sy = inner_q(s, y, tg);
            if (sy > 0.0) tau = std::clamp(inner_q(s, s, tg) / sy, 1e-8 * cfg.step0, 1e8 * cfg.step0);
        }

        std::optional<Evaluation> next;
        TimeSeries u_next;
        if (!polishing) {
            double t = tau;
            for (int k = 0; k < cfg.max_backtracks; ++k, t *= cfg.shrink) {
                TimeSeries trial = project_box(axpy(res.u, -t, g), prob.box);
                const double predicted = inner_q(g, diff(res.u, trial), tg);
                auto e = try_eval(trial, false);
                if (e && res.eval.cost - e->cost >= cfg.armijo_c * predicted) {
                    u_next = std::move(trial);
                    tau = t;
                    break;
                }
            }
            if (!u_next.empty()) {
                next = try_eval(u_next, true);
                if (!next) throw SolveError("optimize: adjoint evaluation failed at an accepted iterate", iter);
            } else if (cfg.polish) {
                polishing = true;
                res.polish_start = iter;
            } else {
                res.line_search_stall = true;
                break;
            }
        }
        if (polishing) {
            double t = tau;
            for (int k = 0; k < cfg.max_backtracks; ++k, t *= cfg.shrink) {
                TimeSeries trial = project_box(axpy(res.u, -t, g), prob.box);
                auto e = try_eval(trial, true);
                if (e && residual_l2(trial, e->gradient) < (1.0 - 1e-4) * residual_l2(res.u, g)) {
                    u_next = std::move(trial);
                    next = std::move(e);
                    tau = t;
                    break;
                }
            }
            if (u_next.empty()) {
                res.line_search_stall = true;
                break;
            }
        }

        u_prev = std::move(res.u);
        g_prev = res.eval.gradient;
        res.u = std::move(u_next);
        res.eval = std::move(*next);
        last_step = tau;
    }
    return res;
}

double clamp_residual(const TimeSeries& u, const TimeSeries& r, double nu, const ControlBox& box) {
    if (!(nu > 0.0)) throw Error("clamp_residual requires nu > 0");
    TimeSeries target(r.size());
    for (std::size_t n = 0; n < r.size(); ++n) target[n] = r[n] * (-1.0 / nu);
    return norm_inf(diff(u, project_box(target, box)));
}

std::vector<ViSample> vi_samples(const TimeSeries& u, const TimeSeries& g, const ControlBox& box,
                                 const TimeGrid& tg, int count, std::uint64_t seed) {
    require_series(u, tg, "vi_samples: control");
    require_series(g, tg, "vi_samples: gradient");
    std::vector<ViSample> out(count);
    for (int i = 0; i < count; ++i) {
        std::mt19937_64 rng(seed + static_cast<std::uint64_t>(i));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        TimeSeries d = u;
        for (std::size_t n = 0; n < d.size(); ++n)
            for (std::size_t k = 0; k < d[n].size(); ++k) {
                const double lo = box.lower[n][k], hi = box.upper[n][k];
                d[n][k] = lo + (hi - lo) * unit(rng) - u[n][k];
            }
        out[i].value = inner_q(g, d, tg);
        for (int n = 0; n <= tg.nt; ++n) {
            double level = 0.0;
            for (double x : d[n].values()) level += std::abs(x);
            out[i].scale += tg.weight(n) * level * d[n].grid().cell_area();
        }
    }
    return out;
}

TimeSeries smooth_direction(const Grid& g, const TimeGrid& tg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> mode(0, 3);
    std::normal_distribution<double> amp(0.0, 1.0);
    TimeSeries d = make_series(g, tg);
    const double pi = std::numbers::pi;
    for (int term = 0; term < 4; ++term) {
        const int kx = mode(rng), ky = mode(rng), kt = mode(rng);
        const double a = amp(rng);
        for (int n = 0; n <= tg.nt; ++n) {
            const double ct = std::cos(pi * kt * tg.t(n) / tg.t_final);
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i)
                    d[n](i, j) += a * ct * std::cos(pi * kx * g.x(i) / g.lx) * std::cos(pi * ky * g.y(j) / g.ly);
        }
    }
    return d;
}

GradCheckReport gradient_check(const ControlProblem& prob, const TimeSeries& u, int count, double tau,
                               std::uint64_t seed, const std::optional<TimeSeries>& anchor) {
    const Evaluation base = evaluate(prob, u, true, anchor);
    std::vector<TimeSeries> dirs;
    for (int k = 0; k < count; ++k) dirs.push_back(smooth_direction(prob.grid, prob.time, seed + k));

    std::vector<double> costs(2 * count);
    parallel_for(2 * count, [&](int i) {
        const double sgn = (i % 2 == 0) ? 1.0 : -1.0;
        costs[i] = evaluate(prob, axpy(u, sgn * tau, dirs[i / 2]), false, anchor).cost;
    });

    GradCheckReport rep;
    for (int k = 0; k < count; ++k) {
        const double fd = (costs[2 * k] - costs[2 * k + 1]) / (2.0 * tau);
        const double ad = inner_q(base.gradient, dirs[k], prob.time);
        rep.fd.push_back(fd);
        rep.ad.push_back(ad);
        rep.rel_err.push_back(std::abs(fd - ad) / std::max(std::abs(fd), 1e-300));
        rep.max_rel_err = std::max(rep.max_rel_err, rep.rel_err.back());
    }
    return rep;
}

} // namespace quench
