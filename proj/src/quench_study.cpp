#include "quench/quench_study.hpp"

#include "quench/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>

namespace quench {

QuenchSchedule QuenchSchedule::geometric(double alpha0, int count) {
    QuenchSchedule s;
    for (int k = 0; k < count; ++k) s.alphas.push_back(std::ldexp(alpha0, -k));
    return s;
}

void QuenchSchedule::validate() const {
    if (alphas.empty()) throw Error("quench schedule is empty");
    for (std::size_t k = 0; k < alphas.size(); ++k) {
        if (!(alphas[k] > 0.0 && alphas[k] <= 1.0)) throw Error("quench schedule: alpha values must lie in (0, 1]");
        if (k > 0 && !(alphas[k] < alphas[k - 1])) throw Error("quench schedule must be strictly decreasing");
    }
}

namespace {

double v_norm_sq(const Field& f) { return std::pow(norm_l2(f), 2) + grad_norm_sq(f); }

std::string alpha_tag(double a) {
    std::ostringstream os;
    os << "alpha = " << a << ": ";
    return os.str();
}

ControlProblem with_alpha(const ControlProblem& base, double alpha) {
    ControlProblem p = base;
    p.potential.convex = potential::LogQuench{alpha};
    return p;
}

} // namespace

StateDistance state_distance(const StateTrajectory& a, const StateTrajectory& b) {
    if (!(a.grid == b.grid) || !(a.time == b.time)) throw ShapeMismatch("state_distance: trajectories differ in shape");
    const TimeGrid& tg = a.time;
    StateDistance d;
    double phi_v = 0.0, w_h = 0.0;
    for (int n = 0; n <= tg.nt; ++n) {
        const Field dphi = a.phi[n] - b.phi[n];
        const Field dw = a.w[n] - b.w[n];
        const Field dv = a.v[n] - b.v[n];
        d.phi_dual_max = std::max(d.phi_dual_max, dual_norm(dphi));
        phi_v += tg.weight(n) * v_norm_sq(dphi);
        w_h += tg.weight(n) * (std::pow(norm_l2(dw), 2) + std::pow(norm_l2(dv), 2));
        d.w_c0v = std::max(d.w_c0v, std::sqrt(v_norm_sq(dw)));
    }
    d.phi_l2v = std::sqrt(phi_v);
    d.w_h1h = std::sqrt(w_h);
    return d;
}

LogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw Error("fit_loglog: need at least two matching points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!(x[k] > 0.0 && y[k] > 0.0)) throw Error("fit_loglog: data must be positive");
        const double lx = std::log(x[k]), ly = std::log(y[k]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double den = n * sxx - sx * sx;
    if (!(std::abs(den) > 0.0)) throw Error("fit_loglog: abscissae are all equal");
    LogFit f;
    f.points = static_cast<int>(x.size());
    f.slope = (n * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / n;
    double ss = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double r = std::log(y[k]) - (f.intercept + f.slope * std::log(x[k]));
        ss += r * r;
    }
    f.residual = std::sqrt(ss / n);
    return f;
}

RateReport state_rate_study(const ControlProblem& base, const TimeSeries& u, const QuenchSchedule& schedule,
                            const RateOptions& opts) {
    schedule.validate();
    const auto& alphas = schedule.alphas;
    const int m = static_cast<int>(alphas.size());
    const bool with_ref = opts.reference_eps.has_value();

    // one extra slot for the penalized reference
    std::vector<StateTrajectory> runs(m + (with_ref ? 1 : 0));
    parallel_for(static_cast<int>(runs.size()), [&](int k) {
        Potential pot = base.potential;
        if (k < m) pot.convex = potential::LogQuench{alphas[k]};
        else pot.convex = potential::ObstaclePenalty{0.0, *opts.reference_eps};
        try {
            runs[k] = solve_state(base.params, base.data, u, pot, base.time, base.solver);
        } catch (const SolveError& e) {
            const std::string tag = k < m ? alpha_tag(alphas[k]) : std::string("obstacle reference: ");
            throw SolveError(tag + e.what(), e.step());
        }
    });

    RateReport rep;
    for (int k = 0; k < m; ++k) {
        rep.separation.push_back(separation_report(runs[k]));
        if (k > 0 && rep.separation[k].high < rep.separation[k - 1].high) rep.separation_monotone = false;
    }

    std::vector<double> dx, ec, ep, ew;
    for (int k = 0; k + 1 < m; ++k) {
        PairError pe;
        pe.alpha_i = alphas[k];
        pe.alpha_j = alphas[k + 1];
        pe.dist = state_distance(runs[k], runs[k + 1]);
        pe.inactive = pe.dist.combined() <= opts.inactive_tol;
        if (!pe.inactive) {
            dx.push_back(pe.alpha_i - pe.alpha_j);
            ec.push_back(pe.dist.combined());
            ep.push_back(pe.dist.phi());
            ew.push_back(pe.dist.w());
        }
        rep.pairs.push_back(pe);
    }
    if (dx.size() >= 2) {
        rep.combined = fit_loglog(dx, ec);
        rep.phi = fit_loglog(dx, ep);
        if (std::all_of(ew.begin(), ew.end(), [](double v) { return v > 0.0; })) rep.w = fit_loglog(dx, ew);
    }

    if (with_ref) {
        rep.reference_eps = opts.reference_eps;
        for (int k = 0; k < m; ++k) rep.reference.push_back({alphas[k], state_distance(runs[k], runs[m])});
    }
    return rep;
}

TimeSeries warm_start(const std::optional<TimeSeries>& previous, const ControlBox& box, const Grid& g,
                      const TimeGrid& tg) {
    return project_box(previous ? *previous : make_series(g, tg), box);
}

const ContinuationStep* ContinuationReport::first_ok() const {
    for (const auto& s : steps)
        if (s.error.empty()) return &s;
    return nullptr;
}

const ContinuationStep* ContinuationReport::last_ok() const {
    for (auto it = steps.rbegin(); it != steps.rend(); ++it)
        if (it->error.empty()) return &*it;
    return nullptr;
}

ContinuationReport control_continuation(const ControlProblem& base, const QuenchSchedule& schedule,
                                        const TimeSeries& anchor, double anchor_cost, const OptimizerConfig& cfg,
                                        const std::string& anchor_source) {
    schedule.validate();
    require_series(anchor, base.time, "control_continuation: anchor");
    OptimizerConfig c = cfg;
    c.anchor = anchor;

    ContinuationReport rep;
    rep.anchor_source = anchor_source;
    rep.anchor_cost = anchor_cost;

    std::optional<TimeSeries> prev;
    for (double alpha : schedule.alphas) {
        ContinuationStep st;
        st.alpha = alpha;
        try {
            const ControlProblem p = with_alpha(base, alpha);
            const OptimizeResult res = optimize(p, c, warm_start(prev, p.box, p.grid, p.time));
            st.u = res.u;
            st.converged = res.converged;
            st.iterations = static_cast<int>(res.history.size()) - 1;
            st.stationarity = res.stationarity;
            st.adapted_cost = res.eval.cost;
            st.gap = std::abs(st.adapted_cost - anchor_cost);
            TimeSeries diff = res.u;
            for (std::size_t n = 0; n < diff.size(); ++n) diff[n] -= anchor[n];
            st.distance = norm_l2q(diff, base.time);
            if (prev) {
                TimeSeries step = res.u;
                for (std::size_t n = 0; n < step.size(); ++n) step[n] -= (*prev)[n];
                rep.control_distances.push_back(norm_l2q(step, base.time));
            }
            prev = res.u;
        } catch (const std::exception& e) {
            st.error = alpha_tag(alpha) + e.what();
        }
        rep.steps.push_back(std::move(st));
    }

    const ContinuationStep* last = nullptr;
    for (const auto& s : rep.steps) {
        if (!s.error.empty()) continue;
        if (last && s.distance > last->distance) rep.distances_monotone = false;
        last = &s;
    }
    return rep;
}

Anchor obstacle_anchor(const ControlProblem& base, double eps, const OptimizerConfig& cfg) {
    ControlProblem p = base;
    p.potential.convex = potential::ObstaclePenalty{0.0, eps};
    OptimizerConfig c = cfg;
    c.anchor.reset();
    Anchor a;
    a.result = optimize(p, c);
    a.u = a.result.u;
    a.cost = a.result.eval.cost;
    std::ostringstream os;
    os << "penalized obstacle optimum (eps = " << eps << ")";
    a.source = os.str();
    return a;
}

} // namespace quench
