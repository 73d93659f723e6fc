#include "quench/state_solver.hpp"

#include "quench/pcg.hpp"
#include "quench/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace quench {

ControlBox constant_box(const Grid& g, const TimeGrid& tg, double lo, double hi) {
    return {make_series(g, tg, lo), make_series(g, tg, hi)};
}

std::string ValidationReport::summary() const {
    if (violations.empty()) return "assumptions satisfied";
    std::ostringstream os;
    os << violations.size() << " violation(s):";
    for (const auto& v : violations) os << " [" << v.code << "] " << v.message << ";";
    return os.str();
}

ValidationReport validate_assumptions(const PhysParams& p, const ProblemData& data, const ControlBox& box) {
    ValidationReport rep;
    auto add = [&](const std::string& code, const std::string& msg) { rep.violations.push_back({code, msg}); };

    const std::pair<const char*, double> constants[] = {{"gamma", p.gamma},   {"a", p.a},
                                                        {"b", p.b},           {"kappa1", p.kappa1},
                                                        {"kappa2", p.kappa2}, {"lambda", p.lambda}};
    for (const auto& [name, value] : constants)
        if (!(value > 0.0)) {
            std::ostringstream os;
            os << name << " = " << value << " must be positive";
            add("structural-positivity", os.str());
        }

    if (box.lower.size() != box.upper.size()) {
        add("control-box-order", "lower and upper bounds have different lengths");
    } else {
        std::size_t bad = 0;
        for (std::size_t n = 0; n < box.lower.size(); ++n) {
            require_same_grid(box.lower[n], box.upper[n], "validate_assumptions");
            for (std::size_t k = 0; k < box.lower[n].size(); ++k)
                if (!(box.lower[n][k] <= box.upper[n][k])) ++bad;
        }
        if (bad > 0) add("control-box-order", "u_min > u_max at " + std::to_string(bad) + " point(s)");
    }

    bool finite = data.phi0.all_finite() && data.w0.all_finite() && data.w1.all_finite();
    double fmax = 0.0;
    for (const auto& f : data.f) {
        finite = finite && f.all_finite();
        fmax = std::max(fmax, f.norm_inf());
    }
    if (!finite) add("finite-data", "initial data or source contain non-finite values");

    if (p.gamma > 0.0 && data.phi0.size() > 0) {
        rep.rho = fmax / p.gamma;
        const auto [lo, hi] = std::minmax_element(data.phi0.values().begin(), data.phi0.values().end());
        const double m = mean_value(data.phi0);
        const double quantities[] = {*lo, *hi, -rep.rho - std::max(-m, 0.0), rep.rho + std::max(m, 0.0)};
        const char* names[] = {"inf phi0", "sup phi0", "-rho - (mean phi0)^-", "rho + (mean phi0)^+"};
        rep.margin = 1.0;
        for (int i = 0; i < 4; ++i) {
            rep.margin = std::min(rep.margin, 1.0 - std::abs(quantities[i]));
            if (!(std::abs(quantities[i]) < 1.0)) {
                std::ostringstream os;
                os << names[i] << " = " << quantities[i] << " is not inside (-1,1)";
                add("initial-interior", os.str());
            }
        }
    }
    return rep;
}

double SeparationBounds::margin() const { return 1.0 - std::max(std::abs(low), std::abs(high)); }

SeparationBounds separation_report(const StateTrajectory& traj) {
    SeparationBounds b{traj.phi.front()[0], traj.phi.front()[0]};
    for (const auto& f : traj.phi)
        for (double v : f.values()) {
            b.low = std::min(b.low, v);
            b.high = std::max(b.high, v);
        }
    return b;
}

Field source_term(const StateTrajectory& traj, const ProblemData& data, const PhysParams& params, int n) {
    return data.f.at(n) - params.gamma * traj.phi.at(n);
}

// ----------------------------------------------------------------------------

StateSolver::StateSolver(const Grid& grid, const TimeGrid& time, const PhysParams& params,
                         const Potential& pot, SolverOptions opts)
    : grid_(grid), time_(time), params_(params), pot_(pot), opts_(std::move(opts)) {
    potential::validate(pot_.convex);
}

namespace {

bool interior(const Field& psi, double mean, double margin) {
    const double lim = 1.0 - margin;
    for (double v : psi.values())
        if (!(std::abs(v + mean) < lim)) return false;
    return true;
}

// Conjugate of alpha h: 2 alpha ln cosh(y / (2 alpha)), overflow-free.
double log_conjugate(double y, double alpha) {
    const double x = std::abs(y) / (2.0 * alpha);
    return 2.0 * alpha * (x + std::log1p(std::exp(-2.0 * x)) - std::log(2.0));
}

Field shifted(const Field& psi, double mean) {
    Field phi = psi;
    phi += mean;
    return phi;
}

} // namespace

// Mean-free part of the phase sub-step. With phi = m + psi, mean(psi) = 0,
// applying N to the mean-free part of the mass equation gives
//   R(psi) = c N psi - Lap psi + P G'(m + psi) + P(F'(phi^n) - b v^n) - N P(phi^n/dt + f) = 0,
// c = 1/dt + gamma, P the mean projection. R is the gradient of a strictly
// convex functional on mean-free fields, so its Jacobian
//   J = c N - Lap + P diag(G'') P
// is SPD there.
//
// Log mode iterates on y = G'(phi) instead, phi = tanh(y / (2 alpha)). The
// equations are then the gradient of the smooth convex dual
//   D(y) = sum G*(y) + 1/2 <P(y + b), K^{-1} P(y + b)> - m sum y,   K = c N - Lap,
// which has no domain constraint. A dual Newton step costs one J solve
// (J dpsi = -R + e P G'', dy = G''(dpsi - e), e = mean phi - m), but the line
// search runs in y, so cells close to +-1 never cap the step of the others.
Field StateSolver::newton_phase(const Field& phi_prev, const Field& v_prev, const Field& f_next,
                                double mean_next, const potential::ConvexMode& mode, Field psi,
                                StepStats& st, int step_index, Field* xi) const {
    const double dt = time_.dt();
    const double c = 1.0 / dt + params_.gamma;
    const bool log_mode = potential::is_log(mode);
    auto sp = Spectral::for_grid(grid_);

    Field explicit_part(grid_);
    for (std::size_t k = 0; k < explicit_part.size(); ++k)
        explicit_part[k] = pot_.concave.prime(phi_prev[k]) - params_.b * v_prev[k];
    Field rhs_mass = phi_prev * (1.0 / dt) + f_next;
    const Field constant = remove_mean(explicit_part) - inv_neumann_laplacian_projected(rhs_mass);

    auto base_op = [&](const Field& x) {
        return sp->apply_symbol(x, [c](double lam) { return lam > 0.0 ? c / lam + lam : 0.0; });
    };
    auto base_inv = [&](const Field& x) {
        return sp->apply_symbol(x, [c](double lam) { return lam > 0.0 ? 1.0 / (c / lam + lam) : 0.0; });
    };
    // residual with the convex derivative supplied explicitly
    auto residual = [&](const Field& p, const Field& g1) {
        Field r = base_op(p);
        r += g1;
        r += constant;
        return remove_mean(std::move(r));
    };
    auto energy = [&](const Field& p) {
        double gsum = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) gsum += potential::convex_value(mode, p[k] + mean_next);
        return 0.5 * inner(p, base_op(p)) + inner(constant, p) + gsum * grid_.cell_area();
    };

    const double alpha = potential::alpha_of(mode);
    const double two_a = 2.0 * alpha;
    auto dual = [&](const Field& y) {
        double gsum = 0.0, ysum = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k) {
            gsum += log_conjugate(y[k], alpha);
            ysum += y[k];
        }
        const Field yb = remove_mean(y + constant);
        return (gsum - mean_next * ysum) * grid_.cell_area() + 0.5 * inner(yb, base_inv(yb));
    };
    // |phi| <= 1 - margin: the box keeps G'' finite and tanh resolvable
    const double y_cap = log_mode ? alpha * potential::h_prime(1.0 - std::max(opts_.interior_margin, 1e-15)) : 0.0;
    auto clamp_dual = [&](Field& y) {
        for (std::size_t k = 0; k < y.size(); ++k) y[k] = std::clamp(y[k], -y_cap, y_cap);
    };
    auto at_cap = [&](const Field& y) {
        for (double v : y.values())
            if (std::abs(v) >= y_cap) return true;
        return false;
    };
    auto second_of = [&](const Field& y) {
        Field d(grid_);
        for (std::size_t k = 0; k < y.size(); ++k) {
            const double ch = std::cosh(y[k] / two_a);
            d[k] = two_a * ch * ch;
        }
        return d;
    };
    auto primal_of = [&](const Field& y) {
        Field phi(grid_);
        for (std::size_t k = 0; k < y.size(); ++k) phi[k] = std::tanh(y[k] / two_a);
        return phi;
    };

    const double tol = opts_.newton_tol * (1.0 + f_next.norm_inf());
    Field y;
    Field phi;
    double mean_err = 0.0;
    Field res;
    if (log_mode) {
        y = potential::convex_prime(mode, shifted(psi, mean_next));
        clamp_dual(y);
        phi = primal_of(y);
        mean_err = mean_value(phi) - mean_next;
        res = residual(phi, y);
    } else {
        res = residual(psi, remove_mean(potential::convex_prime(mode, shifted(psi, mean_next))));
    }
    const double mean_tol = 16.0 * std::numeric_limits<double>::epsilon();
    // diagonal of K^{-1} P (the same in every cell)
    double kinv_diag = 0.0;
    for (double lam : sp->eigenvalues())
        if (lam > 0.0) kinv_diag += 1.0 / (c / lam + lam);
    kinv_diag /= static_cast<double>(grid_.size());

    for (int it = 0;; ++it) {
        const double rinf = res.norm_inf();
        const Field d2 = log_mode ? second_of(y) : potential::convex_second(mode, shifted(psi, mean_next));
        // penalty mode: the last bit of phi moves G' by G'' ulp(phi)
        double floor = 0.0;
        if (!log_mode) {
            for (std::size_t k = 0; k < d2.size(); ++k)
                floor = std::max(floor, std::abs(d2[k]) * (std::abs(psi[k] + mean_next) + 1.0));
            floor *= 64.0 * std::numeric_limits<double>::epsilon();
        }
        if (rinf <= std::max(tol, floor) && std::abs(mean_err) <= mean_tol) {
            st.newton_iterations += it;
            if (log_mode) {
                if (xi) *xi = std::move(y);
                return remove_mean(phi);
            }
            return remove_mean(std::move(psi));
        }
        if (it >= opts_.max_newton) {
            if (log_mode && at_cap(y))
                throw SeparationLoss("phase Newton: solution within the interior margin of +-1 at step " +
                                         std::to_string(step_index) + " (not resolvable in double precision)",
                                     step_index);
            throw NewtonDiverged("phase Newton: no convergence after " + std::to_string(it) +
                                     " iterations at step " + std::to_string(step_index) +
                                     " (residual " + std::to_string(rinf) + ")",
                                 step_index);
        }

        if (log_mode) {
            // dual Newton: (diag(g') + K^{-1} P) dy = -H, H = phi - m + K^{-1} P(y + b)
            Field g1(grid_);
            for (std::size_t k = 0; k < g1.size(); ++k) g1[k] = 1.0 / d2[k];
            Field grad = phi;
            grad += -mean_next;
            grad += base_inv(remove_mean(y + constant));
            auto hess = [&](const Field& x) { return hadamard(g1, x) + base_inv(remove_mean(x)); };
            auto prec = [&](const Field& x) {
                Field z = x;
                for (std::size_t k = 0; k < z.size(); ++k) z[k] /= g1[k] + kinv_diag;
                return z;
            };
            const double forcing = std::clamp(rinf, 1e-14, 1e-4);
            const PcgResult lin = pcg(hess, prec, grad * -1.0, Field(grid_), forcing, 0.0, opts_.max_linear);
            st.linear_iterations += lin.iterations;
            if (!lin.converged && lin.rel_residual > 1e-2)
                throw NewtonDiverged("phase Newton: linear solve failed at step " + std::to_string(step_index),
                                     step_index);
            const Field& dy = lin.x;
            const double slope = inner(grad, dy);
            const double r0 = norm_l2(res) + std::abs(mean_err);
            const double d0 = dual(y);
            double theta = 1.0;
            for (;;) {
                Field yt = y;
                yt.axpy(theta, dy);
                clamp_dual(yt);
                Field pt = primal_of(yt);
                const double et = mean_value(pt) - mean_next;
                Field rt = residual(pt, yt);
                // Armijo on D, or residual decrease once D differences are below rounding
                if (dual(yt) <= d0 + 1e-4 * theta * slope || norm_l2(rt) + std::abs(et) < (1.0 - 1e-4 * theta) * r0 ||
                    (rt.norm_inf() <= tol && std::abs(et) <= mean_tol)) {
                    y = std::move(yt);
                    phi = std::move(pt);
                    mean_err = et;
                    res = std::move(rt);
                    break;
                }
                theta *= 0.5;
                if (theta < 1e-10) {
                    if (at_cap(y))
                        throw SeparationLoss("phase Newton: solution within the interior margin of +-1 at step " +
                                                 std::to_string(step_index) + " (not resolvable in double precision)",
                                             step_index);
                    throw NewtonDiverged("phase Newton: damping underflow at step " + std::to_string(step_index),
                                         step_index);
                }
            }
            continue;
        }

        auto jac = [&](const Field& x) { return remove_mean(base_op(x) + hadamard(d2, x)); };
        const LinearOp prec = split_preconditioner(sp, c, d2);
        const double forcing = std::clamp(rinf, 1e-14, 1e-4);
        // absolute floor well below what the Newton test can see
        const double lin_floor = 1e-3 * tol * std::sqrt(grid_.area());
        const PcgResult lin = pcg(jac, prec, res * -1.0, Field(grid_), forcing, lin_floor, opts_.max_linear);
        st.linear_iterations += lin.iterations;
        if (!lin.converged && lin.rel_residual > 1e-2)
            throw NewtonDiverged("phase Newton: linear solve failed at step " + std::to_string(step_index),
                                 step_index);
        const Field delta = remove_mean(lin.x);
        const double r0 = norm_l2(res);
        double theta = 1.0;

        // penalty mode: Armijo on the energy, or residual decrease where energy
        // differences are below rounding
        const double e0 = energy(psi);
        const double slope = inner(res, delta);
        for (;;) {
            Field trial = psi;
            trial.axpy(theta, delta);
            Field rt = residual(trial, remove_mean(potential::convex_prime(mode, shifted(trial, mean_next))));
            if (energy(trial) <= e0 + 1e-4 * theta * slope || norm_l2(rt) < (1.0 - 1e-4 * theta) * r0 ||
                rt.norm_inf() <= tol) {
                psi = std::move(trial);
                res = std::move(rt);
                break;
            }
            theta *= 0.5;
            if (theta < 1e-10)
                throw NewtonDiverged("phase Newton: damping underflow at step " + std::to_string(step_index),
                                     step_index);
        }
    }
}

StateLevel StateSolver::step(const StateLevel& prev, const Field& f_next, const Field& u_next, StepStats* stats,
                             int step_index) const {
    const double dt = time_.dt();
    const PhysParams& p = params_;
    StepStats st;

    const double m_prev = mean_value(prev.phi);
    const double m_next = (m_prev + dt * mean_value(f_next)) / (1.0 + p.gamma * dt);

    // initial guess: previous mean-free part, shrunk into the interior if needed
    Field psi = remove_mean(prev.phi);
    const bool log_mode = potential::is_log(pot_.convex);
    if (log_mode) {
        int guard = 0;
        while (!interior(psi, m_next, opts_.interior_margin) && guard++ < 60) psi *= 0.5;
    }

    Field xi;
    if (log_mode) {
        psi = newton_phase(prev.phi, prev.v, f_next, m_next, pot_.convex, std::move(psi), st, step_index, &xi);
    } else {
        // penalty continuation: coarse eps first, each solve warm-starts the next
        const auto& target = std::get<potential::ObstaclePenalty>(pot_.convex);
        for (double eps : opts_.eps_schedule) {
            if (!(eps > target.eps)) continue;
            potential::ConvexMode m = potential::ObstaclePenalty{target.alpha, eps};
            psi = newton_phase(prev.phi, prev.v, f_next, m_next, m, std::move(psi), st, step_index);
        }
        psi = newton_phase(prev.phi, prev.v, f_next, m_next, pot_.convex, std::move(psi), st, step_index);
    }

    StateLevel next;
    next.phi = shifted(psi, m_next);
    if (log_mode) {
        for (double v : next.phi.values())
            if (!(std::abs(v) < 1.0))
                throw SeparationLoss("phase field left (-1,1) at step " + std::to_string(step_index), step_index);
    }

    // log mode keeps the Newton variable y = G'(phi): recomputing it from phi
    // would amplify the rounding of phi near +-1
    next.xi = log_mode ? std::move(xi) : potential::convex_prime(pot_.convex, next.phi);
    next.mu = laplacian_neumann(next.phi) * -1.0;
    for (std::size_t k = 0; k < next.mu.size(); ++k)
        next.mu[k] += next.xi[k] + pot_.concave.prime(prev.phi[k]) + p.a - p.b * prev.v[k];

    // thermal sub-step:
    // (1/dt - (kappa1 + kappa2 dt) Lap) v = v^n/dt + kappa2 Lap w^n + u - lambda (phi^{n+1}-phi^n)/dt
    Field rhs = prev.v * (1.0 / dt);
    rhs.axpy(p.kappa2, laplacian_neumann(prev.w));
    rhs += u_next;
    rhs.axpy(-p.lambda / dt, next.phi - prev.phi);
    auto sp = Spectral::for_grid(grid_);
    next.v = sp->solve_shifted(rhs, 1.0 / dt, p.kappa1 + p.kappa2 * dt);
    next.w = prev.w;
    next.w.axpy(dt, next.v);

    const double m_new = mean_value(next.phi);
    st.mean_phi = m_new;
    const auto [lo, hi] = std::minmax_element(next.phi.values().begin(), next.phi.values().end());
    st.min_phi = *lo;
    st.max_phi = *hi;
    st.mass_residual = (m_new - m_prev) / dt + p.gamma * m_new - mean_value(f_next);
    if (stats) *stats = st;
    return next;
}

StateTrajectory StateSolver::solve(const ProblemData& data, const TimeSeries& u) const {
    require_series(data.f, time_, "solve_state: source");
    require_series(u, time_, "solve_state: control");
    require_same_grid(data.phi0, Field(grid_), "solve_state: phi0");
    if (opts_.validate) {
        ValidationReport rep = validate_assumptions(params_, data, ControlBox{});
        if (!rep.ok()) throw InvalidProblem(std::move(rep));
    }

    StateTrajectory traj;
    traj.grid = grid_;
    traj.time = time_;
    traj.obstacle = !potential::is_log(pot_.convex);
    if (traj.obstacle) traj.final_eps = std::get<potential::ObstaclePenalty>(pot_.convex).eps;

    const std::size_t levels = static_cast<std::size_t>(time_.nodes());
    traj.phi.reserve(levels);
    traj.mu.reserve(levels);
    traj.w.reserve(levels);
    traj.v.reserve(levels);
    traj.xi.reserve(levels);
    traj.stats.reserve(levels);

    StateLevel cur;
    cur.phi = data.phi0;
    cur.w = data.w0;
    cur.v = data.w1;
    if (!traj.obstacle) {
        for (double v : cur.phi.values())
            if (!(std::abs(v) < 1.0)) throw SeparationLoss("initial phase field outside (-1,1)", 0);
    }
    cur.xi = potential::convex_prime(pot_.convex, cur.phi);
    cur.mu = laplacian_neumann(cur.phi) * -1.0;
    for (std::size_t k = 0; k < cur.mu.size(); ++k)
        cur.mu[k] += cur.xi[k] + pot_.concave.prime(cur.phi[k]) + params_.a - params_.b * cur.v[k];

    StepStats s0;
    s0.mean_phi = mean_value(cur.phi);
    const auto [lo, hi] = std::minmax_element(cur.phi.values().begin(), cur.phi.values().end());
    s0.min_phi = *lo;
    s0.max_phi = *hi;

    auto record = [&](int n, const StateLevel& lv, const StepStats& st) {
        traj.phi.push_back(lv.phi);
        traj.mu.push_back(lv.mu);
        traj.w.push_back(lv.w);
        traj.v.push_back(lv.v);
        traj.xi.push_back(lv.xi);
        traj.stats.push_back(st);
        if (opts_.observer) opts_.observer(n, time_.t(n), lv);
    };
    record(0, cur, s0);
    for (int n = 0; n < time_.nt; ++n) {
        StepStats st;
        cur = step(cur, data.f[n + 1], u[n + 1], &st, n + 1);
        record(n + 1, cur, st);
    }
    return traj;
}

StateTrajectory solve_state(const PhysParams& params, const ProblemData& data, const TimeSeries& u,
                            const Potential& pot, const TimeGrid& time, const SolverOptions& opts) {
    return StateSolver(data.phi0.grid(), time, params, pot, opts).solve(data, u);
}

} // namespace quench
