#include "quench/adjoint_solver.hpp"

#include "quench/pcg.hpp"
#include "quench/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace quench {

CostSpec CostSpec::zeros(const Grid& g, const TimeGrid& tg) {
    CostSpec c;
    c.phi_q = make_series(g, tg);
    c.w_q = make_series(g, tg);
    c.wprime_q = make_series(g, tg);
    c.phi_omega = Field(g);
    c.w_omega = Field(g);
    c.wprime_omega = Field(g);
    return c;
}

void CostSpec::validate(const Grid& g, const TimeGrid& tg) const {
    bool any = nu > 0.0;
    for (double b : beta) {
        if (!(b >= 0.0)) throw Error("cost weights must be nonnegative");
        any = any || b > 0.0;
    }
    if (!(nu >= 0.0)) throw Error("cost weight nu must be nonnegative");
    if (!any) throw Error("cost weights are all zero");
    const Field ref(g);
    for (const TimeSeries* s : {&phi_q, &w_q, &wprime_q}) {
        require_series(*s, tg, "cost target");
        for (const auto& f : *s) require_same_grid(f, ref, "cost target");
    }
    for (const Field* f : {&phi_omega, &w_omega, &wprime_omega}) require_same_grid(*f, ref, "cost target");
}

AdjointSources build_sources(const StateTrajectory& st, const CostSpec& cost, const PhysParams& params) {
    const TimeGrid& tg = st.time;
    const int nt = tg.nt;
    const auto& b = cost.beta;
    AdjointSources src;

    TimeSeries wdiff(st.w.size(), Field(st.grid));
    for (int n = 0; n <= nt; ++n) wdiff[n] = st.w[n] - cost.w_q[n];
    const TimeSeries conv = convolve_backward(wdiff, tg);
    const Field terminal_w = (st.w[nt] - cost.w_omega) * b[3];

    src.f_adj.reserve(nt + 1);
    src.g_adj.reserve(nt + 1);
    for (int n = 0; n <= nt; ++n) {
        Field f = conv[n] * b[2];
        f.axpy(b[4], st.v[n] - cost.wprime_q[n]);
        f += terminal_w;
        src.f_adj.push_back(std::move(f));
        src.g_adj.push_back((st.phi[n] - cost.phi_q[n]) * b[0]);
    }
    src.rho = (st.v[nt] - cost.wprime_omega) * b[5];
    src.pi = (st.phi[nt] - cost.phi_omega) * b[1];
    src.pi.axpy(-params.lambda, src.rho);
    return src;
}

Field adjoint_coefficient(const Potential& pot, const Field& phi) {
    Field d = potential::convex_second(pot.convex, phi);
    for (std::size_t k = 0; k < d.size(); ++k) d[k] += pot.concave.second(phi[k]);
    return d;
}

AdjointTrajectory solve_adjoint(const StateTrajectory& st, const CostSpec& cost, const PhysParams& params,
                                const Potential& pot, const AdjointOptions& opts) {
    const Grid& g = st.grid;
    const TimeGrid& tg = st.time;
    const int nt = tg.nt;
    const double dt = tg.dt();
    const double c = 1.0 / dt + params.gamma;
    const double kr = params.kappa1 + 0.5 * params.kappa2 * dt;
    cost.validate(g, tg);

    const AdjointSources src = build_sources(st, cost, params);
    auto sp = Spectral::for_grid(g);

    AdjointTrajectory adj;
    adj.grid = g;
    adj.time = tg;
    adj.p.assign(nt + 1, Field(g));
    adj.q.assign(nt + 1, Field(g));
    adj.r.assign(nt + 1, Field(g));
    adj.s.assign(nt + 1, Field(g));
    adj.linear_iterations.assign(nt + 1, 0);

    adj.r[nt] = src.rho;
    adj.p[nt] = src.pi;
    adj.q[nt] = remove_mean(laplacian_neumann(src.pi) * -1.0);

    auto symbol = [c](double lam) { return c / lam + lam; };

    for (int n = nt - 1; n >= 0; --n) {
        const Field& r1 = adj.r[n + 1];
        const Field& s1 = adj.s[n + 1];
        const Field& q1 = adj.q[n + 1];

        // r first: s and the b q coupling taken from the previous reverse level
        Field rrhs = r1 * (1.0 / dt);
        Field lap_mix = s1 * params.kappa2;
        lap_mix.axpy(0.5 * params.kappa2 * dt, r1);
        rrhs += laplacian_neumann(lap_mix);
        rrhs += src.f_adj[n];
        rrhs.axpy(params.b, q1);
        adj.r[n] = sp->solve_shifted(rrhs, 1.0 / dt, kr);
        adj.s[n] = s1;
        adj.s[n].axpy(0.5 * dt, adj.r[n] + r1);

        // (p, q) with the fresh r; F'' acts on the lagged q like F' in the forward step
        Field prhs = adj.p[n + 1] * (1.0 / dt);
        prhs.axpy(params.lambda / dt, r1 - adj.r[n]);
        prhs += src.g_adj[n];
        Field d(g), fc(g);
        const Field gd = potential::convex_second(pot.convex, st.phi[n]);
        for (std::size_t k = 0; k < d.size(); ++k) {
            d[k] = gd[k];
            fc[k] = pot.concave.second(st.phi[n][k]);
        }
        prhs -= hadamard(fc, q1);

        auto op = [&](const Field& x) {
            Field y = sp->apply_symbol(x, [&](double lam) { return lam > 0.0 ? symbol(lam) : 0.0; });
            return remove_mean(y + hadamard(d, x));
        };
        const LinearOp prec = split_preconditioner(sp, c, d);
        // rounding floor: the mean-free part can be much smaller than the rhs itself
        const double floor = 1e-13 * norm_l2(prhs);
        const PcgResult sol = pcg(op, prec, remove_mean(prhs), q1, opts.rel_tol, floor, opts.max_linear);
        if (!sol.converged)
            throw LinearSolveFailure("solve_adjoint: PCG did not converge at step " + std::to_string(n) +
                                         " (relative residual " + std::to_string(sol.rel_residual) + ")",
                                     n);
        adj.linear_iterations[n] = sol.iterations;
        adj.q[n] = remove_mean(sol.x);
        const double pbar = (mean_value(prhs) - mean_value(hadamard(d, adj.q[n]))) / c;
        adj.p[n] = inv_neumann_laplacian_projected(adj.q[n]);
        adj.p[n] += pbar;
    }
    return adj;
}

std::vector<double> mean_p_identity_residual(const AdjointTrajectory& adj, const StateTrajectory& st,
                                             const CostSpec& cost, const PhysParams& params,
                                             const Potential& pot) {
    const TimeGrid& tg = adj.time;
    const int nt = tg.nt;
    const AdjointSources src = build_sources(st, cost, params);

    std::vector<double> integrand(nt + 1);
    for (int n = 0; n <= nt; ++n) {
        const Field d = adjoint_coefficient(pot, st.phi[n]);
        integrand[n] = mean_value(src.g_adj[n]) - params.gamma * mean_value(adj.p[n]) -
                       mean_value(hadamard(d, adj.q[n]));
    }
    const double base = mean_value(src.pi) + params.lambda * mean_value(src.rho);
    std::vector<double> res(nt + 1);
    double tail = 0.0; // trapezoid integral over [t_n, T]
    for (int n = nt; n >= 0; --n) {
        if (n < nt) tail += 0.5 * tg.dt() * (integrand[n] + integrand[n + 1]);
        res[n] = mean_value(adj.p[n]) - (base - params.lambda * mean_value(adj.r[n]) + tail);
    }
    return res;
}

double slackness_value(const AdjointTrajectory& adj, const StateTrajectory& st, const Potential& pot) {
    const auto* lq = std::get_if<potential::LogQuench>(&pot.convex);
    if (!lq) throw DomainError("slackness_value requires the logarithmic potential");
    const TimeGrid& tg = adj.time;
    double total = 0.0;
    for (int n = 0; n <= tg.nt; ++n) {
        double level = 0.0;
        for (std::size_t k = 0; k < adj.q[n].size(); ++k) {
            const double q = adj.q[n][k];
            level += potential::h_second(st.phi[n][k]) * q * q;
        }
        total += tg.weight(n) * level * adj.grid.cell_area();
    }
    return lq->alpha * total;
}

TimeSeries reduced_nq_diagnostics(const AdjointTrajectory& adj) {
    TimeSeries out;
    out.reserve(adj.q.size());
    for (std::size_t n = 0; n < adj.q.size(); ++n) {
        Field nq = inv_neumann_laplacian(adj.q[n]);
        const Field split = remove_mean(adj.p[n]) - nq;
        if (split.norm_inf() > 1e-9 * adj.p[n].norm_inf())
            throw Error("reduced_nq_diagnostics: p - mean p differs from N q at level " + std::to_string(n));
        out.push_back(std::move(nq));
    }
    return out;
}

} // namespace quench
