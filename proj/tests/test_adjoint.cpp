#include "doctest.h"
#include "bench.hpp"
#include "test_util.hpp"

#include "quench/adjoint_solver.hpp"

#include <cmath>
#include <random>

using namespace quench;
using testutil::max_diff;

namespace {

StateTrajectory bench_state(const ControlProblem& p) {
    return solve_state(p.params, p.data, testutil::bench_control(p), p.potential, p.time, p.solver);
}

double max_abs(const TimeSeries& s) {
    double m = 0.0;
    for (const auto& f : s) m = std::max(m, f.norm_inf());
    return m;
}

} // namespace

TEST_CASE("sources") {
    auto p = testutil::bench_problem(8, 8, 0.5);
    const auto st = bench_state(p);

    SUBCASE("nu only gives zero sources and a zero adjoint") {
        CostSpec c = CostSpec::zeros(p.grid, p.time);
        c.nu = 1.0;
        const auto src = build_sources(st, c, p.params);
        CHECK(max_abs(src.f_adj) == 0.0);
        CHECK(max_abs(src.g_adj) == 0.0);
        CHECK(src.rho.norm_inf() == 0.0);
        CHECK(src.pi.norm_inf() == 0.0);
        const auto adj = solve_adjoint(st, c, p.params, p.potential);
        CHECK(max_abs(adj.p) == 0.0);
        CHECK(max_abs(adj.q) == 0.0);
        CHECK(max_abs(adj.r) == 0.0);
        CHECK(max_abs(adj.s) == 0.0);
    }

    SUBCASE("phi on target gives a zero adjoint") {
        CostSpec c = CostSpec::zeros(p.grid, p.time);
        c.beta[0] = 1.0;
        c.phi_q = st.phi;
        const auto adj = solve_adjoint(st, c, p.params, p.potential);
        CHECK(max_abs(adj.p) == 0.0);
        CHECK(max_abs(adj.r) == 0.0);
    }

    SUBCASE("w on target leaves only the v and terminal parts") {
        CostSpec c = CostSpec::zeros(p.grid, p.time);
        c.beta = {0, 0, 1, 1, 1, 0};
        c.w_q = st.w;
        const auto src = build_sources(st, c, p.params);
        for (int n = 0; n <= p.time.nt; ++n) {
            Field expect = st.v[n] - c.wprime_q[n];
            expect += st.w[p.time.nt] - c.w_omega;
            CHECK(max_diff(src.f_adj[n], expect) < 1e-14);
        }
    }

    SUBCASE("constant terminal w mismatch is time independent") {
        CostSpec c = CostSpec::zeros(p.grid, p.time);
        c.beta[3] = 1.0;
        c.w_omega = st.w[p.time.nt];
        c.w_omega += -0.7;
        const auto src = build_sources(st, c, p.params);
        for (const auto& f : src.f_adj) CHECK(max_diff(f, Field(p.grid, 0.7)) < 1e-14);
    }

    SUBCASE("terminal data") {
        const auto src = build_sources(st, p.cost, p.params);
        const int N = p.time.nt;
        Field rho = (st.v[N] - p.cost.wprime_omega) * p.cost.beta[5];
        Field pi = (st.phi[N] - p.cost.phi_omega) * p.cost.beta[1];
        pi.axpy(-p.params.lambda, rho);
        CHECK(max_diff(src.rho, rho) == 0.0);
        CHECK(max_diff(src.pi, pi) < 1e-15);

        const auto adj = solve_adjoint(st, p.cost, p.params, p.potential);
        CHECK(max_diff(adj.r[N], rho) == 0.0);
        CHECK(max_diff(adj.p[N], pi) == 0.0);
        CHECK(adj.s[N].norm_inf() == 0.0);
        CHECK(max_diff(adj.q[N], remove_mean(laplacian_neumann(pi) * -1.0)) < 1e-12);
    }
}

TEST_CASE("cost validation") {
    Grid g(4, 4);
    TimeGrid tg(1.0, 2);
    CostSpec c = CostSpec::zeros(g, tg);
    CHECK_THROWS_AS(c.validate(g, tg), Error);
    c.beta[2] = -1.0;
    CHECK_THROWS_AS(c.validate(g, tg), Error);
    c.beta[2] = 1.0;
    CHECK_NOTHROW(c.validate(g, tg));
    c.phi_q.pop_back();
    CHECK_THROWS(c.validate(g, tg));
}

// One reverse step against a dense solve of the same equations written
// directly in p (q = -Lap p substituted), without the N splitting.
TEST_CASE("one reverse step matches a dense solve") {
    Grid g(4, 4, 1.5, 1.0);
    TimeGrid tg(0.1, 1);
    PhysParams par;
    par.gamma = 0.7;
    par.b = 1.3;
    par.kappa1 = 0.8;
    par.kappa2 = 0.6;
    par.lambda = 0.9;
    Potential pot{potential::ConcavePart{0.0, 1.0}, potential::LogQuench{0.4}};

    std::mt19937_64 rng(3);
    ProblemData d{make_series(g, tg), testutil::random_field(g, rng, 0.5), testutil::random_field(g, rng, 0.3),
                  testutil::random_field(g, rng, 0.3)};
    TimeSeries u = make_series(g, tg);
    u[1] = testutil::random_field(g, rng);
    const auto st = solve_state(par, d, u, pot, tg);

    CostSpec c = CostSpec::zeros(g, tg);
    c.beta = {1.0, 0.5, 0.3, 0.2, 0.7, 0.4};
    for (auto* s : {&c.phi_q, &c.w_q, &c.wprime_q})
        for (auto& f : *s) f = testutil::random_field(g, rng);
    c.phi_omega = testutil::random_field(g, rng);
    c.w_omega = testutil::random_field(g, rng);
    c.wprime_omega = testutil::random_field(g, rng);

    const auto adj = solve_adjoint(st, c, par, pot);
    const auto src = build_sources(st, c, par);

    const double dt = tg.dt();
    const int n = static_cast<int>(g.size());
    const Eigen::MatrixXd L = testutil::dense_laplacian(g);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd r1 = testutil::to_eigen(adj.r[1]);
    const Eigen::VectorXd p1 = testutil::to_eigen(adj.p[1]);
    const Eigen::VectorXd q1 = -L * p1;

    // r: (r0 - r1)/dt - Lap(kappa1 r0 + kappa2 s0) - b q1 = f, s0 = dt/2 (r0 + r1)
    const double kr = par.kappa1 + 0.5 * par.kappa2 * dt;
    const Eigen::MatrixXd A = I / dt - kr * L;
    const Eigen::VectorXd rr =
        r1 / dt + 0.5 * par.kappa2 * dt * (L * r1) + par.b * q1 + testutil::to_eigen(src.f_adj[0]);
    const Eigen::VectorXd r0 = A.lu().solve(rr);

    // p: (p0 - p1)/dt - Lap q0 + gamma p0 + G'' q0 + F'' q1 + lambda (r0 - r1)/dt = g
    Eigen::VectorXd gpp(n), fpp(n);
    for (int k = 0; k < n; ++k) {
        gpp[k] = potential::convex_second(pot.convex, st.phi[0][k]);
        fpp[k] = pot.concave.second(st.phi[0][k]);
    }
    const Eigen::MatrixXd M = (1.0 / dt + par.gamma) * I + L * L - gpp.asDiagonal() * L;
    const Eigen::VectorXd pr = p1 / dt - par.lambda * (r0 - r1) / dt + testutil::to_eigen(src.g_adj[0]) -
                               fpp.cwiseProduct(q1);
    const Eigen::VectorXd p0 = M.lu().solve(pr);

    CHECK((testutil::to_eigen(adj.r[0]) - r0).lpNorm<Eigen::Infinity>() < 1e-10 * (1 + r0.lpNorm<Eigen::Infinity>()));
    CHECK((testutil::to_eigen(adj.p[0]) - p0).lpNorm<Eigen::Infinity>() < 1e-9 * (1 + p0.lpNorm<Eigen::Infinity>()));
    const Eigen::VectorXd q0 = -L * p0;
    CHECK((testutil::to_eigen(adj.q[0]) - q0).lpNorm<Eigen::Infinity>() < 1e-9 * (1 + q0.lpNorm<Eigen::Infinity>()));
    const Eigen::VectorXd s0 = 0.5 * dt * (r0 + r1);
    CHECK((testutil::to_eigen(adj.s[0]) - s0).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("structure of the adjoint trajectory") {
    auto p = testutil::bench_problem(16, 16, 0.3);
    const auto st = bench_state(p);
    const auto adj = solve_adjoint(st, p.cost, p.params, p.potential);
    const double dt = p.time.dt();

    for (int n = 0; n <= p.time.nt; ++n) {
        CHECK(std::abs(mean_value(adj.q[n])) < 1e-12 * (1 + adj.q[n].norm_inf()));
        CHECK(max_diff(adj.q[n], laplacian_neumann(adj.p[n]) * -1.0) < 1e-8 * (1 + adj.q[n].norm_inf()));
    }
    for (int n = 0; n < p.time.nt; ++n) {
        Field ds = adj.s[n] - adj.s[n + 1];
        CHECK(max_diff(ds, (adj.r[n] + adj.r[n + 1]) * (0.5 * dt)) < 1e-13 * (1 + adj.s[n].norm_inf()));
    }
    const TimeSeries nq = reduced_nq_diagnostics(adj);
    for (int n = 0; n <= p.time.nt; ++n)
        CHECK(max_diff(nq[n], remove_mean(adj.p[n])) < 1e-9 * (1 + adj.p[n].norm_inf()));

    SUBCASE("linear in the cost data") {
        CostSpec c2 = p.cost;
        for (auto& b : c2.beta) b *= 2.0;
        const auto adj2 = solve_adjoint(st, c2, p.params, p.potential);
        for (int n = 0; n <= p.time.nt; ++n) {
            CHECK(max_diff(adj2.p[n], adj.p[n] * 2.0) < 1e-8 * (1 + adj.p[n].norm_inf()));
            CHECK(max_diff(adj2.r[n], adj.r[n] * 2.0) < 1e-8 * (1 + adj.r[n].norm_inf()));
        }
    }

    SUBCASE("nq diagnostics reject a broken split") {
        auto bad = adj;
        bad.p[3][5] += 1.0;
        CHECK_THROWS_AS(reduced_nq_diagnostics(bad), Error);
        bad = adj;
        bad.q[2] += 1.0;
        CHECK_THROWS_AS(reduced_nq_diagnostics(bad), NonZeroMean);
    }
}

TEST_CASE("mean-p identity") {
    std::vector<double> worst;
    for (int nt : {32, 64, 128}) {
        auto p = testutil::bench_problem(16, nt, 0.3);
        const auto st = bench_state(p);
        const auto adj = solve_adjoint(st, p.cost, p.params, p.potential);
        const auto res = mean_p_identity_residual(adj, st, p.cost, p.params, p.potential);
        REQUIRE(res.size() == static_cast<std::size_t>(nt + 1));
        CHECK(std::abs(res[nt]) <= 1e-12);
        double m = 0.0;
        for (double v : res) m = std::max(m, std::abs(v));
        worst.push_back(m);
    }
    for (std::size_t k = 0; k + 1 < worst.size(); ++k) {
        const double ratio = worst[k] / worst[k + 1];
        CHECK(ratio >= 1.5);
        CHECK(ratio <= 2.5);
    }

    SUBCASE("zero adjoint") {
        auto p = testutil::bench_problem(8, 8, 0.5);
        CostSpec c = CostSpec::zeros(p.grid, p.time);
        c.nu = 1.0;
        const auto st = bench_state(p);
        const auto adj = solve_adjoint(st, c, p.params, p.potential);
        for (double v : mean_p_identity_residual(adj, st, c, p.params, p.potential)) CHECK(v == 0.0);
    }
}

TEST_CASE("slackness") {
    auto p = testutil::bench_problem(16, 16, 0.3);
    const auto st = bench_state(p);
    const auto adj = solve_adjoint(st, p.cost, p.params, p.potential);
    const double s = slackness_value(adj, st, p.potential);
    CHECK(s > 0.0);

    Potential half = p.potential;
    half.convex = potential::LogQuench{0.15};
    CHECK(slackness_value(adj, st, half) == doctest::Approx(0.5 * s).epsilon(1e-15));

    CostSpec c = CostSpec::zeros(p.grid, p.time);
    c.nu = 1.0;
    const auto zero = solve_adjoint(st, c, p.params, p.potential);
    CHECK(slackness_value(zero, st, p.potential) == 0.0);

    Potential obst = p.potential;
    obst.convex = potential::ObstaclePenalty{0.0, 1e-3};
    CHECK_THROWS_AS(slackness_value(adj, st, obst), DomainError);
}

TEST_CASE("obstacle mode adjoint uses the penalty curvature") {
    auto p = testutil::bench_problem(16, 16, 0.3);
    p.potential.convex = potential::ObstaclePenalty{0.0, 1e-3};
    const auto st = bench_state(p);
    const auto adj = solve_adjoint(st, p.cost, p.params, p.potential);
    for (int n = 0; n <= p.time.nt; ++n) CHECK(std::isfinite(adj.p[n].norm_inf()));
    const Field d = adjoint_coefficient(p.potential, st.phi[p.time.nt]);
    for (std::size_t k = 0; k < d.size(); ++k) {
        const double phi = st.phi[p.time.nt][k];
        const double expect = (std::abs(phi) > 1.0 ? 1e3 : 0.0) - 2.0;
        CHECK(d[k] == doctest::Approx(expect));
    }
}
