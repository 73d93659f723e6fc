#include "bench.hpp"
#include "quench/quench_study.hpp"

#include <doctest.h>

#include <cmath>

using namespace quench;

TEST_CASE("schedule construction and validation") {
    const QuenchSchedule s = QuenchSchedule::geometric(0.1, 4);
    REQUIRE(s.alphas.size() == 4);
    CHECK(s.alphas[0] == 0.1);
    CHECK(s.alphas[3] == doctest::Approx(0.0125).epsilon(1e-15));
    CHECK_NOTHROW(s.validate());

    CHECK_THROWS_AS(QuenchSchedule{}.validate(), Error);
    CHECK_THROWS_AS((QuenchSchedule{{0.1, 0.1}}).validate(), Error);
    CHECK_THROWS_AS((QuenchSchedule{{0.05, 0.1}}).validate(), Error);
    CHECK_THROWS_AS((QuenchSchedule{{1.5, 0.1}}).validate(), Error);
    CHECK_THROWS_AS((QuenchSchedule{{0.1, 0.0}}).validate(), Error);
}

TEST_CASE("log-log fit recovers exact power laws") {
    std::vector<double> x = {0.05, 0.025, 0.0125, 0.00625}, y;
    for (double v : x) y.push_back(3.0 * std::pow(v, 0.5));
    LogFit f = fit_loglog(x, y);
    CHECK(f.slope == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::exp(f.intercept) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(f.residual < 1e-12);
    CHECK(f.points == 4);

    y.clear();
    for (double v : x) y.push_back(0.7 * v);
    f = fit_loglog(x, y);
    CHECK(f.slope == doctest::Approx(1.0).epsilon(1e-12));

    // one perturbed point gives a positive residual
    y[1] *= 2.0;
    CHECK(fit_loglog(x, y).residual > 0.1);

    CHECK_THROWS_AS(fit_loglog({1.0}, {1.0}), Error);
    CHECK_THROWS_AS(fit_loglog({1.0, 2.0}, {1.0, -1.0}), Error);
    CHECK_THROWS_AS(fit_loglog({2.0, 2.0}, {1.0, 3.0}), Error);
    CHECK_THROWS_AS(fit_loglog({1.0, 2.0}, {1.0}), Error);
}

TEST_CASE("warm start is projection") {
    const Grid g(4, 4);
    const TimeGrid tg(1.0, 3);
    const ControlBox box = constant_box(g, tg, -0.5, 0.5);

    TimeSeries first = warm_start(std::nullopt, box, g, tg);
    for (const auto& f : first) CHECK(f.norm_inf() == 0.0);

    const ControlBox shifted = constant_box(g, tg, 0.2, 0.5);
    first = warm_start(std::nullopt, shifted, g, tg);
    for (const auto& f : first) CHECK(mean_value(f) == doctest::Approx(0.2));

    TimeSeries u = make_series(g, tg, 0.3);
    u[1](2, 2) = -0.1;
    const TimeSeries same = warm_start(u, box, g, tg);
    for (std::size_t n = 0; n < u.size(); ++n) CHECK((same[n] - u[n]).norm_inf() == 0.0);

    u[2](0, 0) = 3.0;
    u[0](1, 3) = -7.0;
    const TimeSeries c = warm_start(u, box, g, tg);
    CHECK(c[2](0, 0) == 0.5);
    CHECK(c[0](1, 3) == -0.5);
}

TEST_CASE("state distance") {
    const ControlProblem p = testutil::bench_problem(8, 8, 0.2);
    const TimeSeries u = testutil::bench_control(p);
    const StateTrajectory a = solve_state(p.params, p.data, u, p.potential, p.time, p.solver);

    const StateDistance zero = state_distance(a, a);
    CHECK(zero.combined() == 0.0);

    // a uniform offset in phi at one node: dual norm is the mean, V norm the L2 part
    StateTrajectory b = a;
    b.phi[p.time.nt] += 0.01;
    const StateDistance d = state_distance(a, b);
    CHECK(d.phi_dual_max == doctest::Approx(0.01).epsilon(1e-10));
    const double l2 = 0.01 * std::sqrt(p.grid.area());
    CHECK(d.phi_l2v == doctest::Approx(std::sqrt(p.time.weight(p.time.nt)) * l2).epsilon(1e-10));
    CHECK(d.w() == 0.0);

    StateTrajectory c = a;
    c.w[2] += 0.02;
    const StateDistance dw = state_distance(a, c);
    CHECK(dw.phi() == 0.0);
    CHECK(dw.w_c0v == doctest::Approx(0.02 * std::sqrt(p.grid.area())).epsilon(1e-10));
    CHECK(dw.w_h1h == doctest::Approx(std::sqrt(p.time.dt()) * 0.02 * std::sqrt(p.grid.area())).epsilon(1e-10));

    const ControlProblem q = testutil::bench_problem(8, 4, 0.2);
    const StateTrajectory other = solve_state(q.params, q.data, make_series(q.grid, q.time), q.potential, q.time);
    CHECK_THROWS_AS(state_distance(a, other), ShapeMismatch);
}

TEST_CASE("rate study on a small problem") {
    ControlProblem p = testutil::bench_problem(12, 16, 0.1);
    const TimeSeries u = testutil::bench_control(p);

    SUBCASE("repeated alpha is rejected") {
        CHECK_THROWS_AS(state_rate_study(p, u, QuenchSchedule{{0.1, 0.1}}), Error);
    }
    SUBCASE("pairs, separation and reference") {
        RateOptions o;
        o.reference_eps = 1e-3;
        const RateReport rep = state_rate_study(p, u, QuenchSchedule::geometric(0.2, 3), o);
        REQUIRE(rep.pairs.size() == 2);
        REQUIRE(rep.separation.size() == 3);
        REQUIRE(rep.reference.size() == 3);
        CHECK(rep.pairs[0].alpha_i == 0.2);
        CHECK(rep.pairs[0].alpha_j == 0.1);
        for (const auto& s : rep.separation) CHECK(s.margin() > 0.0);
        for (const auto& pe : rep.pairs) {
            CHECK_FALSE(pe.inactive);
            CHECK(pe.dist.combined() > 0.0);
        }
        REQUIRE(rep.combined.has_value());
        CHECK(rep.combined->points == 2);
        CHECK(rep.combined->residual < 1e-12); // two points lie on a line
        CHECK(*rep.reference_eps == 1e-3);
        // the reference distance shrinks as alpha decreases
        CHECK(rep.reference[2].dist.combined() < rep.reference[0].dist.combined());
    }
    SUBCASE("pairs below the inactive threshold are not fitted") {
        RateOptions o;
        o.inactive_tol = 1e9;
        const RateReport rep = state_rate_study(p, u, QuenchSchedule::geometric(0.2, 3), o);
        for (const auto& pe : rep.pairs) CHECK(pe.inactive);
        CHECK_FALSE(rep.combined.has_value());
    }
    SUBCASE("solver failure names the alpha") {
        p.solver.max_newton = 0;
        try {
            state_rate_study(p, u, QuenchSchedule::geometric(0.2, 2));
            FAIL("expected SolveError");
        } catch (const SolveError& e) {
            CHECK(std::string(e.what()).find("alpha = ") == 0);
        }
    }
}

TEST_CASE("continuation with a single alpha anchored at its own optimum") {
    const ControlProblem base = testutil::bench_problem(8, 8, 0.1);
    OptimizerConfig cfg;
    cfg.stat_tol = 1e-8;
    const OptimizeResult opt = optimize(base, cfg);

    const QuenchSchedule one{{0.1}};
    const ContinuationReport rep = control_continuation(base, one, opt.u, opt.eval.cost, cfg, "self");
    REQUIRE(rep.steps.size() == 1);
    const ContinuationStep& s = rep.steps[0];
    CHECK(s.error.empty());
    CHECK(s.distance < 1e-6);
    CHECK(s.gap < 1e-7);
    CHECK(rep.anchor_source == "self");
    CHECK(rep.control_distances.empty());
    CHECK(rep.first_ok() == &rep.steps[0]);
    CHECK(rep.last_ok() == &rep.steps[0]);
}

TEST_CASE("continuation records failures and keeps going") {
    ControlProblem base = testutil::bench_problem(8, 8, 0.1);
    OptimizerConfig cfg;
    cfg.max_iters = 5;
    const TimeSeries anchor = make_series(base.grid, base.time);
    // an anchor on the wrong time grid is rejected up front
    CHECK_THROWS(control_continuation(base, QuenchSchedule{{0.1}}, TimeSeries(3, Field(base.grid)), 0.0, cfg, "x"));

    base.solver.max_newton = 0;
    const ContinuationReport rep =
        control_continuation(base, QuenchSchedule::geometric(0.1, 2), anchor, 0.0, cfg, "zero");
    REQUIRE(rep.steps.size() == 2);
    for (const auto& s : rep.steps) CHECK(s.error.find("alpha = ") == 0);
    CHECK(rep.first_ok() == nullptr);
    CHECK(rep.last_ok() == nullptr);
}

TEST_CASE("obstacle anchor") {
    const ControlProblem base = testutil::bench_problem(8, 8, 0.1);
    OptimizerConfig cfg;
    cfg.max_iters = 30;
    const Anchor a = obstacle_anchor(base, 1e-3, cfg);
    CHECK(a.source.find("eps = 0.001") != std::string::npos);
    CHECK(a.cost == a.result.eval.cost);
    CHECK(a.result.eval.state.obstacle);
    ControlProblem obst = base;
    obst.potential.convex = potential::ObstaclePenalty{0.0, 1e-3};
    CHECK(a.cost <= evaluate(obst, make_series(base.grid, base.time), false).cost + 1e-12);
}
