#include "doctest.h"
#include "test_util.hpp"

#include "quench/grid.hpp"
#include "quench/pcg.hpp"
#include "quench/spectral.hpp"

#include <cmath>
#include <random>

using namespace quench;
using testutil::cosine_mode;
using testutil::random_field;
using testutil::random_zero_mean;

namespace {

double lam_1d(double h, double l, int k) { return 2.0 / (h * h) * (1.0 - std::cos(M_PI * k * h / l)); }

} // namespace

TEST_CASE("grid and time grid basics") {
    Grid g(8, 4, 2.0, 1.0);
    CHECK(g.hx() == doctest::Approx(0.25));
    CHECK(g.hy() == doctest::Approx(0.25));
    CHECK(g.size() == 32u);
    CHECK(g.index(3, 2) == 19u);
    CHECK_THROWS_AS(Grid(1, 4), Error);
    CHECK_THROWS_AS(Grid(4, 4, 0.0, 1.0), Error);

    TimeGrid tg(1.0, 4);
    CHECK(tg.dt() == 0.25);
    CHECK(tg.t(4) == 1.0);
    CHECK(tg.weight(0) == 0.125);
    CHECK(tg.weight(2) == 0.25);
    CHECK_THROWS_AS(TimeGrid(1.0, 0), Error);
}

TEST_CASE("laplacian kills constants and has zero mean") {
    Grid g(12, 9, 1.3, 0.7);
    CHECK(laplacian_neumann(Field(g, 3.7)).norm_inf() < 1e-10);
    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 5; ++rep) {
        const Field f = random_field(g, rng);
        CHECK(std::abs(mean_value(laplacian_neumann(f))) < 1e-13 * (1.0 / (g.hx() * g.hx())));
    }
}

TEST_CASE("laplacian matches dense assembly and cosine eigenvalues") {
    Grid g(8, 8, 1.0, 2.0);
    const auto L = testutil::dense_laplacian(g);
    std::mt19937_64 rng(2);
    const Field f = random_field(g, rng);
    const Field lf = laplacian_neumann(f);
    const Eigen::VectorXd ref = L * testutil::to_eigen(f);
    CHECK((testutil::to_eigen(lf) - ref).cwiseAbs().maxCoeff() < 1e-11);

    // symmetric, negative semidefinite, kernel = constants
    CHECK((L - L.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L);
    const auto ev = es.eigenvalues();
    CHECK(ev.maxCoeff() < 1e-10);
    int zeros = 0;
    for (int k = 0; k < ev.size(); ++k)
        if (std::abs(ev[k]) < 1e-10) ++zeros;
    CHECK(zeros == 1);

    const Field c = cosine_mode(g, 1, 0);
    const double lam = lam_1d(g.hx(), g.lx, 1);
    CHECK(testutil::max_diff(laplacian_neumann(c), c * -lam) < 1e-11);
    const Field c2 = cosine_mode(g, 3, 2);
    const double lam2 = lam_1d(g.hx(), g.lx, 3) + lam_1d(g.hy(), g.ly, 2);
    CHECK(testutil::max_diff(laplacian_neumann(c2), c2 * -lam2) < 1e-10);

    const auto sp = Spectral::for_grid(g);
    CHECK(sp->eigenvalue(3, 2) == doctest::Approx(lam2).epsilon(1e-13));
    CHECK(sp->eigenvalue(0, 0) == 0.0);
}

TEST_CASE("mean value") {
    Grid g(10, 6, 3.0, 2.0);
    CHECK(mean_value(Field(g, -1.25)) == doctest::Approx(-1.25));
    CHECK(std::abs(mean_value(cosine_mode(g, 1, 0))) < 1e-13);
    std::mt19937_64 rng(3);
    const Field a = random_field(g, rng), b = random_field(g, rng);
    CHECK(mean_value(a + b) == doctest::Approx(mean_value(a) + mean_value(b)).epsilon(1e-14));
}

TEST_CASE("inverse Neumann Laplacian") {
    Grid g(16, 12, 1.0, 0.75);
    CHECK(inv_neumann_laplacian(Field(g)).norm_inf() == 0.0);

    const Field c = cosine_mode(g, 2, 1);
    const double lam = lam_1d(g.hx(), g.lx, 2) + lam_1d(g.hy(), g.ly, 1);
    CHECK(testutil::max_diff(inv_neumann_laplacian(c), c * (1.0 / lam)) < 1e-13);

    CHECK_THROWS_AS(inv_neumann_laplacian(Field(g, 1.0)), NonZeroMean);

    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 5; ++rep) {
        const Field z0 = random_field(g, rng);
        const Field back = inv_neumann_laplacian(laplacian_neumann(z0) * -1.0);
        CHECK(testutil::max_diff(back, remove_mean(z0)) < 1e-10);
    }

    // cross-check against conjugate gradients on -Lap
    const Field rhs = random_zero_mean(g, rng);
    auto op = [](const Field& x) { return laplacian_neumann(x) * -1.0; };
    auto id = [](const Field& x) { return x; };
    const PcgResult cg = pcg(op, id, rhs, Field(g), 1e-13, 0.0, 5000);
    REQUIRE(cg.converged);
    const Field z = inv_neumann_laplacian(rhs);
    CHECK(testutil::max_diff(remove_mean(cg.x), z) <= 1e-9 * z.norm_inf());

    // dense oracle with the constant mode pinned
    Grid s(6, 5, 1.0, 1.4);
    const Field r2 = random_zero_mean(s, rng);
    Eigen::MatrixXd A = -testutil::dense_laplacian(s);
    A.array() += 1.0;
    const Eigen::VectorXd zd = A.ldlt().solve(testutil::to_eigen(r2));
    CHECK((testutil::to_eigen(inv_neumann_laplacian(r2)) - zd).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("N symmetry, energy identity and dual norm") {
    Grid g(32, 24, 1.0, 1.0);
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 5; ++rep) {
        const Field psi = random_zero_mean(g, rng), zeta = random_zero_mean(g, rng);
        const Field np = inv_neumann_laplacian(psi), nz = inv_neumann_laplacian(zeta);
        CHECK(std::abs(inner(psi, nz) - inner(zeta, np)) <= 1e-10 * norm_l2(psi) * norm_l2(zeta));
        const double e = inner(psi, np);
        CHECK(std::abs(e - grad_norm_sq(np)) <= 1e-10 * e);
        CHECK(dual_norm(psi) == doctest::Approx(std::sqrt(e)).epsilon(1e-10));
    }
    CHECK(dual_norm(Field(g, -0.3)) == doctest::Approx(0.3));
    const Field c = cosine_mode(g, 1, 1);
    CHECK(dual_norm(c * 2.5) == doctest::Approx(2.5 * dual_norm(c)).epsilon(1e-13));
}

TEST_CASE("grad_norm_sq is the discrete Dirichlet form") {
    Grid g(9, 7, 1.1, 0.9);
    std::mt19937_64 rng(6);
    const Field f = random_field(g, rng);
    CHECK(grad_norm_sq(f) == doctest::Approx(-inner(laplacian_neumann(f), f)).epsilon(1e-12));
}

TEST_CASE("spectral shifted solve") {
    Grid g(10, 14, 2.0, 1.0);
    const auto sp = Spectral::for_grid(g);
    std::mt19937_64 rng(7);
    const Field rhs = random_field(g, rng);
    const Field z = sp->solve_shifted(rhs, 3.0, 0.5);
    Field back = z * 3.0;
    back.axpy(-0.5, laplacian_neumann(z));
    CHECK(testutil::max_diff(back, rhs) < 1e-12);
    const Field round = sp->backward(sp->forward(rhs));
    CHECK(testutil::max_diff(round, rhs) < 1e-14);
}

TEST_CASE("time convolutions") {
    Grid g(2, 2);
    TimeGrid tg(1.0, 4);
    TimeSeries c = make_series(g, tg, 2.0);
    const TimeSeries fw = convolve_forward(c, tg);
    const TimeSeries bw = convolve_backward(c, tg);
    for (int n = 0; n <= tg.nt; ++n) {
        CHECK(fw[n][0] == doctest::Approx(2.0 * tg.t(n)).epsilon(1e-15));
        CHECK(fw[n][0] + bw[n][0] == doctest::Approx(2.0).epsilon(1e-15));
    }
    CHECK(fw[0].norm_inf() == 0.0);
    CHECK(bw[4].norm_inf() == 0.0);

    TimeSeries lin = make_series(g, tg);
    for (int n = 0; n <= tg.nt; ++n) lin[n] += tg.t(n);
    CHECK(convolve_backward(lin, tg)[0][0] == 0.5);

    CHECK_THROWS_AS(convolve_forward(TimeSeries(3, Field(g)), tg), ShapeMismatch);
}

TEST_CASE("space-time quadrature") {
    Grid g(4, 4, 2.0, 3.0);
    TimeGrid tg(0.5, 8);
    TimeSeries one = make_series(g, tg, 1.0);
    CHECK(inner_q(one, one, tg) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(norm_l2q(make_series(g, tg, 2.0), tg) == doctest::Approx(std::sqrt(12.0)).epsilon(1e-14));
}
