#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "nlbath/grid.hpp"
#include "oracles.hpp"

using namespace nlbath::model;

TEST_CASE("trapezoid grid: two points span (0, cutoff)") {
    const FrequencyGrid g = build_grid(QuadratureRule::Trapezoid, 2, 1.0);
    REQUIRE(g.points.size() == 2);
    CHECK(g.points[0] > 0.0);
    CHECK(g.points[0] < 1e-12);
    CHECK(g.points[1] == 1.0);
    double wsum = 0.0;
    for (double w : g.weights) wsum += w;
    CHECK(std::abs(wsum - 1.0) < 1e-12);
}

TEST_CASE("gauss-legendre weights integrate constants exactly") {
    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, 5, 10.0);
    double wsum = 0.0;
    for (double w : g.weights) wsum += w;
    CHECK(std::abs(wsum - 10.0) < 1e-12 * 10.0);
}

TEST_CASE("gauss-legendre vs adaptive quadrature oracle on w e^-w") {
    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, 64, 20.0);
    const auto f = [](double w) { return w * std::exp(-w); };
    const double got = g.integrate(f);
    const double oracle = oracles::integrate(f, 0.0, 20.0, 1e-14);
    // analytic: 1 - 21 e^{-20}
    const double analytic = 1.0 - 21.0 * std::exp(-20.0);
    CHECK(oracles::rel_err(oracle, analytic) < 1e-12);
    CHECK(oracles::rel_err(got, analytic) < 1e-12);
}

TEST_CASE("quadrature exactness up to the rule degree") {
    // GL with n nodes is exact for polynomials of degree 2n-1
    const int n = 8;
    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, n, 2.0);
    const int degree = 2 * n - 1;
    const double got = g.integrate([&](double w) { return std::pow(w, degree); });
    const double want = std::pow(2.0, degree + 1) / (degree + 1);
    CHECK(oracles::rel_err(got, want) < 1e-12);

    // composite trapezoid is exact for linear integrands
    const FrequencyGrid t = build_grid(QuadratureRule::Trapezoid, 9, 2.0);
    const double lin = t.integrate([](double w) { return 3.0 * w + 1.0; });
    CHECK(oracles::rel_err(lin, 8.0) < 1e-12);
}

TEST_CASE("grid invariants") {
    for (auto rule : {QuadratureRule::GaussLegendre, QuadratureRule::Trapezoid}) {
        const FrequencyGrid g = build_grid(rule, 33, 7.5);
        REQUIRE(g.points.size() == 33);
        REQUIRE(g.weights.size() == 33);
        for (std::size_t k = 0; k < g.size(); ++k) {
            CHECK(g.points[k] > 0.0);
            CHECK(g.weights[k] > 0.0);
            if (k) CHECK(g.points[k] > g.points[k - 1]);
        }
    }
}

TEST_CASE("grid argument validation") {
    CHECK_THROWS_AS(build_grid(QuadratureRule::GaussLegendre, 1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(build_grid(QuadratureRule::Trapezoid, 8, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(build_grid(QuadratureRule::Trapezoid, 8, -2.0), std::invalid_argument);
    CHECK_THROWS_AS(build_grid("nonsense", 8, 1.0), std::invalid_argument);
}

TEST_CASE("refinement improves an oscillatory integral") {
    const auto f = [](double w) { return std::sin(3.0 * w) * std::exp(-0.3 * w); };
    const double ref = oracles::integrate(f, 0.0, 12.0, 1e-14);
    double prev = 1e9;
    for (int n : {16, 32, 64}) {
        const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, n, 12.0);
        const double err = std::abs(g.integrate(f) - ref);
        CHECK(err < prev);
        prev = err;
    }
    CHECK(prev < 1e-10);
}
