#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "nlbath/atom.hpp"
#include "oracles.hpp"

using namespace nlbath;
using namespace nlbath::model;
using namespace nlbath::atom;

namespace {

AtomParams demo_atom(double w0 = 2.0) {
    AtomParams a;
    a.omega0 = w0;
    a.dipole = Eigen::Vector3cd(1.0, 0.0, 0.0);
    a.mass = 1.0;
    return a;
}

} // namespace

TEST_CASE("gamma_linear: zero coupling and the closed-form isotropic value") {
    const AtomParams a = demo_atom();
    CHECK(gamma_linear(a, Coupling1::zero()) == 0.0);

    const Envelope env = Envelope::lorentzian(0.35, 2.0, 0.5);
    const Coupling1 c1 = Coupling1::isotropic(env);
    const double g_at_w0 = env(a.omega0);
    const double want = std::numbers::pi * a.mass * a.mass * a.omega0 * g_at_w0 * g_at_w0;  // |d| = 1
    CHECK(gamma_linear(a, c1) == Catch::Approx(want).epsilon(1e-14));
}

TEST_CASE("gamma_linear: identity transform changes nothing, seeded transforms stay within 1e-12") {
    const AtomParams a = demo_atom();
    Eigen::Matrix3d aniso;
    aniso << 1.0, 0.2, 0.0, 0.1, 0.9, 0.1, 0.0, 0.1, 1.3;
    const Coupling1 c1 = Coupling1::anisotropic(Envelope::lorentzian(0.4, 2.0, 0.5), aniso);
    const double g0 = gamma_linear(a, c1);

    const Coupling1 cid = apply_orthogonal(c1, OrthogonalTransform{});
    CHECK(gamma_linear(a, cid) == g0);

    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
        const Coupling1 ct = apply_orthogonal(c1, random_orthogonal(seed));
        CHECK(std::abs(gamma_linear(a, ct) - g0) / g0 < 1e-12);
    }
}

TEST_CASE("gamma_linear: omega0 outside a tabulated range is rejected") {
    CouplingTable1 tbl;
    tbl.omegas = {0.5, 1.0};
    tbl.values = {Eigen::Matrix3d::Identity(), Eigen::Matrix3d::Identity()};
    const Coupling1 c = Coupling1::from_table(tbl);
    CHECK_THROWS_AS(gamma_linear(demo_atom(2.0), c), std::invalid_argument);
}

TEST_CASE("gamma_nonlinear: zero coupling gives zero") {
    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, 64, 4.0);
    CHECK(gamma_nonlinear(demo_atom(), Coupling2::zero(), g) == 0.0);
}

TEST_CASE("gamma_nonlinear: narrow peak at (w0/2, w0/2) matches the analytic limit") {
    const AtomParams a = demo_atom(2.0);
    const double sigma = 0.03;
    const Envelope env = Envelope::gaussian(1.0, a.omega0 / 2.0, sigma);
    const Coupling2 c2 = Coupling2::separable(structure_ident(), env, env);

    // oracle: w = int_0^w0 Phi(w) dw with Phi the dipole-contracted density
    const auto phi = [&](double w) {
        const Tensor3 f = c2.eval(w, a.omega0 - w);
        double s = 0.0;
        for (int j1 = 0; j1 < 3; ++j1)
            for (int j2 = 0; j2 < 3; ++j2) {
                std::complex<double> z = 0.0;
                for (int i = 0; i < 3; ++i) z += a.dipole[i] * f(i, j1, j2);
                s += std::norm(z);
            }
        return s;
    };
    const double weight = oracles::integrate(phi, 1e-12, a.omega0 - 1e-12, 1e-15, 48);
    const double want = std::numbers::pi * a.mass * a.mass * a.omega0 * a.omega0 * weight * 4.0 / (a.omega0 * a.omega0);

    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, 1024, 4.0);
    const double got = gamma_nonlinear(a, c2, g);
    CHECK(oracles::rel_err(got, want) < 1e-3);
}

TEST_CASE("gamma_nonlinear: orthogonal transform invariance") {
    const AtomParams a = demo_atom(2.0);
    const Envelope env = Envelope::gaussian(1.0, 1.0, 0.4);
    const Coupling2 c2 = Coupling2::separable(structure_seeded(6), env, env);
    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, 256, 4.0);
    const double g0 = gamma_nonlinear(a, c2, g);
    const Coupling2 ct = apply_orthogonal(c2, random_orthogonal(12));
    CHECK(std::abs(gamma_nonlinear(a, ct, g) - g0) / g0 < 1e-10);
}

TEST_CASE("gamma_nonlinear: endpoint divergence is detected") {
    // a coupling that stays finite at w -> 0 makes the integrand blow up as 1/w
    Coupling2 bad = Coupling2::from_function(
        [](double, double) {
            Tensor3 f{};
            for (int i = 0; i < 3; ++i) f(i, i, i) = 1.0;
            return f;
        },
        "flat");
    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, 64, 4.0);
    CHECK_THROWS_AS(gamma_nonlinear(demo_atom(), bad, g), divergent_integrand_error);
}

TEST_CASE("markov form: rho22(10) with Gamma = 0.1 equals 1/e within 1e-12") {
    const AtomParams a = demo_atom(2.0);
    // scale the envelope so that gamma_linear is exactly 0.1
    const Envelope base = Envelope::lorentzian(1.0, 2.0, 0.5);
    const Coupling1 c_unit = Coupling1::isotropic(base);
    const double g_unit = gamma_linear(a, c_unit);
    const double amp = std::sqrt(0.1 / g_unit);
    const Coupling1 c1 = Coupling1::isotropic(Envelope::lorentzian(amp, 2.0, 0.5));
    REQUIRE(std::abs(gamma_linear(a, c1) - 0.1) < 1e-15);

    const FrequencyGrid grid = build_grid(QuadratureRule::GaussLegendre, 64, 12.0);
    const MasterSeries s = integrate_master_equation(a, c1, nullptr, grid, 0.01, 1000, MasterForm::Markov);
    CHECK(std::abs(s.rho.back().r22.real() - std::exp(-1.0)) < 1e-12);
    CHECK(s.rho.back().r11.real() == Catch::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("zero couplings: the excited state never decays") {
    const AtomParams a = demo_atom();
    const FrequencyGrid grid = build_grid(QuadratureRule::GaussLegendre, 32, 8.0);
    const MasterSeries s =
        integrate_master_equation(a, Coupling1::zero(), nullptr, grid, 0.01, 500, MasterForm::FiniteTime);
    for (const auto& r : s.rho) {
        CHECK(r.r22.real() == 1.0);
        CHECK(r.r11.real() == 0.0);
        CHECK(std::abs(r.r12) == 0.0);
    }
}

TEST_CASE("finite-time integration: fitted decay matches gamma_linear within 2%") {
    const AtomParams a = demo_atom(2.0);
    const Coupling1 c1 = Coupling1::isotropic(Envelope::lorentzian(0.35, 2.0, 1.0));
    const FrequencyGrid grid = build_grid(QuadratureRule::GaussLegendre, 512, 12.0);
    const double gamma = gamma_linear(a, c1);
    const double T = 30.0 / a.omega0;
    const double h = 0.005;
    const MasterSeries s = integrate_master_equation(a, c1, nullptr, grid, h, static_cast<std::size_t>(T / h),
                                                     MasterForm::FiniteTime);
    const FitResult fit = fit_decay_rate(s, 5.0 / a.omega0, T);
    CHECK(std::abs(fit.rate - gamma) / gamma < 0.02);

    // conservation at the assembled-RHS level and hermiticity over the run
    CHECK(s.diag.max_conservation_defect < 1e-14);
    CHECK(s.diag.max_hermiticity_defect < 1e-10);
    CHECK(s.diag.max_trace_drift < 1e-8);
}

TEST_CASE("finite-time integration with f2: coherence drive switches on") {
    const AtomParams a = demo_atom(2.0);
    const Coupling1 c1 = Coupling1::isotropic(Envelope::lorentzian(0.3, 2.0, 0.8));
    const Envelope e2 = Envelope::gaussian(1.0, 1.0, 0.4);
    const Coupling2 c2 = Coupling2::separable(0.05 * structure_ident(), e2, e2);
    const FrequencyGrid grid = build_grid(QuadratureRule::GaussLegendre, 96, 6.0);
    const MasterSeries s = integrate_master_equation(a, c1, &c2, grid, 0.01, 400, MasterForm::FiniteTime);
    double max_coh = 0.0;
    for (const auto& r : s.rho) max_coh = std::max(max_coh, std::abs(r.r12));
    CHECK(max_coh > 0.0);
    CHECK(s.diag.max_conservation_defect < 1e-14);
    CHECK(s.diag.max_hermiticity_defect < 1e-10);
}

TEST_CASE("resolution guard on the master-equation step") {
    const AtomParams a = demo_atom(2.0);
    const Coupling1 c1 = Coupling1::isotropic(Envelope::lorentzian(0.3, 2.0, 0.5));
    const FrequencyGrid grid = build_grid(QuadratureRule::GaussLegendre, 64, 40.0);
    CHECK_THROWS_AS(integrate_master_equation(a, c1, nullptr, grid, 0.1, 10, MasterForm::FiniteTime),
                    resolution_error);
}

TEST_CASE("fit_decay_rate: exact exponential, constant series, error paths") {
    std::vector<double> t, r;
    for (int i = 0; i <= 200; ++i) {
        t.push_back(0.05 * i);
        r.push_back(std::exp(-0.3 * 0.05 * i));
    }
    const FitResult fit = fit_decay_rate(t, r, 1.0, 9.0);
    CHECK(std::abs(fit.rate - 0.3) < 1e-10);
    CHECK(fit.residual < 1e-12);

    std::vector<double> c(t.size(), 0.7);
    CHECK(fit_decay_rate(t, c, 1.0, 9.0).rate == Catch::Approx(0.0).margin(1e-15));

    std::vector<double> bad = r;
    bad[100] = 0.0;
    CHECK_THROWS_AS(fit_decay_rate(t, bad, 1.0, 9.0), std::invalid_argument);
    CHECK_THROWS_AS(fit_decay_rate(t, r, 100.0, 101.0), std::invalid_argument);
}

TEST_CASE("gamma_report: additivity is bitwise and invariance tight") {
    const AtomParams a = demo_atom(2.0);
    const Coupling1 c1 = Coupling1::isotropic(Envelope::lorentzian(0.4, 2.0, 0.5));
    const FrequencyGrid grid = build_grid(QuadratureRule::GaussLegendre, 128, 6.0);

    const GammaReport lin_only = gamma_report(a, c1, nullptr, grid);
    CHECK(lin_only.rates.nonlinear == 0.0);
    CHECK(lin_only.rates.total == lin_only.rates.linear);
    CHECK(lin_only.invariance_max_dev < 1e-10);

    const Envelope e2 = Envelope::gaussian(1.0, 1.0, 0.4);
    const Coupling2 c2 = Coupling2::separable(0.2 * structure_seeded(4), e2, e2);
    const GammaReport both = gamma_report(a, c1, &c2, grid);
    CHECK(both.rates.nonlinear > 0.0);
    CHECK(both.rates.total == both.rates.linear + both.rates.nonlinear);
    CHECK(both.invariance_max_dev < 1e-10);
}
