#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "nlbath/coupling.hpp"
#include "nlbath/susceptibility.hpp"
#include "oracles.hpp"

using namespace nlbath;
using namespace nlbath::model;
using nlbath::chi::chi1;
using nlbath::chi::chi1_dot;
using nlbath::chi::chi2;
using nlbath::chi::chi_n;

namespace {

// isotropic narrow Gaussian peak at w1; the analytic narrow-peak limit of
// chi1 is then delta_ij c^2 sin(w1 t)/w1 with c^2 the squared-envelope weight
struct NarrowPeak {
    Coupling1 c;
    double w1;
    double weight;  // c^2 from the adaptive oracle

    NarrowPeak(double w1_, double sigma, double cutoff) : w1(w1_) {
        const Envelope env = Envelope::gaussian(1.0, w1_, sigma);
        c = Coupling1::isotropic(env);
        weight = oracles::integrate([&](double w) { return env(w) * env(w); }, 0.0, cutoff, 1e-14, 48);
    }
};

} // namespace

TEST_CASE("chi1 causality: exact zero matrix at t <= 0") {
    const Coupling1 c = Coupling1::isotropic(Envelope::lorentzian(1.0, 2.0, 0.5));
    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, 64, 12.0);
    for (double t : {-1.0, -0.3, 0.0}) {
        const Eigen::Matrix3d m = chi1(c, g, t);
        CHECK(m.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("chi1 of the zero coupling is zero") {
    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, 16, 4.0);
    CHECK(chi1(Coupling1::zero(), g, 1.3).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("chi1 narrow-peak limit: c^2 sin(w1 t)/w1") {
    const NarrowPeak peak(2.0, 0.05, 4.0);
    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, 1024, 4.0);
    const double t = 1.0;
    const Eigen::Matrix3d m = chi1(peak.c, g, t);
    const double limit = peak.weight * std::sin(peak.w1 * t) / peak.w1;
    for (int i = 0; i < 3; ++i) {
        CHECK(oracles::rel_err(m(i, i), limit) < 1e-4);
        for (int j = 0; j < 3; ++j)
            if (i != j) CHECK(m(i, j) == 0.0);
    }
}

TEST_CASE("chi1 is bitwise symmetric by construction") {
    Eigen::Matrix3d aniso;
    aniso << 1.0, 0.4, -0.2, 0.3, 2.0, 0.1, -0.5, 0.2, 0.8;
    const Coupling1 c = Coupling1::anisotropic(Envelope::lorentzian(1.0, 1.5, 0.5), aniso);
    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, 48, 8.0);
    for (double t : {0.2, 1.0, 2.5, 7.0}) {
        const Eigen::Matrix3d m = chi1(c, g, t);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) CHECK(m(i, j) == m(j, i));
    }
}

TEST_CASE("chi1_kernel: zero coupling gives all-zero samples") {
    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, 16, 4.0);
    const chi::Kernel1 k = chi::chi1_kernel(Coupling1::zero(), g, 0.1, 2.0);
    for (const auto& m : k.value) CHECK(m.cwiseAbs().maxCoeff() == 0.0);
    for (const auto& m : k.deriv) CHECK(m.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("chi1_dot(0) equals the squared-coupling weight") {
    const NarrowPeak peak(2.0, 0.05, 4.0);
    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, 1024, 4.0);
    const Eigen::Matrix3d d0 = chi1_dot(peak.c, g, 0.0);
    for (int i = 0; i < 3; ++i) CHECK(oracles::rel_err(d0(i, i), peak.weight) < 1e-6);
}

TEST_CASE("chi1_kernel derivative matches centered differences of the values") {
    // self-consistency at O(dt^2) for every shipped family
    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, 256, 10.0);
    const double dt = 0.01, T = 2.0;
    for (const Envelope& env : {Envelope::lorentzian(1.0, 2.0, 0.5), Envelope::gaussian(1.0, 2.0, 0.5),
                                Envelope::constant(0.7, 0.8, 10.0)}) {
        const Coupling1 c = Coupling1::isotropic(env);
        const chi::Kernel1 k = chi::chi1_kernel(c, g, dt, T);
        // bound max |chi1_ddot| <= int w f f dw
        const double bound = g.integrate([&](double w) { return w * env(w) * env(w); });
        double max_err = 0.0;
        for (std::size_t s = 1; s + 1 < k.value.size(); ++s) {
            const Eigen::Matrix3d fd = (k.value[s + 1] - k.value[s - 1]) / (2.0 * dt);
            max_err = std::max(max_err, (fd - k.deriv[s]).cwiseAbs().maxCoeff());
        }
        CHECK(max_err < 10.0 * dt * dt * bound);
    }
}

TEST_CASE("chi2 causality: zero tensor when any time is negative") {
    const Envelope env = Envelope::gaussian(1.0, 1.0, 0.4);
    const Coupling2 c2 = Coupling2::separable(structure_ones(), env, env);
    const Coupling1 c1 = Coupling1::isotropic(env);
    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, 24, 4.0);
    CHECK(chi2(c2, c1, g, -0.5, 1.0).max_abs() == 0.0);
    CHECK(chi2(c2, c1, g, 1.0, -0.5).max_abs() == 0.0);
    CHECK(chi2(Coupling2::zero(), c1, g, 1.0, 1.0).max_abs() == 0.0);
}

TEST_CASE("chi2 narrow-peak limit: separable sin products") {
    const double wa = 1.2, wb = 2.1, sigma = 0.05, cutoff = 4.0;
    const Envelope ea = Envelope::gaussian(1.0, wa, sigma);
    const Envelope eb = Envelope::gaussian(1.0, wb, sigma);
    const double ca = oracles::integrate([&](double w) { return ea(w); }, 0.0, cutoff, 1e-14, 48);
    const double cb = oracles::integrate([&](double w) { return eb(w); }, 0.0, cutoff, 1e-14, 48);

    Tensor3 h{};  // deliberately not symmetric: the family symmetrizes
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) h(i, j, k) = 1.0 + 0.3 * i - 0.2 * j + 0.11 * k + 0.05 * i * k;
    const Coupling2 c2 = Coupling2::separable(h, ea, eb);
    const Coupling1 c1 = Coupling1::isotropic(Envelope::lorentzian(0.9, 1.5, 1.0));
    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, 512, cutoff);

    const auto S = [](double w, double t) { return std::sin(w * t) / w; };
    const Eigen::Matrix3d f1a = c1.eval(wa), f1b = c1.eval(wb);

    for (const auto& [t1, t2] : {std::pair{0.7, 1.3}, std::pair{1.0, 1.0}}) {
        const Tensor3 got = chi2(c2, c1, g, t1, t2);
        double dev = 0.0, scale = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k) {
                    double want = 0.0;
                    for (int n = 0; n < 3; ++n)
                        for (int m = 0; m < 3; ++m) {
                            want += 0.5 * h(i, n, m) * ca * cb * S(wa, t1) * S(wb, t2) * f1a(j, n) * f1b(k, m);
                            want += 0.5 * h(i, m, n) * ca * cb * S(wb, t1) * S(wa, t2) * f1b(j, n) * f1a(k, m);
                        }
                    dev = std::max(dev, std::abs(got(i, j, k) - want));
                    scale = std::max(scale, std::abs(want));
                }
        CHECK(dev / scale < 1e-3);
    }
}

TEST_CASE("chi2 exchange symmetry for a valid coupling") {
    const Envelope env = Envelope::lorentzian(1.0, 1.5, 0.5);
    const Coupling2 c2 = Coupling2::separable(structure_seeded(21), env, env);
    const Coupling1 c1 = Coupling1::isotropic(Envelope::gaussian(1.0, 1.0, 0.8));
    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, 32, 6.0);
    const chi::KernelSymmetryReport rep = chi::check_symmetries(c1, &c2, nullptr, g, 2.0, 6);
    CHECK(rep.chi2_exchange_rel < 1e-12);
    CHECK(rep.chi1_asymmetry == 0.0);
}

TEST_CASE("check_symmetries flags a hand-asymmetrized coupling") {
    Coupling2 bad = Coupling2::from_function(
        [](double w1, double w2) {
            Tensor3 f{};
            f(0, 0, 1) = w1 * w2 * std::exp(-w1 - w2);
            return f;
        },
        "asym");
    const Coupling1 c1 = Coupling1::isotropic(Envelope::gaussian(1.0, 1.0, 0.8));
    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, 32, 6.0);
    const chi::KernelSymmetryReport rep = chi::check_symmetries(c1, &bad, nullptr, g, 2.0, 6);
    CHECK(rep.chi2_exchange_rel > 1e-3);
}

TEST_CASE("check_symmetries of zero couplings is exactly zero") {
    const Coupling1 c1 = Coupling1::zero();
    const Coupling2 c2 = Coupling2::zero();
    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, 8, 2.0);
    const chi::KernelSymmetryReport rep = chi::check_symmetries(c1, &c2, nullptr, g, 1.0, 4);
    CHECK(rep.chi1_asymmetry == 0.0);
    CHECK(rep.chi2_exchange == 0.0);
}

TEST_CASE("chi_n with n = 1 coincides with chi1") {
    const Coupling1 c = Coupling1::isotropic(Envelope::lorentzian(1.0, 2.0, 0.5));
    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, 48, 8.0);
    const CouplingN cn = c;
    for (double t : {0.4, 1.1, 3.0}) {
        const double ts[1] = {t};
        const TensorDyn x = chi_n(cn, c, g, ts);
        const Eigen::Matrix3d y = chi1(c, g, t);
        double dev = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) dev = std::max(dev, std::abs(x.at({i, j}) - y(i, j)));
        CHECK(dev <= 1e-14 * std::max(1.0, y.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("chi_n with n = 2 matches chi2 and rejects n > 3 inputs") {
    const Envelope env = Envelope::gaussian(1.0, 1.0, 0.4);
    const Coupling2 c2 = Coupling2::separable(structure_ident(), env, env);
    const Coupling1 c1 = Coupling1::isotropic(env);
    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, 16, 3.0);
    const CouplingN cn = c2;
    const double ts[2] = {0.8, 1.4};
    const TensorDyn x = chi_n(cn, c1, g, ts);
    const Tensor3 y = chi2(c2, c1, g, 0.8, 1.4);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) CHECK(x.at({i, j, k}) == y(i, j, k));

    const double wrong[3] = {1.0, 1.0, 1.0};
    CHECK_THROWS_AS(chi_n(cn, c1, g, wrong), std::invalid_argument);
}

TEST_CASE("chi_n with n = 3: causality and permutation symmetry") {
    const Coupling3 c3 = Coupling3::separable(structure4_seeded(13), Envelope::gaussian(1.0, 1.0, 0.5));
    const Coupling1 c1 = Coupling1::isotropic(Envelope::gaussian(1.0, 1.2, 0.6));
    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, 10, 3.0);
    const CouplingN cn = c3;

    const double neg[3] = {0.5, -0.1, 1.0};
    CHECK(chi_n(cn, c1, g, neg).all_zero());

    const double ts[3] = {0.6, 1.0, 1.5};
    const double ts12[3] = {1.0, 0.6, 1.5};
    const double ts23[3] = {0.6, 1.5, 1.0};
    const TensorDyn x = chi_n(cn, c1, g, ts);
    const TensorDyn y = chi_n(cn, c1, g, ts12);
    const TensorDyn z = chi_n(cn, c1, g, ts23);
    double dev = 0.0;
    const double scale = x.max_abs();
    for (int i = 0; i < 3; ++i)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                for (int c = 0; c < 3; ++c) {
                    dev = std::max(dev, std::abs(x.at({i, a, b, c}) - y.at({i, b, a, c})));
                    dev = std::max(dev, std::abs(x.at({i, a, b, c}) - z.at({i, a, c, b})));
                }
    CHECK(dev < 1e-12 * scale);
}

TEST_CASE("noise correlation: zero coupling, diagonal limit, stationarity") {
    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, 512, 4.0);
    CHECK(chi::noise_correlation(Coupling1::zero(), g, 0.7).cwiseAbs().maxCoeff() == 0.0);

    const Envelope env = Envelope::gaussian(1.0, 2.0, 0.05);
    const Coupling1 c = Coupling1::isotropic(env);

    // tau = 0: C_ij(0) = delta_ij int dw g^2/(2w), real and positive
    const double want0 = oracles::integrate([&](double w) { return env(w) * env(w) / (2.0 * w); }, 0.0, 4.0, 1e-14, 48);
    const Eigen::Matrix3cd c0 = chi::noise_correlation(c, g, 0.0);
    for (int i = 0; i < 3; ++i) {
        CHECK(oracles::rel_err(c0(i, i).real(), want0) < 1e-6);
        CHECK(c0(i, i).imag() == 0.0);
        CHECK(c0(i, i).real() > 0.0);
    }

    // narrow peak: C(tau) ~ delta_ij (c^2 / 2 w1) e^{-i w1 tau}
    const double weight = oracles::integrate([&](double w) { return env(w) * env(w); }, 0.0, 4.0, 1e-14, 48);
    const double tau = 0.9, w1 = 2.0;
    const Eigen::Matrix3cd ct = chi::noise_correlation(c, g, tau);
    const std::complex<double> want(weight / (2.0 * w1) * std::cos(w1 * tau), -weight / (2.0 * w1) * std::sin(w1 * tau));
    CHECK(std::abs(ct(0, 0) - want) / std::abs(want) < 2e-3);

    // hermitian stationarity and parity, at roundoff level
    for (double tt : {0.3, 1.7}) {
        const Eigen::Matrix3cd cp = chi::noise_correlation(c, g, tt);
        const Eigen::Matrix3cd cm = chi::noise_correlation(c, g, -tt);
        CHECK((cp - cm.adjoint()).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((cp.real() - cm.real()).cwiseAbs().maxCoeff() < 1e-14);  // even
        CHECK((cp.imag() + cm.imag()).cwiseAbs().maxCoeff() < 1e-14);  // odd
    }
}

TEST_CASE("gauge invariance of chi2 under a seeded transform") {
    const Envelope env = Envelope::lorentzian(1.0, 1.5, 0.5);
    const Coupling2 c2 = Coupling2::separable(structure_seeded(2), env, env);
    Eigen::Matrix3d aniso;
    aniso << 1.0, 0.1, 0.0, 0.2, 0.9, 0.1, 0.0, 0.3, 1.2;
    const Coupling1 c1 = Coupling1::anisotropic(Envelope::gaussian(1.0, 1.0, 0.7), aniso);
    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, 24, 5.0);
    const OrthogonalTransform A = random_orthogonal(31);
    const Coupling2 c2t = apply_orthogonal(c2, A);
    const Coupling1 c1t = apply_orthogonal(c1, A);
    for (const auto& [t1, t2] : {std::pair{0.5, 1.0}, std::pair{1.5, 0.7}}) {
        const Tensor3 x = chi2(c2, c1, g, t1, t2);
        const Tensor3 y = chi2(c2t, c1t, g, t1, t2);
        double dev = 0.0;
        for (std::size_t n = 0; n < 27; ++n) dev = std::max(dev, std::abs(x.v[n] - y.v[n]));
        CHECK(dev / std::max(x.max_abs(), 1e-300) < 1e-10);
    }
}

TEST_CASE("kernel2 fast build matches direct evaluation") {
    const Envelope env = Envelope::gaussian(0.8, 1.2, 0.5);
    const Coupling2 c2 = Coupling2::separable(structure_seeded(17), env, env);
    const Coupling1 c1 = Coupling1::isotropic(Envelope::lorentzian(1.0, 1.0, 0.6));
    const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, 20, 4.0);
    const double dt = 0.25, T = 1.5;
    const chi::Kernel2 k = chi::chi2_kernel(c2, c1, g, dt, T);
    REQUIRE(k.nt == 7);
    double scale = 0.0;
    for (const auto& v : k.value) scale = std::max(scale, v.max_abs());
    for (std::size_t a = 0; a < k.nt; a += 2)
        for (std::size_t b = 0; b < k.nt; b += 3) {
            const double t1 = dt * static_cast<double>(a), t2 = dt * static_cast<double>(b);
            const Tensor3 dv = chi2(c2, c1, g, t1, t2);
            const Tensor3 dd = chi::chi2_ddot(c2, c1, g, t1, t2);
            for (std::size_t n = 0; n < 27; ++n) {
                CHECK(std::abs(k.value_at(a, b).v[n] - dv.v[n]) < 1e-12 * std::max(scale, 1.0));
                CHECK(std::abs(k.deriv2_at(a, b).v[n] - dd.v[n]) < 1e-12 * std::max(scale, 1.0));
            }
        }
}

TEST_CASE("grid refinement reduces the chi1 error monotonically") {
    const Coupling1 c = Coupling1::isotropic(Envelope::gaussian(1.0, 2.0, 0.6));
    const FrequencyGrid ref = build_grid(QuadratureRule::GaussLegendre, 512, 8.0);
    for (double t : {0.5, 1.5, 3.0}) {
        const Eigen::Matrix3d want = chi1(c, ref, t);
        double prev = 1e300;
        for (int n : {16, 32, 64}) {
            const FrequencyGrid g = build_grid(QuadratureRule::GaussLegendre, n, 8.0);
            const double err = (chi1(c, g, t) - want).cwiseAbs().maxCoeff();
            CHECK(err < prev);
            prev = err;
        }
    }
}
