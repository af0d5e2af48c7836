// atom.hpp — Two-level atom in the absorbing environment: reduced density
// matrix dynamics and the spontaneous-emission decay rate.
//
// Rates follow from the master-equation coefficients and the long-time
// delta limits of the finite-time kernels:
//   Gamma_lin = (pi m^2 w0 / hbar) sum_j |sum_i d_i f1_ij(w0)|^2
//   Gamma_nl  = pi m^2 w0^2 int_0^w0 dw / (w (w0 - w))
//                 sum_{j1 j2} |sum_i d_i f2_i j1 j2(w, w0 - w)|^2
//
// The finite-time form integrates the displayed matrix-element equations
// with kernels int_0^t cos(D (t-t')) dt' = sin(D t)/D evaluated in closed
// form; the Markov form is the exponential solution with the total rate.

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlbath/coupling.hpp"
#include "nlbath/errors.hpp"
#include "nlbath/grid.hpp"

namespace nlbath::atom {

using model::Coupling1;
using model::Coupling2;
using model::FrequencyGrid;
using Complex = std::complex<double>;

struct AtomParams {
    double omega0{1.0};                        // transition frequency (E2 - E1)/hbar
    Eigen::Vector3cd dipole{1.0, 0.0, 0.0};    // d = <1| r |2>
    double mass{1.0};                          // electron mass

    void validate() const {
        if (!(omega0 > 0.0)) throw std::invalid_argument("AtomParams: omega0 must be > 0");
        if (!(mass > 0.0)) throw std::invalid_argument("AtomParams: mass must be > 0");
    }
};

struct DensityMatrix2 {
    Complex r11{0.0}, r22{0.0}, r12{0.0}, r21{0.0};

    double trace() const { return r11.real() + r22.real(); }
    double hermiticity_defect() const { return std::abs(r21 - std::conj(r12)); }
    double min_eigenvalue() const {
        // eigenvalues of the hermitized matrix
        const double a = r11.real(), d = r22.real();
        const Complex off = 0.5 * (r12 + std::conj(r21));
        const double rad = std::sqrt(0.25 * (a - d) * (a - d) + std::norm(off));
        return 0.5 * (a + d) - rad;
    }
};

struct DecayRateBreakdown {
    double linear{0.0};
    double nonlinear{0.0};
    double total{0.0};
};

namespace detail {

// |sum_i d_i f1_ij(w)|^2 summed over j, divided by w (the master-equation
// linear coefficient density)
inline double linear_density(const AtomParams& a, const Eigen::Matrix3d& f1, double w) {
    double s = 0.0;
    for (int j = 0; j < 3; ++j) {
        Complex z = 0.0;
        for (int i = 0; i < 3; ++i) z += a.dipole[i] * f1(i, j);
        s += std::norm(z);
    }
    return s / w;
}

// |sum_i d_i f2_i j1 j2|^2 summed over j1, j2
inline double quadratic_density(const AtomParams& a, const Tensor3& f2) {
    double s = 0.0;
    for (int j1 = 0; j1 < 3; ++j1)
        for (int j2 = 0; j2 < 3; ++j2) {
            Complex z = 0.0;
            for (int i = 0; i < 3; ++i) z += a.dipole[i] * f2(i, j1, j2);
            s += std::norm(z);
        }
    return s;
}

// sin(D t) / D with the D -> 0 limit
inline double sin_integral(double delta, double t) {
    if (std::abs(delta * t) < 1e-8) return t * (1.0 - delta * delta * t * t / 6.0);
    return std::sin(delta * t) / delta;
}

} // namespace detail

// Pointwise at w0; no quadrature.
inline double gamma_linear(const AtomParams& a, const Coupling1& c1, double hbar = 1.0) {
    a.validate();
    if (c1.is_zero()) return 0.0;
    if (c1.is_tabulated() && a.omega0 > c1.support_upper())
        throw std::invalid_argument("gamma_linear: omega0 outside the tabulated coupling range");
    const Eigen::Matrix3d f = c1.eval(a.omega0);
    const double density = detail::linear_density(a, f, a.omega0);  // already / w0
    return std::numbers::pi * a.mass * a.mass * a.omega0 * a.omega0 * density / hbar;
}

// Quadrature over (0, w0) after the endpoint-absorbing substitution
// w = w0 sin^2(theta); valid couplings vanish at least linearly at w -> 0,
// which keeps the integrand bounded.
inline double gamma_nonlinear(const AtomParams& a, const Coupling2& c2, const FrequencyGrid& grid,
                              double /*hbar*/ = 1.0) {
    a.validate();
    if (c2.is_zero()) return 0.0;
    const double w0 = a.omega0;

    const auto integrand_w = [&](double w) -> double {
        const Tensor3 f = c2.eval(w, w0 - w);
        return detail::quadratic_density(a, f) / (w * (w0 - w));
    };
    // endpoint divergence probe: the integrand of a valid coupling decays
    // toward both endpoints; growth under refinement flags a 1/w family
    const double f3 = integrand_w(w0 * 1e-3), f4 = integrand_w(w0 * 1e-4), f5 = integrand_w(w0 * 1e-5);
    const double g3 = integrand_w(w0 * (1.0 - 1e-3)), g4 = integrand_w(w0 * (1.0 - 1e-4)),
                 g5 = integrand_w(w0 * (1.0 - 1e-5));
    if ((f5 > 2.0 * f4 && f4 > 2.0 * f3 && f5 > 0.0) || (g5 > 2.0 * g4 && g4 > 2.0 * g3 && g5 > 0.0))
        throw divergent_integrand_error("gamma_nonlinear: integrand diverges at an endpoint of (0, omega0)");

    const int n_theta = static_cast<int>(std::max<std::size_t>(grid.size(), 32));
    std::vector<double> x, w;
    model::gauss_legendre_nodes(n_theta, x, w);
    double acc = 0.0;
    const double half = 0.25 * std::numbers::pi;  // map (-1,1) -> (0, pi/2)
    for (int k = 0; k < n_theta; ++k) {
        const double theta = half * (x[static_cast<std::size_t>(k)] + 1.0);
        const double sn = std::sin(theta), cs = std::cos(theta);
        const double omega = w0 * sn * sn;
        const Tensor3 f = c2.eval(omega, w0 - omega);
        const double phi = detail::quadratic_density(a, f);
        // dw / (w (w0-w)) = 4 dtheta / (w0 sin(2 theta))
        acc += w[static_cast<std::size_t>(k)] * half * phi * 4.0 / (w0 * 2.0 * sn * cs);
    }
    return std::numbers::pi * a.mass * a.mass * w0 * w0 * acc;
}

struct GammaReport {
    DecayRateBreakdown rates;
    double invariance_max_dev{0.0};  // over seeded orthogonal transforms
};

inline GammaReport gamma_report(const AtomParams& a, const Coupling1& c1, const Coupling2* c2,
                                const FrequencyGrid& grid, double hbar = 1.0, int n_transforms = 5,
                                std::uint64_t base_seed = 20250 ) {
    GammaReport rep;
    rep.rates.linear = gamma_linear(a, c1, hbar);
    rep.rates.nonlinear = (c2 && !c2->is_zero()) ? gamma_nonlinear(a, *c2, grid, hbar) : 0.0;
    rep.rates.total = rep.rates.linear + rep.rates.nonlinear;
    for (int k = 0; k < n_transforms; ++k) {
        const model::OrthogonalTransform A = model::random_orthogonal(base_seed + static_cast<std::uint64_t>(k));
        const Coupling1 c1t = model::apply_orthogonal(c1, A);
        double total = gamma_linear(a, c1t, hbar);
        if (c2 && !c2->is_zero()) {
            const Coupling2 c2t = model::apply_orthogonal(*c2, A);
            total += gamma_nonlinear(a, c2t, grid, hbar);
        }
        const double dev = rep.rates.total != 0.0 ? std::abs(total - rep.rates.total) / rep.rates.total
                                                  : std::abs(total - rep.rates.total);
        rep.invariance_max_dev = std::max(rep.invariance_max_dev, dev);
    }
    return rep;
}

// ----------------------------- master equation -------------------------------

enum class MasterForm { FiniteTime, Markov };

struct MasterDiagnostics {
    double max_conservation_defect{0.0};  // |r11dot + r22dot| / max(|r11dot|, |r22dot|)
    double max_hermiticity_defect{0.0};
    double max_trace_drift{0.0};
    double min_eigenvalue{0.0};
    double cosw0_term_max{0.0};  // largest magnitude of the finite-time cos(w0) kernel term
};

struct MasterSeries {
    std::vector<double> t;
    std::vector<DensityMatrix2> rho;
    MasterDiagnostics diag;
    DecayRateBreakdown rates;  // rates used/implied by the run
};

// Integrates the displayed matrix-element equations. Initial state is the
// excited atom against the environment vacuum. The Markov form propagates
// rho22(t) = exp(-Gamma t) in closed form.
inline MasterSeries integrate_master_equation(const AtomParams& a, const Coupling1& c1, const Coupling2* c2,
                                              const FrequencyGrid& grid, double h, std::size_t n_steps,
                                              MasterForm form, double hbar = 1.0) {
    a.validate();
    if (!(h > 0.0)) throw std::invalid_argument("integrate_master_equation: h must be > 0");
    const bool has_c2 = c2 && !c2->is_zero();

    MasterSeries out;
    out.rates.linear = gamma_linear(a, c1, hbar);
    out.rates.nonlinear = has_c2 ? gamma_nonlinear(a, *c2, grid, hbar) : 0.0;
    out.rates.total = out.rates.linear + out.rates.nonlinear;

    out.t.reserve(n_steps + 1);
    out.rho.reserve(n_steps + 1);

    if (form == MasterForm::Markov) {
        const double gamma = out.rates.total;
        for (std::size_t s = 0; s <= n_steps; ++s) {
            const double t = h * static_cast<double>(s);
            DensityMatrix2 r;
            r.r22 = std::exp(-gamma * t);
            r.r11 = 1.0 - r.r22.real();
            r.r12 = 0.0;
            r.r21 = 0.0;
            out.t.push_back(t);
            out.rho.push_back(r);
        }
        out.diag.min_eigenvalue = 0.0;
        return out;
    }

    // resolution: the coefficient kernels oscillate at |w - w0| (linear part)
    // and |w0 - w1 - w2| (nonlinear part); the coherence drive at w0
    const double nu_max = std::max({a.omega0, grid.cutoff - a.omega0,
                                    has_c2 ? 2.0 * grid.cutoff - a.omega0 : 0.0});
    const double h_max = 0.1 * 2.0 * std::numbers::pi / nu_max;
    if (h >= h_max)
        throw resolution_error("integrate_master_equation: step " + std::to_string(h) +
                               " too large (need h < " + std::to_string(h_max) + ")");

    const double m2w2 = a.mass * a.mass * a.omega0 * a.omega0;

    // precompute quadrature densities
    const std::size_t N = grid.size();
    std::vector<double> glin(N, 0.0);
    if (!c1.is_zero()) {
        for (std::size_t k = 0; k < N; ++k)
            glin[k] = grid.weights[k] * detail::linear_density(a, c1.eval(grid.points[k]), grid.points[k]);
    }
    std::vector<double> g2;  // row-major (a,b) including weights and 1/(w1 w2)
    Complex u = 0.0;         // sum_i d_i int dw f2_ijj(w,w)/w
    if (has_c2) {
        g2.assign(N * N, 0.0);
        for (std::size_t p = 0; p < N; ++p) {
            const double w1 = grid.points[p];
            Tensor3 fd = c2->eval(w1, w1);
            for (int i = 0; i < 3; ++i) {
                double tracejj = fd(i, 0, 0) + fd(i, 1, 1) + fd(i, 2, 2);
                u += a.dipole[i] * (grid.weights[p] / w1) * tracejj;
            }
            for (std::size_t q = 0; q < N; ++q) {
                const double w2 = grid.points[q];
                const Tensor3 f = c2->eval(w1, w2);
                g2[p * N + q] =
                    grid.weights[p] * grid.weights[q] * detail::quadratic_density(a, f) / (w1 * w2);
            }
        }
    }
    const double S0 = std::norm(u);
    const Complex u2 = u * u;

    const auto K_lin = [&](double t) -> double {
        double s = 0.0;
        for (std::size_t k = 0; k < N; ++k) s += glin[k] * detail::sin_integral(grid.points[k] - a.omega0, t);
        return s;
    };
    const auto K_nl = [&](double t) -> double {
        if (!has_c2) return 0.0;
        double s = 0.0;
        for (std::size_t p = 0; p < N; ++p)
            for (std::size_t q = 0; q < N; ++q)
                s += g2[p * N + q] * detail::sin_integral(a.omega0 - grid.points[p] - grid.points[q], t);
        return s;
    };

    // state: r11, r22, re12, im12, re21, im21
    std::array<double, 6> y{0.0, 1.0, 0.0, 0.0, 0.0, 0.0};

    struct Coeffs { double lin, nl, k0; };
    const auto coeffs_at = [&](double t) -> Coeffs {
        return {K_lin(t), K_nl(t), detail::sin_integral(a.omega0, t)};
    };

    const auto rhs = [&](double t, const std::array<double, 6>& s, const Coeffs& cf,
                         std::array<double, 6>& ds) {
        const double r11 = s[0], r22 = s[1];
        const double lin_term = (m2w2 / hbar) * cf.lin * r22;
        const double nl_term = m2w2 * cf.nl * r22;
        const double cos_term = 0.5 * m2w2 * S0 * cf.k0 * r22 * (r22 - r11);
        ds[0] = lin_term + nl_term + cos_term;
        ds[1] = -lin_term - nl_term - cos_term;
        out.diag.cosw0_term_max = std::max(out.diag.cosw0_term_max, std::abs(cos_term));
        const double defect = std::abs(ds[0] + ds[1]);
        const double scale = std::max(std::abs(ds[0]), std::abs(ds[1]));
        if (scale > 0.0)
            out.diag.max_conservation_defect = std::max(out.diag.max_conservation_defect, defect / scale);

        Complex r12dot = 0.0;
        if (has_c2) {
            const Complex phase(std::cos(a.omega0 * t), -std::sin(a.omega0 * t));
            r12dot += 0.5 * a.mass * a.omega0 * u * phase;
            // int_0^t e^{-i w0 (t + t')} dt' = e^{-i w0 t} (1 - e^{-i w0 t}) / (i w0)
            const Complex iw0(0.0, a.omega0);
            const Complex kern = phase * (1.0 - phase) / iw0;
            r12dot -= 0.5 * m2w2 * u2 * r22 * kern;
        }
        ds[2] = r12dot.real();
        ds[3] = r12dot.imag();
        ds[4] = r12dot.real();   // conjugate equation
        ds[5] = -r12dot.imag();
    };

    const auto push = [&](double t, const std::array<double, 6>& s) {
        DensityMatrix2 r;
        r.r11 = s[0];
        r.r22 = s[1];
        r.r12 = Complex(s[2], s[3]);
        r.r21 = Complex(s[4], s[5]);
        out.t.push_back(t);
        out.rho.push_back(r);
        out.diag.max_hermiticity_defect = std::max(out.diag.max_hermiticity_defect, r.hermiticity_defect());
        out.diag.max_trace_drift = std::max(out.diag.max_trace_drift, std::abs(r.trace() - 1.0));
        out.diag.min_eigenvalue = std::min(out.diag.min_eigenvalue, r.min_eigenvalue());
    };

    push(0.0, y);
    std::array<double, 6> k1{}, k2{}, k3{}, k4{}, tmp{};
    for (std::size_t step = 0; step < n_steps; ++step) {
        const double t = h * static_cast<double>(step);
        const Coeffs c0 = coeffs_at(t);
        const Coeffs ch = coeffs_at(t + 0.5 * h);
        const Coeffs c1f = coeffs_at(t + h);
        rhs(t, y, c0, k1);
        for (int i = 0; i < 6; ++i) tmp[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)] + 0.5 * h * k1[static_cast<std::size_t>(i)];
        rhs(t + 0.5 * h, tmp, ch, k2);
        for (int i = 0; i < 6; ++i) tmp[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)] + 0.5 * h * k2[static_cast<std::size_t>(i)];
        rhs(t + 0.5 * h, tmp, ch, k3);
        for (int i = 0; i < 6; ++i) tmp[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)] + h * k3[static_cast<std::size_t>(i)];
        rhs(t + h, tmp, c1f, k4);
        for (int i = 0; i < 6; ++i)
            y[static_cast<std::size_t>(i)] += h / 6.0 * (k1[static_cast<std::size_t>(i)] + 2.0 * k2[static_cast<std::size_t>(i)] + 2.0 * k3[static_cast<std::size_t>(i)] + k4[static_cast<std::size_t>(i)]);
        push(t + h, y);
    }
    return out;
}

// ------------------------------ decay-rate fit -------------------------------

struct FitResult {
    double rate{0.0};
    double residual{0.0};  // rms residual of the linear fit to -ln rho22
};

inline FitResult fit_decay_rate(const std::vector<double>& t, const std::vector<double>& rho22, double t_a,
                                double t_b) {
    if (t.size() != rho22.size()) throw std::invalid_argument("fit_decay_rate: size mismatch");
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t_a || t[i] > t_b) continue;
        if (!(rho22[i] > 0.0)) throw std::invalid_argument("fit_decay_rate: rho22 must be positive on the window");
        xs.push_back(t[i]);
        ys.push_back(-std::log(rho22[i]));
    }
    if (xs.size() < 2) throw std::invalid_argument("fit_decay_rate: window contains fewer than two samples");
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double denom = n * sxx - sx * sx;
    const double slope = (n * sxy - sx * sy) / denom;
    const double icept = (sy - slope * sx) / n;
    double rss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (icept + slope * xs[i]);
        rss += r * r;
    }
    return {slope, std::sqrt(rss / n)};
}

inline FitResult fit_decay_rate(const MasterSeries& series, double t_a, double t_b) {
    std::vector<double> r22(series.rho.size());
    for (std::size_t i = 0; i < series.rho.size(); ++i) r22[i] = series.rho[i].r22.real();
    return fit_decay_rate(series.t, r22, t_a, t_b);
}

} // namespace nlbath::atom
