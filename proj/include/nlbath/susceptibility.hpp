// susceptibility.hpp — Causal response kernels of the absorbing environment.
//
// chi1_ij(t)       = int dw sin(wt)/w  f1_in(w) f1_jn(w)           (t > 0, else 0)
// chi2_ijk(t1,t2)  = int dw1 dw2 [sin(w1 t1)/w1][sin(w2 t2)/w2]
//                      f2_inm(w1,w2) f1_jn(w1) f1_km(w2)           (t1,t2 >= 0, else 0)
// chi_n generalizes with an n-fold product of sin(w t)/w weights.
//
// Derivative kernels used by the Langevin equation are obtained by
// differentiating under the integral: cos(wt) for chi1_dot, and the
// mixed cos(w1 u) cos(w2 v) weight for chi2_ddot.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "nlbath/coupling.hpp"
#include "nlbath/grid.hpp"
#include "nlbath/tensor.hpp"

namespace nlbath::chi {

using model::Coupling1;
using model::Coupling2;
using model::Coupling3;
using model::CouplingN;
using model::FrequencyGrid;

// Symmetric contraction s_ij = f_in f_jn, filled to be bitwise symmetric.
inline Eigen::Matrix3d self_contraction(const Eigen::Matrix3d& f) {
    Eigen::Matrix3d s;
    for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) {
            const double x = f(i, 0) * f(j, 0) + f(i, 1) * f(j, 1) + f(i, 2) * f(j, 2);
            s(i, j) = x;
            s(j, i) = x;
        }
    return s;
}

// ------------------------------- chi1 ----------------------------------------

inline Eigen::Matrix3d chi1(const Coupling1& c, const FrequencyGrid& grid, double t) {
    if (t <= 0.0 || c.is_zero()) return Eigen::Matrix3d::Zero();
    Eigen::Matrix3d out = Eigen::Matrix3d::Zero();
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double w = grid.points[k];
        const double fac = grid.weights[k] * std::sin(w * t) / w;
        out += fac * self_contraction(c.eval(w));
    }
    return out;
}

// d/dt chi1: cos weight, nonzero from t = 0+ (the kernel value at t=0 is the
// one-sided limit used by the memory convolution).
inline Eigen::Matrix3d chi1_dot(const Coupling1& c, const FrequencyGrid& grid, double t) {
    if (t < 0.0 || c.is_zero()) return Eigen::Matrix3d::Zero();
    Eigen::Matrix3d out = Eigen::Matrix3d::Zero();
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double w = grid.points[k];
        const double fac = grid.weights[k] * std::cos(w * t);
        out += fac * self_contraction(c.eval(w));
    }
    return out;
}

// Oscillatory-integrand resolution heuristic: about 10 nodes per period of
// sin(w t) at the largest time and frequency the kernel has to carry.
inline bool kernel_resolution_ok(const FrequencyGrid& grid, double T) {
    const double needed = 10.0 * grid.cutoff * T / (2.0 * std::numbers::pi);
    return static_cast<double>(grid.size()) >= needed;
}

// Sampled chi1 and chi1_dot on a uniform time grid [0, T].
struct Kernel1 {
    double dt{0.0};
    std::vector<Eigen::Matrix3d> value;  // chi1(k dt)
    std::vector<Eigen::Matrix3d> deriv;  // chi1_dot(k dt)
    bool resolution_ok{true};

    std::size_t size() const { return value.size(); }
    double horizon() const { return dt * static_cast<double>(value.size() - 1); }

    // time after which |chi1_dot| has fallen below rel of its maximum
    double memory_horizon(double rel = 1e-8) const {
        double peak = 0.0;
        for (const auto& m : deriv) peak = std::max(peak, m.cwiseAbs().maxCoeff());
        if (peak == 0.0) return 0.0;
        std::size_t last = 0;
        for (std::size_t k = 0; k < deriv.size(); ++k)
            if (deriv[k].cwiseAbs().maxCoeff() >= rel * peak) last = k;
        return dt * static_cast<double>(last);
    }

    // linear interpolation; exact at sample points, zero outside [0, horizon]
    Eigen::Matrix3d deriv_at(double t) const {
        if (t < 0.0 || value.empty()) return Eigen::Matrix3d::Zero();
        const double x = t / dt;
        const auto k = static_cast<std::size_t>(x);
        if (k + 1 >= deriv.size()) return k < deriv.size() ? deriv[k] : Eigen::Matrix3d::Zero();
        const double s = x - static_cast<double>(k);
        return (1.0 - s) * deriv[k] + s * deriv[k + 1];
    }
    Eigen::Matrix3d value_at(double t) const {
        if (t <= 0.0 || value.empty()) return Eigen::Matrix3d::Zero();
        const double x = t / dt;
        const auto k = static_cast<std::size_t>(x);
        if (k + 1 >= value.size()) return k < value.size() ? value[k] : Eigen::Matrix3d::Zero();
        const double s = x - static_cast<double>(k);
        return (1.0 - s) * value[k] + s * value[k + 1];
    }
};

inline Kernel1 chi1_kernel(const Coupling1& c, const FrequencyGrid& grid, double dt, double T) {
    if (!(dt > 0.0) || T < dt) throw std::invalid_argument("chi1_kernel: need dt > 0 and T >= dt");
    Kernel1 k;
    k.dt = dt;
    k.resolution_ok = kernel_resolution_ok(grid, T);
    const auto n = static_cast<std::size_t>(std::llround(T / dt));
    k.value.reserve(n + 1);
    k.deriv.reserve(n + 1);

    // precompute the contraction on the grid once
    std::vector<Eigen::Matrix3d> s(grid.size());
    for (std::size_t a = 0; a < grid.size(); ++a) s[a] = self_contraction(c.eval(grid.points[a]));

    for (std::size_t i = 0; i <= n; ++i) {
        const double t = dt * static_cast<double>(i);
        Eigen::Matrix3d v = Eigen::Matrix3d::Zero();
        Eigen::Matrix3d d = Eigen::Matrix3d::Zero();
        if (!c.is_zero()) {
            for (std::size_t a = 0; a < grid.size(); ++a) {
                const double w = grid.points[a];
                const double wt = w * t;
                v += (grid.weights[a] * (t > 0.0 ? std::sin(wt) / w : 0.0)) * s[a];
                d += (grid.weights[a] * std::cos(wt)) * s[a];
            }
        }
        k.value.push_back(v);
        k.deriv.push_back(d);
    }
    return k;
}

// ------------------------------- chi2 ----------------------------------------

namespace detail {

// Full contraction C_ijk(a,b) = f2_inm(wa,wb) f1_jn(wa) f1_km(wb)
inline Tensor3 chi2_contraction(const Tensor3& f2, const Eigen::Matrix3d& f1a, const Eigen::Matrix3d& f1b) {
    Tensor3 out{};
    for (int i = 0; i < 3; ++i)
        for (int n = 0; n < 3; ++n)
            for (int m = 0; m < 3; ++m) {
                const double f = f2(i, n, m);
                if (f == 0.0) continue;
                for (int j = 0; j < 3; ++j) {
                    const double fj = f * f1a(j, n);
                    for (int k = 0; k < 3; ++k) out(i, j, k) += fj * f1b(k, m);
                }
            }
    return out;
}

} // namespace detail

inline Tensor3 chi2(const Coupling2& c2, const Coupling1& c1, const FrequencyGrid& grid, double t1, double t2) {
    Tensor3 out{};
    if (t1 < 0.0 || t2 < 0.0 || c2.is_zero() || c1.is_zero()) return out;
    const std::size_t n = grid.size();
    std::vector<Eigen::Matrix3d> f1(n);
    for (std::size_t a = 0; a < n; ++a) f1[a] = c1.eval(grid.points[a]);
    for (std::size_t a = 0; a < n; ++a) {
        const double wa = grid.points[a];
        const double ka = grid.weights[a] * std::sin(wa * t1) / wa;
        if (ka == 0.0) continue;
        for (std::size_t b = 0; b < n; ++b) {
            const double wb = grid.points[b];
            const double kb = grid.weights[b] * std::sin(wb * t2) / wb;
            if (kb == 0.0) continue;
            const Tensor3 c = detail::chi2_contraction(c2.eval(wa, wb), f1[a], f1[b]);
            const double fac = ka * kb;
            for (std::size_t x = 0; x < 27; ++x) out.v[x] += fac * c.v[x];
        }
    }
    return out;
}

// Mixed second derivative d^2 chi2 / dt1 dt2 (cos-cos weights); this is the
// kernel entering the nonlinear Langevin damping term.
inline Tensor3 chi2_ddot(const Coupling2& c2, const Coupling1& c1, const FrequencyGrid& grid, double u, double v) {
    Tensor3 out{};
    if (u < 0.0 || v < 0.0 || c2.is_zero() || c1.is_zero()) return out;
    const std::size_t n = grid.size();
    std::vector<Eigen::Matrix3d> f1(n);
    for (std::size_t a = 0; a < n; ++a) f1[a] = c1.eval(grid.points[a]);
    for (std::size_t a = 0; a < n; ++a) {
        const double ka = grid.weights[a] * std::cos(grid.points[a] * u);
        for (std::size_t b = 0; b < n; ++b) {
            const double kb = grid.weights[b] * std::cos(grid.points[b] * v);
            const Tensor3 c = detail::chi2_contraction(c2.eval(grid.points[a], grid.points[b]), f1[a], f1[b]);
            const double fac = ka * kb;
            for (std::size_t x = 0; x < 27; ++x) out.v[x] += fac * c.v[x];
        }
    }
    return out;
}

// Sampled chi2 and chi2_ddot on a uniform square time grid [0, T]^2.
struct Kernel2 {
    double dt{0.0};
    std::size_t nt{0};            // samples per axis (nt points: 0..(nt-1)*dt)
    std::vector<Tensor3> value;   // row-major (i1, i2)
    std::vector<Tensor3> deriv2;
    bool resolution_ok{true};

    const Tensor3& value_at(std::size_t a, std::size_t b) const { return value[a * nt + b]; }
    const Tensor3& deriv2_at(std::size_t a, std::size_t b) const { return deriv2[a * nt + b]; }
    double horizon() const { return dt * static_cast<double>(nt - 1); }
};

// Two-stage contraction: the (a,b) double quadrature is folded axis by axis,
// which keeps the build cost at O(N^2 nt + N nt^2) instead of O(N^2 nt^2).
inline Kernel2 chi2_kernel(const Coupling2& c2, const Coupling1& c1, const FrequencyGrid& grid, double dt, double T) {
    if (!(dt > 0.0) || T < dt) throw std::invalid_argument("chi2_kernel: need dt > 0 and T >= dt");
    Kernel2 k;
    k.dt = dt;
    k.nt = static_cast<std::size_t>(std::llround(T / dt)) + 1;
    k.resolution_ok = kernel_resolution_ok(grid, T);
    k.value.assign(k.nt * k.nt, Tensor3{});
    k.deriv2.assign(k.nt * k.nt, Tensor3{});
    if (c2.is_zero() || c1.is_zero()) return k;

    const std::size_t n = grid.size();
    const std::size_t nt = k.nt;

    std::vector<Eigen::Matrix3d> f1(n);
    for (std::size_t a = 0; a < n; ++a) f1[a] = c1.eval(grid.points[a]);

    // stage 1: D{sin,cos}[a][j2][27] = sum_b w_b k(w_b, t_j2) C_ijk(a,b)
    std::vector<double> dsin(n * nt * 27, 0.0), dcos(n * nt * 27, 0.0);
    std::vector<double> sin_tab(n * nt), cos_tab(n * nt);
    for (std::size_t b = 0; b < n; ++b) {
        const double w = grid.points[b];
        for (std::size_t j = 0; j < nt; ++j) {
            const double t = dt * static_cast<double>(j);
            sin_tab[b * nt + j] = std::sin(w * t) / w;
            cos_tab[b * nt + j] = std::cos(w * t);
        }
    }
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            const Tensor3 c = detail::chi2_contraction(c2.eval(grid.points[a], grid.points[b]), f1[a], f1[b]);
            const double wb = grid.weights[b];
            for (std::size_t j = 0; j < nt; ++j) {
                const double fs = wb * sin_tab[b * nt + j];
                const double fc = wb * cos_tab[b * nt + j];
                double* ds = &dsin[(a * nt + j) * 27];
                double* dc = &dcos[(a * nt + j) * 27];
                for (std::size_t x = 0; x < 27; ++x) {
                    ds[x] += fs * c.v[x];
                    dc[x] += fc * c.v[x];
                }
            }
        }
    }
    // stage 2: fold the first axis
    for (std::size_t a = 0; a < n; ++a) {
        const double wa = grid.weights[a];
        for (std::size_t j1 = 0; j1 < nt; ++j1) {
            const double fs = wa * sin_tab[a * nt + j1];
            const double fc = wa * cos_tab[a * nt + j1];
            for (std::size_t j2 = 0; j2 < nt; ++j2) {
                const double* ds = &dsin[(a * nt + j2) * 27];
                const double* dc = &dcos[(a * nt + j2) * 27];
                Tensor3& v = k.value[j1 * nt + j2];
                Tensor3& d = k.deriv2[j1 * nt + j2];
                for (std::size_t x = 0; x < 27; ++x) {
                    v.v[x] += fs * ds[x];
                    d.v[x] += fc * dc[x];
                }
            }
        }
    }
    // exact causal zero on the t=0 edges of the value samples
    for (std::size_t j = 0; j < nt; ++j) {
        k.value[j] = Tensor3{};          // (0, j)
        k.value[j * nt] = Tensor3{};     // (j, 0)
    }
    return k;
}

// ------------------------------- chi_n ---------------------------------------

// Generic n-fold quadrature, n <= 3; reduces to chi1/chi2 for n = 1, 2.
inline TensorDyn chi_n(const CouplingN& cn, const Coupling1& c1, const FrequencyGrid& grid,
                       std::span<const double> times) {
    const int order = model::coupling_order(cn);
    if (static_cast<int>(times.size()) != order)
        throw std::invalid_argument("chi_n: need one time argument per coupling order");

    TensorDyn out(order + 1);
    for (double t : times)
        if (t < 0.0) return out;

    if (order == 1) {
        const auto& c = std::get<Coupling1>(cn);
        // the chi1 formula with the generic coupling in the first slot
        if (c.is_zero() || c1.is_zero() || times[0] <= 0.0) return out;
        for (std::size_t a = 0; a < grid.size(); ++a) {
            const double w = grid.points[a];
            const double fac = grid.weights[a] * std::sin(w * times[0]) / w;
            const Eigen::Matrix3d f = c.eval(w);
            const Eigen::Matrix3d g = c1.eval(w);
            for (int i = 0; i < 3; ++i)
                for (int i1 = 0; i1 < 3; ++i1) {
                    double s = 0.0;
                    for (int j = 0; j < 3; ++j) s += f(i, j) * g(i1, j);
                    out.v[static_cast<std::size_t>(i * 3 + i1)] += fac * s;
                }
        }
        return out;
    }

    if (order == 2) {
        const Tensor3 t3 = chi2(std::get<Coupling2>(cn), c1, grid, times[0], times[1]);
        out.v.assign(t3.v.begin(), t3.v.end());
        return out;
    }

    // order == 3
    const auto& c3 = std::get<Coupling3>(cn);
    if (c3.is_zero() || c1.is_zero()) return out;
    const std::size_t n = grid.size();
    std::vector<Eigen::Matrix3d> f1(n);
    std::vector<double> k1(n), k2(n), k3(n);
    for (std::size_t a = 0; a < n; ++a) {
        const double w = grid.points[a];
        f1[a] = c1.eval(w);
        k1[a] = grid.weights[a] * std::sin(w * times[0]) / w;
        k2[a] = grid.weights[a] * std::sin(w * times[1]) / w;
        k3[a] = grid.weights[a] * std::sin(w * times[2]) / w;
    }
    for (std::size_t a = 0; a < n; ++a) {
        if (k1[a] == 0.0) continue;
        for (std::size_t b = 0; b < n; ++b) {
            if (k2[b] == 0.0) continue;
            for (std::size_t c = 0; c < n; ++c) {
                const double fac = k1[a] * k2[b] * k3[c];
                if (fac == 0.0) continue;
                const Tensor4 f = c3.eval(grid.points[a], grid.points[b], grid.points[c]);
                // sequential contraction of the trailing slots with f1
                double u1[81];  // i, i1, j2, j3
                for (int i = 0; i < 3; ++i)
                    for (int i1 = 0; i1 < 3; ++i1)
                        for (int j2 = 0; j2 < 3; ++j2)
                            for (int j3 = 0; j3 < 3; ++j3) {
                                double s = 0.0;
                                for (int j1 = 0; j1 < 3; ++j1) s += f(i, j1, j2, j3) * f1[a](i1, j1);
                                u1[((i * 3 + i1) * 3 + j2) * 3 + j3] = s;
                            }
                double u2[81];  // i, i1, i2, j3
                for (int i = 0; i < 3; ++i)
                    for (int i1 = 0; i1 < 3; ++i1)
                        for (int i2 = 0; i2 < 3; ++i2)
                            for (int j3 = 0; j3 < 3; ++j3) {
                                double s = 0.0;
                                for (int j2 = 0; j2 < 3; ++j2) s += u1[((i * 3 + i1) * 3 + j2) * 3 + j3] * f1[b](i2, j2);
                                u2[((i * 3 + i1) * 3 + i2) * 3 + j3] = s;
                            }
                for (int i = 0; i < 3; ++i)
                    for (int i1 = 0; i1 < 3; ++i1)
                        for (int i2 = 0; i2 < 3; ++i2)
                            for (int i3 = 0; i3 < 3; ++i3) {
                                double s = 0.0;
                                for (int j3 = 0; j3 < 3; ++j3) s += u2[((i * 3 + i1) * 3 + i2) * 3 + j3] * f1[c](i3, j3);
                                out.v[static_cast<std::size_t>(((i * 3 + i1) * 3 + i2) * 3 + i3)] += fac * s;
                            }
            }
        }
    }
    return out;
}

// --------------------------- vacuum noise correlation ------------------------

// C_ij(tau) = int dw (hbar / 2w) f1_ik(w) f1_jk(w) e^{-i w tau}
inline Eigen::Matrix3cd noise_correlation(const Coupling1& c, const FrequencyGrid& grid, double tau,
                                          double hbar = 1.0) {
    Eigen::Matrix3cd out = Eigen::Matrix3cd::Zero();
    if (c.is_zero()) return out;
    for (std::size_t a = 0; a < grid.size(); ++a) {
        const double w = grid.points[a];
        const Eigen::Matrix3d s = self_contraction(c.eval(w));
        const double fac = grid.weights[a] * hbar / (2.0 * w);
        const std::complex<double> phase(std::cos(w * tau), -std::sin(w * tau));
        out += (fac * phase) * s.cast<std::complex<double>>();
    }
    return out;
}

// --------------------------- symmetry checking -------------------------------

struct KernelSymmetryReport {
    double chi1_asymmetry{0.0};       // max |chi1_ij - chi1_ji|, exact-zero expectation
    double chi2_exchange{0.0};        // max |chi2_ijk(t1,t2) - chi2_ikj(t2,t1)|
    double chi2_exchange_rel{0.0};    // relative to max |chi2|
    double chi3_permutation{0.0};     // max over pair swaps
    double chi3_permutation_rel{0.0};
};

// Re-evaluates kernels with permuted indices/times over sampled time points.
inline KernelSymmetryReport check_symmetries(const Coupling1& c1, const Coupling2* c2, const Coupling3* c3,
                                             const FrequencyGrid& grid, double T, std::size_t nt = 8) {
    KernelSymmetryReport rep;
    const double dt = T / static_cast<double>(nt);
    for (std::size_t a = 1; a <= nt; ++a) {
        const Eigen::Matrix3d m = chi1(c1, grid, dt * static_cast<double>(a));
        rep.chi1_asymmetry = std::max(rep.chi1_asymmetry, (m - m.transpose()).cwiseAbs().maxCoeff());
    }
    if (c2 && !c2->is_zero()) {
        double peak = 0.0;
        for (std::size_t a = 1; a <= nt; ++a)
            for (std::size_t b = a; b <= nt; ++b) {
                const double t1 = dt * static_cast<double>(a);
                const double t2 = dt * static_cast<double>(b);
                const Tensor3 x = chi2(*c2, c1, grid, t1, t2);
                const Tensor3 y = chi2(*c2, c1, grid, t2, t1);
                peak = std::max(peak, x.max_abs());
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j)
                        for (int k = 0; k < 3; ++k)
                            rep.chi2_exchange = std::max(rep.chi2_exchange, std::abs(x(i, j, k) - y(i, k, j)));
            }
        rep.chi2_exchange_rel = peak > 0.0 ? rep.chi2_exchange / peak : rep.chi2_exchange;
    }
    if (c3 && !c3->is_zero()) {
        double peak = 0.0;
        const std::size_t nt3 = std::min<std::size_t>(nt, 4);
        const double dt3 = T / static_cast<double>(nt3);
        for (std::size_t a = 1; a <= nt3; ++a)
            for (std::size_t b = 1; b <= nt3; ++b)
                for (std::size_t c = 1; c <= nt3; ++c) {
                    const double t1 = dt3 * static_cast<double>(a);
                    const double t2 = dt3 * static_cast<double>(b);
                    const double t3 = dt3 * static_cast<double>(c);
                    const double ts[3] = {t1, t2, t3};
                    const double ts12[3] = {t2, t1, t3};
                    const double ts13[3] = {t3, t2, t1};
                    const CouplingN cn = *c3;
                    const TensorDyn x = chi_n(cn, c1, grid, ts);
                    const TensorDyn y = chi_n(cn, c1, grid, ts12);
                    const TensorDyn z = chi_n(cn, c1, grid, ts13);
                    peak = std::max(peak, x.max_abs());
                    for (int i = 0; i < 3; ++i)
                        for (int i1 = 0; i1 < 3; ++i1)
                            for (int i2 = 0; i2 < 3; ++i2)
                                for (int i3 = 0; i3 < 3; ++i3) {
                                    const double v = x.at({i, i1, i2, i3});
                                    const double d1 = std::abs(v - y.at({i, i2, i1, i3}));
                                    const double d2 = std::abs(v - z.at({i, i3, i2, i1}));
                                    rep.chi3_permutation = std::max({rep.chi3_permutation, d1, d2});
                                }
                }
        rep.chi3_permutation_rel = peak > 0.0 ? rep.chi3_permutation / peak : rep.chi3_permutation;
    }
    return rep;
}

} // namespace nlbath::chi
