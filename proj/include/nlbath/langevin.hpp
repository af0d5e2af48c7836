// langevin.hpp — Microscopic system-plus-bath dynamics, classical noise
// sampling, and the macroscopic memory-kernel Langevin integrator.
//
// Microscopic (per bath mode w, quadrature-discretized):
//   Xdd_i(w) + w^2 X_i(w) = v_j f1_ji(w) + int dw' v_j [f2_jik(w,w') + f2_jki(w',w)] X_k(w')
//   m vd_i + dV/dq_i = -Rdot_i,   R_i = int dw f1_ij X_j + int dw dw' f2_ijk X_j X_k
//
// Macroscopic:
//   m vd_i + int_0^t chi1dot_ij(t-t') v_j(t') dt'
//          + int int chi2ddot_ijk(t-t', t-t'') v_j(t') v_k(t'') + dV/dq_i = -RNdot_i
// with v(t) = 0 history for t < 0 and memory integrals evaluated by
// trapezoid over the stored history.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlbath/coupling.hpp"
#include "nlbath/errors.hpp"
#include "nlbath/grid.hpp"
#include "nlbath/susceptibility.hpp"

namespace nlbath::dyn {

using Eigen::Vector3d;
using model::Coupling1;
using model::Coupling2;
using model::FrequencyGrid;

// ------------------------------ system config --------------------------------

enum class PotentialKind { Free, Harmonic, TabulatedForce };

// Per-coordinate force profile: F_i(q) = F(q_i), linearly interpolated.
struct ForceTable {
    std::vector<double> x;  // strictly increasing
    std::vector<double> f;

    double eval(double q) const {
        if (x.empty()) return 0.0;
        if (q <= x.front()) return f.front();
        if (q >= x.back()) return f.back();
        const auto it = std::upper_bound(x.begin(), x.end(), q);
        const std::size_t hi = static_cast<std::size_t>(it - x.begin());
        const double s = (q - x[hi - 1]) / (x[hi] - x[hi - 1]);
        return (1.0 - s) * f[hi - 1] + s * f[hi];
    }
};

struct SystemConfig {
    double mass{1.0};
    PotentialKind potential{PotentialKind::Free};
    double omega{0.0};  // harmonic frequency
    std::shared_ptr<const ForceTable> force_table;
    Vector3d q0{Vector3d::Zero()};
    Vector3d v0{Vector3d::Zero()};

    void validate() const {
        if (!(mass > 0.0)) throw std::invalid_argument("SystemConfig: mass must be > 0");
        if (potential == PotentialKind::Harmonic && omega < 0.0)
            throw std::invalid_argument("SystemConfig: harmonic omega must be >= 0");
        if (potential == PotentialKind::TabulatedForce && (!force_table || force_table->x.empty()))
            throw std::invalid_argument("SystemConfig: tabulated potential needs a force table");
    }
};

inline Vector3d potential_force(const SystemConfig& s, const Vector3d& q) {
    switch (s.potential) {
        case PotentialKind::Free: return Vector3d::Zero();
        case PotentialKind::Harmonic: return -s.mass * s.omega * s.omega * q;
        case PotentialKind::TabulatedForce:
            return {s.force_table->eval(q[0]), s.force_table->eval(q[1]), s.force_table->eval(q[2])};
    }
    return Vector3d::Zero();
}

inline double potential_energy(const SystemConfig& s, const Vector3d& q) {
    if (s.potential == PotentialKind::Harmonic) return 0.5 * s.mass * s.omega * s.omega * q.squaredNorm();
    return 0.0;  // free; tabulated potential energy is not tracked
}

// ------------------------------ bath ensemble --------------------------------

enum class SamplerKind { Zero, ClassicalThermal };

namespace detail {

// Box-Muller on mt19937_64; fully specified by the standard, so sampled
// ensembles reproduce bit-identically for a fixed seed.
inline double gaussian(std::mt19937_64& rng) {
    double u1 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace detail

// Discretized oscillator amplitudes (X, Q = Xdot) per frequency bin and axis.
// Thermal draws realize classical equipartition for the continuum field,
// whose equal-frequency delta correlation discretizes to 1/weight per bin:
//   Var X_i(w_k) = kT / (w_k^2 weight_k),  Var Q_i(w_k) = kT / weight_k.
struct BathEnsemble {
    FrequencyGrid grid;
    std::vector<Vector3d> X, Q;  // one per mode
    SamplerKind sampler{SamplerKind::Zero};
    double kT{0.0};
    std::uint64_t seed{0};

    std::size_t modes() const { return grid.size(); }

    static BathEnsemble zero(FrequencyGrid g) {
        BathEnsemble b;
        b.grid = std::move(g);
        b.X.assign(b.grid.size(), Vector3d::Zero());
        b.Q.assign(b.grid.size(), Vector3d::Zero());
        return b;
    }

    static BathEnsemble thermal(FrequencyGrid g, double kT, std::uint64_t seed) {
        BathEnsemble b = zero(std::move(g));
        b.sampler = SamplerKind::ClassicalThermal;
        b.kT = kT;
        b.seed = seed;
        std::mt19937_64 rng(seed ^ 0xda3e39cb94b95bdbull);
        for (std::size_t k = 0; k < b.grid.size(); ++k) {
            const double w = b.grid.points[k];
            const double wt = b.grid.weights[k];
            const double sx = std::sqrt(kT / (w * w * wt));
            const double sq = std::sqrt(kT / wt);
            for (int i = 0; i < 3; ++i) {
                b.X[k][i] = sx * detail::gaussian(rng);
                b.Q[k][i] = sq * detail::gaussian(rng);
            }
        }
        return b;
    }
};

// ------------------------------ trajectory -----------------------------------

struct TrajectoryMeta {
    std::string integrator;
    std::uint64_t seed{0};
    std::uint64_t couplings_hash{0};
};

struct Trajectory {
    double h{0.0};
    std::vector<double> t;
    std::vector<Vector3d> q, v, R;
    std::vector<double> energy;  // total micro energy; empty for macro runs
    TrajectoryMeta meta;

    std::size_t steps() const { return t.empty() ? 0 : t.size() - 1; }
    double amplitude() const {
        double m = 0.0;
        for (const auto& x : q) m = std::max(m, x.norm());
        return m;
    }
};

enum class Integrator { RK4, Leapfrog };

// --------------------------- microscopic integrator --------------------------

namespace detail {

struct MicroWorkspace {
    std::size_t n{0};
    std::vector<double> w, omega;
    std::vector<Eigen::Matrix3d> f1;
    bool has_c2{false};
    // row-major (a,b): f2[a,b] and the bath-drive combination
    // B(a,b)(j,i,k) = f2_jik(w_a, w_b) + f2_jki(w_b, w_a)
    std::vector<Tensor3> f2, B;

    MicroWorkspace(const FrequencyGrid& grid, const Coupling1& c1, const Coupling2* c2) {
        n = grid.size();
        w = grid.weights;
        omega = grid.points;
        f1.resize(n);
        for (std::size_t a = 0; a < n; ++a) f1[a] = c1.eval(grid.points[a]);
        has_c2 = c2 && !c2->is_zero();
        if (has_c2) {
            f2.resize(n * n);
            B.resize(n * n);
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t b = 0; b < n; ++b) {
                    const Tensor3 fab = c2->eval(grid.points[a], grid.points[b]);
                    const Tensor3 fba = c2->eval(grid.points[b], grid.points[a]);
                    f2[a * n + b] = fab;
                    Tensor3 comb{};
                    for (int j = 0; j < 3; ++j)
                        for (int i = 0; i < 3; ++i)
                            for (int k = 0; k < 3; ++k) comb(j, i, k) = fab(j, i, k) + fba(j, k, i);
                    B[a * n + b] = comb;
                }
        }
    }
};

} // namespace detail

// Fully coupled deterministic ODE system under a fixed-step integrator.
// State: q, v, and (X, Q) per mode. Energy bookkeeping uses the conserved
// total H = m v^2/2 + V + (1/2) int dw (Q^2 + w^2 X^2).
inline Trajectory integrate_microscopic(const SystemConfig& sys, const BathEnsemble& bath, const Coupling1& c1,
                                        const Coupling2* c2, double h, std::size_t n_steps,
                                        Integrator integrator = Integrator::RK4) {
    sys.validate();
    if (!(h > 0.0)) throw std::invalid_argument("integrate_microscopic: h must be > 0");
    const double h_max = 0.1 * 2.0 * std::numbers::pi / bath.grid.cutoff;
    if (h >= h_max)
        throw resolution_error("integrate_microscopic: step " + std::to_string(h) +
                               " too large for cutoff (need h < " + std::to_string(h_max) + ")");
    const bool coupled = !c1.is_zero() || (c2 && !c2->is_zero());
    if (integrator == Integrator::Leapfrog && coupled)
        throw std::invalid_argument("integrate_microscopic: leapfrog is the conservative baseline; couplings need rk4");

    const detail::MicroWorkspace ws(bath.grid, c1, c2);
    const std::size_t N = ws.n;

    // flat state [q(3), v(3), X(3N), Q(3N)]
    const std::size_t dim = 6 + 6 * N;
    std::vector<double> y(dim, 0.0), k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
    for (int i = 0; i < 3; ++i) {
        y[static_cast<std::size_t>(i)] = sys.q0[i];
        y[static_cast<std::size_t>(3 + i)] = sys.v0[i];
    }
    for (std::size_t a = 0; a < N; ++a)
        for (int i = 0; i < 3; ++i) {
            y[6 + 3 * a + static_cast<std::size_t>(i)] = bath.X[a][i];
            y[6 + 3 * N + 3 * a + static_cast<std::size_t>(i)] = bath.Q[a][i];
        }

    auto rhs = [&](const std::vector<double>& s, std::vector<double>& ds) {
        const double* q = s.data();
        const double* v = s.data() + 3;
        const double* X = s.data() + 6;
        const double* Q = s.data() + 6 + 3 * N;
        double* dq = ds.data();
        double* dv = ds.data() + 3;
        double* dX = ds.data() + 6;
        double* dQ = ds.data() + 6 + 3 * N;

        Vector3d Rdot = Vector3d::Zero();
        for (std::size_t a = 0; a < N; ++a) {
            const Eigen::Matrix3d& f = ws.f1[a];
            const double wa = ws.w[a];
            const double om2 = ws.omega[a] * ws.omega[a];
            for (int i = 0; i < 3; ++i) {
                dX[3 * a + static_cast<std::size_t>(i)] = Q[3 * a + i];
                // linear drive v_j f1_ji(w)
                double drive = v[0] * f(0, i) + v[1] * f(1, i) + v[2] * f(2, i);
                dQ[3 * a + static_cast<std::size_t>(i)] = -om2 * X[3 * a + i] + drive;
                Rdot[i] += wa * (f(i, 0) * Q[3 * a + 0] + f(i, 1) * Q[3 * a + 1] + f(i, 2) * Q[3 * a + 2]);
            }
        }
        if (ws.has_c2) {
            for (std::size_t a = 0; a < N; ++a) {
                const double wa = ws.w[a];
                for (std::size_t b = 0; b < N; ++b) {
                    const double wb = ws.w[b];
                    const Tensor3& Bab = ws.B[a * N + b];
                    const Tensor3& fab = ws.f2[a * N + b];
                    const double* Xb = X + 3 * b;
                    const double* Qb = Q + 3 * b;
                    const double* Xa = X + 3 * a;
                    const double* Qa = Q + 3 * a;
                    for (int i = 0; i < 3; ++i) {
                        double drive = 0.0, rdot = 0.0;
                        for (int j = 0; j < 3; ++j)
                            for (int k = 0; k < 3; ++k) {
                                drive += v[j] * Bab(j, i, k) * Xb[k];
                                rdot += fab(i, j, k) * (Qa[j] * Xb[k] + Xa[j] * Qb[k]);
                            }
                        dQ[3 * a + static_cast<std::size_t>(i)] += wb * drive;
                        Rdot[i] += wa * wb * rdot;
                    }
                }
            }
        }
        const Vector3d qv(q[0], q[1], q[2]);
        const Vector3d F = potential_force(sys, qv);
        for (int i = 0; i < 3; ++i) {
            dq[i] = v[i];
            dv[i] = (F[i] - Rdot[i]) / sys.mass;
        }
    };

    auto record_R = [&](const std::vector<double>& s) -> Vector3d {
        const double* X = s.data() + 6;
        Vector3d R = Vector3d::Zero();
        for (std::size_t a = 0; a < N; ++a)
            for (int i = 0; i < 3; ++i)
                R[i] += ws.w[a] *
                        (ws.f1[a](i, 0) * X[3 * a + 0] + ws.f1[a](i, 1) * X[3 * a + 1] + ws.f1[a](i, 2) * X[3 * a + 2]);
        if (ws.has_c2) {
            for (std::size_t a = 0; a < N; ++a)
                for (std::size_t b = 0; b < N; ++b) {
                    const Tensor3& fab = ws.f2[a * N + b];
                    const double* Xa = X + 3 * a;
                    const double* Xb = X + 3 * b;
                    const double fac = ws.w[a] * ws.w[b];
                    for (int i = 0; i < 3; ++i) {
                        double r = 0.0;
                        for (int j = 0; j < 3; ++j)
                            for (int k = 0; k < 3; ++k) r += fab(i, j, k) * Xa[j] * Xb[k];
                        R[i] += fac * r;
                    }
                }
        }
        return R;
    };

    auto record_energy = [&](const std::vector<double>& s) -> double {
        const double* v = s.data() + 3;
        const double* X = s.data() + 6;
        const double* Q = s.data() + 6 + 3 * N;
        const Vector3d qv(s[0], s[1], s[2]);
        double e = 0.5 * sys.mass * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) + potential_energy(sys, qv);
        for (std::size_t a = 0; a < N; ++a) {
            const double om2 = ws.omega[a] * ws.omega[a];
            double bath_e = 0.0;
            for (int i = 0; i < 3; ++i)
                bath_e += Q[3 * a + i] * Q[3 * a + i] + om2 * X[3 * a + i] * X[3 * a + i];
            e += 0.5 * ws.w[a] * bath_e;
        }
        return e;
    };

    Trajectory traj;
    traj.h = h;
    traj.meta.integrator = integrator == Integrator::RK4 ? "rk4" : "leapfrog";
    traj.meta.seed = bath.seed;
    traj.meta.couplings_hash = model::couplings_hash(c1, c2);
    traj.t.reserve(n_steps + 1);
    traj.q.reserve(n_steps + 1);
    traj.v.reserve(n_steps + 1);
    traj.R.reserve(n_steps + 1);
    traj.energy.reserve(n_steps + 1);

    auto push_sample = [&](double t, const std::vector<double>& s) {
        traj.t.push_back(t);
        traj.q.emplace_back(s[0], s[1], s[2]);
        traj.v.emplace_back(s[3], s[4], s[5]);
        traj.R.push_back(record_R(s));
        traj.energy.push_back(record_energy(s));
    };

    push_sample(0.0, y);

    if (integrator == Integrator::RK4) {
        for (std::size_t step = 0; step < n_steps; ++step) {
            rhs(y, k1);
            for (std::size_t i = 0; i < dim; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
            rhs(tmp, k2);
            for (std::size_t i = 0; i < dim; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
            rhs(tmp, k3);
            for (std::size_t i = 0; i < dim; ++i) tmp[i] = y[i] + h * k3[i];
            rhs(tmp, k4);
            for (std::size_t i = 0; i < dim; ++i)
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            push_sample(h * static_cast<double>(step + 1), y);
        }
    } else {
        // velocity Verlet on the uncoupled system (bath modes evolve freely)
        Vector3d q(y[0], y[1], y[2]), v(y[3], y[4], y[5]);
        Vector3d F = potential_force(sys, q);
        for (std::size_t step = 0; step < n_steps; ++step) {
            q += h * v + (0.5 * h * h / sys.mass) * F;
            const Vector3d F1 = potential_force(sys, q);
            v += (0.5 * h / sys.mass) * (F + F1);
            F = F1;
            for (int i = 0; i < 3; ++i) {
                y[static_cast<std::size_t>(i)] = q[i];
                y[static_cast<std::size_t>(3 + i)] = v[i];
            }
            // free bath modes: exact rotation per step
            const double t1 = h * static_cast<double>(step + 1);
            for (std::size_t a = 0; a < N; ++a) {
                const double w = ws.omega[a];
                for (int i = 0; i < 3; ++i) {
                    const double X0 = bath.X[a][i], Q0 = bath.Q[a][i];
                    y[6 + 3 * a + static_cast<std::size_t>(i)] = X0 * std::cos(w * t1) + Q0 / w * std::sin(w * t1);
                    y[6 + 3 * N + 3 * a + static_cast<std::size_t>(i)] =
                        -X0 * w * std::sin(w * t1) + Q0 * std::cos(w * t1);
                }
            }
            push_sample(t1, y);
        }
    }
    return traj;
}

// ------------------------------ noise sampling -------------------------------

// R_N and its analytic time derivative sampled on a uniform grid.
struct NoiseSeries {
    double dt{0.0};
    std::vector<Vector3d> R, Rdot;
    bool zero{true};

    Vector3d rdot_at(std::size_t idx) const { return zero ? Vector3d::Zero() : Rdot[idx]; }
};

// Free-bath noise force: R^N1_i = int dw f1_ij X^N_j with the sinusoidal
// asymptotic modes; the f2 part keeps only the X_N X_N quadratic term.
inline NoiseSeries sample_noise(const BathEnsemble& bath, const Coupling1& c1, const Coupling2* c2, double dt,
                                std::size_t count) {
    NoiseSeries out;
    out.dt = dt;
    if (bath.sampler == SamplerKind::Zero || c1.is_zero()) {
        out.R.assign(count, Vector3d::Zero());
        out.Rdot.assign(count, Vector3d::Zero());
        return out;
    }
    out.zero = false;
    out.R.resize(count);
    out.Rdot.resize(count);
    const std::size_t N = bath.grid.size();
    std::vector<Eigen::Matrix3d> f1(N);
    for (std::size_t a = 0; a < N; ++a) f1[a] = c1.eval(bath.grid.points[a]);
    const bool has_c2 = c2 && !c2->is_zero();
    std::vector<Tensor3> f2;
    if (has_c2) {
        f2.resize(N * N);
        for (std::size_t a = 0; a < N; ++a)
            for (std::size_t b = 0; b < N; ++b) f2[a * N + b] = c2->eval(bath.grid.points[a], bath.grid.points[b]);
    }
    std::vector<Vector3d> Xn(N), Xnd(N);
    for (std::size_t s = 0; s < count; ++s) {
        const double t = dt * static_cast<double>(s);
        for (std::size_t a = 0; a < N; ++a) {
            const double w = bath.grid.points[a];
            const double cw = std::cos(w * t), sw = std::sin(w * t);
            Xn[a] = bath.X[a] * cw + bath.Q[a] * (sw / w);
            Xnd[a] = -bath.X[a] * (w * sw) + bath.Q[a] * cw;
        }
        Vector3d R = Vector3d::Zero(), Rd = Vector3d::Zero();
        for (std::size_t a = 0; a < N; ++a) {
            R += bath.grid.weights[a] * (f1[a] * Xn[a]);
            Rd += bath.grid.weights[a] * (f1[a] * Xnd[a]);
        }
        if (has_c2) {
            for (std::size_t a = 0; a < N; ++a)
                for (std::size_t b = 0; b < N; ++b) {
                    const Tensor3& f = f2[a * N + b];
                    const double fac = bath.grid.weights[a] * bath.grid.weights[b];
                    for (int i = 0; i < 3; ++i) {
                        double r = 0.0, rd = 0.0;
                        for (int j = 0; j < 3; ++j)
                            for (int k = 0; k < 3; ++k) {
                                r += f(i, j, k) * Xn[a][j] * Xn[b][k];
                                rd += f(i, j, k) * (Xnd[a][j] * Xn[b][k] + Xn[a][j] * Xnd[b][k]);
                            }
                        R[i] += fac * r;
                        Rd[i] += fac * rd;
                    }
                }
        }
        out.R[s] = R;
        out.Rdot[s] = Rd;
    }
    return out;
}

// --------------------------- macroscopic integrator --------------------------

// RK4 on (q, v) with the memory force evaluated by trapezoid over the stored
// velocity history at each stage; kernels are looked up by (bi)linear
// interpolation, exact whenever lags land on kernel samples.
inline Trajectory integrate_macroscopic(const SystemConfig& sys, const chi::Kernel1& k1, const chi::Kernel2* k2,
                                        const NoiseSeries* noise, double h, std::size_t n_steps,
                                        double memory_rel_threshold = 1e-8) {
    sys.validate();
    if (!(h > 0.0)) throw std::invalid_argument("integrate_macroscopic: h must be > 0");
    if (k1.size() >= 2) {
        const double ratio = h / k1.dt;
        if (std::abs(ratio - std::llround(ratio)) > 1e-9 || ratio < 1.0 - 1e-9)
            throw std::invalid_argument("integrate_macroscopic: step must be an integer multiple of the kernel step");
    }
    if (noise && !noise->zero) {
        const double r2 = 0.5 * h / noise->dt;
        if (std::abs(r2 - std::llround(r2)) > 1e-9 || r2 < 1.0 - 1e-9)
            throw std::invalid_argument("integrate_macroscopic: noise series must be sampled at h/2 or finer");
        if (static_cast<double>(noise->R.size() - 1) * noise->dt < static_cast<double>(n_steps) * h - 1e-12)
            throw std::invalid_argument("integrate_macroscopic: noise series shorter than the run");
    }

    const bool has_k1 = k1.size() >= 2;
    const bool has_k2 = k2 && k2->nt >= 2;
    const double t_mem1 = has_k1 ? k1.memory_horizon(memory_rel_threshold) : 0.0;
    const double t_mem2 = has_k2 ? k2->horizon() : 0.0;

    std::vector<Vector3d> v_hist;
    v_hist.reserve(n_steps + 1);
    v_hist.push_back(sys.v0);

    const auto noise_rdot = [&](double t) -> Vector3d {
        if (!noise || noise->zero) return Vector3d::Zero();
        const auto idx = static_cast<std::size_t>(std::llround(t / noise->dt));
        return noise->Rdot[std::min(idx, noise->Rdot.size() - 1)];
    };
    const auto noise_r = [&](double t) -> Vector3d {
        if (!noise || noise->zero) return Vector3d::Zero();
        const auto idx = static_cast<std::size_t>(std::llround(t / noise->dt));
        return noise->R[std::min(idx, noise->R.size() - 1)];
    };

    // 2D kernel lookup with bilinear interpolation
    const auto k2_deriv2 = [&](double u, double v) -> Tensor3 {
        const double xu = u / k2->dt, xv = v / k2->dt;
        const auto a = std::min(static_cast<std::size_t>(xu), k2->nt - 1);
        const auto b = std::min(static_cast<std::size_t>(xv), k2->nt - 1);
        const auto a1 = std::min(a + 1, k2->nt - 1);
        const auto b1 = std::min(b + 1, k2->nt - 1);
        const double su = std::min(xu - static_cast<double>(a), 1.0);
        const double sv = std::min(xv - static_cast<double>(b), 1.0);
        Tensor3 out{};
        for (std::size_t x = 0; x < 27; ++x)
            out.v[x] = (1 - su) * (1 - sv) * k2->deriv2_at(a, b).v[x] + (1 - su) * sv * k2->deriv2_at(a, b1).v[x] +
                       su * (1 - sv) * k2->deriv2_at(a1, b).v[x] + su * sv * k2->deriv2_at(a1, b1).v[x];
        return out;
    };
    const auto k2_value = [&](double u, double v) -> Tensor3 {
        const double xu = u / k2->dt, xv = v / k2->dt;
        const auto a = std::min(static_cast<std::size_t>(xu), k2->nt - 1);
        const auto b = std::min(static_cast<std::size_t>(xv), k2->nt - 1);
        const auto a1 = std::min(a + 1, k2->nt - 1);
        const auto b1 = std::min(b + 1, k2->nt - 1);
        const double su = std::min(xu - static_cast<double>(a), 1.0);
        const double sv = std::min(xv - static_cast<double>(b), 1.0);
        Tensor3 out{};
        for (std::size_t x = 0; x < 27; ++x)
            out.v[x] = (1 - su) * (1 - sv) * k2->value_at(a, b).v[x] + (1 - su) * sv * k2->value_at(a, b1).v[x] +
                       su * (1 - sv) * k2->value_at(a1, b).v[x] + su * sv * k2->value_at(a1, b1).v[x];
        return out;
    };

    // memory force at stage time tau = t_m + c h; history complete through m
    std::vector<double> node_lag;
    std::vector<Vector3d> node_v;
    std::vector<double> node_wt;
    const auto memory_force = [&](double tau, std::size_t m, double c, const Vector3d& v_stage) -> Vector3d {
        Vector3d mem = Vector3d::Zero();
        if (!has_k1 && !has_k2) return mem;
        const double s = c * h;
        // assemble trapezoid nodes (lag, velocity, weight) over [0, tau]
        node_lag.clear();
        node_v.clear();
        node_wt.clear();
        const double t_mem = std::max(t_mem1, t_mem2);
        const auto j0 = static_cast<std::size_t>(
            std::max<long long>(0, static_cast<long long>(std::ceil((tau - t_mem) / h - 1e-12))));
        for (std::size_t j = j0; j <= m; ++j) {
            node_lag.push_back(tau - h * static_cast<double>(j));
            node_v.push_back(v_hist[j]);
            double wt;
            if (m == j0) {
                wt = s > 0.0 ? 0.5 * s : 0.0;  // only the partial segment exists
            } else {
                wt = (j == j0 || j == m) ? 0.5 * h : h;
                if (j == m && s > 0.0) wt += 0.5 * s;
            }
            node_wt.push_back(wt);
        }
        if (s > 0.0) {
            node_lag.push_back(0.0);
            node_v.push_back(v_stage);
            node_wt.push_back(0.5 * s);
        }
        if (has_k1) {
            for (std::size_t a = 0; a < node_lag.size(); ++a) {
                if (node_lag[a] > t_mem1) continue;
                mem += node_wt[a] * (k1.deriv_at(node_lag[a]) * node_v[a]);
            }
        }
        if (has_k2) {
            for (std::size_t a = 0; a < node_lag.size(); ++a) {
                if (node_lag[a] > t_mem2) continue;
                for (std::size_t b = 0; b < node_lag.size(); ++b) {
                    if (node_lag[b] > t_mem2) continue;
                    const Tensor3 kk = k2_deriv2(node_lag[a], node_lag[b]);
                    const double fac = node_wt[a] * node_wt[b];
                    for (int i = 0; i < 3; ++i) {
                        double acc = 0.0;
                        for (int j = 0; j < 3; ++j)
                            for (int k = 0; k < 3; ++k) acc += kk(i, j, k) * node_v[a][j] * node_v[b][k];
                        mem[i] += fac * acc;
                    }
                }
            }
        }
        return mem;
    };

    // reaction force R(t) recorded in the output (value kernels + noise)
    const auto reaction_force = [&](double t, std::size_t m) -> Vector3d {
        Vector3d R = noise_r(t);
        if (has_k1) {
            for (std::size_t j = 0; j <= m; ++j) {
                const double lag = t - h * static_cast<double>(j);
                if (lag > t_mem1 && lag > t_mem2) continue;
                const double wt = (j == 0 || j == m) ? 0.5 * h : h;
                R += wt * (k1.value_at(lag) * v_hist[j]);
            }
        }
        if (has_k2) {
            for (std::size_t a = 0; a <= m; ++a) {
                const double la = t - h * static_cast<double>(a);
                if (la > t_mem2) continue;
                const double wa = (a == 0 || a == m) ? 0.5 * h : h;
                for (std::size_t b = 0; b <= m; ++b) {
                    const double lb = t - h * static_cast<double>(b);
                    if (lb > t_mem2) continue;
                    const double wb = (b == 0 || b == m) ? 0.5 * h : h;
                    const Tensor3 kk = k2_value(la, lb);
                    for (int i = 0; i < 3; ++i) {
                        double acc = 0.0;
                        for (int j = 0; j < 3; ++j)
                            for (int k = 0; k < 3; ++k) acc += kk(i, j, k) * v_hist[a][j] * v_hist[b][k];
                        R[i] += wa * wb * acc;
                    }
                }
            }
        }
        return R;
    };

    Trajectory traj;
    traj.h = h;
    traj.meta.integrator = "rk4-memory";
    traj.t.reserve(n_steps + 1);
    traj.q.reserve(n_steps + 1);
    traj.v.reserve(n_steps + 1);
    traj.R.reserve(n_steps + 1);

    Vector3d q = sys.q0, v = sys.v0;
    traj.t.push_back(0.0);
    traj.q.push_back(q);
    traj.v.push_back(v);
    traj.R.push_back(reaction_force(0.0, 0));

    const auto accel = [&](double tau, std::size_t m, double c, const Vector3d& qs, const Vector3d& vs) -> Vector3d {
        const Vector3d F = potential_force(sys, qs);
        const Vector3d mem = memory_force(tau, m, c, vs);
        return (F - mem - noise_rdot(tau)) / sys.mass;
    };

    for (std::size_t step = 0; step < n_steps; ++step) {
        const double t = h * static_cast<double>(step);
        const Vector3d a1 = accel(t, step, 0.0, q, v);
        const Vector3d qa = q + 0.5 * h * v, va = v + 0.5 * h * a1;
        const Vector3d a2 = accel(t + 0.5 * h, step, 0.5, qa, va);
        const Vector3d qb = q + 0.5 * h * va, vb = v + 0.5 * h * a2;
        const Vector3d a3 = accel(t + 0.5 * h, step, 0.5, qb, vb);
        const Vector3d qc = q + h * vb, vc = v + h * a3;
        const Vector3d a4 = accel(t + h, step, 1.0, qc, vc);

        q += h / 6.0 * (v + 2.0 * va + 2.0 * vb + vc);
        v += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        v_hist.push_back(v);

        traj.t.push_back(t + h);
        traj.q.push_back(q);
        traj.v.push_back(v);
        traj.R.push_back(reaction_force(t + h, step + 1));
    }
    return traj;
}

// --------------------------- micro/macro comparison --------------------------

struct ConvergenceLevel {
    int modes{0};
    double max_err{0.0};
    double rel_err{0.0};
};

struct ConvergenceReport {
    std::vector<ConvergenceLevel> levels;
    double amplitude{0.0};
    bool monotone{false};
};

// Deterministic oracle: zero bath initial data makes both descriptions
// noise-free; the macroscopic run uses a reference grid fine enough that the
// per-level error isolates the bath discretization of the microscopic side.
inline ConvergenceReport compare_micro_macro(const SystemConfig& sys, const Coupling1& c1, const Coupling2* c2,
                                             const std::vector<int>& levels, int ref_modes, double cutoff, double h,
                                             std::size_t n_steps) {
    const double T = h * static_cast<double>(n_steps);
    const FrequencyGrid ref_grid = model::build_grid(model::QuadratureRule::GaussLegendre, ref_modes, cutoff);
    const chi::Kernel1 k1 = chi::chi1_kernel(c1, ref_grid, 0.5 * h, T);
    chi::Kernel2 k2;
    const bool has_c2 = c2 && !c2->is_zero();
    if (has_c2) {
        // 2D kernels are dense; sample at the step itself over the full window
        const FrequencyGrid k2_grid = model::build_grid(model::QuadratureRule::GaussLegendre,
                                                        std::min(ref_modes, 128), cutoff);
        k2 = chi::chi2_kernel(*c2, c1, k2_grid, h, T);
    }
    const Trajectory macro = integrate_macroscopic(sys, k1, has_c2 ? &k2 : nullptr, nullptr, h, n_steps);

    ConvergenceReport rep;
    rep.amplitude = macro.amplitude();
    for (int modes : levels) {
        const FrequencyGrid g = model::build_grid(model::QuadratureRule::GaussLegendre, modes, cutoff);
        const BathEnsemble bath = BathEnsemble::zero(g);
        const Trajectory micro = integrate_microscopic(sys, bath, c1, c2, h, n_steps);
        double err = 0.0;
        for (std::size_t i = 0; i < micro.q.size(); ++i) err = std::max(err, (micro.q[i] - macro.q[i]).norm());
        rep.levels.push_back({modes, err, rep.amplitude > 0.0 ? err / rep.amplitude : err});
    }
    rep.monotone = true;
    for (std::size_t i = 1; i < rep.levels.size(); ++i)
        if (!(rep.levels[i].max_err < rep.levels[i - 1].max_err)) rep.monotone = false;
    return rep;
}

} // namespace nlbath::dyn
