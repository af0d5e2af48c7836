// runner.hpp — Scenario execution: validates declared couplings, dispatches
// to the computation modules, and emits reproducible CSV/JSON artifacts.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "nlbath/atom.hpp"
#include "nlbath/coupling.hpp"
#include "nlbath/errors.hpp"
#include "nlbath/io.hpp"
#include "nlbath/langevin.hpp"
#include "nlbath/scenario.hpp"
#include "nlbath/susceptibility.hpp"

namespace nlbath::cli {

inline constexpr const char* kVersion = "0.1.0";

// samples per axis cap for the dense 2D chi2 kernel (memory bound)
inline constexpr std::size_t kMaxKernel2Samples = 257;

namespace detail {

namespace fs = std::filesystem;

inline void write_manifest(const Scenario& sc, const std::string& out_dir) {
    using io::Json;
    Json m = Json::object();
    m.set("version", Json::string(kVersion));
    m.set("scenario_hash", Json::uinteger(model::fnv1a(sc.resolved_text())));
    m.set("seed", Json::uinteger(sc.seed));
    const auto now = std::chrono::system_clock::now();
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    m.set("timestamp_unix", Json::integer(secs));
    io::write_text_file(out_dir + "/manifest.json", m.dump());
}

// fail-closed gate: runs before any task computation
inline void validate_couplings(const Scenario& sc, const model::FrequencyGrid& grid) {
    if (sc.coupling2.kind != Coupling2Spec::Kind::None) {
        const model::Coupling2 c2 = sc.coupling2.build();
        const model::SymmetryReport rep = model::validate_coupling2_symmetry(c2, grid);
        const double gate = 1e-12 * std::max(rep.scale, 1.0);
        if (rep.max_violation > gate) {
            std::ostringstream os;
            os.precision(17);
            os << "coupling2 symmetry violation " << rep.max_violation << " at indices (" << rep.i + 1 << ","
               << rep.j + 1 << "," << rep.k + 1 << "), omegas (" << rep.w1 << "," << rep.w2 << ")";
            throw validation_error(os.str());
        }
    }
    if (sc.coupling3.kind != Coupling3Spec::Kind::None) {
        const model::Coupling3 c3 = sc.coupling3.build();
        const model::SymmetryReport rep = model::validate_coupling3_symmetry(c3, grid);
        const double gate = 1e-12 * std::max(rep.scale, 1.0);
        if (rep.max_violation > gate)
            throw validation_error("coupling3 symmetry violation " + io::format_double(rep.max_violation));
    }
}

inline std::string f(double x) { return io::format_double(x); }

// ------------------------------- chi task ------------------------------------

inline void run_chi(const Scenario& sc, const std::string& out) {
    const model::FrequencyGrid grid = sc.build_grid();
    const model::Coupling1 c1 = sc.coupling1.build();
    const int n = std::max(2, sc.chi_samples);
    const double dt = (sc.t_end - sc.t_begin) / static_cast<double>(n - 1);
    const auto t_at = [&](int i) { return sc.t_begin + dt * static_cast<double>(i); };

    if (!chi::kernel_resolution_ok(grid, std::max(std::abs(sc.t_begin), std::abs(sc.t_end))))
        std::fprintf(stderr, "warning: grid may under-resolve sin(w t) oscillations at the largest requested time\n");

    if (sc.chi_order == 1) {
        io::CsvWriter csv(out + "/chi1.csv");
        csv.row({"t", "i", "j", "value"});
        for (int s = 0; s < n; ++s) {
            const double t = t_at(s);
            const Eigen::Matrix3d m = chi::chi1(c1, grid, t);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    csv.row({f(t), std::to_string(i + 1), std::to_string(j + 1), f(m(i, j))});
        }
    } else if (sc.chi_order == 2) {
        const model::Coupling2 c2 = sc.coupling2.build();
        io::CsvWriter csv(out + "/chi2.csv");
        csv.row({"t", "t2", "i", "j", "k", "value"});
        for (int s1 = 0; s1 < n; ++s1)
            for (int s2 = 0; s2 < n; ++s2) {
                const double t1 = t_at(s1), t2 = t_at(s2);
                const Tensor3 m = chi::chi2(c2, c1, grid, t1, t2);
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j)
                        for (int k = 0; k < 3; ++k)
                            csv.row({f(t1), f(t2), std::to_string(i + 1), std::to_string(j + 1),
                                     std::to_string(k + 1), f(m(i, j, k))});
            }
    } else {
        const model::Coupling3 c3 = sc.coupling3.build();
        const model::CouplingN cn = c3;
        io::CsvWriter csv(out + "/chi3.csv");
        csv.row({"t", "t2", "t3", "i", "j", "k", "l", "value"});
        for (int s1 = 0; s1 < n; ++s1)
            for (int s2 = 0; s2 < n; ++s2)
                for (int s3 = 0; s3 < n; ++s3) {
                    const double ts[3] = {t_at(s1), t_at(s2), t_at(s3)};
                    const TensorDyn m = chi::chi_n(cn, c1, grid, ts);
                    for (int i = 0; i < 3; ++i)
                        for (int j = 0; j < 3; ++j)
                            for (int k = 0; k < 3; ++k)
                                for (int l = 0; l < 3; ++l)
                                    csv.row({f(ts[0]), f(ts[1]), f(ts[2]), std::to_string(i + 1),
                                             std::to_string(j + 1), std::to_string(k + 1), std::to_string(l + 1),
                                             f(m.at({i, j, k, l}))});
                }
    }

    if (sc.chi_noise) {
        io::CsvWriter csv(out + "/noise_correlation.csv");
        csv.row({"tau", "i", "j", "re", "im"});
        for (int s = -(n - 1); s < n; ++s) {
            const double tau = dt * static_cast<double>(s);
            const Eigen::Matrix3cd m = chi::noise_correlation(c1, grid, tau, sc.hbar);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    csv.row({f(tau), std::to_string(i + 1), std::to_string(j + 1), f(m(i, j).real()),
                             f(m(i, j).imag())});
        }
    }
}

// ----------------------------- langevin task ----------------------------------

inline void write_trajectory_csv(const std::string& path, const dyn::Trajectory& traj) {
    io::CsvWriter csv(path);
    csv.row({"t", "qx", "qy", "qz", "vx", "vy", "vz", "Rx", "Ry", "Rz"});
    for (std::size_t i = 0; i < traj.t.size(); ++i)
        csv.row({f(traj.t[i]), f(traj.q[i][0]), f(traj.q[i][1]), f(traj.q[i][2]), f(traj.v[i][0]), f(traj.v[i][1]),
                 f(traj.v[i][2]), f(traj.R[i][0]), f(traj.R[i][1]), f(traj.R[i][2])});
}

inline void run_langevin(const Scenario& sc, const std::string& out) {
    const model::FrequencyGrid grid = sc.build_grid();
    const model::Coupling1 c1 = sc.coupling1.build();
    const model::Coupling2 c2 = sc.coupling2.build();
    const model::Coupling2* c2p = c2.is_zero() ? nullptr : &c2;
    const dyn::SystemConfig sys = sc.build_system();
    const auto n_steps = static_cast<std::size_t>(std::llround(sc.time_T / sc.time_h));

    if (sc.langevin_mode == "micro") {
        const dyn::BathEnsemble bath = sc.sampler == dyn::SamplerKind::ClassicalThermal
                                           ? dyn::BathEnsemble::thermal(grid, sc.bath_kT, sc.seed)
                                           : dyn::BathEnsemble::zero(grid);
        const dyn::Trajectory traj = dyn::integrate_microscopic(sys, bath, c1, c2p, sc.time_h, n_steps);
        write_trajectory_csv(out + "/trajectory.csv", traj);
        return;
    }
    if (sc.langevin_mode == "macro") {
        const chi::Kernel1 k1 = chi::chi1_kernel(c1, grid, 0.5 * sc.time_h, sc.time_T);
        if (!k1.resolution_ok)
            std::fprintf(stderr, "warning: frequency grid under-resolves the kernel horizon\n");
        chi::Kernel2 k2;
        const chi::Kernel2* k2p = nullptr;
        if (c2p) {
            const double T2 = std::min(sc.time_T, sc.time_h * static_cast<double>(kMaxKernel2Samples - 1));
            k2 = chi::chi2_kernel(c2, c1, grid, sc.time_h, T2);
            k2p = &k2;
        }
        dyn::NoiseSeries noise;
        const dyn::NoiseSeries* noisep = nullptr;
        if (sc.sampler == dyn::SamplerKind::ClassicalThermal) {
            const dyn::BathEnsemble bath = dyn::BathEnsemble::thermal(grid, sc.bath_kT, sc.seed);
            noise = dyn::sample_noise(bath, c1, c2p, 0.5 * sc.time_h, 2 * n_steps + 1);
            noisep = &noise;
        }
        dyn::Trajectory traj = dyn::integrate_macroscopic(sys, k1, k2p, noisep, sc.time_h, n_steps);
        traj.meta.seed = sc.seed;
        traj.meta.couplings_hash = model::couplings_hash(c1, c2p);
        write_trajectory_csv(out + "/trajectory.csv", traj);
        return;
    }
    // compare
    const dyn::ConvergenceReport rep =
        dyn::compare_micro_macro(sys, c1, c2p, sc.levels, sc.ref_modes, sc.grid_cutoff, sc.time_h, n_steps);
    using io::Json;
    Json jl = Json::array();
    for (const auto& lv : rep.levels) {
        Json e = Json::object();
        e.set("modes", Json::integer(lv.modes));
        e.set("max_err", Json::number(lv.max_err));
        e.set("rel_err", Json::number(lv.rel_err));
        jl.push(std::move(e));
    }
    Json j = Json::object();
    j.set("levels", std::move(jl));
    j.set("amplitude", Json::number(rep.amplitude));
    j.set("monotone", Json::boolean(rep.monotone));
    io::write_text_file(out + "/convergence.json", j.dump());
}

// ------------------------------- atom task ------------------------------------

inline void run_atom(const Scenario& sc, const std::string& out) {
    const model::FrequencyGrid grid = sc.build_grid();
    const model::Coupling1 c1 = sc.coupling1.build();
    const model::Coupling2 c2 = sc.coupling2.build();
    const model::Coupling2* c2p = c2.is_zero() ? nullptr : &c2;

    atom::AtomParams a;
    a.omega0 = sc.atom_omega0;
    a.mass = sc.atom_mass;
    for (int i = 0; i < 3; ++i) a.dipole[i] = std::complex<double>(sc.dipole_re[i], sc.dipole_im[i]);

    const auto n_steps = static_cast<std::size_t>(std::llround(sc.time_T / sc.time_h));
    const atom::MasterForm form = sc.atom_form == "markov" ? atom::MasterForm::Markov : atom::MasterForm::FiniteTime;
    const atom::MasterSeries series = atom::integrate_master_equation(a, c1, c2p, grid, sc.time_h, n_steps, form, sc.hbar);

    io::CsvWriter csv(out + "/rho.csv");
    csv.row({"t", "rho11", "rho22", "re_rho12", "im_rho12"});
    for (std::size_t i = 0; i < series.t.size(); ++i)
        csv.row({f(series.t[i]), f(series.rho[i].r11.real()), f(series.rho[i].r22.real()),
                 f(series.rho[i].r12.real()), f(series.rho[i].r12.imag())});

    const atom::FitResult fit = atom::fit_decay_rate(series, sc.resolved_fit_t0(), sc.resolved_fit_t1());
    const atom::GammaReport rep = atom::gamma_report(a, c1, c2p, grid, sc.hbar, 5, sc.seed + 1);

    using io::Json;
    Json j = Json::object();
    j.set("gamma_linear", Json::number(rep.rates.linear));
    j.set("gamma_nonlinear", Json::number(rep.rates.nonlinear));
    j.set("gamma_total", Json::number(rep.rates.total));
    j.set("gamma_fit", Json::number(fit.rate));
    j.set("invariance_max_dev", Json::number(rep.invariance_max_dev));
    io::write_text_file(out + "/decay_report.json", j.dump());

    Json d = Json::object();
    d.set("max_trace_drift", Json::number(series.diag.max_trace_drift));
    d.set("max_conservation_defect", Json::number(series.diag.max_conservation_defect));
    d.set("max_hermiticity_defect", Json::number(series.diag.max_hermiticity_defect));
    d.set("min_eigenvalue", Json::number(series.diag.min_eigenvalue));
    d.set("cos_w0_kernel_term_max", Json::number(series.diag.cosw0_term_max));
    d.set("fit_residual", Json::number(fit.residual));
    io::write_text_file(out + "/atom_diagnostics.json", d.dump());
}

// ------------------------------ validate task ---------------------------------

inline bool run_validate(const Scenario& sc, const std::string& out) {
    const model::FrequencyGrid grid = sc.build_grid();
    const model::Coupling1 c1 = sc.coupling1.build();
    const model::Coupling2 c2 = sc.coupling2.build();
    const model::Coupling3 c3 = sc.coupling3.build();
    using io::Json;
    Json j = Json::object();
    bool pass = true;

    // symmetry of the declared couplings
    const model::SymmetryReport r2 = model::validate_coupling2_symmetry(c2, grid);
    const model::SymmetryReport r3 = model::validate_coupling3_symmetry(c3, grid);
    const bool sym_ok = r2.max_violation <= 1e-12 * std::max(r2.scale, 1.0) &&
                        r3.max_violation <= 1e-12 * std::max(r3.scale, 1.0);
    j.set("coupling2_symmetry_violation", Json::number(r2.max_violation));
    j.set("coupling3_symmetry_violation", Json::number(r3.max_violation));
    pass = pass && sym_ok;

    // causality: negative-time evaluations must be exactly zero
    double causality = 0.0;
    for (int s = 1; s <= 10; ++s) {
        const double t = -0.37 * s;
        causality = std::max(causality, chi::chi1(c1, grid, t).cwiseAbs().maxCoeff());
        causality = std::max(causality, chi::chi2(c2, c1, grid, t, 1.0).max_abs());
        if (!c3.is_zero()) {
            const double ts[3] = {t, 0.5, 1.0};
            const model::CouplingN cn = c3;
            causality = std::max(causality, chi::chi_n(cn, c1, grid, ts).max_abs());
        }
    }
    j.set("causality_max_abs", Json::number(causality));
    pass = pass && causality == 0.0;

    // chi kernel symmetries
    const chi::KernelSymmetryReport ks =
        chi::check_symmetries(c1, c2.is_zero() ? nullptr : &c2, c3.is_zero() ? nullptr : &c3, grid, 2.0, 6);
    j.set("chi1_asymmetry", Json::number(ks.chi1_asymmetry));
    j.set("chi2_exchange_rel", Json::number(ks.chi2_exchange_rel));
    j.set("chi3_permutation_rel", Json::number(ks.chi3_permutation_rel));
    pass = pass && ks.chi1_asymmetry == 0.0 && ks.chi2_exchange_rel < 1e-12 && ks.chi3_permutation_rel < 1e-12;

    // gauge invariance spot check on chi1
    {
        const model::OrthogonalTransform A = model::random_orthogonal(sc.seed + 17);
        const model::Coupling1 c1t = model::apply_orthogonal(c1, A);
        double dev = 0.0, scale = 0.0;
        for (int s = 1; s <= 10; ++s) {
            const double t = 0.2 * s;
            const Eigen::Matrix3d x = chi::chi1(c1, grid, t);
            const Eigen::Matrix3d y = chi::chi1(c1t, grid, t);
            dev = std::max(dev, (x - y).cwiseAbs().maxCoeff());
            scale = std::max(scale, x.cwiseAbs().maxCoeff());
        }
        const double rel = scale > 0.0 ? dev / scale : dev;
        j.set("gauge_chi1_rel_dev", Json::number(rel));
        pass = pass && rel < 1e-10;
    }

    // vacuum noise correlation: hermitian stationarity C(tau) = C(-tau)^dagger
    {
        double dev = 0.0;
        for (int s = 1; s <= 5; ++s) {
            const double tau = 0.3 * s;
            const Eigen::Matrix3cd cp = chi::noise_correlation(c1, grid, tau, sc.hbar);
            const Eigen::Matrix3cd cm = chi::noise_correlation(c1, grid, -tau, sc.hbar);
            dev = std::max(dev, (cp - cm.adjoint()).cwiseAbs().maxCoeff());
        }
        j.set("noise_hermitian_stationarity_dev", Json::number(dev));
        pass = pass && dev < 1e-12;
    }

    j.set("pass", Json::boolean(pass));
    io::write_text_file(out + "/validation.json", j.dump());
    return pass;
}

} // namespace detail

// ------------------------------- entry points ---------------------------------

struct RunResult {
    int status{0};
    std::string message;
};

inline RunResult run(const Scenario& sc, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    const model::FrequencyGrid grid = sc.build_grid();
    detail::validate_couplings(sc, grid);  // fail-closed before any computation

    io::write_text_file(out_dir + "/scenario_resolved.cfg", sc.resolved_text());
    detail::write_manifest(sc, out_dir);

    switch (sc.task) {
        case Task::Chi: detail::run_chi(sc, out_dir); break;
        case Task::Langevin: detail::run_langevin(sc, out_dir); break;
        case Task::Atom: detail::run_atom(sc, out_dir); break;
        case Task::Validate:
            if (!detail::run_validate(sc, out_dir)) return {1, "validation failed (see validation.json)"};
            break;
    }
    return {0, ""};
}

// Replace (or add) one key in scenario text; used by sweep fan-out.
inline std::string override_key(const std::string& text, const std::string& key, const std::string& value) {
    std::istringstream in(text);
    std::ostringstream os;
    std::string line;
    bool replaced = false;
    while (std::getline(in, line)) {
        const std::string t = cli::detail::trim(line);
        const auto eq = t.find('=');
        if (!t.empty() && t[0] != '#' && eq != std::string::npos &&
            cli::detail::trim(t.substr(0, eq)) == key) {
            os << key << " = " << value << "\n";
            replaced = true;
        } else if (!t.empty() && t.rfind("sweep.", 0) == 0) {
            continue;  // sub-scenarios are plain runs
        } else {
            os << line << "\n";
        }
    }
    if (!replaced) os << key << " = " << value << "\n";
    return os.str();
}

// Fan out sweep.values over sweep.parameter with a small worker pool;
// each sub-scenario writes to an isolated subdirectory.
inline RunResult run_sweep(const std::string& scenario_text, const Scenario& sc, const std::string& out_dir,
                           int threads) {
    if (sc.sweep_parameter.empty() || sc.sweep_values.empty())
        return {2, "sweep requires sweep.parameter and sweep.values"};
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    std::vector<Scenario> subs;
    std::vector<std::string> dirs;
    for (std::size_t i = 0; i < sc.sweep_values.size(); ++i) {
        const std::string text = override_key(scenario_text, sc.sweep_parameter, sc.sweep_values[i]);
        Scenario sub = parse_scenario_text(text);
        sub.seed = sc.seed;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "sub_%03zu", i);
        subs.push_back(std::move(sub));
        dirs.push_back(out_dir + "/" + buf);
    }

    std::atomic<std::size_t> next{0};
    std::atomic<int> worst{0};
    const auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= subs.size()) return;
            try {
                const RunResult r = run(subs[i], dirs[i]);
                int expected = worst.load();
                while (r.status > expected && !worst.compare_exchange_weak(expected, r.status)) {}
            } catch (const std::exception& e) {
                std::fprintf(stderr, "sweep %zu failed: %s\n", i, e.what());
                worst.store(3);
            }
        }
    };
    const int nt = std::max(1, threads);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nt));
    for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    return {worst.load(), worst.load() ? "one or more sweep runs failed" : ""};
}

} // namespace nlbath::cli
