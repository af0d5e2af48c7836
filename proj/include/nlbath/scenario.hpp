// scenario.hpp — Scenario files: a flat key = value grammar with dotted
// sections and compact call-style values, e.g.
//
//   task = chi
//   coupling1 = lorentzian(g=1, wc=2, lambda=0.5)
//   grid = gl(64, 20)
//   times = (0.01, 10)
//
// Unknown keys are rejected; the fully resolved scenario (defaults filled)
// serializes canonically so runs are reproducible.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nlbath/coupling.hpp"
#include "nlbath/errors.hpp"
#include "nlbath/grid.hpp"
#include "nlbath/io.hpp"
#include "nlbath/langevin.hpp"

namespace nlbath::cli {

enum class Task { Chi, Langevin, Atom, Validate };

inline std::string task_name(Task t) {
    switch (t) {
        case Task::Chi: return "chi";
        case Task::Langevin: return "langevin";
        case Task::Atom: return "atom";
        case Task::Validate: return "validate";
    }
    return "?";
}

inline Task task_from_name(const std::string& s) {
    if (s == "chi") return Task::Chi;
    if (s == "langevin") return Task::Langevin;
    if (s == "atom") return Task::Atom;
    if (s == "validate") return Task::Validate;
    throw parse_error("unknown task '" + s + "'");
}

// ------------------------------ value parsing --------------------------------

namespace detail {

struct Call {
    std::string name;
    std::vector<std::pair<std::string, std::string>> args;  // key may be empty (positional)

    std::string positional(std::size_t i, const std::string& ctx) const {
        if (i >= args.size() || !args[i].first.empty())
            throw parse_error(ctx + ": expected positional argument " + std::to_string(i + 1));
        return args[i].second;
    }
    std::optional<std::string> named(const std::string& key) const {
        for (const auto& [k, v] : args)
            if (k == key) return v;
        return std::nullopt;
    }
    double named_num(const std::string& key, const std::string& ctx) const {
        auto v = named(key);
        if (!v) throw parse_error(ctx + ": missing argument '" + key + "'");
        return std::stod(*v);
    }
    double named_num_or(const std::string& key, double dflt) const {
        auto v = named(key);
        return v ? std::stod(*v) : dflt;
    }
};

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// split on commas at parenthesis depth zero
inline std::vector<std::string> split_args(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    int depth = 0;
    for (char c : s) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (c == ',' && depth == 0) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
    return out;
}

inline bool parse_call(const std::string& value, Call& call) {
    const auto open = value.find('(');
    if (open == std::string::npos) return false;
    if (value.back() != ')') return false;
    call.name = trim(value.substr(0, open));
    call.args.clear();
    const std::string inner = value.substr(open + 1, value.size() - open - 2);
    if (trim(inner).empty()) return true;
    for (const std::string& a : split_args(inner)) {
        const auto eq = a.find('=');
        // an '=' inside a nested call belongs to that call
        const auto paren = a.find('(');
        if (eq != std::string::npos && (paren == std::string::npos || eq < paren))
            call.args.emplace_back(trim(a.substr(0, eq)), trim(a.substr(eq + 1)));
        else
            call.args.emplace_back("", a);
    }
    return true;
}

inline double parse_number(const std::string& s, const std::string& ctx) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(s, &pos);
        if (pos != s.size()) throw parse_error("");
        return x;
    } catch (...) {
        throw parse_error(ctx + ": '" + s + "' is not a number");
    }
}

inline std::vector<double> parse_tuple(const std::string& s, const std::string& ctx) {
    std::string inner = trim(s);
    if (!inner.empty() && inner.front() == '(' && inner.back() == ')')
        inner = inner.substr(1, inner.size() - 2);
    std::vector<double> out;
    for (const std::string& a : split_args(inner)) out.push_back(parse_number(a, ctx));
    return out;
}

inline Eigen::Vector3d parse_vec3(const std::string& s, const std::string& ctx) {
    const auto v = parse_tuple(s, ctx);
    if (v.size() != 3) throw parse_error(ctx + ": expected 3 components");
    return {v[0], v[1], v[2]};
}

inline std::string fmt(double x) { return io::format_double(x); }

} // namespace detail

// ------------------------------ coupling specs -------------------------------

struct Coupling1Spec {
    enum class Kind { Zero, Lorentzian, Gaussian, Constant, Table };
    Kind kind{Kind::Zero};
    double g{0.0}, wc{0.0}, lambda{1.0}, cutoff{0.0};
    std::string path;
    Eigen::Matrix3d anisotropy{Eigen::Matrix3d::Identity()};

    model::Coupling1 build() const {
        using model::Envelope;
        switch (kind) {
            case Kind::Zero: return model::Coupling1::zero();
            case Kind::Lorentzian:
                return model::Coupling1::anisotropic(Envelope::lorentzian(g, wc, lambda), anisotropy);
            case Kind::Gaussian:
                return model::Coupling1::anisotropic(Envelope::gaussian(g, wc, lambda), anisotropy);
            case Kind::Constant:
                return model::Coupling1::anisotropic(Envelope::constant(g, lambda, cutoff), anisotropy);
            case Kind::Table: return model::Coupling1::from_table(model::load_coupling1_table(path), path);
        }
        return model::Coupling1::zero();
    }

    std::string canonical() const {
        using detail::fmt;
        switch (kind) {
            case Kind::Zero: return "zero";
            case Kind::Lorentzian: return "lorentzian(g=" + fmt(g) + ",wc=" + fmt(wc) + ",lambda=" + fmt(lambda) + ")";
            case Kind::Gaussian: return "gaussian(g=" + fmt(g) + ",wc=" + fmt(wc) + ",sigma=" + fmt(lambda) + ")";
            case Kind::Constant: return "constant(g=" + fmt(g) + ",lambda=" + fmt(lambda) + ",cutoff=" + fmt(cutoff) + ")";
            case Kind::Table: return "table(" + path + ")";
        }
        return "zero";
    }
};

struct Coupling2Spec {
    enum class Kind { None, Separable, Table };
    enum class Structure { Ident, Ones, Seeded };
    enum class Family { Lorentzian, Gaussian, Constant };
    Kind kind{Kind::None};
    Family family{Family::Lorentzian};
    double eps{0.0}, wc{0.0}, lambda{1.0}, cutoff{0.0};
    Structure structure{Structure::Ident};
    std::uint64_t structure_seed{1};
    std::string path;

    // unit-amplitude envelope; eps scales the structure tensor so the
    // resulting f2 (and chi2) is linear in eps
    model::Envelope envelope() const {
        switch (family) {
            case Family::Lorentzian: return model::Envelope::lorentzian(1.0, wc, lambda);
            case Family::Gaussian: return model::Envelope::gaussian(1.0, wc, lambda);
            case Family::Constant: return model::Envelope::constant(1.0, lambda, cutoff);
        }
        return model::Envelope::zero();
    }

    model::Coupling2 build() const {
        switch (kind) {
            case Kind::None: return model::Coupling2::zero();
            case Kind::Separable: {
                Tensor3 h{};
                if (structure == Structure::Ident) h = model::structure_ident();
                else if (structure == Structure::Ones) h = model::structure_ones();
                else h = model::structure_seeded(structure_seed);
                h *= eps;
                const model::Envelope e = envelope();
                return model::Coupling2::separable(h, e, e);
            }
            case Kind::Table: return model::Coupling2::from_table(model::load_coupling2_table(path), path);
        }
        return model::Coupling2::zero();
    }

    std::string canonical() const {
        using detail::fmt;
        if (kind == Kind::None) return "none";
        if (kind == Kind::Table) return "table(" + path + ")";
        std::string fam = family == Family::Lorentzian ? "lorentzian" : family == Family::Gaussian ? "gaussian" : "constant";
        std::string h = structure == Structure::Ident ? "ident"
                        : structure == Structure::Ones ? "ones"
                                                       : "seeded(" + std::to_string(structure_seed) + ")";
        std::string s = "separable(eps=" + fmt(eps) + ",family=" + fam + ",wc=" + fmt(wc) + ",lambda=" + fmt(lambda);
        if (family == Family::Constant) s += ",cutoff=" + fmt(cutoff);
        return s + ",h=" + h + ")";
    }
};

struct Coupling3Spec {
    enum class Kind { None, Separable };
    Coupling3Spec() = default;
    Kind kind{Kind::None};
    double eps{0.0}, wc{0.0}, lambda{1.0};
    bool seeded{false};
    std::uint64_t structure_seed{1};

    model::Coupling3 build() const {
        if (kind == Kind::None) return model::Coupling3::zero();
        Tensor4 h = seeded ? model::structure4_seeded(structure_seed) : model::structure4_ident();
        h *= eps;
        return model::Coupling3::separable(h, model::Envelope::gaussian(1.0, wc, lambda));
    }

    std::string canonical() const {
        using detail::fmt;
        if (kind == Kind::None) return "none";
        std::string h = seeded ? "seeded(" + std::to_string(structure_seed) + ")" : "ident";
        return "separable(eps=" + fmt(eps) + ",wc=" + fmt(wc) + ",lambda=" + fmt(lambda) + ",h=" + h + ")";
    }
};

// -------------------------------- scenario -----------------------------------

struct Scenario {
    std::string name{"scenario"};
    Task task{Task::Validate};
    std::uint64_t seed{0};

    double hbar{1.0}, mass_unit{1.0}, kB{1.0};

    model::QuadratureRule grid_rule{model::QuadratureRule::GaussLegendre};
    int grid_n{128};
    double grid_cutoff{20.0};

    Coupling1Spec coupling1;
    Coupling2Spec coupling2;
    Coupling3Spec coupling3;

    double t_begin{0.01}, t_end{10.0};
    int chi_samples{200};
    int chi_order{1};
    bool chi_noise{false};

    double time_h{0.01}, time_T{10.0};

    double sys_mass{1.0};
    dyn::PotentialKind potential{dyn::PotentialKind::Free};
    double potential_omega{0.0};
    std::string potential_table;
    Eigen::Vector3d q0{0.0, 0.0, 0.0}, v0{1.0, 0.0, 0.0};

    dyn::SamplerKind sampler{dyn::SamplerKind::Zero};
    double bath_kT{0.0};

    std::string langevin_mode{"macro"};  // micro | macro | compare
    std::vector<int> levels{64, 128, 256};
    int ref_modes{1024};

    double atom_omega0{2.0};
    Eigen::Vector3d dipole_re{1.0, 0.0, 0.0}, dipole_im{0.0, 0.0, 0.0};
    double atom_mass{1.0};
    std::string atom_form{"finite"};  // finite | markov
    double fit_t0{-1.0}, fit_t1{-1.0};  // resolved to 5/w0, 30/w0 when unset

    std::string sweep_parameter;
    std::vector<std::string> sweep_values;

    // --- derived builders ---
    model::FrequencyGrid build_grid() const { return model::build_grid(grid_rule, grid_n, grid_cutoff); }

    dyn::SystemConfig build_system() const {
        dyn::SystemConfig s;
        s.mass = sys_mass;
        s.potential = potential;
        s.omega = potential_omega;
        s.q0 = q0;
        s.v0 = v0;
        if (potential == dyn::PotentialKind::TabulatedForce) {
            auto tbl = std::make_shared<dyn::ForceTable>();
            const std::string text = io::read_text_file(potential_table);
            std::istringstream in(text);
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                const auto f = model::detail::split_csv_line(line);
                if (f.size() != 2) continue;
                try {
                    tbl->x.push_back(std::stod(f[0]));
                    tbl->f.push_back(std::stod(f[1]));
                } catch (...) { continue; }  // header
            }
            s.force_table = tbl;
        }
        return s;
    }

    double resolved_fit_t0() const { return fit_t0 > 0.0 ? fit_t0 : 5.0 / atom_omega0; }
    double resolved_fit_t1() const { return fit_t1 > 0.0 ? fit_t1 : 30.0 / atom_omega0; }

    // canonical serialization of the fully resolved scenario, sorted by key
    std::string resolved_text() const;
};

// ------------------------------ the parser -----------------------------------

namespace detail {

inline const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "name", "task", "seed",
        "units.hbar", "units.mass", "units.kB",
        "grid",
        "coupling1", "coupling1.anisotropy", "coupling2", "coupling3",
        "times", "chi.samples", "chi.order", "chi.noise",
        "time.h", "time.T",
        "sys.mass", "sys.potential", "sys.q0", "sys.v0",
        "bath.sampler",
        "langevin.mode", "langevin.levels", "langevin.ref_modes",
        "atom.omega0", "atom.dipole", "atom.dipole_im", "atom.mass", "atom.form",
        "fit.t0", "fit.t1",
        "sweep.parameter", "sweep.values",
    };
    return keys;
}

inline void apply_key(Scenario& sc, const std::string& key, const std::string& value, int line_no) {
    const std::string ctx = "line " + std::to_string(line_no) + ", key '" + key + "'";
    Call call;
    const bool is_call = parse_call(value, call);

    if (key == "name") { sc.name = value; return; }
    if (key == "task") { sc.task = task_from_name(value); return; }
    if (key == "seed") { sc.seed = std::stoull(value); return; }
    if (key == "units.hbar") { sc.hbar = parse_number(value, ctx); return; }
    if (key == "units.mass") { sc.mass_unit = parse_number(value, ctx); sc.sys_mass = sc.mass_unit; sc.atom_mass = sc.mass_unit; return; }
    if (key == "units.kB") { sc.kB = parse_number(value, ctx); return; }

    if (key == "grid") {
        if (!is_call) throw parse_error(ctx + ": expected gl(n, cutoff) or trapezoid(n, cutoff)");
        sc.grid_rule = model::rule_from_name(call.name);
        sc.grid_n = static_cast<int>(parse_number(call.positional(0, ctx), ctx));
        sc.grid_cutoff = parse_number(call.positional(1, ctx), ctx);
        return;
    }

    if (key == "coupling1") {
        Coupling1Spec& c = sc.coupling1;
        if (value == "zero") { c.kind = Coupling1Spec::Kind::Zero; return; }
        if (!is_call) throw parse_error(ctx + ": unknown coupling family '" + value + "'");
        if (call.name == "lorentzian") {
            c.kind = Coupling1Spec::Kind::Lorentzian;
            c.g = call.named_num("g", ctx);
            c.wc = call.named_num("wc", ctx);
            c.lambda = call.named_num("lambda", ctx);
        } else if (call.name == "gaussian") {
            c.kind = Coupling1Spec::Kind::Gaussian;
            c.g = call.named_num("g", ctx);
            c.wc = call.named_num("wc", ctx);
            c.lambda = call.named_num("sigma", ctx);
        } else if (call.name == "constant") {
            c.kind = Coupling1Spec::Kind::Constant;
            c.g = call.named_num("g", ctx);
            c.lambda = call.named_num_or("lambda", 1.0);
            c.cutoff = call.named_num("cutoff", ctx);
        } else if (call.name == "table") {
            c.kind = Coupling1Spec::Kind::Table;
            c.path = call.positional(0, ctx);
        } else {
            throw parse_error(ctx + ": unknown coupling family '" + call.name + "'");
        }
        return;
    }

    if (key == "coupling1.anisotropy") {
        if (!is_call) throw parse_error(ctx + ": expected diag(a,b,c) or matrix(9 values)");
        if (call.name == "diag") {
            Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
            for (int i = 0; i < 3; ++i) m(i, i) = parse_number(call.positional(static_cast<std::size_t>(i), ctx), ctx);
            sc.coupling1.anisotropy = m;
        } else if (call.name == "matrix") {
            if (call.args.size() != 9) throw parse_error(ctx + ": matrix() needs 9 values");
            Eigen::Matrix3d m;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    m(i, j) = parse_number(call.positional(static_cast<std::size_t>(i * 3 + j), ctx), ctx);
            sc.coupling1.anisotropy = m;
        } else {
            throw parse_error(ctx + ": expected diag(...) or matrix(...)");
        }
        return;
    }

    if (key == "coupling2") {
        Coupling2Spec& c = sc.coupling2;
        if (value == "none" || value == "zero") { c.kind = Coupling2Spec::Kind::None; return; }
        if (!is_call) throw parse_error(ctx + ": expected none, separable(...), or table(path)");
        if (call.name == "separable") {
            c.kind = Coupling2Spec::Kind::Separable;
            c.eps = call.named_num("eps", ctx);
            const std::string fam = call.named("family").value_or("lorentzian");
            if (fam == "lorentzian") c.family = Coupling2Spec::Family::Lorentzian;
            else if (fam == "gaussian") c.family = Coupling2Spec::Family::Gaussian;
            else if (fam == "constant") c.family = Coupling2Spec::Family::Constant;
            else throw parse_error(ctx + ": unknown envelope family '" + fam + "'");
            c.wc = call.named_num_or("wc", 0.0);
            c.lambda = call.named_num_or("lambda", 1.0);
            c.cutoff = call.named_num_or("cutoff", 0.0);
            const std::string h = call.named("h").value_or("ident");
            Call hcall;
            if (h == "ident") c.structure = Coupling2Spec::Structure::Ident;
            else if (h == "ones") c.structure = Coupling2Spec::Structure::Ones;
            else if (parse_call(h, hcall) && hcall.name == "seeded") {
                c.structure = Coupling2Spec::Structure::Seeded;
                c.structure_seed = std::stoull(hcall.positional(0, ctx));
            } else {
                throw parse_error(ctx + ": unknown structure '" + h + "'");
            }
        } else if (call.name == "table") {
            c.kind = Coupling2Spec::Kind::Table;
            c.path = call.positional(0, ctx);
        } else {
            throw parse_error(ctx + ": expected none, separable(...), or table(path)");
        }
        return;
    }

    if (key == "coupling3") {
        Coupling3Spec& c = sc.coupling3;
        if (value == "none" || value == "zero") { c.kind = Coupling3Spec::Kind::None; return; }
        if (!is_call || call.name != "separable") throw parse_error(ctx + ": expected none or separable(...)");
        c.kind = Coupling3Spec::Kind::Separable;
        c.eps = call.named_num("eps", ctx);
        c.wc = call.named_num_or("wc", 0.0);
        c.lambda = call.named_num_or("lambda", 1.0);
        const std::string h = call.named("h").value_or("ident");
        Call hcall;
        if (h == "ident") c.seeded = false;
        else if (parse_call(h, hcall) && hcall.name == "seeded") {
            c.seeded = true;
            c.structure_seed = std::stoull(hcall.positional(0, ctx));
        } else {
            throw parse_error(ctx + ": unknown structure '" + h + "'");
        }
        return;
    }

    if (key == "times") {
        const auto v = parse_tuple(value, ctx);
        if (v.size() != 2) throw parse_error(ctx + ": expected (t_begin, t_end)");
        sc.t_begin = v[0];
        sc.t_end = v[1];
        return;
    }
    if (key == "chi.samples") { sc.chi_samples = static_cast<int>(parse_number(value, ctx)); return; }
    if (key == "chi.order") {
        sc.chi_order = static_cast<int>(parse_number(value, ctx));
        if (sc.chi_order < 1 || sc.chi_order > 3) throw parse_error(ctx + ": chi.order must be 1, 2, or 3");
        return;
    }
    if (key == "chi.noise") { sc.chi_noise = (value == "true" || value == "1"); return; }

    if (key == "time.h") { sc.time_h = parse_number(value, ctx); return; }
    if (key == "time.T") { sc.time_T = parse_number(value, ctx); return; }

    if (key == "sys.mass") { sc.sys_mass = parse_number(value, ctx); return; }
    if (key == "sys.potential") {
        if (value == "free") { sc.potential = dyn::PotentialKind::Free; return; }
        if (is_call && call.name == "harmonic") {
            sc.potential = dyn::PotentialKind::Harmonic;
            sc.potential_omega = parse_number(call.positional(0, ctx), ctx);
            return;
        }
        if (is_call && call.name == "table") {
            sc.potential = dyn::PotentialKind::TabulatedForce;
            sc.potential_table = call.positional(0, ctx);
            return;
        }
        throw parse_error(ctx + ": expected free, harmonic(omega), or table(path)");
    }
    if (key == "sys.q0") { sc.q0 = parse_vec3(value, ctx); return; }
    if (key == "sys.v0") { sc.v0 = parse_vec3(value, ctx); return; }

    if (key == "bath.sampler") {
        if (value == "zero") { sc.sampler = dyn::SamplerKind::Zero; return; }
        if (is_call && call.name == "thermal") {
            sc.sampler = dyn::SamplerKind::ClassicalThermal;
            sc.bath_kT = parse_number(call.positional(0, ctx), ctx);
            return;
        }
        throw parse_error(ctx + ": expected zero or thermal(kT)");
    }

    if (key == "langevin.mode") {
        if (value != "micro" && value != "macro" && value != "compare")
            throw parse_error(ctx + ": expected micro, macro, or compare");
        sc.langevin_mode = value;
        return;
    }
    if (key == "langevin.levels") {
        sc.levels.clear();
        for (const auto& s : split_args(value)) sc.levels.push_back(static_cast<int>(parse_number(s, ctx)));
        return;
    }
    if (key == "langevin.ref_modes") { sc.ref_modes = static_cast<int>(parse_number(value, ctx)); return; }

    if (key == "atom.omega0") { sc.atom_omega0 = parse_number(value, ctx); return; }
    if (key == "atom.dipole") { sc.dipole_re = parse_vec3(value, ctx); return; }
    if (key == "atom.dipole_im") { sc.dipole_im = parse_vec3(value, ctx); return; }
    if (key == "atom.mass") { sc.atom_mass = parse_number(value, ctx); return; }
    if (key == "atom.form") {
        if (value != "finite" && value != "markov") throw parse_error(ctx + ": expected finite or markov");
        sc.atom_form = value;
        return;
    }
    if (key == "fit.t0") { sc.fit_t0 = parse_number(value, ctx); return; }
    if (key == "fit.t1") { sc.fit_t1 = parse_number(value, ctx); return; }

    if (key == "sweep.parameter") { sc.sweep_parameter = value; return; }
    if (key == "sweep.values") {
        sc.sweep_values.clear();
        for (const auto& s : split_args(value)) sc.sweep_values.push_back(s);
        return;
    }

    throw parse_error(ctx + ": unhandled key");
}

} // namespace detail

inline Scenario parse_scenario_text(const std::string& text) {
    Scenario sc;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    bool task_seen = false;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string s = detail::trim(line);
        if (s.empty() || s[0] == '#') continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw parse_error("line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = detail::trim(s.substr(0, eq));
        const std::string value = detail::trim(s.substr(eq + 1));
        if (detail::known_keys().count(key) == 0)
            throw parse_error("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        if (!seen.insert(key).second)
            throw parse_error("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        if (value.empty()) throw parse_error("line " + std::to_string(line_no) + ": empty value for '" + key + "'");
        detail::apply_key(sc, key, value, line_no);
        if (key == "task") task_seen = true;
    }
    if (!task_seen) throw parse_error("missing required key 'task'");
    if (!(sc.time_h > 0.0)) throw parse_error("time.h must be > 0");
    if (!(sc.time_T >= sc.time_h)) throw parse_error("time.T must be >= time.h");
    return sc;
}

inline Scenario parse_scenario(const std::string& path) {
    return parse_scenario_text(io::read_text_file(path));
}

inline std::string Scenario::resolved_text() const {
    using detail::fmt;
    std::map<std::string, std::string> kv;
    kv["name"] = name;
    kv["task"] = task_name(task);
    kv["seed"] = std::to_string(seed);
    kv["units.hbar"] = fmt(hbar);
    kv["units.mass"] = fmt(mass_unit);
    kv["units.kB"] = fmt(kB);
    kv["grid"] = (grid_rule == model::QuadratureRule::GaussLegendre ? std::string("gl(") : std::string("trapezoid(")) +
                 std::to_string(grid_n) + "," + fmt(grid_cutoff) + ")";
    kv["coupling1"] = coupling1.canonical();
    {
        std::string m = "matrix(";
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                m += fmt(coupling1.anisotropy(i, j)) + (i == 2 && j == 2 ? ")" : ",");
        kv["coupling1.anisotropy"] = m;
    }
    kv["coupling2"] = coupling2.canonical();
    kv["coupling3"] = coupling3.canonical();
    kv["times"] = "(" + fmt(t_begin) + "," + fmt(t_end) + ")";
    kv["chi.samples"] = std::to_string(chi_samples);
    kv["chi.order"] = std::to_string(chi_order);
    kv["chi.noise"] = chi_noise ? "true" : "false";
    kv["time.h"] = fmt(time_h);
    kv["time.T"] = fmt(time_T);
    kv["sys.mass"] = fmt(sys_mass);
    kv["sys.potential"] = potential == dyn::PotentialKind::Free ? "free"
                          : potential == dyn::PotentialKind::Harmonic
                              ? "harmonic(" + fmt(potential_omega) + ")"
                              : "table(" + potential_table + ")";
    kv["sys.q0"] = "(" + fmt(q0[0]) + "," + fmt(q0[1]) + "," + fmt(q0[2]) + ")";
    kv["sys.v0"] = "(" + fmt(v0[0]) + "," + fmt(v0[1]) + "," + fmt(v0[2]) + ")";
    kv["bath.sampler"] = sampler == dyn::SamplerKind::Zero ? "zero" : "thermal(" + fmt(bath_kT) + ")";
    kv["langevin.mode"] = langevin_mode;
    {
        std::string s;
        for (std::size_t i = 0; i < levels.size(); ++i) s += std::to_string(levels[i]) + (i + 1 < levels.size() ? "," : "");
        kv["langevin.levels"] = s;
    }
    kv["langevin.ref_modes"] = std::to_string(ref_modes);
    kv["atom.omega0"] = fmt(atom_omega0);
    kv["atom.dipole"] = "(" + fmt(dipole_re[0]) + "," + fmt(dipole_re[1]) + "," + fmt(dipole_re[2]) + ")";
    kv["atom.dipole_im"] = "(" + fmt(dipole_im[0]) + "," + fmt(dipole_im[1]) + "," + fmt(dipole_im[2]) + ")";
    kv["atom.mass"] = fmt(atom_mass);
    kv["atom.form"] = atom_form;
    kv["fit.t0"] = fmt(resolved_fit_t0());
    kv["fit.t1"] = fmt(resolved_fit_t1());
    kv["sweep.parameter"] = sweep_parameter.empty() ? "none" : sweep_parameter;
    {
        std::string s;
        for (std::size_t i = 0; i < sweep_values.size(); ++i) s += sweep_values[i] + (i + 1 < sweep_values.size() ? "," : "");
        kv["sweep.values"] = s.empty() ? "none" : s;
    }

    std::ostringstream os;
    for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
    return os.str();
}

} // namespace nlbath::cli
