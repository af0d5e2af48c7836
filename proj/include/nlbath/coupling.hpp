// coupling.hpp — Frequency-dependent coupling tensors of rank 2..4,
// their parametric families, tabulated variants, symmetry validation,
// and the orthogonal transformation that leaves all observables unchanged.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "nlbath/errors.hpp"
#include "nlbath/grid.hpp"
#include "nlbath/tensor.hpp"

namespace nlbath::model {

// ------------------------------ scalar envelopes -----------------------------

// Scalar frequency profile g(w). Every shipped family carries a w/(w+width)
// regulator so that g vanishes at least linearly as w -> 0, keeping the
// f f / w susceptibility integrand finite at the origin.
struct Envelope {
    enum class Kind { Zero, Lorentzian, Gaussian, Constant };

    Kind kind{Kind::Zero};
    double amp{0.0};     // peak amplitude scale
    double center{0.0};  // peak position (lorentzian/gaussian)
    double width{1.0};   // lorentzian/gaussian width; also the regulator scale
    double cut{std::numeric_limits<double>::infinity()};  // hard cutoff (constant family)

    static Envelope zero() { return {}; }
    static Envelope lorentzian(double g, double wc, double lambda) {
        return {Kind::Lorentzian, g, wc, lambda, std::numeric_limits<double>::infinity()};
    }
    static Envelope gaussian(double g, double wc, double sigma) {
        return {Kind::Gaussian, g, wc, sigma, std::numeric_limits<double>::infinity()};
    }
    static Envelope constant(double g, double lambda, double cutoff) {
        return {Kind::Constant, g, 0.0, lambda, cutoff};
    }

    double operator()(double w) const {
        switch (kind) {
            case Kind::Zero: return 0.0;
            case Kind::Lorentzian: {
                const double d = w - center;
                return amp * width * width / (d * d + width * width) * w / (w + width);
            }
            case Kind::Gaussian: {
                const double d = (w - center) / width;
                return amp * std::exp(-0.5 * d * d) * w / (w + width);
            }
            case Kind::Constant:
                return w <= cut ? amp * w / (w + width) : 0.0;
        }
        return 0.0;
    }

    bool is_zero() const { return kind == Kind::Zero || amp == 0.0; }

    // Frequency above which |g| stays below rel times its peak; used to pick
    // default band limits. Lorentzian tails decay slowly, so this can be large.
    double suggested_cutoff(double rel = 1e-8) const {
        switch (kind) {
            case Kind::Zero: return 1.0;
            case Kind::Lorentzian: return center + width * std::sqrt(1.0 / rel);
            case Kind::Gaussian: return center + width * std::sqrt(-2.0 * std::log(rel));
            case Kind::Constant: return cut;
        }
        return 1.0;
    }

    std::string describe() const {
        std::ostringstream os;
        os.precision(17);
        switch (kind) {
            case Kind::Zero: os << "zero"; break;
            case Kind::Lorentzian: os << "lorentzian(g=" << amp << ",wc=" << center << ",lambda=" << width << ")"; break;
            case Kind::Gaussian: os << "gaussian(g=" << amp << ",wc=" << center << ",sigma=" << width << ")"; break;
            case Kind::Constant: os << "constant(g=" << amp << ",lambda=" << width << ",cutoff=" << cut << ")"; break;
        }
        return os.str();
    }
};

// ------------------------------ tabulated data -------------------------------

// Rank-2 table on a frequency column: rows (omega, i, j, value).
// Linear interpolation between rows, linear ramp from zero below the first
// row (keeps the w->0 integrability), exact zero above the last row.
struct CouplingTable1 {
    std::vector<double> omegas;            // strictly increasing
    std::vector<Eigen::Matrix3d> values;   // one per omega

    Eigen::Matrix3d eval(double w) const {
        if (omegas.empty() || w <= 0.0 || w > omegas.back()) return Eigen::Matrix3d::Zero();
        if (w <= omegas.front()) return (w / omegas.front()) * values.front();
        const auto it = std::upper_bound(omegas.begin(), omegas.end(), w);
        const std::size_t hi = static_cast<std::size_t>(it - omegas.begin());
        const std::size_t lo = hi - 1;
        const double s = (w - omegas[lo]) / (omegas[hi] - omegas[lo]);
        return (1.0 - s) * values[lo] + s * values[hi];
    }
};

// Rank-3 table on a shared frequency column per axis: rows (omega1, omega2, i, j, k, value).
struct CouplingTable2 {
    std::vector<double> omegas;       // strictly increasing, shared by both axes
    std::vector<Tensor3> values;      // row-major (a, b) -> omegas[a], omegas[b]

    const Tensor3& node(std::size_t a, std::size_t b) const { return values[a * omegas.size() + b]; }

    Tensor3 eval(double w1, double w2) const {
        Tensor3 out{};
        if (omegas.empty()) return out;
        const auto clamp_axis = [&](double w, std::size_t& lo, double& s, double& ramp) -> bool {
            if (w <= 0.0 || w > omegas.back()) return false;
            if (w <= omegas.front()) {
                lo = 0;
                s = 0.0;
                ramp = w / omegas.front();
                return true;
            }
            const auto it = std::upper_bound(omegas.begin(), omegas.end(), w);
            const std::size_t hi = static_cast<std::size_t>(it - omegas.begin());
            lo = hi - 1;
            s = (w - omegas[lo]) / (omegas[hi] - omegas[lo]);
            ramp = 1.0;
            return true;
        };
        std::size_t a = 0, b = 0;
        double sa = 0.0, sb = 0.0, ra = 1.0, rb = 1.0;
        if (!clamp_axis(w1, a, sa, ra) || !clamp_axis(w2, b, sb, rb)) return out;
        const std::size_t a1 = std::min(a + 1, omegas.size() - 1);
        const std::size_t b1 = std::min(b + 1, omegas.size() - 1);
        for (int n = 0; n < 27; ++n) {
            const double v00 = node(a, b).v[static_cast<std::size_t>(n)];
            const double v01 = node(a, b1).v[static_cast<std::size_t>(n)];
            const double v10 = node(a1, b).v[static_cast<std::size_t>(n)];
            const double v11 = node(a1, b1).v[static_cast<std::size_t>(n)];
            out.v[static_cast<std::size_t>(n)] =
                ra * rb * ((1 - sa) * (1 - sb) * v00 + (1 - sa) * sb * v01 + sa * (1 - sb) * v10 + sa * sb * v11);
        }
        return out;
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline bool looks_like_header(const std::vector<std::string>& fields) {
    for (const auto& f : fields) {
        char* end = nullptr;
        std::strtod(f.c_str(), &end);
        if (end == f.c_str()) return true;
    }
    return false;
}

} // namespace detail

// Load rows (omega, i, j, value); indices are 1-based in files.
inline CouplingTable1 load_coupling1_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open coupling table '" + path + "'");
    std::map<double, Eigen::Matrix3d> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = detail::split_csv_line(line);
        if (first && detail::looks_like_header(f)) { first = false; continue; }
        first = false;
        if (f.size() != 4) throw parse_error("coupling1 table '" + path + "': expected 4 columns, got " + std::to_string(f.size()));
        const double w = std::stod(f[0]);
        const int i = std::stoi(f[1]) - 1;
        const int j = std::stoi(f[2]) - 1;
        const double val = std::stod(f[3]);
        if (i < 0 || i > 2 || j < 0 || j > 2) throw parse_error("coupling1 table '" + path + "': index out of range");
        auto [it, inserted] = rows.try_emplace(w, Eigen::Matrix3d::Zero());
        it->second(i, j) = val;
    }
    CouplingTable1 tbl;
    for (auto& [w, m] : rows) {
        if (!(w > 0.0)) throw std::invalid_argument("coupling1 table '" + path + "': omega must be > 0");
        tbl.omegas.push_back(w);
        tbl.values.push_back(m);
    }
    return tbl;
}

// Load rows (omega1, omega2, i, j, k, value); missing grid entries are zero.
inline CouplingTable2 load_coupling2_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open coupling table '" + path + "'");
    struct Row { double w1, w2; int i, j, k; double val; };
    std::vector<Row> raw;
    std::vector<double> ws;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = detail::split_csv_line(line);
        if (first && detail::looks_like_header(f)) { first = false; continue; }
        first = false;
        if (f.size() != 6) throw parse_error("coupling2 table '" + path + "': expected 6 columns, got " + std::to_string(f.size()));
        Row r{std::stod(f[0]), std::stod(f[1]), std::stoi(f[2]) - 1, std::stoi(f[3]) - 1, std::stoi(f[4]) - 1, std::stod(f[5])};
        if (r.i < 0 || r.i > 2 || r.j < 0 || r.j > 2 || r.k < 0 || r.k > 2)
            throw parse_error("coupling2 table '" + path + "': index out of range");
        if (!(r.w1 > 0.0) || !(r.w2 > 0.0)) throw std::invalid_argument("coupling2 table '" + path + "': omegas must be > 0");
        raw.push_back(r);
        ws.push_back(r.w1);
        ws.push_back(r.w2);
    }
    std::sort(ws.begin(), ws.end());
    ws.erase(std::unique(ws.begin(), ws.end()), ws.end());
    CouplingTable2 tbl;
    tbl.omegas = ws;
    tbl.values.assign(ws.size() * ws.size(), Tensor3{});
    for (const Row& r : raw) {
        const std::size_t a = static_cast<std::size_t>(std::lower_bound(ws.begin(), ws.end(), r.w1) - ws.begin());
        const std::size_t b = static_cast<std::size_t>(std::lower_bound(ws.begin(), ws.end(), r.w2) - ws.begin());
        tbl.values[a * ws.size() + b](r.i, r.j, r.k) = r.val;
    }
    return tbl;
}

// ------------------------------ rank-2 coupling ------------------------------

// f^(1)_ij(w): couples the system velocity to one bath coordinate.
class Coupling1 {
public:
    using EvalFn = std::function<Eigen::Matrix3d(double)>;

    Coupling1() : desc_("zero") {}

    static Coupling1 zero() { return {}; }

    static Coupling1 isotropic(Envelope g) {
        return anisotropic(g, Eigen::Matrix3d::Identity(), /*tag=*/"iso");
    }

    static Coupling1 anisotropic(Envelope g, const Eigen::Matrix3d& aniso, const std::string& tag = "aniso") {
        Coupling1 c;
        if (g.is_zero()) return c;
        c.fn_ = [g, aniso](double w) -> Eigen::Matrix3d { return g(w) * aniso; };
        c.zero_ = false;
        c.support_upper_ = g.suggested_cutoff();
        std::ostringstream os;
        os.precision(17);
        os << "c1:" << tag << ":" << g.describe() << ":M=";
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) os << aniso(i, j) << (i == 2 && j == 2 ? "" : ",");
        c.desc_ = os.str();
        return c;
    }

    static Coupling1 from_table(CouplingTable1 tbl, const std::string& origin = "table") {
        Coupling1 c;
        if (tbl.omegas.empty()) return c;
        c.zero_ = false;
        c.support_upper_ = tbl.omegas.back();
        c.tabulated_ = true;
        auto shared = std::make_shared<CouplingTable1>(std::move(tbl));
        c.fn_ = [shared](double w) { return shared->eval(w); };
        c.desc_ = "c1:table:" + origin;
        return c;
    }

    // Arbitrary rule; used by tests and by the gauge transformation below.
    static Coupling1 from_function(EvalFn fn, const std::string& desc) {
        Coupling1 c;
        c.fn_ = std::move(fn);
        c.zero_ = false;
        c.desc_ = desc;
        return c;
    }

    Eigen::Matrix3d eval(double w) const {
        if (w < 0.0) throw std::invalid_argument("Coupling1::eval: omega must be >= 0");
        if (zero_) return Eigen::Matrix3d::Zero();
        return fn_(w);
    }
    Eigen::Matrix3d operator()(double w) const { return eval(w); }

    bool is_zero() const { return zero_; }
    bool is_tabulated() const { return tabulated_; }
    // Largest frequency with (possibly) nonzero coupling; +inf for analytic families.
    double support_upper() const { return support_upper_; }
    const std::string& describe() const { return desc_; }

    // Gauge transform f'_ij = f_im A_jm  (contraction of the trailing index with A)
    Coupling1 transformed(const Eigen::Matrix3d& A) const {
        if (zero_) return *this;
        Coupling1 c = *this;
        const Eigen::Matrix3d At = A.transpose();
        EvalFn base = fn_;
        c.fn_ = [base, At](double w) -> Eigen::Matrix3d { return base(w) * At; };
        c.desc_ = desc_ + ":A";
        return c;
    }

private:
    EvalFn fn_;
    bool zero_{true};
    bool tabulated_{false};
    double support_upper_{std::numeric_limits<double>::infinity()};
    std::string desc_;
};

// ------------------------------ rank-3 coupling ------------------------------

// Structure tensors for the separable rank-3 family.
inline Tensor3 structure_ident() {
    Tensor3 h{};
    for (int i = 0; i < 3; ++i) h(i, i, i) = 1.0;
    return h;
}
inline Tensor3 structure_ones() {
    Tensor3 h{};
    for (auto& x : h.v) x = 1.0;
    return h;
}
// Seeded random structure, symmetrized in the trailing pair so the separable
// family meets the exchange condition by construction.
inline Tensor3 structure_seeded(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Tensor3 h{};
    for (auto& x : h.v) x = u(rng);
    Tensor3 s{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) s(i, j, k) = 0.5 * (h(i, j, k) + h(i, k, j));
    return s;
}

// f^(2)_ijk(w, w'): first nonlinear coupling. Valid inputs satisfy
// f_ijk(w, w') = f_ikj(w', w).
class Coupling2 {
public:
    using EvalFn = std::function<Tensor3(double, double)>;

    Coupling2() : desc_("zero") {}

    static Coupling2 zero() { return {}; }

    // Symmetrized separable family:
    //   f_ijk(w,w') = 1/2 [ h_ijk a(w) b(w') + h_ikj a(w') b(w) ]
    static Coupling2 separable(const Tensor3& h, Envelope a, Envelope b, const std::string& tag = "sep") {
        Coupling2 c;
        if ((a.is_zero() || b.is_zero()) || h.all_zero()) return c;
        c.fn_ = [h, a, b](double w1, double w2) -> Tensor3 {
            Tensor3 out{};
            const double p = a(w1) * b(w2);
            const double q = a(w2) * b(w1);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    for (int k = 0; k < 3; ++k)
                        out(i, j, k) = 0.5 * (h(i, j, k) * p + h(i, k, j) * q);
            return out;
        };
        c.zero_ = false;
        std::ostringstream os;
        os.precision(17);
        os << "c2:" << tag << ":" << a.describe() << ":" << b.describe() << ":h=";
        for (std::size_t n = 0; n < 27; ++n) os << h.v[n] << (n == 26 ? "" : ",");
        c.desc_ = os.str();
        return c;
    }

    static Coupling2 from_table(CouplingTable2 tbl, const std::string& origin = "table") {
        Coupling2 c;
        if (tbl.omegas.empty()) return c;
        c.zero_ = false;
        c.tabulated_ = true;
        auto shared = std::make_shared<CouplingTable2>(std::move(tbl));
        c.fn_ = [shared](double w1, double w2) { return shared->eval(w1, w2); };
        c.desc_ = "c2:table:" + origin;
        return c;
    }

    static Coupling2 from_function(EvalFn fn, const std::string& desc) {
        Coupling2 c;
        c.fn_ = std::move(fn);
        c.zero_ = false;
        c.desc_ = desc;
        return c;
    }

    Tensor3 eval(double w1, double w2) const {
        if (w1 < 0.0 || w2 < 0.0) throw std::invalid_argument("Coupling2::eval: omegas must be >= 0");
        if (zero_) return Tensor3{};
        return fn_(w1, w2);
    }
    Tensor3 operator()(double w1, double w2) const { return eval(w1, w2); }

    bool is_zero() const { return zero_; }
    bool is_tabulated() const { return tabulated_; }
    const std::string& describe() const { return desc_; }

    // f'_ijk = f_inm A_jn A_km
    Coupling2 transformed(const Eigen::Matrix3d& A) const {
        if (zero_) return *this;
        Coupling2 c = *this;
        EvalFn base = fn_;
        const Eigen::Matrix3d Ac = A;
        c.fn_ = [base, Ac](double w1, double w2) -> Tensor3 {
            const Tensor3 f = base(w1, w2);
            Tensor3 out{};
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    for (int k = 0; k < 3; ++k) {
                        double s = 0.0;
                        for (int n = 0; n < 3; ++n)
                            for (int m = 0; m < 3; ++m) s += f(i, n, m) * Ac(j, n) * Ac(k, m);
                        out(i, j, k) = s;
                    }
            return out;
        };
        c.desc_ = desc_ + ":A";
        return c;
    }

private:
    EvalFn fn_;
    bool zero_{true};
    bool tabulated_{false};
    std::string desc_;
};

// ------------------------------ rank-4 coupling ------------------------------

inline Tensor4 structure4_ident() {
    Tensor4 h{};
    for (int i = 0; i < 3; ++i) h(i, i, i, i) = 1.0;
    return h;
}
inline Tensor4 structure4_seeded(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Tensor4 h{};
    for (auto& x : h.v) x = u(rng);
    return h;  // symmetrization happens in the family constructor
}

// f^(3)_ijkl(w1,w2,w3): symmetric under simultaneous exchange of any two
// trailing (index, frequency) pairs.
class Coupling3 {
public:
    using EvalFn = std::function<Tensor4(double, double, double)>;

    Coupling3() : desc_("zero") {}

    static Coupling3 zero() { return {}; }

    // Full symmetrization of h_i,jkl g(w1)g(w2)g(w3) over the trailing slots.
    static Coupling3 separable(const Tensor4& h, Envelope g, const std::string& tag = "sep") {
        Coupling3 c;
        if (g.is_zero() || h.all_zero()) return c;
        c.fn_ = [h, g](double w1, double w2, double w3) -> Tensor4 {
            const double e1 = g(w1), e2 = g(w2), e3 = g(w3);
            const double p = e1 * e2 * e3;  // symmetric in the frequencies
            Tensor4 out{};
            static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    for (int k = 0; k < 3; ++k)
                        for (int l = 0; l < 3; ++l) {
                            const int idx[3] = {j, k, l};
                            double s = 0.0;
                            for (const auto& pm : perms) s += h(i, idx[pm[0]], idx[pm[1]], idx[pm[2]]);
                            out(i, j, k, l) = p * s / 6.0;
                        }
            return out;
        };
        c.zero_ = false;
        std::ostringstream os;
        os.precision(17);
        os << "c3:" << tag << ":" << g.describe() << ":h=";
        for (std::size_t n = 0; n < 81; ++n) os << h.v[n] << (n == 80 ? "" : ",");
        c.desc_ = os.str();
        return c;
    }

    static Coupling3 from_function(EvalFn fn, const std::string& desc) {
        Coupling3 c;
        c.fn_ = std::move(fn);
        c.zero_ = false;
        c.desc_ = desc;
        return c;
    }

    Tensor4 eval(double w1, double w2, double w3) const {
        if (w1 < 0.0 || w2 < 0.0 || w3 < 0.0) throw std::invalid_argument("Coupling3::eval: omegas must be >= 0");
        if (zero_) return Tensor4{};
        return fn_(w1, w2, w3);
    }
    Tensor4 operator()(double w1, double w2, double w3) const { return eval(w1, w2, w3); }

    bool is_zero() const { return zero_; }
    const std::string& describe() const { return desc_; }

    // f'_ijkl = f_inmp A_jn A_km A_lp
    Coupling3 transformed(const Eigen::Matrix3d& A) const {
        if (zero_) return *this;
        Coupling3 c = *this;
        EvalFn base = fn_;
        const Eigen::Matrix3d Ac = A;
        c.fn_ = [base, Ac](double w1, double w2, double w3) -> Tensor4 {
            const Tensor4 f = base(w1, w2, w3);
            Tensor4 out{};
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    for (int k = 0; k < 3; ++k)
                        for (int l = 0; l < 3; ++l) {
                            double s = 0.0;
                            for (int n = 0; n < 3; ++n)
                                for (int m = 0; m < 3; ++m)
                                    for (int p = 0; p < 3; ++p) s += f(i, n, m, p) * Ac(j, n) * Ac(k, m) * Ac(l, p);
                            out(i, j, k, l) = s;
                        }
            return out;
        };
        c.desc_ = desc_ + ":A";
        return c;
    }

private:
    EvalFn fn_;
    bool zero_{true};
    std::string desc_;
};

// Generic coupling of order n in {1,2,3} for the chi_n evaluator.
using CouplingN = std::variant<Coupling1, Coupling2, Coupling3>;

inline int coupling_order(const CouplingN& c) { return static_cast<int>(c.index()) + 1; }

// --------------------------- symmetry validation -----------------------------

struct SymmetryReport {
    double max_violation{0.0};
    double scale{0.0};  // max |f| seen while sampling
    // location of the worst violation
    int i{0}, j{0}, k{0};
    double w1{0.0}, w2{0.0};
};

// Max over sampled grid pairs and index triples of
// |f_ijk(w,w') - f_ikj(w',w)|  (direct transposition recompute).
inline SymmetryReport validate_coupling2_symmetry(const Coupling2& c, const FrequencyGrid& grid) {
    SymmetryReport rep;
    if (c.is_zero()) return rep;
    // subsample large grids; symmetry violations of families/tables are global
    const std::size_t n = grid.size();
    const std::size_t stride = std::max<std::size_t>(1, n / 24);
    for (std::size_t a = 0; a < n; a += stride) {
        for (std::size_t b = a; b < n; b += stride) {
            const Tensor3 fab = c.eval(grid.points[a], grid.points[b]);
            const Tensor3 fba = c.eval(grid.points[b], grid.points[a]);
            rep.scale = std::max(rep.scale, fab.max_abs());
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    for (int k = 0; k < 3; ++k) {
                        const double d = std::abs(fab(i, j, k) - fba(i, k, j));
                        if (d > rep.max_violation) {
                            rep.max_violation = d;
                            rep.i = i; rep.j = j; rep.k = k;
                            rep.w1 = grid.points[a]; rep.w2 = grid.points[b];
                        }
                    }
        }
    }
    return rep;
}

// Max violation of the trailing pair-exchange condition on f^(3).
inline SymmetryReport validate_coupling3_symmetry(const Coupling3& c, const FrequencyGrid& grid) {
    SymmetryReport rep;
    if (c.is_zero()) return rep;
    const std::size_t n = grid.size();
    const std::size_t stride = std::max<std::size_t>(1, n / 8);
    for (std::size_t a = 0; a < n; a += stride)
        for (std::size_t b = 0; b < n; b += stride)
            for (std::size_t cc = 0; cc < n; cc += stride) {
                const double wa = grid.points[a], wb = grid.points[b], wc = grid.points[cc];
                const Tensor4 f = c.eval(wa, wb, wc);
                const Tensor4 f12 = c.eval(wb, wa, wc);
                const Tensor4 f13 = c.eval(wc, wb, wa);
                rep.scale = std::max(rep.scale, f.max_abs());
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j)
                        for (int k = 0; k < 3; ++k)
                            for (int l = 0; l < 3; ++l) {
                                const double d1 = std::abs(f(i, j, k, l) - f12(i, k, j, l));
                                const double d2 = std::abs(f(i, j, k, l) - f13(i, l, k, j));
                                const double d = std::max(d1, d2);
                                if (d > rep.max_violation) {
                                    rep.max_violation = d;
                                    rep.i = i; rep.j = j; rep.k = k;
                                    rep.w1 = wa; rep.w2 = wb;
                                }
                            }
            }
    return rep;
}

// --------------------------- orthogonal transforms ---------------------------

struct OrthogonalTransform {
    Eigen::Matrix3d A{Eigen::Matrix3d::Identity()};

    double orthogonality_defect() const {
        return (A * A.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    }
};

// Deterministic seeded orthogonal matrix via Gram-Schmidt on Gaussian columns.
inline OrthogonalTransform random_orthogonal(std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::Matrix3d M;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) M(i, j) = gauss(rng);
    // modified Gram-Schmidt, two passes for orthogonality at roundoff level
    for (int pass = 0; pass < 2; ++pass) {
        for (int j = 0; j < 3; ++j) {
            for (int k = 0; k < j; ++k) M.col(j) -= M.col(k).dot(M.col(j)) * M.col(k);
            M.col(j).normalize();
        }
    }
    return OrthogonalTransform{M};
}

inline void require_orthogonal(const OrthogonalTransform& t, double tol = 1e-10) {
    if (t.orthogonality_defect() > tol)
        throw std::invalid_argument("apply_orthogonal: matrix is not orthogonal within tolerance");
}

inline Coupling1 apply_orthogonal(const Coupling1& c, const OrthogonalTransform& t) {
    require_orthogonal(t);
    return c.transformed(t.A);
}
inline Coupling2 apply_orthogonal(const Coupling2& c, const OrthogonalTransform& t) {
    require_orthogonal(t);
    return c.transformed(t.A);
}
inline Coupling3 apply_orthogonal(const Coupling3& c, const OrthogonalTransform& t) {
    require_orthogonal(t);
    return c.transformed(t.A);
}
inline CouplingN apply_orthogonal(const CouplingN& c, const OrthogonalTransform& t) {
    require_orthogonal(t);
    return std::visit([&](const auto& x) -> CouplingN { return x.transformed(t.A); }, c);
}

// ------------------------------- hashing -------------------------------------

// FNV-1a over the description strings; recorded in trajectory metadata.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t couplings_hash(const Coupling1& c1, const Coupling2* c2 = nullptr) {
    std::uint64_t h = fnv1a(c1.describe());
    if (c2) h = fnv1a(c2->describe(), h);
    return h;
}

} // namespace nlbath::model
