// grid.hpp — Frequency grids and quadrature rules on (0, cutoff)

#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nlbath::model {

enum class QuadratureRule { Trapezoid, GaussLegendre };

inline std::string rule_name(QuadratureRule r) {
    return r == QuadratureRule::Trapezoid ? "trapezoid" : "gauss-legendre";
}

inline QuadratureRule rule_from_name(std::string_view name) {
    if (name == "trapezoid") return QuadratureRule::Trapezoid;
    if (name == "gauss-legendre" || name == "gl") return QuadratureRule::GaussLegendre;
    throw std::invalid_argument("unknown quadrature rule '" + std::string(name) + "'");
}

// Discretization of the continuum frequency label: strictly increasing
// positive nodes with positive weights approximating integrals over (0, cutoff).
struct FrequencyGrid {
    std::vector<double> points;
    std::vector<double> weights;
    double cutoff{0.0};
    QuadratureRule rule{QuadratureRule::GaussLegendre};

    std::size_t size() const { return points.size(); }

    template <class F>
    double integrate(F&& f) const {
        double s = 0.0;
        for (std::size_t k = 0; k < points.size(); ++k) s += weights[k] * f(points[k]);
        return s;
    }
};

// Gauss-Legendre nodes/weights on (-1, 1) by Newton iteration on P_n.
inline void gauss_legendre_nodes(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(static_cast<std::size_t>(n), 0.0);
    w.assign(static_cast<std::size_t>(n), 0.0);
    const int m = (n + 1) / 2;
    for (int k = 0; k < m; ++k) {
        // Chebyshev-based initial guess for the k-th root (descending order)
        double z = std::cos(std::numbers::pi * (k + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[static_cast<std::size_t>(k)] = -z;
        x[static_cast<std::size_t>(n - 1 - k)] = z;
        const double wk = 2.0 / ((1.0 - z * z) * pp * pp);
        w[static_cast<std::size_t>(k)] = wk;
        w[static_cast<std::size_t>(n - 1 - k)] = wk;
    }
}

// Build a quadrature grid for integrals over (0, cutoff).
//  - gauss-legendre: nodes mapped from (-1,1), all strictly interior
//  - trapezoid: uniform nodes from a tiny positive guard up to cutoff
inline FrequencyGrid build_grid(QuadratureRule rule, int n_points, double cutoff) {
    if (n_points < 2) throw std::invalid_argument("build_grid: n_points must be >= 2");
    if (!(cutoff > 0.0)) throw std::invalid_argument("build_grid: cutoff must be > 0");

    FrequencyGrid g;
    g.cutoff = cutoff;
    g.rule = rule;
    const std::size_t n = static_cast<std::size_t>(n_points);

    if (rule == QuadratureRule::GaussLegendre) {
        std::vector<double> x, w;
        gauss_legendre_nodes(n_points, x, w);
        g.points.resize(n);
        g.weights.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            g.points[k] = 0.5 * cutoff * (x[k] + 1.0);
            g.weights[k] = 0.5 * cutoff * w[k];
        }
    } else {
        // guard keeps the first node strictly positive; its effect on the
        // weight sum stays below the 1e-12 relative budget
        const double guard = cutoff * 1e-13;
        const double h = (cutoff - guard) / (n_points - 1);
        g.points.resize(n);
        g.weights.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            g.points[k] = guard + h * static_cast<double>(k);
            g.weights[k] = (k == 0 || k + 1 == n) ? 0.5 * h : h;
        }
        g.points.back() = cutoff;
    }
    return g;
}

inline FrequencyGrid build_grid(std::string_view rule, int n_points, double cutoff) {
    return build_grid(rule_from_name(rule), n_points, cutoff);
}

} // namespace nlbath::model
