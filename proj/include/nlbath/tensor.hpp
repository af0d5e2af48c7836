// tensor.hpp — Small fixed-rank real tensors over 3D Cartesian indices

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace nlbath {

// Rank-3 tensor T_ijk, i,j,k in {0,1,2}
struct Tensor3 {
    std::array<double, 27> v{};

    double& operator()(int i, int j, int k) { return v[static_cast<std::size_t>((i * 3 + j) * 3 + k)]; }
    double operator()(int i, int j, int k) const { return v[static_cast<std::size_t>((i * 3 + j) * 3 + k)]; }

    Tensor3& operator+=(const Tensor3& o) {
        for (std::size_t n = 0; n < 27; ++n) v[n] += o.v[n];
        return *this;
    }
    Tensor3& operator*=(double s) {
        for (double& x : v) x *= s;
        return *this;
    }
    friend Tensor3 operator*(double s, Tensor3 t) { t *= s; return t; }
    friend Tensor3 operator+(Tensor3 a, const Tensor3& b) { a += b; return a; }

    double max_abs() const {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    }
    bool all_zero() const {
        for (double x : v) if (x != 0.0) return false;
        return true;
    }
};

// Rank-4 tensor T_ijkl
struct Tensor4 {
    std::array<double, 81> v{};

    double& operator()(int i, int j, int k, int l) {
        return v[static_cast<std::size_t>(((i * 3 + j) * 3 + k) * 3 + l)];
    }
    double operator()(int i, int j, int k, int l) const {
        return v[static_cast<std::size_t>(((i * 3 + j) * 3 + k) * 3 + l)];
    }

    Tensor4& operator+=(const Tensor4& o) {
        for (std::size_t n = 0; n < 81; ++n) v[n] += o.v[n];
        return *this;
    }
    Tensor4& operator*=(double s) {
        for (double& x : v) x *= s;
        return *this;
    }
    friend Tensor4 operator*(double s, Tensor4 t) { t *= s; return t; }

    double max_abs() const {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    }
    bool all_zero() const {
        for (double x : v) if (x != 0.0) return false;
        return true;
    }
};

// Dynamic-rank tensor with every dimension equal to 3; used by the generic
// chi_n evaluator (rank = n+1 for order-n couplings, n <= 3).
struct TensorDyn {
    int rank{0};
    std::vector<double> v;

    explicit TensorDyn(int r = 0) : rank(r) {
        std::size_t n = 1;
        for (int k = 0; k < r; ++k) n *= 3;
        v.assign(n, 0.0);
    }

    static std::size_t flat(std::initializer_list<int> idx) {
        std::size_t f = 0;
        for (int i : idx) f = f * 3 + static_cast<std::size_t>(i);
        return f;
    }

    double& at(std::initializer_list<int> idx) { return v[flat(idx)]; }
    double at(std::initializer_list<int> idx) const { return v[flat(idx)]; }

    double max_abs() const {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    }
    bool all_zero() const {
        for (double x : v) if (x != 0.0) return false;
        return true;
    }
};

} // namespace nlbath
