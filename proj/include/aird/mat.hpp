#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "aird/common.hpp"

namespace aird {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. Everything in this project is 64-bit;
// the acceptance tolerances (1e-9 .. 1e-12) leave no room for floats.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) {
        assert(i < rows && j < cols);
        return data[i * cols + j];
    }
    double operator()(std::size_t i, std::size_t j) const {
        assert(i < rows && j < cols);
        return data[i * cols + j];
    }

    std::span<double> row(std::size_t i) {
        assert(i < rows);
        return {data.data() + i * cols, cols};
    }
    std::span<const double> row(std::size_t i) const {
        assert(i < rows);
        return {data.data() + i * cols, cols};
    }

    bool empty() const { return rows == 0 || cols == 0; }

    static Mat identity(std::size_t n) {
        Mat I(n, n);
        for (std::size_t i = 0; i < n; ++i) I(i, i) = 1.0;
        return I;
    }

    bool operator==(const Mat& o) const = default;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm2_diff(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline double frobenius_norm(const Mat& a) { return norm2(a.data); }

inline double max_abs(std::span<const double> a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x));
    return m;
}

inline bool all_finite(std::span<const double> a) {
    for (double x : a)
        if (!std::isfinite(x)) return false;
    return true;
}
inline bool all_finite(const Mat& a) { return all_finite(std::span<const double>(a.data)); }

// y := A x
inline Vec matvec(const Mat& a, std::span<const double> x) {
    if (x.size() != a.cols) throw DimensionError("matvec: dimension mismatch");
    Vec y(a.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) y[i] = dot(a.row(i), x);
    return y;
}

// y := A^T x
inline Vec matvec_t(const Mat& a, std::span<const double> x) {
    if (x.size() != a.rows) throw DimensionError("matvec_t: dimension mismatch");
    Vec y(a.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double xi = x[i];
        auto r = a.row(i);
        for (std::size_t j = 0; j < a.cols; ++j) y[j] += xi * r[j];
    }
    return y;
}

// C := A B
inline Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols != b.rows) throw DimensionError("matmul: dimension mismatch");
    Mat c(a.rows, b.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t l = 0; l < a.cols; ++l) {
            const double ail = a(i, l);
            if (ail == 0.0) continue;
            auto br = b.row(l);
            auto cr = c.row(i);
            for (std::size_t j = 0; j < b.cols; ++j) cr[j] += ail * br[j];
        }
    }
    return c;
}

// C := A B^T
inline Mat matmul_nt(const Mat& a, const Mat& b) {
    if (a.cols != b.cols) throw DimensionError("matmul_nt: dimension mismatch");
    Mat c(a.rows, b.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < b.rows; ++j) c(i, j) = dot(a.row(i), b.row(j));
    return c;
}

inline Mat transpose(const Mat& a) {
    Mat t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

inline double frobenius_diff(const Mat& a, const Mat& b) {
    assert(a.rows == b.rows && a.cols == b.cols);
    return norm2_diff(a.data, b.data);
}

}  // namespace aird
