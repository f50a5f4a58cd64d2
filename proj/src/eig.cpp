#include "aird/eig.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "aird/common.hpp"

namespace aird {
namespace {

double off_diagonal_norm(const Mat& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

void check_symmetric(const Mat& a) {
    if (a.rows != a.cols) throw DimensionError("sym_eig: matrix is not square");
    if (!all_finite(a)) throw DimensionError("sym_eig: non-finite entries");
    const double scale = std::max(1.0, max_abs(a.data));
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = i + 1; j < a.cols; ++j)
            if (std::abs(a(i, j) - a(j, i)) > 1e-12 * scale)
                throw DimensionError("sym_eig: matrix is not symmetric");
}

// One Jacobi rotation zeroing a(p,q), p < q. Updates a (symmetric) and v.
void rotate(Mat& a, Mat& v, std::size_t p, std::size_t q) {
    const double apq = a(p, q);
    if (apq == 0.0) return;
    const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
    const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                     (std::abs(theta) + std::sqrt(theta * theta + 1.0));
    const double c = 1.0 / std::sqrt(t * t + 1.0);
    const double s = t * c;
    const std::size_t n = a.rows;

    const double app = a(p, p), aqq = a(q, q);
    a(p, p) = app - t * apq;
    a(q, q) = aqq + t * apq;
    a(p, q) = 0.0;
    a(q, p) = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i == p || i == q) continue;
        const double aip = a(i, p), aiq = a(i, q);
        a(i, p) = c * aip - s * aiq;
        a(p, i) = a(i, p);
        a(i, q) = s * aip + c * aiq;
        a(q, i) = a(i, q);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double vip = v(i, p), viq = v(i, q);
        v(i, p) = c * vip - s * viq;
        v(i, q) = s * vip + c * viq;
    }
}

void fix_column_sign(Mat& q, std::size_t col) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < q.rows; ++i) {
        const double m = std::abs(q(i, col));
        if (m > best) {  // strict: ties keep the lowest index
            best = m;
            arg = i;
        }
    }
    if (q(arg, col) < 0.0)
        for (std::size_t i = 0; i < q.rows; ++i) q(i, col) = -q(i, col);
}

}  // namespace

Spectrum sym_eig(const Mat& input) {
    check_symmetric(input);
    const std::size_t n = input.rows;

    Mat a = input;
    Mat v = Mat::identity(n);
    const double norm_a = frobenius_norm(input);
    const double tol = 1e-12 * norm_a;

    for (int sweep = 0; sweep < 100; ++sweep) {
        if (off_diagonal_norm(a) <= tol) break;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) rotate(a, v, p, q);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return a(i, i) > a(j, j);
    });

    Spectrum s;
    s.eigenvalues.resize(n);
    s.eigenvectors = Mat(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        s.eigenvalues[j] = a(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) s.eigenvectors(i, j) = v(i, order[j]);
        fix_column_sign(s.eigenvectors, j);
    }

    // Internal consistency; failure here means the solver itself is broken.
    const Mat& q = s.eigenvectors;
    {
        Mat qtq = matmul_nt(transpose(q), transpose(q));
        for (std::size_t i = 0; i < n; ++i) qtq(i, i) -= 1.0;
        if (frobenius_norm(qtq) > 1e-10 * std::sqrt(static_cast<double>(n)))
            throw std::runtime_error("sym_eig: eigenvector orthonormality check failed");
    }
    {
        Mat recon(n, n, 0.0);
        for (std::size_t l = 0; l < n; ++l) {
            const double lam = s.eigenvalues[l];
            for (std::size_t i = 0; i < n; ++i) {
                const double qil = q(i, l) * lam;
                for (std::size_t j = 0; j < n; ++j) recon(i, j) += qil * q(j, l);
            }
        }
        if (frobenius_diff(recon, input) > 1e-9 * std::max(1.0, norm_a))
            throw std::runtime_error("sym_eig: reconstruction check failed");
    }
    return s;
}

Vec project_onto_span(const Mat& basis, const Vec& v) {
    if (basis.rows != v.size())
        throw DimensionError("project_onto_span: dimension mismatch");
    const std::size_t m = basis.cols;
    // Orthonormality of the columns, within 1e-10.
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < basis.rows; ++r) s += basis(r, i) * basis(r, j);
            const double want = (i == j) ? 1.0 : 0.0;
            if (std::abs(s - want) > 1e-10)
                throw DimensionError("project_onto_span: basis not orthonormal");
        }
    }
    Vec coeff(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (std::size_t r = 0; r < basis.rows; ++r) s += basis(r, j) * v[r];
        coeff[j] = s;
    }
    Vec out(v.size(), 0.0);
    for (std::size_t r = 0; r < basis.rows; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += basis(r, j) * coeff[j];
        out[r] = s;
    }
    return out;
}

Mat top_eigenvectors(const Spectrum& s, std::size_t m) {
    if (m > s.size()) throw DimensionError("top_eigenvectors: m exceeds spectrum size");
    Mat b(s.eigenvectors.rows, m);
    for (std::size_t i = 0; i < b.rows; ++i)
        for (std::size_t j = 0; j < m; ++j) b(i, j) = s.eigenvectors(i, j);
    return b;
}

Vec unit_sphere_sample(std::size_t d, Rng& rng) {
    if (d == 0) throw DimensionError("unit_sphere_sample: dimension must be >= 1");
    Vec v(d);
    for (;;) {
        for (std::size_t i = 0; i < d; ++i) v[i] = rng.next_gaussian();
        const double n = norm2(v);
        if (n > 1e-150) {
            for (std::size_t i = 0; i < d; ++i) v[i] /= n;
            return v;
        }
    }
}

}  // namespace aird
