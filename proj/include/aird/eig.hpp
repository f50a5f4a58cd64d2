#pragma once

#include <vector>

#include "aird/mat.hpp"
#include "aird/rng.hpp"

namespace aird {

// Eigendecomposition of a symmetric matrix. eigenvalues[i] pairs with column
// i of eigenvectors; values sorted non-increasing (ties keep original Jacobi
// index order). Columns are sign-fixed: the largest-magnitude entry of each
// eigenvector is positive, ties broken by lowest index.
struct Spectrum {
    std::vector<double> eigenvalues;
    Mat eigenvectors;  // n x n, orthonormal columns

    std::size_t size() const { return eigenvalues.size(); }
};

// Cyclic Jacobi. Converged when the off-diagonal Frobenius norm drops below
// 1e-12 * ||A||_F, or after 100 sweeps. Deterministic for a given input.
// Throws DimensionError for non-square or asymmetric (beyond 1e-12 relative)
// input. The returned Spectrum is validated: ||Q^T Q - I||_F <= 1e-10*sqrt(n)
// and ||A - Q L Q^T||_F <= 1e-9 * max(1, ||A||_F).
Spectrum sym_eig(const Mat& a);

// P v with P = B B^T for an orthonormal-column basis B. Idempotent and
// norm-nonincreasing. Throws on dimension mismatch or a basis that is not
// orthonormal within 1e-10.
Vec project_onto_span(const Mat& basis, const Vec& v);

// First m columns of the spectrum's eigenvector matrix as an n x m basis.
Mat top_eigenvectors(const Spectrum& s, std::size_t m);

// Uniform point on the unit sphere S^{d-1} (Gaussian normalize).
// d = 0 -> DimensionError.
Vec unit_sphere_sample(std::size_t d, Rng& rng);

}  // namespace aird
