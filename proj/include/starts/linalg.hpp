#pragma once

#include <optional>

#include <Eigen/Dense>

namespace starts {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Relative symmetry check: max |M - M'| <= tol * max(1, max |M|).
bool is_symmetric(const Matrix& m, double rel_tol = 1e-12);

/// Throws DimensionError for non-square input, DomainError when asymmetric
/// beyond rel_tol.
void require_symmetric(const Matrix& m, double rel_tol = 1e-12);

/// Half-vectorization: lower triangle including the diagonal, stacked column
/// by column, i.e. (m00, m10, ..., m(T-1)0, m11, m21, ...).
Vector vech(const Matrix& m);

struct SymEigen {
    Vector values;   // descending
    Matrix vectors;  // orthonormal columns, matching `values`
};

/// Eigendecomposition of a symmetric matrix. Eigenvalues are sorted in
/// descending order and each eigenvector is signed so that its
/// largest-magnitude component is nonnegative (lowest index wins ties).
SymEigen sym_eigen(const Matrix& m, double rel_tol = 1e-12);

/// Lower Cholesky factor, or nullopt when `m` is not positive definite.
std::optional<Matrix> cholesky_pd(const Matrix& m);

inline double relative_frobenius_error(const Matrix& approx, const Matrix& exact) {
    const double denom = exact.norm();
    return denom > 0.0 ? (approx - exact).norm() / denom : (approx - exact).norm();
}

}  // namespace starts
