#include "starts/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "starts/errors.hpp"

namespace starts {

bool is_symmetric(const Matrix& m, double rel_tol) {
    if (m.rows() != m.cols()) return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

void require_symmetric(const Matrix& m, double rel_tol) {
    if (m.rows() != m.cols()) {
        throw DimensionError("expected a square matrix, got " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()));
    }
    if (!m.allFinite()) throw DomainError("matrix has non-finite entries");
    if (!is_symmetric(m, rel_tol)) throw DomainError("matrix is not symmetric");
}

Vector vech(const Matrix& m) {
    if (m.rows() != m.cols()) throw DimensionError("vech requires a square matrix");
    const Eigen::Index t = m.rows();
    Vector out(t * (t + 1) / 2);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < t; ++j)
        for (Eigen::Index i = j; i < t; ++i) out(k++) = m(i, j);
    return out;
}

SymEigen sym_eigen(const Matrix& m, double rel_tol) {
    require_symmetric(m, rel_tol);
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
    if (solver.info() != Eigen::Success) throw DomainError("eigendecomposition did not converge");

    // Eigen returns ascending order.
    const Eigen::Index n = m.rows();
    SymEigen out{Vector(n), Matrix(n, n)};
    for (Eigen::Index k = 0; k < n; ++k) {
        out.values(k) = solver.eigenvalues()(n - 1 - k);
        out.vectors.col(k) = solver.eigenvectors().col(n - 1 - k);
    }
    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::Index arg = 0;
        out.vectors.col(k).cwiseAbs().maxCoeff(&arg);
        if (out.vectors(arg, k) < 0.0) out.vectors.col(k) *= -1.0;
    }
    return out;
}

std::optional<Matrix> cholesky_pd(const Matrix& m) {
    if (m.rows() != m.cols() || !m.allFinite()) return std::nullopt;
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) return std::nullopt;
    Matrix l = llt.matrixL();
    if ((l.diagonal().array() <= 0.0).any()) return std::nullopt;
    return l;
}

}  // namespace starts
