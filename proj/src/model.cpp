#include "starts/model.hpp"

#include <cmath>
#include <string>

#include "starts/errors.hpp"

namespace starts {
namespace {

void require_time_points(int t) {
    if (t < 2) throw DimensionError("need at least 2 time points, got " + std::to_string(t));
}

}  // namespace

Matrix build_gamma(double beta, int t) {
    require_time_points(t);
    Matrix gamma = Matrix::Zero(t, t);
    for (int k = 0; k + 1 < t; ++k) gamma(k, k + 1) = beta;
    return gamma;
}

Matrix ar_inverse(double beta, int t) {
    require_time_points(t);
    // Back substitution on the unit upper bidiagonal I - Gamma.
    Matrix inv = Matrix::Zero(t, t);
    for (int k = 0; k < t; ++k) {
        inv(k, k) = 1.0;
        for (int j = k + 1; j < t; ++j) inv(k, j) = beta * inv(k, j - 1);
    }
    return inv;
}

Matrix within_cov(const Theta1& theta1, int t) {
    const Matrix a = ar_inverse(theta1.beta, t);
    Vector d = Vector::Constant(t, theta1.omega2);
    d(0) = theta1.sigma1_2;
    return a.transpose() * d.asDiagonal() * a;
}

Matrix implied_cov(const StartsParams& theta, int t) {
    Matrix sigma = within_cov(theta1_of(theta), t);
    sigma.array() += theta.phi2;
    sigma.diagonal().array() += theta.psi2;
    return sigma;
}

LoadingBundle build_loading_bundle(const StartsParams& theta, int t) {
    require_time_points(t);
    if (!theta.admissible()) {
        throw DomainError("loading bundle needs nonnegative variances");
    }
    Vector scale = Vector::Constant(t, std::sqrt(theta.omega2));
    scale(0) = std::sqrt(theta.sigma1_2);

    LoadingBundle out;
    out.lambda_tilde.resize(t, t + 1);
    out.lambda_tilde.col(0).setConstant(std::sqrt(theta.phi2));
    out.lambda_tilde.rightCols(t) = ar_inverse(theta.beta, t).transpose() * scale.asDiagonal();
    out.d_tilde = Matrix::Identity(t, t) * std::sqrt(theta.psi2);
    out.b_tilde.resize(t, 2 * t + 1);
    out.b_tilde << out.lambda_tilde, out.d_tilde;
    return out;
}

}  // namespace starts
