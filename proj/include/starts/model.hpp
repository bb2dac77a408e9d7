#pragma once

#include "starts/linalg.hpp"
#include "starts/params.hpp"

namespace starts {

/// Autoregressive coefficient matrix: beta on the superdiagonal, zero
/// elsewhere. Throws DimensionError when t < 2.
Matrix build_gamma(double beta, int t);

/// (I - Gamma)^{-1}. Unit upper triangular with entry (k, j) = beta^(j-k)
/// for j >= k.
Matrix ar_inverse(double beta, int t);

/// Within-person covariance (I - Gamma)^{-T} diag(sigma1_2, omega2, ...)
/// (I - Gamma)^{-1}. Defined for every beta, including |beta| >= 1.
Matrix within_cov(const Theta1& theta1, int t);

/// Full model-implied covariance phi2 * J + within_cov + psi2 * I.
Matrix implied_cov(const StartsParams& theta, int t);

/// Factor-analytic representation of the model. With Z = [s, R, U] the
/// standardized trait, residual and error scores, Y = Z * b_tilde'.
struct LoadingBundle {
    Matrix lambda_tilde;  // T x (T+1): [phi * 1 | (I - Gamma)^{-T} diag(sigma1, omega, ...)]
    Matrix d_tilde;       // T x T: psi * I
    Matrix b_tilde;       // T x (2T+1): [lambda_tilde | d_tilde]
};

/// Requires every variance in `theta` to be nonnegative (square roots are
/// taken); throws DomainError otherwise.
LoadingBundle build_loading_bundle(const StartsParams& theta, int t);

}  // namespace starts
