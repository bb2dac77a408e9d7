#pragma once

#include <array>
#include <span>

#include "starts/fit.hpp"
#include "starts/linalg.hpp"
#include "starts/params.hpp"

namespace starts {

/// Added to every ML discrepancy evaluated at a non-positive-definite
/// implied covariance, plus the Frobenius distance to the PSD cone.
inline constexpr double kNonPdPenalty = 1e10;

/// tr(S Sigma^{-1}) - log|S Sigma^{-1}| - T. Throws DomainError when S is
/// singular.
double ml_discrepancy(const Matrix& s, const StartsParams& theta);

/// (vech(S) - vech(Sigma))' (vech(S) - vech(Sigma)).
double uls_discrepancy(const Matrix& s, const StartsParams& theta);

/// Multi-start ML over all five parameters; variances may go negative.
FitResult fit_ml(const Matrix& s, int n, const FitOptions& opts,
                 std::span<const StartsParams> initial_values);

/// ML with psi2, phi2, omega2, sigma1_2 >= 0 (beta free). Estimates on the
/// boundary are exactly zero.
FitResult fit_cml(const Matrix& s, int n, const FitOptions& opts,
                  std::span<const StartsParams> initial_values);

/// Multi-start ULS; variances may go negative.
FitResult fit_uls(const Matrix& s, int n, const FitOptions& opts,
                  std::span<const StartsParams> initial_values);

/// Dispatches on `method` to the estimators above or fit_tsmdfa.
FitResult fit(Method method, const Matrix& s, int n, const FitOptions& opts,
              std::span<const StartsParams> initial_values);

struct StandardErrors {
    std::array<double, 5> se{};  // canonical parameter order
    bool singular = false;       // information matrix not invertible / not PD
};

/// sqrt(diag(H^{-1})) for the numeric Hessian H of `f` at `x`. Returns
/// the singular signal instead of throwing when H cannot be inverted.
StandardErrors standard_errors_from_hessian(const Objective& f, const Vector& x,
                                            double rel_step = 1e-5);

/// Observed-information standard errors for ML: Hessian of (n/2) * F_ML.
StandardErrors ml_standard_errors(const Matrix& s, int n, const StartsParams& theta_hat);

}  // namespace starts
