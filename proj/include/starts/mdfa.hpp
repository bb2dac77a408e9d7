#pragma once

#include <span>

#include "starts/errors.hpp"
#include "starts/fit.hpp"
#include "starts/linalg.hpp"
#include "starts/params.hpp"

namespace starts {

/// Cross-covariance between the observed variables and the standardized
/// scores, split into trait, residual and unique blocks.
struct CrossCov {
    Vector s_y_s;  // T
    Matrix s_y_r;  // T x T, entry (t, k) = cov(y_t, r_k)
    Matrix s_y_u;  // T x T

    /// [s_y_s | s_y_r | s_y_u], T x (2T+1).
    Matrix joined() const;
    static CrossCov split(const Matrix& joined);
};

/// Eigenvalues of B'SB at or below this fraction of the largest are dropped.
inline constexpr double kEigenRetention = 1e-12;

/// S_YZ = S B L Delta^{-1} L' from B'SB = L Delta^2 L', keeping only the
/// retained eigenpairs. Works for any column count (the T = 1 scalar case
/// included); split into blocks only when b_tilde is T x (2T+1).
Matrix cross_cov_matrix(const Matrix& s, const Matrix& b_tilde);
CrossCov cross_cov_update(const Matrix& s, const Matrix& b_tilde);

/// phi2 = mean(s_y_s)^2, psi2 = (tr(s_y_u) / T)^2.
Theta2 theta2_update(const CrossCov& cc);

/// Zeroes the entries of s_y_r that vanish in the population (residual index
/// later than the observation index) and returns S* = S S'.
Matrix within_target(const Matrix& s_y_r);

/// (vech(S*) - vech(within_cov(theta1)))' (same).
double within_uls_loss(const Matrix& s_star, const Theta1& theta1);

class InnerOptimizationError : public Error {
public:
    InnerOptimizationError(const std::string& what, const Theta1& best)
        : Error(what), best_(best) {}
    const Theta1& best() const noexcept { return best_; }

private:
    Theta1 best_;
};

/// Least-squares fit of the within-person structure to S*. For fixed beta
/// the variances enter linearly and are solved exactly under nonnegativity;
/// beta follows the profile slope downhill from the warm start, and a coarse
/// scan over (-1, 1) is refined when it finds a competitive basin. Never
/// returns a point worse than `init`.
Theta1 theta1_update(const Matrix& s_star, const Theta1& init, const InnerOptions& budget = {});

/// n * ||[s_y_s | s_y_r | s_y_u] - b_tilde||_F^2.
double tsmdfa_loss(const CrossCov& cc, const Matrix& b_tilde, int n);

/// Two-stage estimator. One start per initial value (the count must equal
/// opts.n_starts). Each start alternates the cross-covariance update, the
/// within-person least-squares step and the closed-form trait/error update
/// until every parameter moves by less than param_tol, the loss fails to
/// improve for `patience` iterations, or max_iters is hit. The lowest-loss
/// iterate of each start is kept; the lowest-loss start wins.
FitResult fit_tsmdfa(const Matrix& s, int n, const FitOptions& opts,
                     std::span<const StartsParams> initial_values);

}  // namespace starts
