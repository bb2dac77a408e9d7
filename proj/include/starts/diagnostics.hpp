#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string_view>
#include <span>
#include <vector>

#include "starts/errors.hpp"
#include "starts/fit.hpp"
#include "starts/linalg.hpp"
#include "starts/params.hpp"

namespace starts {

/// True iff min(phi2, psi2, sigma1_2, omega2) < threshold. Beta never counts.
bool detect_improper(const StartsParams& theta, double threshold);

/// Bentler-type residual correlations: both S and Sigma-hat are scaled by
/// the observed standard deviations, so the diagonal is generally nonzero.
Matrix residual_corr(const Matrix& s, const Matrix& sigma_hat);

enum class SrmrDivisor {
    Covariances,  // T(T+1)/2 unique covariance elements
    WithMeans,    // T(T+1)/2 + T: SEM software with a saturated mean structure
};

/// Root mean square of the residual correlations (diagonal included). With
/// WithMeans the T mean residuals, zero here, join the count.
double srmr(const Matrix& s, const Matrix& sigma_hat, SrmrDivisor divisor = SrmrDivisor::Covariances);

struct BiasRmse {
    double bias = 0.0;
    double rmse = 0.0;
};

std::array<BiasRmse, 5> bias_rmse(std::span<const StartsParams> estimates, const StartsParams& truth);

/// Pearson correlation of two paired series. nullopt when either series has
/// zero variance; DomainError when fewer than 3 pairs or lengths differ.
std::optional<double> pearson_correlation(std::span<const double> x, std::span<const double> y);

/// Correlation between two methods' estimates of parameter `param`
/// (canonical index) over replications where `admissible` is true.
std::optional<double> method_correlations(std::span<const StartsParams> a, std::span<const StartsParams> b,
                                          std::span<const bool> admissible, int param);

enum class BootstrapMode { Parametric, Nonparametric };

std::string_view bootstrap_mode_name(BootstrapMode m);

using Estimator =
    std::function<FitResult(const Matrix& s, int n, const FitOptions& opts, std::span<const StartsParams> init)>;

struct BootstrapOptions {
    int replicates = 200;    // B
    int local_starts = 20;   // initial values per resample
    double jitter = 0.1;     // sd = jitter * max(|theta_k|, 0.01)
    std::uint64_t seed = 0;
    int jobs = 1;
    FitOptions fit;          // n_starts is overridden by local_starts
};

struct BootstrapResult {
    BootstrapMode mode = BootstrapMode::Parametric;
    int requested = 0;
    int failures = 0;
    std::array<double, 5> se{};
    std::vector<StartsParams> estimates;  // successful resamples, in resample order
};

class ReliabilityError : public Error {
public:
    ReliabilityError(const std::string& what, BootstrapResult partial)
        : Error(what), partial_(std::move(partial)) {}
    const BootstrapResult& partial() const noexcept { return partial_; }

private:
    BootstrapResult partial_;
};

/// Initial values scattered around `center`: each coordinate gets additive
/// Gaussian noise with sd = jitter * max(|center_k|, 0.01); jittered
/// variances are reflected to stay nonnegative.
std::vector<StartsParams> jittered_starts(const StartsParams& center, int count, double jitter,
                                          std::mt19937_64& rng);

/// Nonparametric bootstrap: resamples rows of `data` with replacement.
BootstrapResult bootstrap_se(const Estimator& estimator, const Matrix& data, const StartsParams& theta_hat,
                             const BootstrapOptions& opts);

/// Parametric bootstrap: simulates n rows from MVN(0, implied_cov(theta_hat)).
BootstrapResult bootstrap_se(const Estimator& estimator, const Matrix& s, int n, const StartsParams& theta_hat,
                             const BootstrapOptions& opts);

/// Per-parameter sample standard deviation (divisor B - 1).
std::array<double, 5> estimate_sd(std::span<const StartsParams> estimates);

}  // namespace starts
