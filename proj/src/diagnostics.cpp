#include "starts/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "starts/model.hpp"
#include "starts/simulate.hpp"

namespace starts {

bool detect_improper(const StartsParams& theta, double threshold) {
    if (!(threshold > 0.0)) throw ConfigError("improper threshold must be > 0");
    const double smallest = std::min({theta.phi2, theta.psi2, theta.sigma1_2, theta.omega2});
    return smallest < threshold || std::isnan(smallest);
}

Matrix residual_corr(const Matrix& s, const Matrix& sigma_hat) {
    if (s.rows() != s.cols() || sigma_hat.rows() != s.rows() || sigma_hat.cols() != s.cols()) {
        throw DimensionError("S and Sigma-hat must be square and of equal size");
    }
    if ((s.diagonal().array() <= 0.0).any()) {
        throw DomainError("observed variances must be positive");
    }
    const Vector inv_sd = s.diagonal().cwiseSqrt().cwiseInverse();
    return inv_sd.asDiagonal() * (s - sigma_hat) * inv_sd.asDiagonal();
}

double srmr(const Matrix& s, const Matrix& sigma_hat, SrmrDivisor divisor) {
    const Vector r = vech(residual_corr(s, sigma_hat));
    double count = static_cast<double>(r.size());
    if (divisor == SrmrDivisor::WithMeans) count += static_cast<double>(s.rows());
    return std::sqrt(r.squaredNorm() / count);
}

std::array<BiasRmse, 5> bias_rmse(std::span<const StartsParams> estimates, const StartsParams& truth) {
    if (estimates.empty()) throw DomainError("bias/RMSE needs at least one estimate");
    std::array<BiasRmse, 5> out{};
    const double count = static_cast<double>(estimates.size());
    for (int k = 0; k < 5; ++k) {
        double sum = 0.0;
        double sq = 0.0;
        for (const StartsParams& e : estimates) {
            const double d = e[k] - truth[k];
            sum += d;
            sq += d * d;
        }
        out[static_cast<std::size_t>(k)] = {sum / count, std::sqrt(sq / count)};
    }
    return out;
}

std::optional<double> pearson_correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DomainError("correlation series differ in length");
    if (x.size() < 3) throw DomainError("correlation needs at least 3 pairs");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> method_correlations(std::span<const StartsParams> a, std::span<const StartsParams> b,
                                          std::span<const bool> admissible, int param) {
    if (a.size() != b.size() || a.size() != admissible.size()) {
        throw DimensionError("per-replication series differ in length");
    }
    std::vector<double> x, y;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!admissible[i]) continue;
        x.push_back(a[i][param]);
        y.push_back(b[i][param]);
    }
    return pearson_correlation(x, y);
}

std::string_view bootstrap_mode_name(BootstrapMode m) {
    return m == BootstrapMode::Parametric ? "parametric" : "nonparametric";
}

std::vector<StartsParams> jittered_starts(const StartsParams& center, int count, double jitter,
                                          std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<StartsParams> out;
    out.reserve(static_cast<std::size_t>(count));
    const auto c = center.to_vector();
    for (int m = 0; m < count; ++m) {
        Eigen::Matrix<double, 5, 1> v;
        for (int k = 0; k < 5; ++k) {
            const double sd = jitter * std::max(std::abs(c(k)), 0.01);
            v(k) = c(k) + sd * normal(rng);
        }
        for (int k : {0, 1, 3, 4}) v(k) = std::abs(v(k));
        out.push_back(StartsParams::from_vector(v));
    }
    return out;
}

std::array<double, 5> estimate_sd(std::span<const StartsParams> estimates) {
    std::array<double, 5> out{};
    const std::size_t b = estimates.size();
    if (b < 2) {
        out.fill(std::numeric_limits<double>::quiet_NaN());
        return out;
    }
    for (int k = 0; k < 5; ++k) {
        double mean = 0.0;
        for (const auto& e : estimates) mean += e[k];
        mean /= static_cast<double>(b);
        double ss = 0.0;
        for (const auto& e : estimates) ss += (e[k] - mean) * (e[k] - mean);
        out[static_cast<std::size_t>(k)] = std::sqrt(ss / static_cast<double>(b - 1));
    }
    return out;
}

namespace {

// Runs resample b = 0..B-1 on a small worker pool; `make_cov(b, rng)` builds
// the resampled covariance. Results are stored by index.
template <class MakeCov>
BootstrapResult run_bootstrap(BootstrapMode mode, const Estimator& estimator, int n,
                              const StartsParams& theta_hat, const BootstrapOptions& opts,
                              const MakeCov& make_cov) {
    if (opts.replicates < 2) throw ConfigError("bootstrap needs B >= 2");
    if (opts.local_starts < 1) throw ConfigError("bootstrap needs at least one start per resample");
    if (!(opts.jitter >= 0.0)) throw ConfigError("jitter must be nonnegative");

    FitOptions fit_opts = opts.fit;
    fit_opts.n_starts = opts.local_starts;
    const int b_count = opts.replicates;
    std::vector<std::optional<StartsParams>> slots(static_cast<std::size_t>(b_count));

    auto work = [&](int b) {
        auto rng = keyed_stream(opts.seed, 0xB007, static_cast<std::uint64_t>(b));
        try {
            const Matrix s_b = make_cov(b, rng);
            const auto starts = jittered_starts(theta_hat, opts.local_starts, opts.jitter, rng);
            slots[static_cast<std::size_t>(b)] = estimator(s_b, n, fit_opts, starts).theta_hat;
        } catch (const Error&) {
            slots[static_cast<std::size_t>(b)].reset();
        }
    };

    const int jobs = std::max(1, std::min(opts.jobs, b_count));
    if (jobs == 1) {
        for (int b = 0; b < b_count; ++b) work(b);
    } else {
        std::mutex mu;
        int next = 0;
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) {
            pool.emplace_back([&] {
                for (;;) {
                    int b;
                    {
                        std::lock_guard lock(mu);
                        if (next >= b_count) return;
                        b = next++;
                    }
                    work(b);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    BootstrapResult out;
    out.mode = mode;
    out.requested = b_count;
    for (const auto& slot : slots) {
        if (slot) out.estimates.push_back(*slot);
        else ++out.failures;
    }
    out.se = estimate_sd(out.estimates);
    if (out.failures * 5 > b_count) {
        throw ReliabilityError(std::to_string(out.failures) + " of " + std::to_string(b_count) +
                                   " bootstrap refits failed",
                               out);
    }
    return out;
}

}  // namespace

BootstrapResult bootstrap_se(const Estimator& estimator, const Matrix& data, const StartsParams& theta_hat,
                             const BootstrapOptions& opts) {
    const Eigen::Index n = data.rows();
    if (n < 2) throw DimensionError("bootstrap needs at least 2 rows of data");
    auto make_cov = [&](int, std::mt19937_64& rng) {
        std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
        Matrix resample(n, data.cols());
        for (Eigen::Index i = 0; i < n; ++i) resample.row(i) = data.row(pick(rng));
        return sample_cov(resample);
    };
    return run_bootstrap(BootstrapMode::Nonparametric, estimator, static_cast<int>(n), theta_hat, opts,
                         make_cov);
}

BootstrapResult bootstrap_se(const Estimator& estimator, const Matrix& s, int n, const StartsParams& theta_hat,
                             const BootstrapOptions& opts) {
    if (n < 2) throw ConfigError("bootstrap needs n >= 2");
    const Matrix sigma = implied_cov(theta_hat, static_cast<int>(s.rows()));
    if (!cholesky_pd(sigma)) {
        throw DomainError("parametric bootstrap needs a positive-definite implied covariance");
    }
    auto make_cov = [&](int, std::mt19937_64& rng) { return sample_cov(gen_dataset(sigma, n, rng, true)); };
    return run_bootstrap(BootstrapMode::Parametric, estimator, n, theta_hat, opts, make_cov);
}

}  // namespace starts
