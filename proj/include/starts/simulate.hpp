#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "starts/linalg.hpp"
#include "starts/params.hpp"

namespace starts {

/// Deterministic generator for the stream identified by (seed, keys...).
/// Streams with different keys are independent, so replication r draws the
/// same numbers whether it runs first, last, or on another thread.
std::mt19937_64 keyed_stream(std::uint64_t seed, std::uint64_t key0, std::uint64_t key1 = 0,
                             std::uint64_t key2 = 0);

struct SimConfig {
    StartsParams theta_true;
    int n = 200;
    int t = 4;
    std::uint64_t seed = 0;
    bool centered = true;
};

/// N x T matrix of i.i.d. MVN(0, implied_cov(theta_true)) rows, drawn as
/// standard normals times the transposed Cholesky factor; column-centered
/// when cfg.centered. Throws DomainError when the implied covariance is not
/// positive definite.
Matrix gen_dataset(const SimConfig& cfg);
Matrix gen_dataset(const Matrix& sigma, int n, std::mt19937_64& rng, bool centered = true);

/// Unbiased (N - 1) sample covariance of the column-centered data.
Matrix sample_cov(const Matrix& y);

enum class GammaConvention { ShapeRate, ShapeScale };

struct Distribution {
    enum class Kind { Gamma, Beta };
    Kind kind = Kind::Gamma;
    double a = 1.0;  // gamma shape / beta alpha
    double b = 1.0;  // gamma rate (or scale) / beta beta

    static Distribution gamma(double shape, double rate_or_scale) { return {Kind::Gamma, shape, rate_or_scale}; }
    static Distribution beta_dist(double alpha, double beta) { return {Kind::Beta, alpha, beta}; }

    double mean(GammaConvention conv) const;
};

/// One distribution per parameter for drawing multi-start initial values.
struct InitialValueSpec {
    Distribution psi2;
    Distribution phi2;
    Distribution beta;
    Distribution omega2;
    Distribution sigma1_2;
    GammaConvention convention = GammaConvention::ShapeRate;

    /// phi2 ~ G(3,4), psi2 ~ G(2,4), omega2 ~ G(4,4), beta ~ Beta(4,4), sigma1_2 ~ G(4,4).
    static InitialValueSpec simulation();
    /// phi2 ~ G(2,6), psi2 ~ G(2,4), omega2 ~ G(2,4), beta ~ Beta(4,4), sigma1_2 ~ G(2,4).
    static InitialValueSpec empirical();
    /// "simulation" or "empirical"; throws ConfigError otherwise.
    static InitialValueSpec named(const std::string& name);

    void validate() const;
};

std::vector<StartsParams> draw_initial_values(const InitialValueSpec& spec, int m, std::mt19937_64& rng);
std::vector<StartsParams> draw_initial_values(const InitialValueSpec& spec, int m, std::uint64_t seed);

/// Header t1..tT, one row per person, shortest round-trip decimal formatting.
void write_dataset_csv(std::ostream& out, const Matrix& y);

}  // namespace starts
