#include "starts/simulate.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

#include "starts/errors.hpp"
#include "starts/model.hpp"

namespace starts {
namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double draw(const Distribution& d, GammaConvention conv, std::mt19937_64& rng) {
    if (d.kind == Distribution::Kind::Beta) {
        std::gamma_distribution<double> ga(d.a, 1.0);
        std::gamma_distribution<double> gb(d.b, 1.0);
        const double x = ga(rng);
        const double y = gb(rng);
        return x / (x + y);
    }
    const double scale = conv == GammaConvention::ShapeRate ? 1.0 / d.b : d.b;
    std::gamma_distribution<double> g(d.a, scale);
    return g(rng);
}

// Positive by construction; an exact zero can only come from underflow.
double draw_positive(const Distribution& d, GammaConvention conv, std::mt19937_64& rng) {
    double v = 0.0;
    do {
        v = draw(d, conv, rng);
    } while (!(v > 0.0) || (d.kind == Distribution::Kind::Beta && !(v < 1.0)));
    return v;
}

void validate_distribution(const Distribution& d, const char* name) {
    if (!(d.a > 0.0) || !(d.b > 0.0) || !std::isfinite(d.a) || !std::isfinite(d.b)) {
        throw ConfigError(std::string("invalid distribution parameters for ") + name);
    }
}

}  // namespace

std::mt19937_64 keyed_stream(std::uint64_t seed, std::uint64_t key0, std::uint64_t key1,
                             std::uint64_t key2) {
    std::uint64_t state = seed;
    std::uint64_t mix = splitmix64(state);
    for (std::uint64_t key : {key0, key1, key2}) {
        state ^= key + 0x632BE59BD9B4E019ULL + (mix << 6) + (mix >> 2);
        mix = splitmix64(state);
    }
    std::seed_seq seq{static_cast<std::uint32_t>(mix), static_cast<std::uint32_t>(mix >> 32),
                      static_cast<std::uint32_t>(splitmix64(state)),
                      static_cast<std::uint32_t>(splitmix64(state))};
    return std::mt19937_64(seq);
}

Matrix gen_dataset(const Matrix& sigma, int n, std::mt19937_64& rng, bool centered) {
    if (n < 1) throw ConfigError("sample size must be positive");
    const auto chol = cholesky_pd(sigma);
    if (!chol) throw DomainError("implied covariance is not positive definite");
    const Eigen::Index t = sigma.rows();
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix z(n, t);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < t; ++j) z(i, j) = normal(rng);
    Matrix y = z * chol->transpose();
    if (centered) y.rowwise() -= y.colwise().mean();
    return y;
}

Matrix gen_dataset(const SimConfig& cfg) {
    if (cfg.n < cfg.t + 1) throw ConfigError("need N >= T + 1");
    auto rng = keyed_stream(cfg.seed, 0);
    return gen_dataset(implied_cov(cfg.theta_true, cfg.t), cfg.n, rng, cfg.centered);
}

Matrix sample_cov(const Matrix& y) {
    if (y.rows() < 2) throw DimensionError("sample covariance needs at least 2 rows");
    const Matrix centered = y.rowwise() - y.colwise().mean();
    Matrix s = (centered.transpose() * centered) / static_cast<double>(y.rows() - 1);
    return 0.5 * (s + s.transpose());
}

double Distribution::mean(GammaConvention conv) const {
    if (kind == Kind::Beta) return a / (a + b);
    return conv == GammaConvention::ShapeRate ? a / b : a * b;
}

InitialValueSpec InitialValueSpec::simulation() {
    return {.psi2 = Distribution::gamma(2, 4),
            .phi2 = Distribution::gamma(3, 4),
            .beta = Distribution::beta_dist(4, 4),
            .omega2 = Distribution::gamma(4, 4),
            .sigma1_2 = Distribution::gamma(4, 4)};
}

InitialValueSpec InitialValueSpec::empirical() {
    return {.psi2 = Distribution::gamma(2, 4),
            .phi2 = Distribution::gamma(2, 6),
            .beta = Distribution::beta_dist(4, 4),
            .omega2 = Distribution::gamma(2, 4),
            .sigma1_2 = Distribution::gamma(2, 4)};
}

InitialValueSpec InitialValueSpec::named(const std::string& name) {
    if (name == "simulation") return simulation();
    if (name == "empirical") return empirical();
    throw ConfigError("unknown initial-value set '" + name + "' (expected simulation or empirical)");
}

void InitialValueSpec::validate() const {
    validate_distribution(psi2, "psi2");
    validate_distribution(phi2, "phi2");
    validate_distribution(beta, "beta");
    validate_distribution(omega2, "omega2");
    validate_distribution(sigma1_2, "sigma1_2");
    for (const Distribution* d : {&psi2, &phi2, &omega2, &sigma1_2}) {
        if (d->kind != Distribution::Kind::Gamma) {
            throw ConfigError("variance initial values must be gamma distributed");
        }
    }
}

std::vector<StartsParams> draw_initial_values(const InitialValueSpec& spec, int m, std::mt19937_64& rng) {
    if (m < 1) throw ConfigError("number of initial values must be >= 1");
    spec.validate();
    std::vector<StartsParams> out;
    out.reserve(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
        StartsParams p;
        p.phi2 = draw_positive(spec.phi2, spec.convention, rng);
        p.psi2 = draw_positive(spec.psi2, spec.convention, rng);
        p.omega2 = draw_positive(spec.omega2, spec.convention, rng);
        p.beta = draw_positive(spec.beta, spec.convention, rng);
        p.sigma1_2 = draw_positive(spec.sigma1_2, spec.convention, rng);
        out.push_back(p);
    }
    return out;
}

std::vector<StartsParams> draw_initial_values(const InitialValueSpec& spec, int m, std::uint64_t seed) {
    auto rng = keyed_stream(seed, 0x1A17);
    return draw_initial_values(spec, m, rng);
}

void write_dataset_csv(std::ostream& out, const Matrix& y) {
    for (Eigen::Index j = 0; j < y.cols(); ++j) out << (j ? "," : "") << 't' << (j + 1);
    out << '\n';
    char buf[64];
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
            const auto res = std::to_chars(buf, buf + sizeof buf, y(i, j));
            if (j) out << ',';
            out.write(buf, res.ptr - buf);
        }
        out << '\n';
    }
}

}  // namespace starts
