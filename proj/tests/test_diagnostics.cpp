#include <doctest.h>

#include <cmath>
#include <random>

#include "starts/diagnostics.hpp"
#include "starts/errors.hpp"
#include "starts/model.hpp"
#include "starts/sem.hpp"
#include "starts/simulate.hpp"

using namespace starts;

namespace {

Matrix sleep_cov() {
    Matrix s(4, 4);
    s << 0.394, 0.253, 0.185, 0.095,
         0.253, 0.546, 0.304, 0.146,
         0.185, 0.304, 0.738, 0.332,
         0.095, 0.146, 0.332, 0.809;
    return s;
}

const StartsParams kReferenceUls{0.134, 0.015, 0.648, 0.359, 0.270};
const StartsParams kReferenceTs{0.035, 0.054, 0.512, 0.481, 0.281};

}  // namespace

TEST_CASE("detect_improper") {
    CHECK(detect_improper({-0.304, 0.114, 0.251, 0.845, 0.582}, kStrictImproper));
    CHECK_FALSE(detect_improper({0.5, 0.5, 0.3, 0.5, 0.5}, kStrictImproper));
    CHECK(detect_improper({0.005, 0.5, 0.3, 0.5, 0.5}, kLenientImproper));
    CHECK_FALSE(detect_improper({0.005, 0.5, 0.3, 0.5, 0.5}, kStrictImproper));
    CHECK_FALSE(detect_improper({0.5, 0.5, -0.9, 0.5, 0.5}, kStrictImproper));
    CHECK_THROWS_AS(detect_improper({0.5, 0.5, 0.3, 0.5, 0.5}, 0.0), ConfigError);
}

TEST_CASE("detect_improper is monotone in the threshold") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> v(-0.01, 0.05);
    for (int rep = 0; rep < 500; ++rep) {
        const StartsParams th{v(rng), v(rng), 0.3, v(rng), v(rng)};
        double prev = false;
        for (double tau : {1e-6, 1e-4, 1e-3, 1e-2, 1e-1}) {
            const bool now = detect_improper(th, tau);
            CHECK((!prev || now));
            prev = now;
        }
    }
}

TEST_CASE("residual correlations from reference ULS and TS-MDFA estimates") {
    const Matrix s = sleep_cov();
    const Matrix uls = residual_corr(s, implied_cov(kReferenceUls, 4));
    CHECK(std::abs(uls(0, 0) + 0.063) < 0.01);
    CHECK(std::abs(uls(1, 0) - 0.138) < 0.01);
    CHECK(uls(1, 0) == uls(0, 1));
    const Matrix ts = residual_corr(s, implied_cov(kReferenceTs, 4));
    CHECK(std::abs(ts(1, 1) + 0.189) < 0.02);
    CHECK(std::abs(srmr(s, implied_cov(kReferenceUls, 4), SrmrDivisor::WithMeans) - 0.074) < 0.005);
    CHECK(std::abs(srmr(s, implied_cov(kReferenceTs, 4), SrmrDivisor::WithMeans) - 0.075) < 0.005);
    const double cov_only = srmr(s, implied_cov(kReferenceUls, 4));
    CHECK(cov_only == doctest::Approx(srmr(s, implied_cov(kReferenceUls, 4), SrmrDivisor::WithMeans) *
                                      std::sqrt(14.0 / 10.0)));
}

TEST_CASE("srmr, residual_corr and Sigma-hat = S agree") {
    const Matrix s = sleep_cov();
    CHECK(residual_corr(s, s).isZero(0.0));
    CHECK(srmr(s, s) == 0.0);
    CHECK(srmr(s, s, SrmrDivisor::WithMeans) == 0.0);
    Matrix off = s;
    off(0, 0) += 1e-3;
    CHECK(srmr(s, off) > 0.0);
    Matrix zero_var = s;
    zero_var(2, 2) = 0.0;
    CHECK_THROWS_AS(residual_corr(zero_var, s), DomainError);
    CHECK_THROWS_AS(srmr(s, Matrix::Identity(3, 3)), DimensionError);
}

TEST_CASE("bias_rmse") {
    const StartsParams truth = design_truth(1.0);
    const std::vector<StartsParams> same{truth, truth};
    for (const auto& e : bias_rmse(same, truth)) {
        CHECK(e.bias == 0.0);
        CHECK(e.rmse == 0.0);
    }
    const double d = 0.1;
    StartsParams up = truth, down = truth;
    up.phi2 += d;
    down.phi2 -= d;
    const auto br = bias_rmse(std::vector{up, down}, truth);
    CHECK(std::abs(br[1].bias) < 1e-15);
    CHECK(br[1].rmse == doctest::Approx(d));
    CHECK_THROWS_AS(bias_rmse(std::vector<StartsParams>{}, truth), DomainError);
}

TEST_CASE("bias_rmse satisfies RMSE^2 = bias^2 + variance") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> z(0.1, 0.3);
    const StartsParams truth = design_truth(0.2);
    std::vector<StartsParams> est;
    for (int i = 0; i < 37; ++i) est.push_back({z(rng), z(rng), z(rng), z(rng), z(rng)});
    const auto br = bias_rmse(est, truth);
    for (int k = 0; k < 5; ++k) {
        double mean = 0.0;
        for (const auto& e : est) mean += e[k];
        mean /= 37.0;
        double var = 0.0;
        for (const auto& e : est) var += (e[k] - mean) * (e[k] - mean);
        var /= 37.0;
        const auto& e = br[static_cast<std::size_t>(k)];
        CHECK(std::abs(e.rmse * e.rmse - (e.bias * e.bias + var)) < 1e-12);
        CHECK(e.rmse >= std::abs(e.bias));
    }
}

TEST_CASE("correlations") {
    const std::vector<double> x{1, 2, 3, 4};
    CHECK(*pearson_correlation(x, x) == doctest::Approx(1.0));
    const std::vector<double> neg{4, 3, 2, 1};
    CHECK(*pearson_correlation(x, neg) == doctest::Approx(-1.0));
    const std::vector<double> flat{2, 2, 2, 2};
    CHECK_FALSE(pearson_correlation(x, flat).has_value());
    CHECK_THROWS_AS(pearson_correlation(std::vector<double>{1, 2}, std::vector<double>{1, 2}), DomainError);

    std::vector<StartsParams> a, b;
    for (int i = 0; i < 6; ++i) {
        a.push_back({0.1 * i, 0.5, 0.3, 0.9, 1.0 + i});
        b.push_back({0.2 * i, 0.5, 0.3, 0.9, 1.0 - i});
    }
    const bool mask[] = {true, true, true, true, false, true};
    CHECK(*method_correlations(a, b, mask, 0) == doctest::Approx(1.0));
    CHECK(*method_correlations(a, b, mask, 4) == doctest::Approx(-1.0));
    CHECK_FALSE(method_correlations(a, b, mask, 1).has_value());
    const bool few[] = {true, true, false, false, false, false};
    CHECK_THROWS_AS(method_correlations(a, b, few, 0), DomainError);
}

TEST_CASE("jittered starts stay near the center and keep variances nonnegative") {
    std::mt19937_64 rng(1);
    const StartsParams center{0.035, 0.054, 0.512, 0.481, 0.281};
    const auto starts = jittered_starts(center, 1000, 0.1, rng);
    double mean_beta = 0.0;
    for (const auto& s : starts) {
        CHECK(s.admissible());
        mean_beta += s.beta;
    }
    CHECK(std::abs(mean_beta / 1000 - 0.512) < 0.01);
}

namespace {

Estimator uls_estimator() {
    return [](const Matrix& s, int n, const FitOptions& o, std::span<const StartsParams> init) {
        return fit_uls(s, n, o, init);
    };
}

}  // namespace

TEST_CASE("bootstrap of identical rows gives zero variance standard errors") {
    Matrix data(20, 4);
    for (int i = 0; i < 20; ++i) data.row(i) << 1.0, 2.0, 3.0, 4.0;
    const Estimator cml = [](const Matrix& s, int n, const FitOptions& o, std::span<const StartsParams> init) {
        return fit_cml(s, n, o, init);
    };
    BootstrapOptions o;
    o.replicates = 5;
    o.local_starts = 2;
    const BootstrapResult r = bootstrap_se(cml, data, StartsParams{0, 0, 0.3, 0, 0}, o);
    CHECK(r.mode == BootstrapMode::Nonparametric);
    CHECK(r.failures == 0);
    // Every resample has S = 0, so the variances sit at zero and beta is
    // unidentified.
    for (int k : {0, 1, 3, 4}) CHECK(r.se[static_cast<std::size_t>(k)] == 0.0);
}

TEST_CASE("parametric bootstrap is reproducible and parallel runs agree") {
    const Matrix s = implied_cov(design_truth(1.0), 4);
    BootstrapOptions o;
    o.replicates = 8;
    o.local_starts = 3;
    o.seed = 5;
    const BootstrapResult a = bootstrap_se(uls_estimator(), s, 500, design_truth(1.0), o);
    o.jobs = 3;
    const BootstrapResult b = bootstrap_se(uls_estimator(), s, 500, design_truth(1.0), o);
    CHECK(a.mode == BootstrapMode::Parametric);
    CHECK(a.se == b.se);
    CHECK(a.estimates.size() == 8);
    for (double se : a.se) CHECK(se > 0.0);
}

TEST_CASE("too many failed refits raise a reliability error with partial results") {
    int calls = 0;
    const Estimator flaky = [&calls](const Matrix& s, int n, const FitOptions& o, std::span<const StartsParams> init) {
        if (++calls % 2 == 0) throw EstimationFailure("forced", {});
        return fit_uls(s, n, o, init);
    };
    BootstrapOptions o;
    o.replicates = 10;
    o.local_starts = 2;
    try {
        bootstrap_se(flaky, implied_cov(design_truth(1.0), 4), 300, design_truth(1.0), o);
        FAIL("expected a reliability error");
    } catch (const ReliabilityError& e) {
        CHECK(e.partial().failures == 5);
        CHECK(e.partial().estimates.size() == 5);
    }
    o.replicates = 1;
    CHECK_THROWS_AS(bootstrap_se(uls_estimator(), implied_cov(design_truth(1.0), 4), 300, design_truth(1.0), o),
                    ConfigError);
}
