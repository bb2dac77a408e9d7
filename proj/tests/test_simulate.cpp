#include <doctest.h>

#include <cmath>
#include <sstream>

#include "starts/csv_io.hpp"
#include "starts/errors.hpp"
#include "starts/model.hpp"
#include "starts/simulate.hpp"

using namespace starts;

TEST_CASE("keyed streams are reproducible and distinct") {
    auto a = keyed_stream(42, 1, 2);
    auto b = keyed_stream(42, 1, 2);
    auto c = keyed_stream(42, 1, 3);
    auto d = keyed_stream(43, 1, 2);
    const auto a1 = a();
    CHECK(a1 == b());
    CHECK(a1 != c());
    CHECK(a1 != d());
}

TEST_CASE("gamma and beta means under the shape-rate convention") {
    CHECK(Distribution::gamma(4, 4).mean(GammaConvention::ShapeRate) == 1.0);
    CHECK(Distribution::gamma(4, 4).mean(GammaConvention::ShapeScale) == 16.0);
    CHECK(Distribution::beta_dist(4, 4).mean(GammaConvention::ShapeRate) == 0.5);
}

TEST_CASE("Monte Carlo mean of gamma(3, 4) draws is 0.75") {
    const auto draws = draw_initial_values(InitialValueSpec::simulation(), 100000, 123);
    double phi = 0.0, beta = 0.0;
    for (const auto& d : draws) {
        phi += d.phi2;
        beta += d.beta;
    }
    CHECK(std::abs(phi / 1e5 - 0.75) < 0.01);
    CHECK(std::abs(beta / 1e5 - 0.5) < 0.01);
}

TEST_CASE("initial values are positive with beta in (0, 1)") {
    for (const auto& spec : {InitialValueSpec::simulation(), InitialValueSpec::empirical()}) {
        for (const auto& d : draw_initial_values(spec, 2000, 5)) {
            CHECK(d.psi2 > 0.0);
            CHECK(d.phi2 > 0.0);
            CHECK(d.omega2 > 0.0);
            CHECK(d.sigma1_2 > 0.0);
            CHECK(d.beta > 0.0);
            CHECK(d.beta < 1.0);
        }
    }
    InitialValueSpec bad = InitialValueSpec::simulation();
    bad.phi2.a = -1.0;
    CHECK_THROWS_AS(draw_initial_values(bad, 3, 1), ConfigError);
    CHECK_THROWS_AS(InitialValueSpec::named("uniform"), ConfigError);
}

TEST_CASE("gen_dataset shape, determinism and errors") {
    SimConfig cfg;
    cfg.theta_true = design_truth(0.2);
    cfg.n = 200;
    cfg.t = 4;
    cfg.seed = 9;
    const Matrix y = gen_dataset(cfg);
    CHECK(y.rows() == 200);
    CHECK(y.cols() == 4);
    CHECK(gen_dataset(cfg) == y);
    CHECK(y.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
    cfg.theta_true = {0.0, 0.0, 0.3, 0.0, 0.0};
    CHECK_THROWS_AS(gen_dataset(cfg), DomainError);
    cfg.theta_true = design_truth(0.2);
    cfg.n = 4;
    CHECK_THROWS_AS(gen_dataset(cfg), ConfigError);
}

TEST_CASE("centering leaves the sample covariance unchanged") {
    SimConfig cfg;
    cfg.theta_true = design_truth(1.0);
    cfg.n = 300;
    cfg.t = 5;
    cfg.centered = false;
    Matrix y = gen_dataset(cfg);
    y.rowwise() += Eigen::RowVectorXd::LinSpaced(5, 1.0, 5.0);
    Matrix centered = y;
    centered.rowwise() -= y.colwise().mean();
    CHECK((sample_cov(y) - sample_cov(centered)).cwiseAbs().maxCoeff() < 1e-13);
    CHECK_THROWS_AS(sample_cov(Matrix::Zero(1, 3)), DimensionError);
}

TEST_CASE("sampling error shrinks at the square-root rate") {
    const StartsParams th = design_truth(1.0);
    const Matrix sigma = implied_cov(th, 4);
    std::vector<double> log_n, log_err;
    for (int n : {1000, 10000, 100000}) {
        double err = 0.0;
        const int reps = 20;
        for (int r = 0; r < reps; ++r) {
            auto rng = keyed_stream(77, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r));
            err += (sample_cov(gen_dataset(sigma, n, rng)) - sigma).norm();
        }
        log_n.push_back(std::log(static_cast<double>(n)));
        log_err.push_back(std::log(err / reps));
    }
    const double slope = (log_err[2] - log_err[0]) / (log_n[2] - log_n[0]);
    CHECK(std::abs(slope + 0.5) < 0.15);
}

TEST_CASE("dataset CSV round-trips exactly") {
    SimConfig cfg;
    cfg.theta_true = design_truth(0.2);
    cfg.n = 50;
    cfg.t = 4;
    const Matrix y = gen_dataset(cfg);
    std::stringstream ss;
    write_dataset_csv(ss, y);
    const LabeledMatrix back = read_data_csv(ss);
    CHECK(back.labels == std::vector<std::string>{"t1", "t2", "t3", "t4"});
    CHECK(back.values == y);
}
