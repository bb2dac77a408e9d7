// Acceptance run: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "starts/diagnostics.hpp"
#include "starts/mdfa.hpp"
#include "starts/model.hpp"
#include "starts/sem.hpp"
#include "starts/simulate.hpp"
#include "starts/study.hpp"

using namespace starts;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Matrix sleep_cov() {
    Matrix s(4, 4);
    s << 0.394, 0.253, 0.185, 0.095,
         0.253, 0.546, 0.304, 0.146,
         0.185, 0.304, 0.738, 0.332,
         0.095, 0.146, 0.332, 0.809;
    return s;
}

constexpr int kSleepN = 1294;

// Reference estimates, canonical order (psi2, phi2, beta, omega2, sigma1_2).
const StartsParams kMlReference{-0.304, 0.114, 0.251, 0.845, 0.582};
const StartsParams kCmlReference{0.0, 0.091, 0.442, 0.518, 0.300};
const StartsParams kUlsReference{0.134, 0.015, 0.648, 0.359, 0.270};
const StartsParams kTsReference{0.035, 0.054, 0.512, 0.481, 0.281};

// Lower triangle by row, diagonal included.
const double kUlsResidual[10] = {-0.063, 0.138, -0.138, 0.105, -0.025, 0.043, 0.011, -0.101, -0.056, 0.084};
const double kTsResidual[10] = {0.035, 0.103, -0.189, 0.093, -0.059, 0.026, -0.006, -0.086, -0.058, 0.091};

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
    std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

double max_abs_diff(const StartsParams& a, const StartsParams& b) {
    return (a.to_vector() - b.to_vector()).cwiseAbs().maxCoeff();
}

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

FitOptions starts_opts(int m) {
    FitOptions o;
    o.n_starts = m;
    return o;
}

void criterion_population_recovery() {
    const auto t0 = Clock::now();
    // The iteration converges linearly, so the default step tolerance stops
    // well short of 1e-3 accuracy on some conditions.
    FitOptions tight = starts_opts(20);
    tight.param_tol = 1e-10;
    tight.max_iters = 100000;
    tight.patience = 1000;
    double worst = 0.0;
    std::string worst_at;
    for (double psi2 : {0.2, 1.0}) {
        for (int t : {4, 6, 8}) {
            const StartsParams truth = design_truth(psi2);
            const Matrix s = implied_cov(truth, t);
            const auto init = draw_initial_values(InitialValueSpec::simulation(), 20, 11);
            for (Method m : {Method::TSMDFA, Method::ML, Method::ULS}) {
                const FitOptions& o = m == Method::TSMDFA ? tight : starts_opts(20);
                const double err = max_abs_diff(fit(m, s, 1000, o, init).theta_hat, truth);
                if (err > worst) {
                    worst = err;
                    worst_at = std::string(method_name(m)) + " T=" + std::to_string(t) + " psi2=" + fmt("%.1f", psi2);
                }
            }
        }
    }
    const double secs = seconds_since(t0);
    report(1, worst < 1e-3 && secs < 60.0,
           "max |error| " + fmt("%.2e", worst) + (worst_at.empty() ? "" : " (" + worst_at + ")") + ", " +
               fmt("%.1f", secs) + " s");
}

StartsParams fit_sleep(Method m, int n_starts, std::uint64_t seed) {
    const auto init = draw_initial_values(InitialValueSpec::empirical(), n_starts, seed);
    return fit(m, sleep_cov(), kSleepN, starts_opts(n_starts), init).theta_hat;
}

StartsParams g_uls_fit;
StartsParams g_ts_fit;

void criterion_table4() {
    const auto t0 = Clock::now();
    const StartsParams ml = fit_sleep(Method::ML, 20, 1);
    const StartsParams cml = fit_sleep(Method::CML, 20, 1);
    g_uls_fit = fit_sleep(Method::ULS, 20, 1);
    g_ts_fit = fit_sleep(Method::TSMDFA, 500, 0);
    const double ml_err = max_abs_diff(ml, kMlReference);
    const double cml_err = max_abs_diff(cml, kCmlReference);
    const double uls_err = max_abs_diff(g_uls_fit, kUlsReference);
    const double ts_err = max_abs_diff(g_ts_fit, kTsReference);
    const bool pass = ml_err <= 0.02 && cml.psi2 == 0.0 && cml_err <= 0.02 && uls_err <= 0.01 && ts_err <= 0.05;

    // Sensitivity of the TS-MDFA column to the initial-value draw.
    int ok = 0;
    const int seeds = 50;
    for (int seed = 0; seed < seeds; ++seed)
        ok += max_abs_diff(fit_sleep(Method::TSMDFA, 500, static_cast<std::uint64_t>(seed)), kTsReference) <= 0.05;
    const double secs = seconds_since(t0);
    report(2, pass && secs < 600.0,
           "max |diff| ML " + fmt("%.3f", ml_err) + ", CML " + fmt("%.3f", cml_err) + " (psi2 " +
               fmt("%g", cml.psi2) + "), ULS " + fmt("%.3f", uls_err) + ", TS-MDFA " + fmt("%.3f", ts_err) +
               " (seed 0; " + std::to_string(ok) + "/" + std::to_string(seeds) + " seeds within 0.05), " +
               fmt("%.1f", secs) + " s");
}

double max_residual_diff(const Matrix& r, const double (&reference)[10]) {
    double worst = 0.0;
    int k = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j <= i; ++j) worst = std::max(worst, std::abs(r(i, j) - reference[k++]));
    return worst;
}

void criterion_fit_indices() {
    const Matrix s = sleep_cov();
    const Matrix uls_sigma = implied_cov(g_uls_fit, 4);
    const Matrix ts_sigma = implied_cov(g_ts_fit, 4);
    // The reference values count the T saturated mean residuals as well.
    const double srmr_uls = srmr(s, uls_sigma, SrmrDivisor::WithMeans);
    const double srmr_ts = srmr(s, ts_sigma, SrmrDivisor::WithMeans);
    const double res_uls = max_residual_diff(residual_corr(s, uls_sigma), kUlsResidual);
    const double res_ts = max_residual_diff(residual_corr(s, ts_sigma), kTsResidual);
    const double res_ts_ref = max_residual_diff(residual_corr(s, implied_cov(kTsReference, 4)), kTsResidual);
    const bool pass = std::abs(srmr_uls - 0.074) <= 0.005 && std::abs(srmr_ts - 0.075) <= 0.005 &&
                      res_uls <= 0.02 && res_ts <= 0.02;
    report(3, pass,
           "SRMR ULS " + fmt("%.4f", srmr_uls) + ", TS-MDFA " + fmt("%.4f", srmr_ts) + " (covariances only " +
               fmt("%.4f", srmr(s, uls_sigma)) + ", " + fmt("%.4f", srmr(s, ts_sigma)) + ")" +
               "; max residual-correlation diff ULS " + fmt("%.3f", res_uls) +
               ", TS-MDFA " + fmt("%.3f", res_ts) + " (" + fmt("%.3f", res_ts_ref) +
               " at the reference TS-MDFA estimates)");
}

StudyConfig study_at(int t, int n, std::vector<double> psi2, std::vector<Method> methods) {
    StudyConfig c = StudyConfig::paper_study();
    c.t_values = {t};
    c.n_values = {n};
    c.psi2_values = std::move(psi2);
    c.methods = std::move(methods);
    return c;
}

void criterion_table1() {
    const auto t0 = Clock::now();
    const StudyConfig c = study_at(4, 200, {0.2, 1.0}, {Method::ML, Method::CML, Method::ULS, Method::TSMDFA});
    const StudyResult result = run_study(c);
    const StudySummary summary = summarize(result);
    // Reference strict improper proportions per condition for ML, CML, ULS
    // span 0.56 to 0.72; each comparator must land within 0.15 of that band.
    const double reference[2][3] = {{0.56, 0.58, 0.58}, {0.70, 0.72, 0.68}};
    const double band_lo = 0.56 - 0.15;
    const double band_hi = 0.72 + 0.15;
    bool pass = true;
    std::string detail;
    for (std::size_t ci = 0; ci < summary.conditions.size(); ++ci) {
        const ConditionSummary& cs = summary.conditions[ci];
        detail += cs.condition.label() + ":";
        for (std::size_t k = 0; k < cs.methods.size(); ++k) {
            const MethodSummary& ms = cs.methods[k];
            detail += std::string(" ") + std::string(method_name(ms.method)) + " " + fmt("%.2f", ms.strict);
            if (ms.method == Method::TSMDFA) {
                pass = pass && ms.strict == 0.0;
            } else {
                pass = pass && ms.strict >= band_lo && ms.strict <= band_hi;
                detail += fmt(" (reference %.2f)", reference[ci][k]);
            }
        }
        detail += "; ";
    }
    bool negative = false;
    for (const auto& rep : result.replications)
        for (const auto& o : rep.outcomes)
            if (o.method == Method::TSMDFA) negative = negative || !o.theta.admissible();
    pass = pass && !negative;
    report(4, pass, detail + fmt("%.1f", seconds_since(t0)) + " s");
}

void criterion_figure4() {
    const auto t0 = Clock::now();
    const StudyConfig c = study_at(8, 1000, {1.0}, {Method::ML, Method::CML, Method::TSMDFA});
    const StudySummary summary = summarize(run_study(c));
    const ConditionSummary& cs = summary.conditions.front();
    int ml_cml = 0;
    int ts_ml = 0;
    std::string detail = "joint-admissible " + std::to_string(cs.joint_admissible) + "/50;";
    for (const PairCorrelation& pc : cs.correlations) {
        const bool is_ml_cml = (pc.first == Method::ML && pc.second == Method::CML) ||
                               (pc.first == Method::CML && pc.second == Method::ML);
        const bool is_ts_ml = (pc.first == Method::ML && pc.second == Method::TSMDFA) ||
                              (pc.first == Method::TSMDFA && pc.second == Method::ML);
        if (!is_ml_cml && !is_ts_ml) continue;
        detail += std::string(" ") + std::string(method_name(pc.first)) + "-" + std::string(method_name(pc.second));
        for (const auto& r : pc.r) {
            detail += r ? fmt(" %.4f", *r) : std::string(" NA");
            if (is_ml_cml) ml_cml += r && *r > 0.999;
            if (is_ts_ml) ts_ml += r && *r > 0.85;
        }
        detail += ";";
    }
    report(5, ml_cml >= 4 && ts_ml >= 4, detail + " " + fmt("%.1f", seconds_since(t0)) + " s");
}

// Within-person covariance built from the autoregression one occasion at a
// time: var_t = beta^2 var_{t-1} + omega2, cov(t, u) = beta^(u-t) var_t.
Matrix recursive_within(double beta, double sigma1_2, double omega2, int t) {
    Matrix out(t, t);
    double var = sigma1_2;
    for (int i = 0; i < t; ++i) {
        if (i > 0) var = beta * beta * var + omega2;
        double c = var;
        for (int j = i; j < t; ++j) {
            out(i, j) = out(j, i) = c;
            c *= beta;
        }
    }
    return out;
}

// Brute-force loss minimum over a box grid, then once more on a finer grid
// around the best cell.
struct GridBest {
    double loss = INFINITY;
    double beta = 0.0, sigma1 = 0.0, omega = 0.0;
};

void grid_search(const Matrix& target, double b_lo, double b_hi, double b_step, double v_step, double s_lo,
                 double s_hi, double o_lo, double o_hi, GridBest& best) {
    const int t = static_cast<int>(target.rows());
    const int nb = static_cast<int>(std::lround((b_hi - b_lo) / b_step));
    const int ns = static_cast<int>(std::lround((s_hi - s_lo) / v_step));
    const int no = static_cast<int>(std::lround((o_hi - o_lo) / v_step));
    for (int ib = 0; ib <= nb; ++ib) {
        const double beta = b_lo + ib * b_step;
        // The loss is a quadratic in (sigma1^2, omega^2) at fixed beta.
        const Matrix a = recursive_within(beta, 1.0, 0.0, t);
        const Matrix b = recursive_within(beta, 0.0, 1.0, t);
        double aa = 0, bb = 0, ab = 0, sa = 0, sb = 0, ss = 0;
        for (int i = 0; i < t; ++i) {
            for (int j = 0; j <= i; ++j) {
                aa += a(i, j) * a(i, j);
                bb += b(i, j) * b(i, j);
                ab += a(i, j) * b(i, j);
                sa += target(i, j) * a(i, j);
                sb += target(i, j) * b(i, j);
                ss += target(i, j) * target(i, j);
            }
        }
        for (int is = 0; is <= ns; ++is) {
            const double sig = s_lo + is * v_step;
            const double x = sig * sig;
            for (int io = 0; io <= no; ++io) {
                const double om = o_lo + io * v_step;
                const double y = om * om;
                const double loss = ss - 2 * (x * sa + y * sb) + x * x * aa + 2 * x * y * ab + y * y * bb;
                if (loss < best.loss) best = {loss, beta, sig, om};
            }
        }
    }
}

void criterion_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> ub(-0.85, 0.85), uv(0.1, 1.8), noise(-0.05, 0.05);
    int matched = 0;
    double worst_gap = -INFINITY;
    for (int k = 0; k < 20; ++k) {
        Matrix target = within_cov({ub(rng), uv(rng), uv(rng)}, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j <= i; ++j) target(i, j) = target(j, i) = target(i, j) + noise(rng);
        GridBest best;
        grid_search(target, -0.95, 0.95, 0.01, 0.01, 0.01, 2.0, 0.01, 2.0, best);
        const GridBest coarse = best;
        grid_search(target, coarse.beta - 0.01, coarse.beta + 0.01, 0.0005, 0.0005,
                    std::max(0.0, coarse.sigma1 - 0.01), coarse.sigma1 + 0.01, std::max(0.0, coarse.omega - 0.01),
                    coarse.omega + 0.01, best);
        const Theta1 fitted = theta1_update(target, {0.0, 0.5, 0.5});
        const double ours = within_uls_loss(target, fitted);
        const double gap = ours - best.loss;
        worst_gap = std::max(worst_gap, gap);
        matched += gap <= 1e-6;
    }

    std::uniform_real_distribution<double> db(-1.5, 1.5), dv(0.0, 3.0);
    double worst_form = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const Theta1 th{db(rng), dv(rng), dv(rng)};
        for (int t : {2, 4, 6, 8}) {
            const Matrix diff = within_cov(th, t) - recursive_within(th.beta, th.sigma1_2, th.omega2, t);
            const double scale = std::max(1.0, within_cov(th, t).cwiseAbs().maxCoeff());
            worst_form = std::max(worst_form, diff.cwiseAbs().maxCoeff() / scale);
        }
    }
    report(6, matched == 20 && worst_form <= 1e-12,
           std::to_string(matched) + "/20 targets at or below the refined grid optimum + 1e-6 (worst gap " +
               fmt("%.2e", worst_gap) + "); matrix vs recursive form max rel diff " + fmt("%.2e", worst_form) +
               ", " + fmt("%.1f", seconds_since(t0)) + " s");
}

std::string study_bytes(const StudyConfig& c) {
    std::ostringstream est, init;
    const StudyResult r = run_study(c);
    write_long_csv(est, r);
    write_initial_values_csv(init, r);
    // The trailing column holds wall-clock seconds.
    std::istringstream in(est.str());
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) out << line.substr(0, line.rfind(',')) << '\n';
    return out.str() + init.str();
}

void criterion_invariants() {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> uv(0.0, 2.0), ub(-1.2, 1.2);
    std::normal_distribution<double> z;
    double worst_bundle = 0.0;
    double worst_rank = 0.0;
    for (int k = 0; k < 500; ++k) {
        const int t = 4 + 2 * (k % 3);
        const StartsParams th{uv(rng), uv(rng), ub(rng), uv(rng), uv(rng)};
        const LoadingBundle lb = build_loading_bundle(th, t);
        const Matrix sigma = implied_cov(th, t);
        const Matrix rebuilt = lb.lambda_tilde * lb.lambda_tilde.transpose() + lb.d_tilde * lb.d_tilde;
        worst_bundle = std::max(worst_bundle, relative_frobenius_error(rebuilt, sigma));
        Matrix a(t, t + 2);
        for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = z(rng);
        const Matrix s = a * a.transpose() / t;
        const Matrix syz = cross_cov_matrix(s, lb.b_tilde);
        worst_rank = std::max(worst_rank, relative_frobenius_error(syz * syz.transpose(), s));
    }

    bool nonnegative = true;
    FitOptions o = starts_opts(3);
    for (int k = 0; k < 60; ++k) {
        const int t = 4 + 2 * (k % 3);
        Matrix a(t, t + 1);
        for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = z(rng);
        const Matrix s = a * a.transpose() / t;
        const auto init = draw_initial_values(InitialValueSpec::simulation(), 3, rng);
        const StartsParams th = fit_tsmdfa(s, 200, o, init).theta_hat;
        nonnegative = nonnegative && th.phi2 >= 0.0 && th.psi2 >= 0.0;
    }

    StudyConfig c = study_at(4, 200, {0.2}, {Method::ML, Method::CML, Method::ULS, Method::TSMDFA});
    c.replications = 5;
    c.starts = 5;
    const std::string first = study_bytes(c);
    c.jobs = 2;
    const std::string second = study_bytes(c);
    std::ostringstream d1, d2;
    write_dataset_csv(d1, gen_dataset(SimConfig{design_truth(1.0), 200, 4, 9, true}));
    write_dataset_csv(d2, gen_dataset(SimConfig{design_truth(1.0), 200, 4, 9, true}));
    const bool deterministic = first == second && d1.str() == d2.str();

    report(7, worst_bundle < 1e-12 && worst_rank < 1e-8 && nonnegative && deterministic,
           "loading identity " + fmt("%.1e", worst_bundle) + ", rank-T reconstruction " + fmt("%.1e", worst_rank) +
               ", trait/error variances nonnegative " + (nonnegative ? "yes" : "no") + ", repeated runs identical " +
               (deterministic ? "yes" : "no"));
}

}  // namespace

int main() {
    criterion_population_recovery();
    criterion_table4();
    criterion_fit_indices();
    criterion_table1();
    criterion_figure4();
    criterion_oracle();
    criterion_invariants();
    return failures == 0 ? 0 : 1;
}
