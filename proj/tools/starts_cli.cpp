// starts: fit, simulate, study and bootstrap for the STARTS panel model.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "starts/csv_io.hpp"
#include "starts/diagnostics.hpp"
#include "starts/errors.hpp"
#include "starts/fit.hpp"
#include "starts/manifest.hpp"
#include "starts/model.hpp"
#include "starts/sem.hpp"
#include "starts/simulate.hpp"
#include "starts/study.hpp"

using namespace starts;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitEstimation = 2;
constexpr int kExitImproper = 3;

struct InputArgs {
    std::string raw_path;
    std::string cov_path;
    int n = 0;
};

struct Loaded {
    Matrix s;
    int n = 0;
    std::optional<Matrix> data;  // only for raw input
    std::vector<std::string> labels;
};

Loaded load_input(const InputArgs& in) {
    if (in.raw_path.empty() == in.cov_path.empty()) throw ConfigError("give exactly one of --input or --cov");
    Loaded out;
    if (!in.raw_path.empty()) {
        LabeledMatrix m = read_data_csv_file(in.raw_path);
        if (m.values.rows() < 2) throw ParseError("raw data needs at least two rows");
        out.labels = m.labels;
        out.s = sample_cov(m.values);
        out.n = static_cast<int>(m.values.rows());
        out.data = std::move(m.values);
        if (in.n > 0 && in.n != out.n) throw ConfigError("--n disagrees with the number of data rows");
    } else {
        if (in.n < 2) throw ConfigError("--cov needs --n (sample size >= 2)");
        LabeledMatrix m = read_cov_csv_file(in.cov_path);
        out.labels = m.labels;
        out.s = m.values;
        out.n = in.n;
    }
    if (out.s.rows() < 4) throw DimensionError("the model needs T >= 4 time points");
    const SymEigen eig = sym_eigen(out.s);
    const double smallest = eig.values(eig.values.size() - 1);
    if (!(smallest > 0.0)) {
        std::ostringstream os;
        os << "covariance input is not positive definite (smallest eigenvalue " << smallest << ")";
        throw DomainError(os.str());
    }
    return out;
}

struct EstimationArgs {
    std::string method = "TS-MDFA";
    int starts = 20;
    int patience = 10;
    double tol = 1e-6;
    int max_iters = 500;
    std::uint64_t seed = 1;
    std::string init = "empirical";
};

FitOptions fit_options(const EstimationArgs& a) {
    FitOptions o;
    o.n_starts = a.starts;
    o.patience = a.patience;
    o.param_tol = a.tol;
    o.max_iters = a.max_iters;
    o.rng_seed = a.seed;
    o.validate();
    return o;
}

json params_json(const StartsParams& p) {
    json j = json::object();
    for (int k = 0; k < 5; ++k) {
        j[std::string(kParamNames[static_cast<std::size_t>(k)])] = std::isfinite(p[k]) ? json(p[k]) : json(nullptr);
    }
    return j;
}

json se_json(const std::array<double, 5>& se) {
    return params_json(StartsParams{se[0], se[1], se[2], se[3], se[4]});
}

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

void emit(const json& report, const std::string& out_path) {
    if (out_path.empty() || out_path == "-") {
        std::cout << report.dump(2) << '\n';
        return;
    }
    std::ofstream f(out_path);
    if (!f) throw ConfigError("cannot write " + out_path);
    f << report.dump(2) << '\n';
}

struct BootstrapArgs {
    int replicates = 200;
    int local_starts = 20;
    double jitter = 0.1;
    std::string mode = "auto";
    int jobs = 1;
};

int effective_jobs(int flag) {
    StudyConfig c;
    c.jobs = flag;
    return c.effective_jobs();
}

json run_bootstrap(const Loaded& in, Method method, const FitResult& point, const EstimationArgs& est,
                   const BootstrapArgs& b) {
    BootstrapMode mode;
    if (b.mode == "auto") mode = in.data ? BootstrapMode::Nonparametric : BootstrapMode::Parametric;
    else if (b.mode == "parametric") mode = BootstrapMode::Parametric;
    else if (b.mode == "nonparametric") mode = BootstrapMode::Nonparametric;
    else throw ConfigError("--bootstrap-mode must be parametric or nonparametric");
    if (mode == BootstrapMode::Nonparametric && !in.data) {
        throw ConfigError("nonparametric bootstrap needs raw data (--input)");
    }

    BootstrapOptions opts;
    opts.replicates = b.replicates;
    opts.local_starts = b.local_starts;
    opts.jitter = b.jitter;
    opts.seed = est.seed;
    opts.jobs = effective_jobs(b.jobs);
    opts.fit = fit_options(est);

    const Estimator estimator = [method](const Matrix& s, int n, const FitOptions& o,
                                         std::span<const StartsParams> init) { return fit(method, s, n, o, init); };
    json report = {{"mode", std::string(bootstrap_mode_name(mode))},
                   {"replicates", b.replicates},
                   {"local_starts", b.local_starts},
                   {"jitter", b.jitter},
                   {"statistically_meaningless", b.replicates < 30}};
    try {
        const BootstrapResult r = mode == BootstrapMode::Nonparametric
                                      ? bootstrap_se(estimator, *in.data, point.theta_hat, opts)
                                      : bootstrap_se(estimator, in.s, in.n, point.theta_hat, opts);
        report["se"] = se_json(r.se);
        report["failures"] = r.failures;
    } catch (const ReliabilityError& e) {
        report["se"] = se_json(e.partial().se);
        report["failures"] = e.partial().failures;
        report["error"] = e.what();
    }
    return report;
}

int cmd_fit(const InputArgs& input, const EstimationArgs& est, bool warn_improper, std::optional<BootstrapArgs> boot,
            const std::string& out) {
    const Loaded in = load_input(input);
    const Method method = parse_method(est.method);
    const FitOptions opts = fit_options(est);
    const auto init = draw_initial_values(InitialValueSpec::named(est.init), est.starts, est.seed);

    FitResult r;
    try {
        r = fit(method, in.s, in.n, opts, init);
    } catch (const EstimationFailure& e) {
        json report = {{"method", std::string(method_name(method))}, {"error", e.what()}, {"starts", e.per_start()}};
        emit(report, out);
        return kExitEstimation;
    }

    const Matrix sigma_hat = implied_cov(r.theta_hat, static_cast<int>(in.s.rows()));
    json report = {{"method", std::string(method_name(method))},
                   {"n", in.n},
                   {"t", in.s.rows()},
                   {"labels", in.labels},
                   {"estimates", params_json(r.theta_hat)},
                   {"loss", r.loss},
                   {"convergence", std::string(convergence_name(r.converged))},
                   {"n_iters", r.n_iters},
                   {"start_index", r.start_index},
                   {"n_starts", est.starts},
                   {"seed", est.seed},
                   {"improper_strict", r.improper_strict},
                   {"improper_lenient", r.improper_lenient},
                   {"residual_corr", matrix_json(residual_corr(in.s, sigma_hat))},
                   {"srmr", srmr(in.s, sigma_hat)},
                   {"srmr_with_means", srmr(in.s, sigma_hat, SrmrDivisor::WithMeans)},
                   {"seconds", r.elapsed}};
    if (method == Method::ML) {
        const StandardErrors se = ml_standard_errors(in.s, in.n, r.theta_hat);
        report["ml_standard_errors"] = se.singular ? json(nullptr) : se_json(se.se);
    }
    if (boot) report["bootstrap"] = run_bootstrap(in, method, r, est, *boot);
    emit(report, out);
    return warn_improper && r.improper_strict ? kExitImproper : kExitOk;
}

int cmd_bootstrap(const InputArgs& input, const EstimationArgs& est, const BootstrapArgs& boot,
                  const std::string& out) {
    const Loaded in = load_input(input);
    const Method method = parse_method(est.method);
    const auto init = draw_initial_values(InitialValueSpec::named(est.init), est.starts, est.seed);
    FitResult r;
    try {
        r = fit(method, in.s, in.n, fit_options(est), init);
    } catch (const EstimationFailure& e) {
        emit({{"method", std::string(method_name(method))}, {"error", e.what()}}, out);
        return kExitEstimation;
    }
    json report = run_bootstrap(in, method, r, est, boot);
    report["method"] = std::string(method_name(method));
    report["estimates"] = params_json(r.theta_hat);
    emit(report, out);
    return report.contains("error") ? kExitEstimation : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"STARTS model estimation (TS-MDFA, ML, CML, ULS)"};
    app.require_subcommand(1);

    InputArgs input;
    EstimationArgs est;
    BootstrapArgs boot;
    std::string out;

    auto add_input = [&](CLI::App* sub) {
        sub->add_option("--input", input.raw_path, "raw panel data CSV (header t1..tT, one row per person)");
        sub->add_option("--cov", input.cov_path, "covariance CSV (T labels, then T rows of T values)");
        sub->add_option("--n", input.n, "sample size for --cov");
    };
    auto add_estimation = [&](CLI::App* sub) {
        sub->add_option("--method", est.method, "ML, CML, ULS or TS-MDFA")->capture_default_str();
        sub->add_option("--starts", est.starts, "number of initial values M")->capture_default_str();
        sub->add_option("--patience", est.patience, "TS-MDFA patience")->capture_default_str();
        sub->add_option("--tol", est.tol, "TS-MDFA parameter-change tolerance")->capture_default_str();
        sub->add_option("--max-iters", est.max_iters, "TS-MDFA iteration cap per start")->capture_default_str();
        sub->add_option("--seed", est.seed, "seed for initial values and resampling")->capture_default_str();
        sub->add_option("--init", est.init, "initial-value distributions: empirical or simulation")
            ->capture_default_str();
    };
    auto add_bootstrap = [&](CLI::App* sub) {
        sub->add_option("--bootstrap-mode", boot.mode, "parametric, nonparametric or auto")->capture_default_str();
        sub->add_option("--local-starts", boot.local_starts, "starts per resample")->capture_default_str();
        sub->add_option("--jitter", boot.jitter, "relative sd of the start jitter")->capture_default_str();
        sub->add_option("--jobs", boot.jobs, std::string("worker threads (") + kJobsEnv + " overrides)")
            ->capture_default_str();
    };

    auto* fit_cmd = app.add_subcommand("fit", "fit the model and write a JSON report");
    add_input(fit_cmd);
    add_estimation(fit_cmd);
    bool warn_improper = false;
    int fit_boot_b = 0;
    fit_cmd->add_flag("--warn-improper", warn_improper, "exit 3 when the solution is improper");
    fit_cmd->add_option("--bootstrap", fit_boot_b, "also run B bootstrap resamples");
    add_bootstrap(fit_cmd);
    fit_cmd->add_option("--out", out, "report path (default stdout)");

    auto* boot_cmd = app.add_subcommand("bootstrap", "bootstrap standard errors");
    add_input(boot_cmd);
    add_estimation(boot_cmd);
    add_bootstrap(boot_cmd);
    boot_cmd->add_option("-B,--replicates", boot.replicates, "bootstrap resamples")->capture_default_str();
    boot_cmd->add_option("--out", out, "report path (default stdout)");

    auto* sim_cmd = app.add_subcommand("simulate", "simulate datasets with a hash manifest");
    std::string sim_config;
    std::string verify_path;
    SimConfig sim;
    sim.theta_true = design_truth(0.2);
    sim.seed = 1;
    int datasets = 1;
    std::string sim_dir = "sim-out";
    sim_cmd->add_option("--config", sim_config, "JSON with any of n, t, seed, centered, datasets, theta_true");
    sim_cmd->add_option("--psi2", sim.theta_true.psi2)->capture_default_str();
    sim_cmd->add_option("--phi2", sim.theta_true.phi2)->capture_default_str();
    sim_cmd->add_option("--beta", sim.theta_true.beta)->capture_default_str();
    sim_cmd->add_option("--omega2", sim.theta_true.omega2)->capture_default_str();
    sim_cmd->add_option("--sigma1-2", sim.theta_true.sigma1_2)->capture_default_str();
    sim_cmd->add_option("--n", sim.n)->capture_default_str();
    sim_cmd->add_option("--t", sim.t)->capture_default_str();
    sim_cmd->add_option("--seed", sim.seed)->capture_default_str();
    sim_cmd->add_option("--datasets", datasets)->capture_default_str();
    sim_cmd->add_option("--out", sim_dir, "output directory")->capture_default_str();
    sim_cmd->add_option("--verify", verify_path, "re-hash the files listed in a manifest and exit");

    auto* study_cmd = app.add_subcommand("study", "run the Monte Carlo study grid");
    std::string study_config;
    std::string preset;
    std::vector<int> grid_t, grid_n;
    std::vector<double> grid_psi2;
    std::vector<std::string> study_methods;
    std::optional<int> study_reps, study_starts, study_jobs;
    std::optional<std::uint64_t> study_seed;
    std::string study_out;
    study_cmd->add_option("--config", study_config, "study config JSON");
    study_cmd->add_option("--preset", preset, "paper-study");
    study_cmd->add_option("--T", grid_t, "restrict the T grid")->delimiter(',');
    study_cmd->add_option("--N", grid_n, "restrict the N grid")->delimiter(',');
    study_cmd->add_option("--psi2", grid_psi2, "restrict the psi2 grid")->delimiter(',');
    study_cmd->add_option("--methods", study_methods, "subset of ML CML ULS TS-MDFA")->delimiter(',');
    study_cmd->add_option("--replications", study_reps);
    study_cmd->add_option("--starts", study_starts);
    study_cmd->add_option("--seed", study_seed);
    study_cmd->add_option("--jobs", study_jobs, std::string("worker threads (") + kJobsEnv + " overrides)");
    study_cmd->add_option("--out", study_out, "output directory");
    bool quiet = false;
    study_cmd->add_flag("--quiet", quiet, "no progress on stderr");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help and friends exit 0; every other parse failure is an input error.
        return app.exit(e) == 0 ? kExitOk : kExitInput;
    }

    try {
        if (fit_cmd->parsed()) {
            std::optional<BootstrapArgs> b;
            if (fit_boot_b > 0) {
                b = boot;
                b->replicates = fit_boot_b;
            }
            return cmd_fit(input, est, warn_improper, b, out);
        }
        if (boot_cmd->parsed()) return cmd_bootstrap(input, est, boot, out);

        if (sim_cmd->parsed()) {
            if (!verify_path.empty()) {
                const Manifest m = verify_manifest(verify_path);
                std::cout << "ok: " << m.files.size() << " file(s) match " << verify_path << '\n';
                return kExitOk;
            }
            if (!sim_config.empty()) {
                std::ifstream f(sim_config);
                if (!f) throw ConfigError("cannot read " + sim_config);
                const json j = json::parse(f);
                sim.n = j.value("n", sim.n);
                sim.t = j.value("t", sim.t);
                sim.seed = j.value("seed", sim.seed);
                sim.centered = j.value("centered", sim.centered);
                datasets = j.value("datasets", datasets);
                if (j.contains("theta_true")) {
                    const json& th = j.at("theta_true");
                    sim.theta_true.psi2 = th.value("psi2", sim.theta_true.psi2);
                    sim.theta_true.phi2 = th.value("phi2", sim.theta_true.phi2);
                    sim.theta_true.beta = th.value("beta", sim.theta_true.beta);
                    sim.theta_true.omega2 = th.value("omega2", sim.theta_true.omega2);
                    sim.theta_true.sigma1_2 = th.value("sigma1_2", sim.theta_true.sigma1_2);
                }
            }
            const Manifest m = simulate_to_dir(sim, datasets, sim_dir);
            std::cout << m.to_json().dump(2) << '\n';
            return kExitOk;
        }

        if (study_cmd->parsed()) {
            StudyConfig config;
            if (!study_config.empty()) {
                std::ifstream f(study_config);
                if (!f) throw ConfigError("cannot read " + study_config);
                config = StudyConfig::from_json(json::parse(f));
            } else if (preset.empty() || preset == "paper-study") {
                config = StudyConfig::paper_study();
            } else {
                throw ConfigError("unknown preset '" + preset + "'");
            }
            if (!grid_t.empty()) config.t_values = grid_t;
            if (!grid_n.empty()) config.n_values = grid_n;
            if (!grid_psi2.empty()) config.psi2_values = grid_psi2;
            if (!study_methods.empty()) {
                config.methods.clear();
                for (const auto& m : study_methods) config.methods.push_back(parse_method(m));
            }
            if (study_reps) config.replications = *study_reps;
            if (study_starts) config.starts = *study_starts;
            if (study_seed) config.seed = *study_seed;
            if (study_jobs) config.jobs = *study_jobs;
            if (!study_out.empty()) config.out_dir = study_out;
            config.validate();

            const int total = static_cast<int>(config.conditions().size()) * config.replications;
            int done = 0;
            const StudyResult result = run_study(config, [&](const ReplicationResult&) {
                ++done;
                if (!quiet) std::cerr << "\r" << done << "/" << total << std::flush;
            });
            if (!quiet) std::cerr << '\n';
            write_study_outputs(result, config.out_dir);
            std::cout << summary_json(summarize(result)).dump(2) << '\n';
            return kExitOk;
        }
    } catch (const EstimationFailure& e) {
        std::cerr << "estimation failed: " << e.what() << '\n';
        return kExitEstimation;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    }
    return kExitOk;
}
