#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "starts/diagnostics.hpp"
#include "starts/fit.hpp"
#include "starts/params.hpp"
#include "starts/simulate.hpp"

namespace starts {

/// Environment variable that overrides the worker count of a study.
inline constexpr const char* kJobsEnv = "STARTS_JOBS";

struct Condition {
    int t = 4;
    int n = 200;
    double psi2 = 0.2;
    StartsParams truth;

    /// e.g. "T4_N200_psi0.2"
    std::string label() const;
};

struct StudyConfig {
    std::vector<int> t_values{4, 6, 8};
    std::vector<int> n_values{200, 1000};
    std::vector<double> psi2_values{0.2, 1.0};
    double phi2 = 0.5;
    double beta = 0.3;
    double sigma1_2 = 1.0;  // omega2 is 1 - beta^2 (stationary)
    int replications = 50;
    int starts = 20;
    std::vector<Method> methods{Method::ML, Method::CML, Method::ULS, Method::TSMDFA};
    std::uint64_t seed = 1;
    int jobs = 1;
    std::string out_dir = "study-out";
    std::string init_preset = "simulation";
    FitOptions fit;

    /// The simulation design of the reference study: 12 conditions, R=50, M=20.
    static StudyConfig paper_study();
    /// Unknown keys are rejected. Missing keys keep the paper-study defaults.
    static StudyConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    /// Throws ConfigError on an empty grid, R < 1, M < 1 or no methods.
    void validate() const;
    std::vector<Condition> conditions() const;
    /// `jobs`, unless STARTS_JOBS holds a positive integer.
    int effective_jobs() const;
};

struct MethodOutcome {
    Method method = Method::ML;
    StartsParams theta;  // NaN when the fit failed
    double loss = 0.0;
    bool failed = false;
    std::string message;
    bool improper_strict = false;  // failures count as improper
    bool improper_lenient = false;
    double seconds = 0.0;
};

struct ReplicationResult {
    int condition = 0;
    int replication = 0;
    std::vector<StartsParams> initial_values;  // shared by every method
    std::vector<MethodOutcome> outcomes;       // config.methods order
};

struct StudyResult {
    StudyConfig config;
    std::vector<Condition> conditions;
    std::vector<ReplicationResult> replications;  // condition-major, then replication
};

using StudyProgress = std::function<void(const ReplicationResult&)>;

/// Each (condition, replication) draws its data and initial values from its
/// own keyed stream, so results do not depend on scheduling.
ReplicationResult run_replication(const StudyConfig& config, const Condition& condition, int condition_index,
                                  int replication);
StudyResult run_study(const StudyConfig& config, const StudyProgress& progress = {});

struct MethodSummary {
    Method method = Method::ML;
    double strict = 0.0;
    double lenient = 0.0;
    int failures = 0;
    double seconds_mean = 0.0;
    double seconds_sd = 0.0;
    std::optional<std::array<BiasRmse, 5>> bias_rmse;  // over joint-admissible replications
};

struct PairCorrelation {
    Method first = Method::ML;
    Method second = Method::ML;
    std::array<std::optional<double>, 5> r{};
};

struct ConditionSummary {
    Condition condition;
    int replications = 0;
    int joint_admissible = 0;
    double all_comparators_improper = 0.0;  // ML, CML, ULS all strictly improper
    std::vector<MethodSummary> methods;
    std::vector<PairCorrelation> correlations;
};

struct StudySummary {
    std::vector<ConditionSummary> conditions;
};

StudySummary summarize(const StudyResult& result);

nlohmann::json summary_json(const StudySummary& summary);

/// condition,replication,method,parameter,estimate,improper_strict,improper_lenient,seconds
void write_long_csv(std::ostream& out, const StudyResult& result);
/// condition,replication,start,psi2,phi2,beta,omega2,sigma1_2
void write_initial_values_csv(std::ostream& out, const StudyResult& result);
/// condition,T,N,psi2,method,strict,lenient,failures  (plus an ALL row per condition)
void write_improper_csv(std::ostream& out, const StudySummary& summary);
/// condition,T,N,psi2,method,seconds_mean,seconds_sd
void write_timing_csv(std::ostream& out, const StudySummary& summary);
/// condition,T,N,psi2,method,parameter,bias,rmse,n_joint
void write_bias_rmse_csv(std::ostream& out, const StudySummary& summary);
/// condition,T,N,psi2,pair,parameter,correlation,n_joint
void write_correlations_csv(std::ostream& out, const StudySummary& summary);

/// Writes every table above plus summary.json and config.json into out_dir.
void write_study_outputs(const StudyResult& result, const std::string& out_dir);

}  // namespace starts
