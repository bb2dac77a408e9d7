#include "starts/study.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "starts/csv_io.hpp"
#include "starts/model.hpp"
#include "starts/sem.hpp"

namespace starts {

using nlohmann::json;

std::string Condition::label() const {
    std::ostringstream os;
    os << 'T' << t << "_N" << n << "_psi" << format_double(psi2);
    return os.str();
}

StudyConfig StudyConfig::paper_study() { return StudyConfig{}; }

namespace {

template <class T>
void read_if(const json& j, const char* key, T& into) {
    if (j.contains(key)) into = j.at(key).get<T>();
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

StudyConfig StudyConfig::from_json(const json& j) {
    static const std::vector<std::string> known = {
        "preset", "grid", "truth", "replications", "starts", "methods", "seed", "jobs", "out_dir",
        "initial_values", "estimation"};
    if (!j.is_object()) throw ConfigError("study config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError("unknown study config key '" + key + "'");
        }
    }
    StudyConfig c = paper_study();
    if (j.contains("preset") && j.at("preset").get<std::string>() != "paper-study") {
        throw ConfigError("unknown preset '" + j.at("preset").get<std::string>() + "'");
    }
    try {
        if (j.contains("grid")) {
            const json& g = j.at("grid");
            read_if(g, "T", c.t_values);
            read_if(g, "N", c.n_values);
            read_if(g, "psi2", c.psi2_values);
        }
        if (j.contains("truth")) {
            const json& t = j.at("truth");
            read_if(t, "phi2", c.phi2);
            read_if(t, "beta", c.beta);
            read_if(t, "sigma1_2", c.sigma1_2);
            // omega2 is echoed by to_json; any other value contradicts the design.
            if (t.contains("omega2") && std::abs(t.at("omega2").get<double>() - (1.0 - c.beta * c.beta)) > 1e-12)
                throw ConfigError("omega2 is fixed at 1 - beta^2 and cannot be set");
        }
        read_if(j, "replications", c.replications);
        read_if(j, "starts", c.starts);
        if (j.contains("methods")) {
            c.methods.clear();
            for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
        }
        read_if(j, "seed", c.seed);
        read_if(j, "jobs", c.jobs);
        read_if(j, "out_dir", c.out_dir);
        read_if(j, "initial_values", c.init_preset);
        if (j.contains("estimation")) {
            const json& e = j.at("estimation");
            read_if(e, "patience", c.fit.patience);
            read_if(e, "param_tol", c.fit.param_tol);
            read_if(e, "max_iters", c.fit.max_iters);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad study config: ") + e.what());
    }
    c.validate();
    return c;
}

json StudyConfig::to_json() const {
    json methods_json = json::array();
    for (Method m : methods) methods_json.push_back(std::string(method_name(m)));
    return {
        {"grid", {{"T", t_values}, {"N", n_values}, {"psi2", psi2_values}}},
        {"truth", {{"phi2", phi2}, {"beta", beta}, {"sigma1_2", sigma1_2}, {"omega2", 1.0 - beta * beta}}},
        {"replications", replications},
        {"starts", starts},
        {"methods", methods_json},
        {"seed", seed},
        {"jobs", jobs},
        {"out_dir", out_dir},
        {"initial_values", init_preset},
        {"estimation", {{"patience", fit.patience}, {"param_tol", fit.param_tol}, {"max_iters", fit.max_iters}}},
    };
}

void StudyConfig::validate() const {
    if (t_values.empty() || n_values.empty() || psi2_values.empty()) throw ConfigError("study grid is empty");
    for (int t : t_values) {
        if (t < 4) throw ConfigError("every T in the grid must be >= 4");
    }
    for (int n : n_values) {
        if (n < 2) throw ConfigError("every N in the grid must be >= 2");
    }
    for (double p : psi2_values) {
        if (!(p >= 0.0)) throw ConfigError("psi2 values must be nonnegative");
    }
    if (replications < 1) throw ConfigError("replications must be >= 1");
    if (starts < 1) throw ConfigError("starts must be >= 1");
    if (methods.empty()) throw ConfigError("no methods requested");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    InitialValueSpec::named(init_preset);
    FitOptions f = fit;
    f.n_starts = starts;
    f.validate();
}

std::vector<Condition> StudyConfig::conditions() const {
    std::vector<Condition> out;
    for (int t : t_values) {
        for (int n : n_values) {
            for (double psi2 : psi2_values) {
                out.push_back({t, n, psi2, StartsParams{psi2, phi2, beta, 1.0 - beta * beta, sigma1_2}});
            }
        }
    }
    return out;
}

int StudyConfig::effective_jobs() const {
    if (const char* env = std::getenv(kJobsEnv)) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    }
    return jobs;
}

ReplicationResult run_replication(const StudyConfig& config, const Condition& condition, int condition_index,
                                  int replication) {
    ReplicationResult rep;
    rep.condition = condition_index;
    rep.replication = replication;

    const auto ci = static_cast<std::uint64_t>(condition_index);
    const auto ri = static_cast<std::uint64_t>(replication);
    auto data_rng = keyed_stream(config.seed, 0xDA7A, ci, ri);
    auto init_rng = keyed_stream(config.seed, 0x1417, ci, ri);

    const Matrix sigma = implied_cov(condition.truth, condition.t);
    const Matrix s = sample_cov(gen_dataset(sigma, condition.n, data_rng, true));
    rep.initial_values = draw_initial_values(InitialValueSpec::named(config.init_preset), config.starts, init_rng);

    FitOptions opts = config.fit;
    opts.n_starts = config.starts;
    for (Method m : config.methods) {
        MethodOutcome o;
        o.method = m;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const FitResult r = fit(m, s, condition.n, opts, rep.initial_values);
            o.theta = r.theta_hat;
            o.loss = r.loss;
            o.improper_strict = r.improper_strict;
            o.improper_lenient = r.improper_lenient;
        } catch (const Error& e) {
            o.failed = true;
            o.message = e.what();
            o.theta = {kNaN, kNaN, kNaN, kNaN, kNaN};
            o.loss = kNaN;
            o.improper_strict = true;
            o.improper_lenient = true;
        }
        o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rep.outcomes.push_back(std::move(o));
    }
    return rep;
}

StudyResult run_study(const StudyConfig& config, const StudyProgress& progress) {
    config.validate();
    StudyResult result;
    result.config = config;
    result.conditions = config.conditions();

    const int per_condition = config.replications;
    const int total = static_cast<int>(result.conditions.size()) * per_condition;
    result.replications.resize(static_cast<std::size_t>(total));

    std::mutex mu;
    int next = 0;
    auto worker = [&] {
        for (;;) {
            int job;
            {
                std::lock_guard lock(mu);
                if (next >= total) return;
                job = next++;
            }
            const int ci = job / per_condition;
            ReplicationResult rep =
                run_replication(config, result.conditions[static_cast<std::size_t>(ci)], ci, job % per_condition);
            std::lock_guard lock(mu);
            if (progress) progress(rep);
            result.replications[static_cast<std::size_t>(job)] = std::move(rep);
        }
    };

    const int jobs = std::clamp(config.effective_jobs(), 1, std::max(1, total));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return result;
}

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? kNaN : s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return kNaN;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

bool is_comparator(Method m) { return m != Method::TSMDFA; }

}  // namespace

StudySummary summarize(const StudyResult& result) {
    StudySummary summary;
    const auto& methods = result.config.methods;
    const std::size_t nm = methods.size();

    for (std::size_t ci = 0; ci < result.conditions.size(); ++ci) {
        ConditionSummary cs;
        cs.condition = result.conditions[ci];
        std::vector<const ReplicationResult*> reps;
        for (const auto& r : result.replications) {
            if (r.condition == static_cast<int>(ci)) reps.push_back(&r);
        }
        cs.replications = static_cast<int>(reps.size());
        if (reps.empty()) {
            summary.conditions.push_back(std::move(cs));
            continue;
        }
        const double count = static_cast<double>(reps.size());

        std::vector<bool> joint;
        int all_improper = 0;
        bool any_comparator = false;
        for (const auto* r : reps) {
            bool ok = true;
            bool all = true;
            for (const auto& o : r->outcomes) {
                ok = ok && !o.improper_strict;
                if (is_comparator(o.method)) {
                    any_comparator = true;
                    all = all && o.improper_strict;
                }
            }
            joint.push_back(ok);
            if (any_comparator && all) ++all_improper;
        }
        cs.joint_admissible = static_cast<int>(std::count(joint.begin(), joint.end(), true));
        cs.all_comparators_improper = any_comparator ? all_improper / count : 0.0;

        std::vector<std::vector<StartsParams>> joint_estimates(nm);
        for (std::size_t k = 0; k < nm; ++k) {
            MethodSummary ms;
            ms.method = methods[k];
            int strict = 0, lenient = 0;
            std::vector<double> seconds;
            for (std::size_t i = 0; i < reps.size(); ++i) {
                const MethodOutcome& o = reps[i]->outcomes[k];
                strict += o.improper_strict;
                lenient += o.improper_lenient;
                ms.failures += o.failed;
                seconds.push_back(o.seconds);
                if (joint[i]) joint_estimates[k].push_back(o.theta);
            }
            ms.strict = strict / count;
            ms.lenient = lenient / count;
            ms.seconds_mean = mean_of(seconds);
            ms.seconds_sd = sd_of(seconds);
            if (!joint_estimates[k].empty()) ms.bias_rmse = bias_rmse(joint_estimates[k], cs.condition.truth);
            cs.methods.push_back(ms);
        }

        for (std::size_t a = 0; a < nm; ++a) {
            for (std::size_t b = a + 1; b < nm; ++b) {
                PairCorrelation pc{methods[a], methods[b], {}};
                if (joint_estimates[a].size() >= 3) {
                    for (int p = 0; p < 5; ++p) {
                        std::vector<double> x, y;
                        for (const auto& e : joint_estimates[a]) x.push_back(e[p]);
                        for (const auto& e : joint_estimates[b]) y.push_back(e[p]);
                        pc.r[static_cast<std::size_t>(p)] = pearson_correlation(x, y);
                    }
                }
                cs.correlations.push_back(pc);
            }
        }
        summary.conditions.push_back(std::move(cs));
    }
    return summary;
}

namespace {

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::string pair_name(const PairCorrelation& pc) {
    return std::string(method_name(pc.first)) + "~" + std::string(method_name(pc.second));
}

std::string condition_prefix(const Condition& c) {
    return c.label() + "," + std::to_string(c.t) + "," + std::to_string(c.n) + "," + format_double(c.psi2);
}

std::string csv_number(double x) { return std::isfinite(x) ? format_double(x) : std::string("NA"); }

}  // namespace

json summary_json(const StudySummary& summary) {
    json conditions = json::array();
    for (const auto& cs : summary.conditions) {
        json methods = json::object();
        for (const auto& ms : cs.methods) {
            json m = {{"improper_strict", ms.strict},
                      {"improper_lenient", ms.lenient},
                      {"failures", ms.failures},
                      {"seconds_mean", number_or_null(ms.seconds_mean)},
                      {"seconds_sd", number_or_null(ms.seconds_sd)}};
            if (ms.bias_rmse) {
                json br = json::object();
                for (int p = 0; p < 5; ++p) {
                    const auto& e = (*ms.bias_rmse)[static_cast<std::size_t>(p)];
                    br[std::string(kParamNames[static_cast<std::size_t>(p)])] = {{"bias", e.bias}, {"rmse", e.rmse}};
                }
                m["bias_rmse"] = br;
            } else {
                m["bias_rmse"] = nullptr;
            }
            methods[std::string(method_name(ms.method))] = m;
        }
        json corr = json::object();
        for (const auto& pc : cs.correlations) {
            json per = json::object();
            for (int p = 0; p < 5; ++p) {
                const auto& r = pc.r[static_cast<std::size_t>(p)];
                per[std::string(kParamNames[static_cast<std::size_t>(p)])] = r ? json(*r) : json(nullptr);
            }
            corr[pair_name(pc)] = per;
        }
        conditions.push_back({{"condition", cs.condition.label()},
                              {"T", cs.condition.t},
                              {"N", cs.condition.n},
                              {"psi2", cs.condition.psi2},
                              {"replications", cs.replications},
                              {"joint_admissible", cs.joint_admissible},
                              {"improper_all_comparators", cs.all_comparators_improper},
                              {"methods", methods},
                              {"correlations", corr}});
    }
    return {{"conditions", conditions}};
}

void write_long_csv(std::ostream& out, const StudyResult& result) {
    out << "condition,replication,method,parameter,estimate,improper_strict,improper_lenient,seconds\n";
    for (const auto& rep : result.replications) {
        const std::string label = result.conditions[static_cast<std::size_t>(rep.condition)].label();
        for (const auto& o : rep.outcomes) {
            for (int p = 0; p < 5; ++p) {
                out << label << ',' << rep.replication << ',' << method_name(o.method) << ','
                    << kParamNames[static_cast<std::size_t>(p)] << ',' << csv_number(o.theta[p]) << ','
                    << (o.improper_strict ? 1 : 0) << ',' << (o.improper_lenient ? 1 : 0) << ','
                    << format_double(o.seconds) << '\n';
            }
        }
    }
}

void write_initial_values_csv(std::ostream& out, const StudyResult& result) {
    out << "condition,replication,start,psi2,phi2,beta,omega2,sigma1_2\n";
    for (const auto& rep : result.replications) {
        const std::string label = result.conditions[static_cast<std::size_t>(rep.condition)].label();
        for (std::size_t m = 0; m < rep.initial_values.size(); ++m) {
            const StartsParams& iv = rep.initial_values[m];
            out << label << ',' << rep.replication << ',' << m;
            for (int p = 0; p < 5; ++p) out << ',' << format_double(iv[p]);
            out << '\n';
        }
    }
}

void write_improper_csv(std::ostream& out, const StudySummary& summary) {
    out << "condition,T,N,psi2,method,strict,lenient,failures\n";
    for (const auto& cs : summary.conditions) {
        for (const auto& ms : cs.methods) {
            out << condition_prefix(cs.condition) << ',' << method_name(ms.method) << ',' << format_double(ms.strict)
                << ',' << format_double(ms.lenient) << ',' << ms.failures << '\n';
        }
        out << condition_prefix(cs.condition) << ",ALL," << format_double(cs.all_comparators_improper) << ",NA,NA\n";
    }
}

void write_timing_csv(std::ostream& out, const StudySummary& summary) {
    out << "condition,T,N,psi2,method,seconds_mean,seconds_sd\n";
    for (const auto& cs : summary.conditions) {
        for (const auto& ms : cs.methods) {
            out << condition_prefix(cs.condition) << ',' << method_name(ms.method) << ','
                << csv_number(ms.seconds_mean) << ',' << csv_number(ms.seconds_sd) << '\n';
        }
    }
}

void write_bias_rmse_csv(std::ostream& out, const StudySummary& summary) {
    out << "condition,T,N,psi2,method,parameter,bias,rmse,n_joint\n";
    for (const auto& cs : summary.conditions) {
        for (const auto& ms : cs.methods) {
            for (int p = 0; p < 5; ++p) {
                out << condition_prefix(cs.condition) << ',' << method_name(ms.method) << ','
                    << kParamNames[static_cast<std::size_t>(p)] << ',';
                if (ms.bias_rmse) {
                    const auto& e = (*ms.bias_rmse)[static_cast<std::size_t>(p)];
                    out << format_double(e.bias) << ',' << format_double(e.rmse);
                } else {
                    out << "NA,NA";
                }
                out << ',' << cs.joint_admissible << '\n';
            }
        }
    }
}

void write_correlations_csv(std::ostream& out, const StudySummary& summary) {
    out << "condition,T,N,psi2,pair,parameter,correlation,n_joint\n";
    for (const auto& cs : summary.conditions) {
        for (const auto& pc : cs.correlations) {
            for (int p = 0; p < 5; ++p) {
                const auto& r = pc.r[static_cast<std::size_t>(p)];
                out << condition_prefix(cs.condition) << ',' << pair_name(pc) << ','
                    << kParamNames[static_cast<std::size_t>(p)] << ',' << (r ? format_double(*r) : "NA") << ','
                    << cs.joint_admissible << '\n';
            }
        }
    }
}

void write_study_outputs(const StudyResult& result, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const StudySummary summary = summarize(result);
    auto open = [&](const char* name) {
        std::ofstream f(fs::path(out_dir) / name);
        if (!f) throw ConfigError("cannot write " + (fs::path(out_dir) / name).string());
        return f;
    };
    {
        auto f = open("estimates.csv");
        write_long_csv(f, result);
    }
    {
        auto f = open("initial_values.csv");
        write_initial_values_csv(f, result);
    }
    {
        auto f = open("improper.csv");
        write_improper_csv(f, summary);
    }
    {
        auto f = open("timing.csv");
        write_timing_csv(f, summary);
    }
    {
        auto f = open("bias_rmse.csv");
        write_bias_rmse_csv(f, summary);
    }
    {
        auto f = open("correlations.csv");
        write_correlations_csv(f, summary);
    }
    {
        auto f = open("summary.json");
        f << summary_json(summary).dump(2) << '\n';
    }
    {
        auto f = open("config.json");
        f << result.config.to_json().dump(2) << '\n';
    }
}

}  // namespace starts
