#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "starts/optimize.hpp"
#include "starts/params.hpp"

namespace starts {

enum class Method { ML, CML, ULS, TSMDFA };

std::string_view method_name(Method m);
/// Accepts "ML", "CML", "ULS", "TS-MDFA" (case-insensitive, "TSMDFA" too).
Method parse_method(std::string_view name);

enum class Convergence { ParamTolerance, PatienceStop, MaxIters };

std::string_view convergence_name(Convergence c);

inline constexpr double kStrictImproper = 1e-4;
inline constexpr double kLenientImproper = 1e-2;

/// Budget for the within-person least-squares step of TS-MDFA.
struct InnerOptions {
    int max_evaluations = 500;  // profile-loss evaluations per call
    double scan_step = 0.05;    // spacing of the beta scan over (-1, 1); 0 disables it
};

struct FitOptions {
    int n_starts = 20;
    int patience = 10;
    double param_tol = 1e-6;
    int max_iters = 500;
    std::uint64_t rng_seed = 0;
    bool keep_trace = false;

    /// Inner within-person least-squares fit inside each TS-MDFA iteration.
    InnerOptions inner{};
    /// Outer simplex for the covariance-structure estimators, refined by BFGS.
    NelderMeadOptions outer{.max_evaluations = 3000,
                            .relative_step = 0.2,
                            .absolute_step = 0.1,
                            .xtol = 1e-9,
                            .ftol = 1e-14,
                            .restarts = 2};
    QuasiNewtonOptions polish{};

    /// Throws ConfigError when a count is < 1 or a tolerance <= 0.
    void validate() const;
};

struct StartRecord {
    int index = 0;
    StartsParams initial;
    StartsParams theta;
    double loss = 0.0;
    int n_iters = 0;
    Convergence status = Convergence::MaxIters;
    bool failed = false;
    std::string message;
};

struct FitResult {
    Method method = Method::TSMDFA;
    StartsParams theta_hat;
    double loss = 0.0;
    Convergence converged = Convergence::MaxIters;
    int n_iters = 0;
    int start_index = 0;
    bool improper_strict = false;
    bool improper_lenient = false;
    double elapsed = 0.0;          // wall-clock seconds over all starts
    std::vector<double> trace;     // per-iteration loss of the winning start (keep_trace)
    std::vector<StartRecord> starts;
};

/// Lower loss wins; losses within 1e-12 (relative to max(1, |loss|)) tie and
/// the earlier start is kept.
inline bool improves_on(double candidate, double incumbent) {
    if (std::isinf(incumbent)) return candidate < incumbent;
    const double scale = std::max(1.0, std::abs(incumbent));
    return candidate < incumbent - 1e-12 * scale;
}

}  // namespace starts
