#include "starts/sem.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "starts/diagnostics.hpp"
#include "starts/errors.hpp"
#include "starts/mdfa.hpp"
#include "starts/model.hpp"

namespace starts {
namespace {

// ML fit function with log|S| cached.
class MlObjective {
public:
    explicit MlObjective(const Matrix& s) : s_(s), t_(static_cast<int>(s.rows())) {
        const auto chol = cholesky_pd(s);
        if (!chol) throw DomainError("sample covariance is singular or not positive definite");
        log_det_s_ = 2.0 * chol->diagonal().array().log().sum();
    }

    double operator()(const StartsParams& theta) const {
        const Matrix sigma = implied_cov(theta, t_);
        if (!sigma.allFinite()) return std::numeric_limits<double>::infinity();
        Eigen::LLT<Matrix> llt(sigma);
        if (llt.info() != Eigen::Success || (llt.matrixLLT().diagonal().array() <= 0.0).any()) {
            return non_pd_penalty(sigma);
        }
        const double log_det_sigma = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        const double trace = llt.solve(s_).trace();
        return trace - log_det_s_ + log_det_sigma - static_cast<double>(t_);
    }

private:
    static double non_pd_penalty(const Matrix& sigma) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(sigma, Eigen::EigenvaluesOnly);
        const double dist = es.eigenvalues().cwiseMin(0.0).norm();
        return kNonPdPenalty + dist;
    }

    const Matrix& s_;
    int t_;
    double log_det_s_ = 0.0;
};

void check_fit_inputs(const Matrix& s, int n, const FitOptions& opts,
                      std::span<const StartsParams> initial_values) {
    opts.validate();
    require_symmetric(s, 1e-8);
    if (s.rows() < 4) throw DimensionError("the model needs T >= 4 time points to be identified");
    if (n < 1) throw ConfigError("sample size must be positive");
    if (static_cast<int>(initial_values.size()) != opts.n_starts) {
        throw ConfigError("expected " + std::to_string(opts.n_starts) + " initial values, got " +
                          std::to_string(initial_values.size()));
    }
}

Bounds variance_bounds() {
    Bounds b = Bounds::unbounded(5);
    b.lower << 0.0, 0.0, -std::numeric_limits<double>::infinity(), 0.0, 0.0;
    return b;
}

template <class Loss>
FitResult multistart(Method method, const Loss& loss, const FitOptions& opts,
                     std::span<const StartsParams> initial_values,
                     const std::optional<Bounds>& bounds) {
    const auto clock_start = std::chrono::steady_clock::now();
    const Objective f = [&](const Vector& x) { return loss(StartsParams::from_vector(x)); };

    FitResult result;
    result.method = method;
    result.loss = std::numeric_limits<double>::infinity();
    std::vector<std::string> failures;
    bool any = false;

    for (int m = 0; m < opts.n_starts; ++m) {
        StartRecord rec;
        rec.index = m;
        rec.initial = initial_values[static_cast<std::size_t>(m)];
        const Vector x0 = rec.initial.to_vector();
        const OptimResult coarse = nelder_mead(f, x0, opts.outer, bounds);
        OptimResult fine = quasi_newton(f, coarse.x, opts.polish, bounds);
        if (!(fine.value <= coarse.value)) fine = coarse;

        rec.theta = StartsParams::from_vector(fine.x);
        rec.loss = loss(rec.theta);
        rec.n_iters = coarse.evaluations + fine.evaluations;
        rec.status = (coarse.converged || fine.converged) ? Convergence::ParamTolerance
                                                          : Convergence::MaxIters;
        if (!std::isfinite(rec.loss) || rec.loss >= kNonPdPenalty) {
            rec.failed = true;
            rec.message = "no positive-definite solution reached";
            failures.push_back("start " + std::to_string(m) + ": " + rec.message);
        } else if (!any || improves_on(rec.loss, result.loss)) {
            any = true;
            result.theta_hat = rec.theta;
            result.loss = rec.loss;
            result.converged = rec.status;
            result.n_iters = rec.n_iters;
            result.start_index = m;
        }
        result.starts.push_back(std::move(rec));
    }
    if (!any) {
        throw EstimationFailure(std::string(method_name(method)) + ": every start failed", failures);
    }
    result.improper_strict = detect_improper(result.theta_hat, kStrictImproper);
    result.improper_lenient = detect_improper(result.theta_hat, kLenientImproper);
    result.elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
    return result;
}

}  // namespace

double ml_discrepancy(const Matrix& s, const StartsParams& theta) {
    require_symmetric(s, 1e-8);
    if (s.rows() < 2) throw DimensionError("need at least 2 time points");
    return MlObjective(s)(theta);
}

double uls_discrepancy(const Matrix& s, const StartsParams& theta) {
    if (s.rows() != s.cols()) throw DimensionError("S must be square");
    return (vech(s) - vech(implied_cov(theta, static_cast<int>(s.rows())))).squaredNorm();
}

FitResult fit_ml(const Matrix& s, int n, const FitOptions& opts,
                 std::span<const StartsParams> initial_values) {
    check_fit_inputs(s, n, opts, initial_values);
    const MlObjective loss(s);
    return multistart(Method::ML, loss, opts, initial_values, std::nullopt);
}

FitResult fit_cml(const Matrix& s, int n, const FitOptions& opts,
                  std::span<const StartsParams> initial_values) {
    check_fit_inputs(s, n, opts, initial_values);
    if (s.isZero(0.0)) {
        // The likelihood decreases without bound as every variance goes to
        // zero; the constrained optimum is the all-zero corner.
        FitResult r;
        r.method = Method::CML;
        r.theta_hat = {0.0, 0.0, initial_values.front().beta, 0.0, 0.0};
        r.converged = Convergence::ParamTolerance;
        r.improper_strict = r.improper_lenient = true;
        return r;
    }
    const MlObjective loss(s);
    return multistart(Method::CML, loss, opts, initial_values, variance_bounds());
}

FitResult fit_uls(const Matrix& s, int n, const FitOptions& opts,
                  std::span<const StartsParams> initial_values) {
    check_fit_inputs(s, n, opts, initial_values);
    const Vector target = vech(s);
    const int t = static_cast<int>(s.rows());
    const auto loss = [&](const StartsParams& theta) {
        return (target - vech(implied_cov(theta, t))).squaredNorm();
    };
    return multistart(Method::ULS, loss, opts, initial_values, std::nullopt);
}

FitResult fit(Method method, const Matrix& s, int n, const FitOptions& opts,
              std::span<const StartsParams> initial_values) {
    switch (method) {
        case Method::ML: return fit_ml(s, n, opts, initial_values);
        case Method::CML: return fit_cml(s, n, opts, initial_values);
        case Method::ULS: return fit_uls(s, n, opts, initial_values);
        case Method::TSMDFA: return fit_tsmdfa(s, n, opts, initial_values);
    }
    throw ConfigError("unknown method");
}

StandardErrors standard_errors_from_hessian(const Objective& f, const Vector& x, double rel_step) {
    const Matrix h = numeric_hessian(f, x, rel_step);
    StandardErrors out;
    out.se.fill(std::numeric_limits<double>::quiet_NaN());
    Eigen::FullPivLU<Matrix> lu(h);
    if (!lu.isInvertible()) {
        out.singular = true;
        return out;
    }
    const Matrix cov = lu.inverse();
    for (Eigen::Index k = 0; k < x.size() && k < 5; ++k) {
        const double v = cov(k, k);
        if (!(v > 0.0) || !std::isfinite(v)) {
            out.singular = true;
        } else {
            out.se[static_cast<std::size_t>(k)] = std::sqrt(v);
        }
    }
    return out;
}

StandardErrors ml_standard_errors(const Matrix& s, int n, const StartsParams& theta_hat) {
    require_symmetric(s, 1e-8);
    const MlObjective loss(s);
    const double half_n = 0.5 * static_cast<double>(n);
    const Objective f = [&](const Vector& x) {
        return half_n * loss(StartsParams::from_vector(x));
    };
    return standard_errors_from_hessian(f, theta_hat.to_vector(), 1e-5);
}

}  // namespace starts
