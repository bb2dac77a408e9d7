#include "starts/mdfa.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/tools/toms748_solve.hpp>

#include "starts/diagnostics.hpp"
#include "starts/model.hpp"

namespace starts {

Matrix CrossCov::joined() const {
    const Eigen::Index t = s_y_s.size();
    Matrix out(t, 2 * t + 1);
    out << s_y_s, s_y_r, s_y_u;
    return out;
}

CrossCov CrossCov::split(const Matrix& joined) {
    const Eigen::Index t = joined.rows();
    if (joined.cols() != 2 * t + 1) {
        throw DimensionError("cross-covariance must be T x (2T+1)");
    }
    return {joined.col(0), joined.middleCols(1, t), joined.rightCols(t)};
}

Matrix cross_cov_matrix(const Matrix& s, const Matrix& b_tilde) {
    if (s.rows() != s.cols() || b_tilde.rows() != s.rows()) {
        throw DimensionError("S and B~ do not conform");
    }
    if (!b_tilde.allFinite()) throw DomainError("B~ has non-finite entries");

    const Matrix sb = s * b_tilde;
    Matrix bsb = b_tilde.transpose() * sb;
    bsb = 0.5 * (bsb + bsb.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(bsb);
    if (solver.info() != Eigen::Success) throw DomainError("eigendecomposition of B'SB failed");

    const Vector& lambda = solver.eigenvalues();  // ascending
    const double lambda_max = lambda.maxCoeff();
    if (!(lambda_max > 0.0)) {
        throw DegenerateInputError("B'SB has no positive eigenvalue (S or B~ is zero)");
    }
    const double cutoff = kEigenRetention * lambda_max;
    Eigen::Index first = 0;
    while (first < lambda.size() && lambda(first) <= cutoff) ++first;
    const Eigen::Index kept = lambda.size() - first;

    const auto l = solver.eigenvectors().rightCols(kept);
    const Vector inv_delta = lambda.tail(kept).cwiseSqrt().cwiseInverse();
    return sb * l * inv_delta.asDiagonal() * l.transpose();
}

CrossCov cross_cov_update(const Matrix& s, const Matrix& b_tilde) {
    return CrossCov::split(cross_cov_matrix(s, b_tilde));
}

Theta2 theta2_update(const CrossCov& cc) {
    const double t = static_cast<double>(cc.s_y_s.size());
    const double trait = cc.s_y_s.sum() / t;
    const double unique = cc.s_y_u.trace() / t;
    return {trait * trait, unique * unique};
}

Matrix within_target(const Matrix& s_y_r) {
    if (s_y_r.rows() != s_y_r.cols()) throw DimensionError("residual block must be square");
    const Matrix kept = s_y_r.triangularView<Eigen::Lower>();
    return kept * kept.transpose();
}

double within_uls_loss(const Matrix& s_star, const Theta1& theta1) {
    const Vector r = vech(s_star) - vech(within_cov(theta1, static_cast<int>(s_star.rows())));
    return r.squaredNorm();
}

namespace {

// Within-person ULS profiled over beta. For fixed beta the structure is
// linear in (sigma1_2, omega2): vech(Sigma*) = sigma1_2 * a(beta) + omega2 * b(beta),
// so the variances come from a two-column nonnegative least squares.
class WithinProfile {
public:
    WithinProfile(const Matrix& s_star, int max_evaluations)
        : t_(static_cast<int>(s_star.rows())), target_(vech(s_star)), budget_(max_evaluations) {
        const Eigen::Index m = target_.size();
        a_.resize(m);
        b_.resize(m);
        da_.resize(m);
        db_.resize(m);
        r_.resize(m);
        g_.resize(t_);
        dg_.resize(t_);
        pow_.resize(2 * t_);
    }

    struct Point {
        double beta = 0.0;
        double sigma1_2 = 0.0;
        double omega2 = 0.0;
        double loss = std::numeric_limits<double>::infinity();
        double slope = 0.0;
    };

    bool exhausted() const { return evaluations_ >= budget_; }

    Point at(double beta) {
        ++evaluations_;
        fill(beta);
        Point p = nnls(beta);
        r_ = target_ - p.sigma1_2 * a_ - p.omega2 * b_;
        p.loss = r_.squaredNorm();
        p.slope = -2.0 * (p.sigma1_2 * r_.dot(da_) + p.omega2 * r_.dot(db_));
        return p;
    }

private:
    void fill(double beta) {
        pow_(0) = 1.0;
        for (int k = 1; k < pow_.size(); ++k) pow_(k) = pow_(k - 1) * beta;
        auto dpow = [&](int k) { return k == 0 ? 0.0 : k * pow_(k - 1); };
        // g_t = sum_{m < t} beta^(2m), the omega2 multiplier of var(y*_t) (0-based t).
        g_(0) = 0.0;
        dg_(0) = 0.0;
        for (int k = 1; k < t_; ++k) {
            g_(k) = g_(k - 1) + pow_(2 * (k - 1));
            dg_(k) = dg_(k - 1) + dpow(2 * (k - 1));
        }
        Eigen::Index idx = 0;
        for (int col = 0; col < t_; ++col) {
            for (int row = col; row < t_; ++row, ++idx) {
                const int lag = row - col;
                a_(idx) = pow_(row + col);
                da_(idx) = dpow(row + col);
                b_(idx) = pow_(lag) * g_(col);
                db_(idx) = dpow(lag) * g_(col) + pow_(lag) * dg_(col);
            }
        }
    }

    Point nnls(double beta) const {
        const double aa = a_.squaredNorm(), bb = b_.squaredNorm(), ab = a_.dot(b_);
        const double ay = a_.dot(target_), by = b_.dot(target_);
        auto objective = [&](double u, double v) { return -2.0 * (u * ay + v * by) + u * u * aa + 2.0 * u * v * ab + v * v * bb; };
        Point best{beta, 0.0, 0.0, 0.0, 0.0};
        double best_value = 0.0;
        auto consider = [&](double u, double v) {
            if (!(u >= 0.0) || !(v >= 0.0)) return;
            const double value = objective(u, v);
            if (value < best_value) {
                best_value = value;
                best.sigma1_2 = u;
                best.omega2 = v;
            }
        };
        const double det = aa * bb - ab * ab;
        if (det > 1e-14 * aa * bb) consider((bb * ay - ab * by) / det, (aa * by - ab * ay) / det);
        if (aa > 0.0) consider(ay / aa, 0.0);
        if (bb > 0.0) consider(0.0, by / bb);
        return best;
    }

    int t_;
    Vector target_;
    int budget_;
    int evaluations_ = 0;
    Vector a_, b_, da_, db_, r_, g_, dg_, pow_;
};

using ProfilePoint = WithinProfile::Point;

// Root of the profile slope inside [lo, hi], where slope(lo) < 0 < slope(hi).
ProfilePoint refine(WithinProfile& profile, ProfilePoint lo, ProfilePoint hi) {
    ProfilePoint best = lo.loss <= hi.loss ? lo : hi;
    auto slope = [&](double beta) {
        const ProfilePoint p = profile.at(beta);
        if (p.loss < best.loss) best = p;
        return p.slope;
    };
    std::uintmax_t max_iter = 100;
    boost::math::tools::eps_tolerance<double> tol(std::numeric_limits<double>::digits - 3);
    try {
        const auto bracket = boost::math::tools::toms748_solve(slope, lo.beta, hi.beta, lo.slope, hi.slope, tol, max_iter);
        slope(0.5 * (bracket.first + bracket.second));
    } catch (const boost::math::evaluation_error&) {
    }
    return best;
}

constexpr double kBetaLimit = 2.0;

// Follows the downhill slope from `start` until it changes sign, then refines.
ProfilePoint descend(WithinProfile& profile, const ProfilePoint& start) {
    if (start.slope == 0.0 || !std::isfinite(start.slope)) return start;
    const double dir = start.slope < 0.0 ? 1.0 : -1.0;
    double step = 0.01;
    ProfilePoint prev = start;
    while (!profile.exhausted()) {
        const double beta = std::clamp(prev.beta + dir * step, -kBetaLimit, kBetaLimit);
        if (beta == prev.beta) return prev.loss <= start.loss ? prev : start;
        const ProfilePoint next = profile.at(beta);
        if (!std::isfinite(next.slope)) return prev;
        if ((next.slope > 0.0) == (dir > 0.0) || next.slope == 0.0) {
            if (next.slope == 0.0) return next;
            return dir > 0.0 ? refine(profile, prev, next) : refine(profile, next, prev);
        }
        prev = next;
        step *= 2.0;
    }
    return prev;
}

}  // namespace

Theta1 theta1_update(const Matrix& s_star, const Theta1& init, const InnerOptions& budget) {
    if (s_star.rows() != s_star.cols()) throw DimensionError("S* must be square");
    if (init.sigma1_2 < 0.0 || init.omega2 < 0.0) {
        throw DomainError("warm start needs nonnegative sigma1_2 and omega2");
    }
    if (!s_star.allFinite() || !std::isfinite(init.beta)) {
        throw InnerOptimizationError("within-person target or warm start is not finite", init);
    }
    WithinProfile profile(s_star, budget.max_evaluations);

    const ProfilePoint warm = profile.at(std::clamp(init.beta, -kBetaLimit, kBetaLimit));
    ProfilePoint best = descend(profile, warm);

    // Coarse scan over the stationary range catches a better basin than the warm one.
    if (budget.scan_step > 0.0) {
        ProfilePoint prev = profile.at(-1.0 + 0.5 * budget.scan_step);
        for (double beta = prev.beta + budget.scan_step; beta < 1.0 && !profile.exhausted();
             beta += budget.scan_step) {
            const ProfilePoint next = profile.at(beta);
            if (prev.slope < 0.0 && next.slope > 0.0 && std::min(prev.loss, next.loss) < best.loss + 1e-3 * (1.0 + best.loss)) {
                const ProfilePoint cand = refine(profile, prev, next);
                if (cand.loss < best.loss) best = cand;
            }
            if (next.loss < best.loss) best = next;
            prev = next;
        }
    }
    if (!std::isfinite(best.loss)) {
        throw InnerOptimizationError("within-person least squares produced a non-finite loss", init);
    }
    return {best.beta, best.sigma1_2, best.omega2};
}

double tsmdfa_loss(const CrossCov& cc, const Matrix& b_tilde, int n) {
    const Matrix joined = cc.joined();
    if (joined.rows() != b_tilde.rows() || joined.cols() != b_tilde.cols()) {
        throw DimensionError("cross-covariance and B~ shapes differ");
    }
    return static_cast<double>(n) * (joined - b_tilde).squaredNorm();
}

namespace {

struct StartOutcome {
    StartRecord record;
    std::vector<double> trace;
};

double max_abs_change(const StartsParams& a, const StartsParams& b) {
    return (a.to_vector() - b.to_vector()).cwiseAbs().maxCoeff();
}

StartOutcome run_start(const Matrix& s, int n, int t, const FitOptions& opts, int index,
                       const StartsParams& initial) {
    StartOutcome out;
    StartRecord& rec = out.record;
    rec.index = index;
    rec.initial = initial;
    rec.loss = std::numeric_limits<double>::infinity();

    StartsParams theta = initial;
    int stall = 0;
    rec.status = Convergence::MaxIters;

    auto evaluate = [&](const StartsParams& th, CrossCov* keep) {
        const Matrix b = build_loading_bundle(th, t).b_tilde;
        CrossCov cc = cross_cov_update(s, b);
        const double loss = tsmdfa_loss(cc, b, n);
        if (keep) *keep = std::move(cc);
        if (opts.keep_trace) out.trace.push_back(loss);
        if (improves_on(loss, rec.loss)) {
            rec.loss = loss;
            rec.theta = th;
            return true;
        }
        return false;
    };

    bool finished = false;
    for (int iter = 0; iter < opts.max_iters; ++iter) {
        CrossCov cc;
        if (evaluate(theta, &cc)) {
            stall = 0;
        } else if (++stall >= opts.patience) {
            rec.status = Convergence::PatienceStop;
            finished = true;
            break;
        }

        const Theta1 t1 = theta1_update(within_target(cc.s_y_r), theta1_of(theta), opts.inner);
        const Theta2 t2 = theta2_update(cc);
        const StartsParams next = combine(t1, t2);
        const double change = max_abs_change(next, theta);
        theta = next;
        rec.n_iters = iter + 1;
        if (change < opts.param_tol) {
            rec.status = Convergence::ParamTolerance;
            break;
        }
    }
    if (!finished) evaluate(theta, nullptr);
    return out;
}

}  // namespace

FitResult fit_tsmdfa(const Matrix& s, int n, const FitOptions& opts,
                     std::span<const StartsParams> initial_values) {
    opts.validate();
    require_symmetric(s, 1e-8);
    const int t = static_cast<int>(s.rows());
    if (t < 4) throw DimensionError("the model needs T >= 4 time points to be identified");
    if (n < 1) throw ConfigError("sample size must be positive");
    if (static_cast<int>(initial_values.size()) != opts.n_starts) {
        throw ConfigError("expected " + std::to_string(opts.n_starts) + " initial values, got " +
                          std::to_string(initial_values.size()));
    }
    if (s.isZero(0.0)) throw DegenerateInputError("sample covariance is the zero matrix");

    const auto clock_start = std::chrono::steady_clock::now();
    FitResult result;
    result.method = Method::TSMDFA;
    result.loss = std::numeric_limits<double>::infinity();
    std::vector<double> best_trace;
    std::vector<std::string> failures;
    bool any = false;

    for (int m = 0; m < opts.n_starts; ++m) {
        StartOutcome outcome;
        try {
            outcome = run_start(s, n, t, opts, m, initial_values[static_cast<std::size_t>(m)]);
        } catch (const DegenerateInputError&) {
            throw;
        } catch (const Error& e) {
            outcome.record.index = m;
            outcome.record.initial = initial_values[static_cast<std::size_t>(m)];
            outcome.record.failed = true;
            outcome.record.message = e.what();
            failures.push_back("start " + std::to_string(m) + ": " + e.what());
        }
        const StartRecord& rec = outcome.record;
        if (!rec.failed && std::isfinite(rec.loss) && (!any || improves_on(rec.loss, result.loss))) {
            any = true;
            result.theta_hat = rec.theta;
            result.loss = rec.loss;
            result.converged = rec.status;
            result.n_iters = rec.n_iters;
            result.start_index = m;
            best_trace = std::move(outcome.trace);
        }
        result.starts.push_back(rec);
    }
    if (!any) throw EstimationFailure("every TS-MDFA start failed", failures);

    result.trace = std::move(best_trace);
    result.improper_strict = detect_improper(result.theta_hat, kStrictImproper);
    result.improper_lenient = detect_improper(result.theta_hat, kLenientImproper);
    result.elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
    return result;
}

}  // namespace starts
