#include "starts/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "starts/errors.hpp"

namespace starts {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_eval(const Objective& f, const Vector& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : kInf;
}

// One Nelder-Mead run from a fresh simplex around x0.
OptimResult nelder_mead_once(const Objective& f, const Vector& x0, const NelderMeadOptions& opts,
                             const std::optional<Bounds>& bounds, int budget) {
    const Eigen::Index n = x0.size();
    auto project = [&](Vector x) { return bounds ? bounds->project(x) : x; };

    std::vector<Vector> pts(n + 1, project(x0));
    std::vector<double> vals(n + 1);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double step = std::max(opts.relative_step * std::abs(x0(k)), opts.absolute_step);
        Vector p = x0;
        p(k) += step;
        p = project(p);
        if (p(k) == pts[0](k)) {  // pinned against an upper bound
            p(k) = x0(k) - step;
            p = project(p);
        }
        pts[k + 1] = p;
    }
    int evals = 0;
    for (Eigen::Index k = 0; k <= n; ++k) {
        vals[k] = safe_eval(f, pts[k]);
        ++evals;
    }

    std::vector<Eigen::Index> order(n + 1);
    bool converged = false;
    while (evals < budget) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](Eigen::Index a, Eigen::Index b) { return vals[a] < vals[b]; });
        const Eigen::Index best = order.front();
        const Eigen::Index worst = order.back();
        const Eigen::Index second = order[n - 1];

        double size = 0.0;
        for (Eigen::Index k = 0; k <= n; ++k)
            size = std::max(size, (pts[k] - pts[best]).cwiseAbs().maxCoeff());
        const double spread = vals[worst] - vals[best];
        if (size <= opts.xtol || (std::isfinite(spread) && spread <= opts.ftol && size <= 1e3 * opts.xtol)) {
            converged = true;
            break;
        }

        Vector centroid = Vector::Zero(n);
        for (Eigen::Index k = 0; k <= n; ++k)
            if (k != worst) centroid += pts[k];
        centroid /= static_cast<double>(n);

        const Vector reflected = project(centroid + (centroid - pts[worst]));
        const double f_reflected = safe_eval(f, reflected);
        ++evals;

        if (f_reflected < vals[best]) {
            const Vector expanded = project(centroid + 2.0 * (centroid - pts[worst]));
            const double f_expanded = safe_eval(f, expanded);
            ++evals;
            if (f_expanded < f_reflected) {
                pts[worst] = expanded;
                vals[worst] = f_expanded;
            } else {
                pts[worst] = reflected;
                vals[worst] = f_reflected;
            }
            continue;
        }
        if (f_reflected < vals[second]) {
            pts[worst] = reflected;
            vals[worst] = f_reflected;
            continue;
        }
        const bool outside = f_reflected < vals[worst];
        const Vector contracted = outside ? project(centroid + 0.5 * (reflected - centroid))
                                          : project(centroid + 0.5 * (pts[worst] - centroid));
        const double f_contracted = safe_eval(f, contracted);
        ++evals;
        if (f_contracted < (outside ? f_reflected : vals[worst])) {
            pts[worst] = contracted;
            vals[worst] = f_contracted;
            continue;
        }
        // Shrink toward the best vertex.
        for (Eigen::Index k = 0; k <= n; ++k) {
            if (k == best) continue;
            pts[k] = project(pts[best] + 0.5 * (pts[k] - pts[best]));
            vals[k] = safe_eval(f, pts[k]);
            ++evals;
        }
    }

    const auto it = std::min_element(vals.begin(), vals.end());
    const auto idx = static_cast<std::size_t>(it - vals.begin());
    return {pts[idx], vals[idx], evals, converged};
}

}  // namespace

Bounds Bounds::unbounded(Eigen::Index n) {
    return {Vector::Constant(n, -kInf), Vector::Constant(n, kInf)};
}

Vector Bounds::project(const Vector& x) const { return x.cwiseMax(lower).cwiseMin(upper); }

OptimResult nelder_mead(const Objective& f, const Vector& x0, const NelderMeadOptions& opts,
                        const std::optional<Bounds>& bounds) {
    const Vector start = bounds ? bounds->project(x0) : x0;
    OptimResult best{start, safe_eval(f, start), 1, false};
    int remaining = opts.max_evaluations - 1;
    for (int round = 0; round <= opts.restarts && remaining > static_cast<int>(x0.size()) + 1; ++round) {
        NelderMeadOptions local = opts;
        if (round > 0) {
            // Restart with a simplex shrunk toward the scale of the last move.
            local.relative_step = opts.relative_step * 0.1;
            local.absolute_step = opts.absolute_step * 0.1;
        }
        OptimResult r = nelder_mead_once(f, best.x, local, bounds, remaining);
        remaining -= r.evaluations;
        best.evaluations += r.evaluations;
        const double previous = best.value;
        if (r.value <= best.value) {
            best.x = r.x;
            best.value = r.value;
        }
        best.converged = r.converged;
        if (round > 0 && r.converged && previous - r.value <= opts.ftol) break;
    }
    return best;
}

Vector numeric_gradient(const Objective& f, const Vector& x, double rel_step) {
    Vector g(x.size());
    Vector probe = x;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double h = rel_step * std::max(std::abs(x(k)), 1.0);
        probe(k) = x(k) + h;
        const double up = f(probe);
        probe(k) = x(k) - h;
        const double down = f(probe);
        probe(k) = x(k);
        g(k) = (up - down) / (2.0 * h);
    }
    return g;
}

Matrix numeric_hessian(const Objective& f, const Vector& x, double rel_step) {
    const Eigen::Index n = x.size();
    Vector h(n);
    for (Eigen::Index k = 0; k < n; ++k) h(k) = rel_step * std::max(std::abs(x(k)), 1.0);

    const double f0 = f(x);
    Matrix hess(n, n);
    Vector p = x;
    for (Eigen::Index i = 0; i < n; ++i) {
        p(i) = x(i) + h(i);
        const double fp = f(p);
        p(i) = x(i) - h(i);
        const double fm = f(p);
        p(i) = x(i);
        hess(i, i) = (fp - 2.0 * f0 + fm) / (h(i) * h(i));
        for (Eigen::Index j = 0; j < i; ++j) {
            p(i) = x(i) + h(i); p(j) = x(j) + h(j);
            const double fpp = f(p);
            p(j) = x(j) - h(j);
            const double fpm = f(p);
            p(i) = x(i) - h(i);
            const double fmm = f(p);
            p(j) = x(j) + h(j);
            const double fmp = f(p);
            p(i) = x(i); p(j) = x(j);
            hess(i, j) = hess(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h(i) * h(j));
        }
    }
    if (!hess.allFinite()) throw NumericDerivativeError("Hessian has non-finite entries");
    return hess;
}

OptimResult quasi_newton(const Objective& f, const Vector& x0, const QuasiNewtonOptions& opts,
                         const std::optional<Bounds>& bounds) {
    const Eigen::Index n = x0.size();
    const Bounds box = bounds ? *bounds : Bounds::unbounded(n);
    Vector x = box.project(x0);
    double fx = safe_eval(f, x);
    int evals = 1;
    OptimResult out{x, fx, evals, false};
    if (!std::isfinite(fx)) return out;

    Matrix h_inv = Matrix::Identity(n, n);
    Vector g = numeric_gradient(f, x, opts.gradient_step);
    evals += 2 * static_cast<int>(n);
    Eigen::Array<bool, Eigen::Dynamic, 1> prev_free = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(n, true);

    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        if (!g.allFinite()) break;
        Eigen::Array<bool, Eigen::Dynamic, 1> free(n);
        for (Eigen::Index k = 0; k < n; ++k) {
            const bool at_lower = x(k) <= box.lower(k) && g(k) > 0.0;
            const bool at_upper = x(k) >= box.upper(k) && g(k) < 0.0;
            free(k) = !(at_lower || at_upper);
        }
        if ((free != prev_free).any()) h_inv.setIdentity();
        prev_free = free;

        Vector g_free = g;
        for (Eigen::Index k = 0; k < n; ++k)
            if (!free(k)) g_free(k) = 0.0;
        if (g_free.cwiseAbs().maxCoeff() <= opts.gtol) {
            out.converged = true;
            break;
        }

        Vector d = -(h_inv * g_free);
        for (Eigen::Index k = 0; k < n; ++k)
            if (!free(k)) d(k) = 0.0;
        if (d.dot(g_free) >= 0.0) {
            h_inv.setIdentity();
            d = -g_free;
        }

        // Backtracking Armijo search along the projected path.
        double step = 1.0;
        Vector x_new;
        double f_new = kInf;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            x_new = box.project(x + step * d);
            f_new = safe_eval(f, x_new);
            ++evals;
            if (f_new <= fx + 1e-4 * g_free.dot(x_new - x)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted || f_new >= fx) break;

        const Vector g_new = numeric_gradient(f, x_new, opts.gradient_step);
        evals += 2 * static_cast<int>(n);
        const Vector s = x_new - x;
        const Vector y = g_new - g;
        const double sy = s.dot(y);
        const double decrease = fx - f_new;
        x = x_new;
        g = g_new;
        const double f_old = fx;
        fx = f_new;
        if (sy > 1e-16 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Matrix i_n = Matrix::Identity(n, n);
            h_inv = (i_n - rho * s * y.transpose()) * h_inv * (i_n - rho * y * s.transpose()) +
                    rho * s * s.transpose();
        }
        if (decrease <= opts.ftol * std::max(1.0, std::abs(f_old))) {
            out.converged = true;
            break;
        }
    }
    out.x = x;
    out.value = fx;
    out.evaluations = evals;
    return out;
}

}  // namespace starts
