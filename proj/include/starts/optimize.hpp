#pragma once

#include <functional>
#include <optional>

#include "starts/linalg.hpp"

namespace starts {

using Objective = std::function<double(const Vector&)>;

/// Box constraints. Use +/-infinity for free coordinates.
struct Bounds {
    Vector lower;
    Vector upper;

    static Bounds unbounded(Eigen::Index n);
    Vector project(const Vector& x) const;
};

struct OptimResult {
    Vector x;
    double value = 0.0;
    int evaluations = 0;
    bool converged = false;
};

struct NelderMeadOptions {
    int max_evaluations = 500;
    /// Initial simplex edge for coordinate k: max(relative_step * |x_k|, absolute_step).
    double relative_step = 0.1;
    double absolute_step = 0.05;
    double xtol = 1e-10;
    double ftol = 1e-15;
    /// Fresh simplexes built around the best point after convergence.
    int restarts = 2;
};

/// Nelder-Mead simplex (standard coefficients 1, 2, 0.5, 0.5). With
/// `bounds`, trial points are projected onto the box, so coordinates can
/// land exactly on a bound.
OptimResult nelder_mead(const Objective& f, const Vector& x0, const NelderMeadOptions& opts = {},
                        const std::optional<Bounds>& bounds = std::nullopt);

struct QuasiNewtonOptions {
    int max_iterations = 200;
    double gradient_step = 1e-6;  // relative central-difference step
    double gtol = 1e-9;           // projected gradient infinity norm
    double ftol = 1e-15;          // relative decrease below which we stop
};

/// BFGS with central-difference gradients. With `bounds` it becomes a
/// projected method: coordinates sitting on a bound with the gradient
/// pushing outward are frozen for the step.
OptimResult quasi_newton(const Objective& f, const Vector& x0, const QuasiNewtonOptions& opts = {},
                         const std::optional<Bounds>& bounds = std::nullopt);

/// Central differences, step h_k = rel_step * max(|x_k|, 1).
Vector numeric_gradient(const Objective& f, const Vector& x, double rel_step = 1e-6);

/// Central second differences, step h_k = rel_step * max(|x_k|, 1).
/// Throws NumericDerivativeError on non-finite entries.
Matrix numeric_hessian(const Objective& f, const Vector& x, double rel_step = 1e-5);

}  // namespace starts
