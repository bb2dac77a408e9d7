#pragma once

#include <array>
#include <string_view>

#include <Eigen/Core>

namespace starts {

/// Five-parameter STARTS vector. Canonical ordering everywhere (vectors,
/// reports, CSV columns) is (psi2, phi2, beta, omega2, sigma1_2).
struct StartsParams {
    double psi2 = 0.0;      // measurement-error (state) variance
    double phi2 = 0.0;      // stable-trait variance
    double beta = 0.0;      // autoregressive coefficient
    double omega2 = 0.0;    // AR residual variance
    double sigma1_2 = 0.0;  // variance of the initial within-person deviation

    static constexpr int kSize = 5;

    Eigen::Matrix<double, 5, 1> to_vector() const {
        Eigen::Matrix<double, 5, 1> v;
        v << psi2, phi2, beta, omega2, sigma1_2;
        return v;
    }

    static StartsParams from_vector(const Eigen::Ref<const Eigen::VectorXd>& v) {
        return {v(0), v(1), v(2), v(3), v(4)};
    }

    double operator[](int k) const {
        switch (k) {
            case 0: return psi2;
            case 1: return phi2;
            case 2: return beta;
            case 3: return omega2;
            default: return sigma1_2;
        }
    }

    /// All four variances nonnegative; beta is unrestricted.
    bool admissible() const {
        return psi2 >= 0.0 && phi2 >= 0.0 && omega2 >= 0.0 && sigma1_2 >= 0.0;
    }

    bool operator==(const StartsParams&) const = default;
};

inline constexpr std::array<std::string_view, 5> kParamNames = {"psi2", "phi2", "beta", "omega2",
                                                                "sigma1_2"};

/// Within-person block (beta, sigma1_2, omega2).
struct Theta1 {
    double beta = 0.0;
    double sigma1_2 = 0.0;
    double omega2 = 0.0;

    bool operator==(const Theta1&) const = default;
};

/// Trait and error block (phi2, psi2).
struct Theta2 {
    double phi2 = 0.0;
    double psi2 = 0.0;

    bool operator==(const Theta2&) const = default;
};

inline Theta1 theta1_of(const StartsParams& p) { return {p.beta, p.sigma1_2, p.omega2}; }
inline Theta2 theta2_of(const StartsParams& p) { return {p.phi2, p.psi2}; }

inline StartsParams combine(const Theta1& t1, const Theta2& t2) {
    return {t2.psi2, t2.phi2, t1.beta, t1.omega2, t1.sigma1_2};
}

/// The stationary truth used throughout the simulation design: phi2 = 0.5,
/// sigma1_2 = 1, beta = 0.3, omega2 = 1 - beta^2.
inline StartsParams design_truth(double psi2) { return {psi2, 0.5, 0.3, 1.0 - 0.3 * 0.3, 1.0}; }

}  // namespace starts
