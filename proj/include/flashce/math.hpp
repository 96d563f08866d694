#pragma once

#include <cmath>
#include <functional>
#include <limits>

namespace flashce {

inline constexpr double kSqrt2 = 1.4142135623730950488;
inline constexpr double kSqrtPi = 1.7724538509055160273;

/// Scaled complementary error function exp(x^2)*erfc(x).
/// Stays finite for large positive x where exp(x^2) alone would overflow.
inline double erfcx(double x) {
    if (x < 0.0) {
        // erfcx(-x) = 2*exp(x^2) - erfcx(x); overflows past ~ -26.6
        if (x < -26.5) return std::numeric_limits<double>::infinity();
        return 2.0 * std::exp(x * x) - erfcx(-x);
    }
    if (x < 25.0) {
        return std::exp(x * x) * std::erfc(x);
    }
    // Asymptotic series 1/(x*sqrt(pi)) * sum (-1)^k (2k-1)!!/(2x^2)^k,
    // error below 1e-15 for x >= 25.
    const double ix2 = 1.0 / (2.0 * x * x);
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k <= 6; ++k) {
        term *= -(2 * k - 1) * ix2;
        sum += term;
    }
    return sum / (x * kSqrtPi);
}

/// Standard normal tail probability Q(t) = P(Z > t).
inline double normal_tail(double t) {
    return 0.5 * std::erfc(t / kSqrt2);
}

/// Standard normal CDF.
inline double normal_cdf(double t) {
    return 0.5 * std::erfc(-t / kSqrt2);
}

/// Adaptive composite Simpson quadrature with absolute tolerance.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double abs_tol, int max_depth = 40);

}  // namespace flashce
