#ifndef RANDCLT_NORMAL_HPP
#define RANDCLT_NORMAL_HPP

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <numbers>

namespace randclt::normal {

inline constexpr double inv_sqrt_2pi = 0.39894228040143267794;
inline constexpr double inv_sqrt_pi = 0.56418958354775628695;

inline double pdf(double x) { return inv_sqrt_2pi * std::exp(-0.5 * x * x); }

inline double cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2); }

/// 1 - cdf(x), without cancellation for large x.
inline double survival(double x) { return 0.5 * std::erfc(x * std::numbers::sqrt2 / 2); }

inline double quantile(double p)
{
    if (p <= 0)
        return -HUGE_VAL;
    if (p >= 1)
        return HUGE_VAL;
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2 * p);
}

// Antiderivatives used for exact piecewise integration against Phi.

/// d/dx = Phi(x)
inline double int_cdf(double x) { return x * cdf(x) + pdf(x); }

/// d/dx = x Phi(x)
inline double int_x_cdf(double x) { return 0.5 * ((x * x - 1) * cdf(x) + x * pdf(x)); }

/// d/dx = Phi(x)^2
inline double int_cdf_sq(double x)
{
    const double c = cdf(x);
    return x * c * c + 2 * pdf(x) * c - inv_sqrt_pi * cdf(std::numbers::sqrt2 * x);
}

/// Integral of Phi^2 over (-inf, b].
inline double left_tail_sq(double b)
{
    // Mirror of the right tail of (1-Phi)^2.
    const double a = -b, q = survival(a);
    return -a * q * q + 2 * pdf(a) * q - inv_sqrt_pi * survival(std::numbers::sqrt2 * a);
}

/// Integral of (1-Phi)^2 over [a, inf).
inline double right_tail_sq(double a)
{
    const double q = survival(a);
    return -a * q * q + 2 * pdf(a) * q - inv_sqrt_pi * survival(std::numbers::sqrt2 * a);
}

/// Integral of Phi over (-inf, b].
inline double left_tail(double b) { return pdf(b) + b * cdf(b); }

/// Integral of (1-Phi) over [a, inf).
inline double right_tail(double a) { return pdf(a) - a * survival(a); }

} // namespace randclt::normal

#endif
