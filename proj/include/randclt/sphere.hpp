#ifndef RANDCLT_SPHERE_HPP
#define RANDCLT_SPHERE_HPP

#include "randclt/error.hpp"
#include "randclt/quadrature.hpp"
#include "randclt/random.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace randclt {

inline void require_dimension(int n)
{
    if (n < 2)
        throw invalid_parameter("dimension must be at least 2, got " + std::to_string(n));
}

/// A point of the unit sphere S^{n-1}.
class UnitVector {
public:
    /// Validates |coords| = 1 within 1e-12.
    explicit UnitVector(std::vector<double> coords) : coords_(std::move(coords))
    {
        require_dimension(static_cast<int>(coords_.size()));
        double sq = 0;
        for (double c : coords_)
            sq += c * c;
        if (std::abs(sq - 1) > 1e-12)
            throw invalid_parameter("unit vector has squared norm " + std::to_string(sq));
    }

    /// Rescales a nonzero vector onto the sphere.
    static UnitVector normalized(std::vector<double> v)
    {
        double sq = 0;
        for (double c : v)
            sq += c * c;
        if (!(sq > 0))
            throw invalid_parameter("cannot normalize the zero vector");
        const double inv = 1 / std::sqrt(sq);
        for (double& c : v)
            c *= inv;
        return UnitVector(std::move(v));
    }

    std::size_t size() const noexcept { return coords_.size(); }
    double operator[](std::size_t i) const noexcept { return coords_[i]; }
    std::span<const double> coords() const noexcept { return coords_; }

private:
    std::vector<double> coords_;
};

/// The law of the first coordinate theta_1 of a uniform point on S^{n-1}:
/// density c_n (1-x^2)^{(n-3)/2} on [-1,1].
struct SphereLaw {
    int n;
    double normalizer;

    explicit SphereLaw(int dim) : n(dim), normalizer(0)
    {
        require_dimension(n);
        normalizer = std::exp(std::lgamma(0.5 * n) - std::lgamma(0.5 * (n - 1))) / std::sqrt(std::numbers::pi);
    }

    double density(double x) const
    {
        if (!(std::abs(x) <= 1))
            return 0;
        const double base = 1 - x * x;
        if (n == 3)
            return normalizer;
        if (base == 0)
            return n == 2 ? HUGE_VAL : 0;
        return normalizer * std::pow(base, 0.5 * (n - 3));
    }

    double cdf(double x) const
    {
        if (x <= -1)
            return 0;
        if (x >= 1)
            return 1;
        // (1+x)/2 follows the symmetric Beta((n-1)/2, (n-1)/2) law.
        const double a = 0.5 * (n - 1);
        return boost::math::ibeta(a, a, 0.5 * (1 + x));
    }

    /// Antiderivative of cdf, continuous, zero left of -1.
    double integrated_cdf(double x) const
    {
        if (x <= -1)
            return 0;
        if (x >= 1)
            return x;
        return x * cdf(x) + normalizer * std::pow(1 - x * x, 0.5 * (n - 1)) / (n - 1);
    }
};

/// Uniform point on S^{n-1} by normalizing n independent standard normals.
template <class Engine>
UnitVector sample_unit_sphere(int n, Engine& eng)
{
    require_dimension(n);
    std::normal_distribution<double> gauss;
    std::vector<double> v(static_cast<std::size_t>(n));
    double sq = 0;
    do {
        sq = 0;
        for (double& c : v) {
            c = gauss(eng);
            sq += c * c;
        }
    } while (!(sq > 0));
    return UnitVector::normalized(std::move(v));
}

inline UnitVector sample_unit_sphere(int n, const Stream& stream)
{
    auto eng = stream.engine();
    return sample_unit_sphere(n, eng);
}

inline double theta1_density(int n, double x) { return SphereLaw(n).density(x); }

inline double theta1_cdf(int n, double x) { return SphereLaw(n).cdf(x); }

namespace detail {

// 2 c_n \int_0^{pi/2} g(sin v) cos^{n-2} v dv, i.e. the x = sin v form of
// \int_{-1}^{1} g(x) c_n (1-x^2)^{(n-3)/2} dx for even g. The weight is
// smooth for every n >= 2.
template <class G>
double even_sphere_expectation(int n, G&& g, int panels, double tol)
{
    const SphereLaw law(n);
    const double power = n - 2;
    auto integrand = [&](double v) {
        const double c = std::cos(v);
        return g(std::sin(v)) * (power == 0 ? 1.0 : std::pow(c, power));
    };
    quad::Options opt;
    opt.abs_tol = tol;
    opt.rel_tol = tol;
    opt.initial_panels = panels;
    return 2 * law.normalizer * quad::integrate(integrand, 0.0, std::numbers::pi / 2, opt).value;
}

} // namespace detail

/// Characteristic function J_n(s) = E cos(s theta_1) by quadrature.
/// Accurate to about 1e-12 absolute; the panel count grows with |s| so every
/// oscillation is resolved.
inline double jn(int n, double s)
{
    require_dimension(n);
    s = std::abs(s);
    if (s == 0)
        return 1;
    const int panels = 1 + static_cast<int>(std::ceil(s / 3));
    return detail::even_sphere_expectation(
        n, [s](double x) { return std::cos(s * x); }, panels, 1e-13);
}

/// Second-order approximant (1 - t^4/(4n)) e^{-t^2/2} of J_n(t sqrt(n)).
inline double jn_edgeworth(int n, double t)
{
    require_dimension(n);
    const double t2 = t * t;
    return (1 - t2 * t2 / (4.0 * n)) * std::exp(-0.5 * t2);
}

/// E |theta_1|^p by quadrature.
inline double theta1_abs_moment(int n, double p)
{
    require_dimension(n);
    if (!(p > 0))
        throw invalid_parameter("moment order must be positive");
    return detail::even_sphere_expectation(
        n, [p](double x) { return std::pow(x, p); }, 1, 1e-15);
}

} // namespace randclt

#endif
