#ifndef RANDCLT_QUADRATURE_HPP
#define RANDCLT_QUADRATURE_HPP

#include "randclt/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <sstream>
#include <type_traits>
#include <utility>

namespace randclt::quad {

/// Nodes and weights of the N-point Gauss-Legendre rule on [-1,1],
/// computed once by Newton iteration on P_N.
template <std::size_t N>
struct GaussLegendre {
    std::array<double, N> nodes{};
    std::array<double, N> weights{};

    GaussLegendre()
    {
        for (std::size_t i = 0; i < (N + 1) / 2; ++i) {
            double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(N) + 0.5));
            double dp = 0;
            for (int iter = 0; iter < 100; ++iter) {
                double p0 = 1, p1 = x;
                for (std::size_t k = 2; k <= N; ++k) {
                    double p2 = ((2.0 * k - 1) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
                    p0 = p1;
                    p1 = p2;
                }
                dp = static_cast<double>(N) * (x * p1 - p0) / (x * x - 1);
                double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16)
                    break;
            }
            double w = 2 / ((1 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[N - 1 - i] = x;
            weights[i] = w;
            weights[N - 1 - i] = w;
        }
    }

    static const GaussLegendre& get()
    {
        static const GaussLegendre rule;
        return rule;
    }
};

/// Fixed-order Gauss-Legendre on [a,b].
template <std::size_t N, class F>
auto gauss(F&& f, double a, double b)
{
    const auto& rule = GaussLegendre<N>::get();
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    using R = std::decay_t<std::invoke_result_t<F&, double>>;
    R sum{};
    for (std::size_t i = 0; i < N; ++i)
        sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
    return sum * half;
}

struct Options {
    double abs_tol = 1e-12;
    double rel_tol = 1e-12;
    int max_depth = 40;
    int initial_panels = 1;
    std::size_t max_evals = 20'000'000;
    bool throw_on_failure = true;
};

template <class T>
struct Result {
    T value{};
    double error = 0;
    std::size_t evals = 0;
    bool converged = true;
};

namespace detail {

inline constexpr std::size_t order = 10;

template <class F, class T>
struct Adaptive {
    F& f;
    const Options& opt;
    double tol_density; // absolute tolerance per unit length
    Result<T> res;
    double worst_a = 0, worst_b = 0, worst_err = 0;

    T panel(double a, double b)
    {
        res.evals += order;
        return gauss<order>(f, a, b);
    }

    void run(double a, double b, T whole, int depth)
    {
        const double m = 0.5 * (a + b);
        T left = panel(a, m);
        T right = panel(m, b);
        T both = left + right;
        double err = std::abs(whole - both);
        double tol = std::max(tol_density * (b - a), opt.rel_tol * std::abs(both));
        if (err <= tol || !(m > a && m < b)) {
            res.value += both;
            res.error += err;
            return;
        }
        if (depth >= opt.max_depth || res.evals >= opt.max_evals) {
            res.value += both;
            res.error += err;
            res.converged = false;
            if (err > worst_err)
                worst_err = err, worst_a = a, worst_b = b;
            return;
        }
        run(a, m, left, depth + 1);
        run(m, b, right, depth + 1);
    }
};

} // namespace detail

/// Adaptive Gauss-Legendre quadrature on a finite interval: a 10-point panel
/// is compared against its two halves, and halves are bisected until the
/// difference meets the tolerance.
template <class F>
auto integrate(F&& f, double a, double b, const Options& opt = {})
{
    using T = std::decay_t<std::invoke_result_t<F&, double>>;
    if (a == b)
        return Result<T>{};
    if (b < a) {
        auto r = integrate(f, b, a, opt);
        r.value = -r.value;
        return r;
    }
    detail::Adaptive<std::remove_reference_t<F>, T> ad{f, opt, opt.abs_tol / (b - a), {}};
    const int panels = std::max(1, opt.initial_panels);
    const double h = (b - a) / panels;
    for (int i = 0; i < panels; ++i) {
        double lo = a + i * h, hi = (i + 1 == panels) ? b : a + (i + 1) * h;
        ad.run(lo, hi, ad.panel(lo, hi), 0);
    }
    if (!ad.res.converged && opt.throw_on_failure
        && ad.res.error > std::max(opt.abs_tol, opt.rel_tol * std::abs(ad.res.value))) {
        std::ostringstream msg;
        msg << "adaptive quadrature on [" << a << ", " << b << "] did not converge: estimated error "
            << ad.res.error << " after " << ad.res.evals << " evaluations (worst panel [" << ad.worst_a << ", "
            << ad.worst_b << "], error " << ad.worst_err << ")";
        throw numeric_failure(msg.str());
    }
    return ad.res;
}

/// Integral over [a, inf) through x = a + u/(1-u).
template <class F>
auto integrate_to_infinity(F&& f, double a, const Options& opt = {})
{
    auto g = [&](double u) {
        const double one_minus = 1 - u;
        const double x = a + u / one_minus;
        return f(x) * (1 / (one_minus * one_minus));
    };
    return integrate(g, 0.0, 1.0, opt);
}

/// Integral over (-inf, b].
template <class F>
auto integrate_from_infinity(F&& f, double b, const Options& opt = {})
{
    auto g = [&](double x) { return f(-x); };
    return integrate_to_infinity(g, -b, opt);
}

} // namespace randclt::quad

#endif
