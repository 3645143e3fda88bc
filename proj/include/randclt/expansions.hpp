#ifndef RANDCLT_EXPANSIONS_HPP
#define RANDCLT_EXPANSIONS_HPP

#include "randclt/distance.hpp"
#include "randclt/error.hpp"
#include "randclt/moments.hpp"
#include "randclt/normal.hpp"
#include "randclt/quadrature.hpp"
#include "randclt/sphere.hpp"
#include "randclt/systems.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <span>
#include <string>

namespace randclt {

inline constexpr double sqrt_pi = 1.7724538509055160273;
inline constexpr double sqrt_2pi = 2.5066282746310005024;

// Gaussian integral identities

/// psi_r(alpha) = 1 - (alpha^{1/2} + r alpha^{-3/2}), with psi_0(0) = 1.
inline double psi_r(double alpha, double r)
{
    if (alpha < 0)
        throw invalid_parameter("psi_r needs alpha >= 0");
    if (alpha == 0) {
        if (r == 0)
            return 1;
        throw invalid_parameter("psi_r(0) is only defined for r = 0");
    }
    return 1 - (std::sqrt(alpha) + r * std::pow(alpha, -1.5));
}

/// psi_r from its defining integral
/// (2 pi)^{-1/2} \int ((1 - r t^4) e^{-alpha t^2/2} - e^{-t^2/2}) / t^2 dt.
inline double psi_r_quadrature(double alpha, double r)
{
    if (!(alpha > 0))
        throw invalid_parameter("psi_r_quadrature needs alpha > 0");
    auto f = [&](double t) {
        const double t2 = t * t;
        // e^{-t^2/2} expm1((1-alpha) t^2/2) / t^2 stays accurate as t -> 0
        double head;
        if (t2 == 0)
            head = 0.5 * (1 - alpha);
        else if (t2 < 1)
            head = std::exp(-0.5 * t2) * std::expm1(0.5 * (1 - alpha) * t2) / t2;
        else
            head = (std::exp(-0.5 * alpha * t2) - std::exp(-0.5 * t2)) / t2;
        return head - r * t2 * std::exp(-0.5 * alpha * t2);
    };
    quad::Options opt;
    opt.abs_tol = 1e-13;
    opt.rel_tol = 1e-13;
    const double cut = 8 / std::sqrt(std::min(alpha, 1.0));
    const double body = quad::integrate(f, 0.0, cut, opt).value;
    const double tail = quad::integrate_to_infinity(f, cut, opt).value;
    return 2 * (body + tail) / sqrt_2pi;
}

/// \int min{1, t^2 eta^2} / t^2 dt over the line (equals 4 eta).
inline double identity_3_6(double eta)
{
    if (!(eta > 0))
        throw invalid_parameter("identity_3_6 needs eta > 0");
    auto f = [eta](double t) { return std::min(1.0, t * t * eta * eta) / (t * t); };
    quad::Options opt;
    opt.abs_tol = 1e-13;
    opt.rel_tol = 1e-13;
    const double knee = 1 / eta;
    return 2 * (quad::integrate(f, 0.0, knee, opt).value + quad::integrate_to_infinity(f, knee, opt).value);
}

/// 1 - sqrt(1 - eps) without cancellation, eps <= 1.
inline double one_minus_sqrt(double eps) { return eps / (1 + std::sqrt(1 - eps)); }

/// Lower and upper quartic envelopes of 1 - sqrt(1 - eps) on [-1, 1].
inline double sqrt_lower_envelope(double e) { return e / 2 + e * e / 8 + e * e * e / 16 + 0.01 * e * e * e * e; }
inline double sqrt_upper_envelope(double e) { return e / 2 + e * e / 8 + e * e * e / 16 + 3 * e * e * e * e; }

// The R statistics

/// ((|x|^2+|y|^2)^{1/2}/sqrt n)(1 + 1/(8n)) - (|x-y|/sqrt n)(1 + 1/(4n)).
inline double r_statistic(const PairGram& g, int n)
{
    const double nn = n;
    const double s = g.xx + g.yy;
    if (s == 0)
        return 0;
    return std::sqrt(s / nn) * (1 + 1 / (8 * nn)) - std::sqrt(g.dist_sq() / nn) * (1 + 1 / (4 * nn));
}

/// Variant with the (|x|^4+|y|^4)/(|x|^2+|y|^2)^2 correction.
inline double r_statistic_full(const PairGram& g, int n)
{
    const double nn = n;
    const double s = g.xx + g.yy;
    if (s == 0)
        return 0;
    const double corr = (g.xx * g.xx + g.yy * g.yy) / (s * s);
    return std::sqrt(s / nn) * (1 + corr / (4 * nn)) - std::sqrt(g.dist_sq() / nn) * (1 + 1 / (4 * nn));
}

inline PairGram gram(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size())
        throw invalid_parameter("r_statistic: vectors differ in length");
    return {detail::norm_sq(x), detail::norm_sq(y), detail::dot(x, y)};
}

inline double r_statistic(std::span<const double> x, std::span<const double> y)
{
    return r_statistic(gram(x, y), static_cast<int>(x.size()));
}

inline double r_statistic_full(std::span<const double> x, std::span<const double> y)
{
    return r_statistic_full(gram(x, y), static_cast<int>(x.size()));
}

// Predictions

struct ExpansionPrediction {
    std::string kind;
    double main = 0;
    double error_scale = 0;
    double slack = 1; ///< multiplier applied to error_scale in consistency bands
    double main_stderr = 0;
    bool applicable = true;
    std::string note;
};

inline nlohmann::json to_json(const ExpansionPrediction& p)
{
    return {{"kind", p.kind},   {"main", p.main},         {"error_scale", p.error_scale}, {"slack", p.slack},
            {"main_stderr", p.main_stderr}, {"applicable", p.applicable}, {"note", p.note}};
}

/// sigma_4^2, exact where known, otherwise estimated.
inline double sigma4_sq(const System& s, const Budget& budget)
{
    if (auto e = exact_sigma4(s))
        return *e;
    Budget b = budget;
    if (b.is_exact())
        b = Budget::monte_carlo(100'000, 0, 1);
    const double v = sigma_2p(s, 2, b).value;
    return v * v;
}

/// E_theta omega^2(F_theta, F) ~ E R / sqrt(2 pi), error (1 + sigma_4^2)/n^2.
inline ExpansionPrediction prop42_prediction(const System& s, const Budget& budget)
{
    const int n = s.n();
    const Estimate r = pair_expectation<1>(s, budget, [n](const PairGram& g) {
        return std::array<double, 1>{r_statistic(g, n)};
    })[0];
    ExpansionPrediction p;
    p.kind = "prop42";
    p.main = r.value / sqrt_2pi;
    p.main_stderr = r.std_error / sqrt_2pi;
    p.error_scale = (1 + sigma4_sq(s, budget)) / (static_cast<double>(n) * n);
    return p;
}

/// sqrt(pi) E_theta omega^2(F_theta, F) = (1 + 1/(4n)) E(1 - sqrt(1 - xi)) - 1/(8n) + O(1/n^2).
inline ExpansionPrediction cor51_prediction(const System& s, const XiMoments& xi, double slack = 2)
{
    if (!s.flags().fixed_norm || !xi.sqrt_term)
        throw unsupported_mode("cor51 prediction requires a fixed-norm system");
    const double n = s.n();
    ExpansionPrediction p;
    p.kind = "cor51";
    p.main = ((1 + 1 / (4 * n)) * xi.sqrt_term->value - 1 / (8 * n)) / sqrt_pi;
    p.main_stderr = (1 + 1 / (4 * n)) * xi.sqrt_term->std_error / sqrt_pi;
    p.error_scale = 1 / (n * n);
    p.slack = slack;
    if (p.main < p.slack * p.error_scale)
        p.note = "prediction below the error floor";
    return p;
}

/// E_theta omega^2(F_theta, Phi) = m_3^3 / (16 sqrt(pi) n^{3/2}) + O(m_4^4 / n^2).
/// Without mean zero the (1/2) E xi term leads instead.
inline ExpansionPrediction thm11_prediction(const System& s, const MomentReport& m, double slack = 5)
{
    const double n = s.n();
    const auto& f = s.flags();
    ExpansionPrediction p;
    p.slack = slack;
    if (f.isotropic && f.mean_zero && f.fixed_norm) {
        p.kind = "thm11";
        // m_3^3 / n^{3/2} = E xi^3 and m_4^4 / n^2 = E xi^4.
        p.main = m.xi.e3.value / (16 * sqrt_pi);
        p.main_stderr = m.xi.e3.std_error / (16 * sqrt_pi);
        p.error_scale = m.xi.e4.value;
        return p;
    }
    p.kind = "remark53";
    p.applicable = false;
    p.note = "hypotheses (isotropic, mean zero, fixed norm) unmet; leading E xi / (2 sqrt pi) term reported";
    p.main = m.xi.e1.value / (2 * sqrt_pi);
    p.main_stderr = m.xi.e1.std_error / (2 * sqrt_pi);
    p.error_scale = (m.xi.e3.value / 16 + 3 * m.xi.e4.value) / sqrt_pi + 1 / (n * n);
    return p;
}

// Bounds

struct BoundEvaluation {
    std::string kind;
    double value = 0;
    nlohmann::json params = nlohmann::json::object();
};

inline nlohmann::json to_json(const BoundEvaluation& b)
{
    return {{"kind", b.kind}, {"value", b.value}, {"params", b.params}};
}

/// c1 P{|X - Y|^2 <= n/4} - c2 (1 + sigma_4^4) / n^2.
inline BoundEvaluation thm12_lower_bound(const System& s, const Budget& budget, double c1 = 1.0 / 32, double c2 = 1)
{
    const double n = s.n();
    const Estimate prob = closeness_probability(s, 0.25, budget);
    const double s4 = sigma4_sq(s, budget);
    BoundEvaluation b;
    b.kind = "thm12_lower";
    b.value = c1 * prob.value - c2 * (1 + s4 * s4) / (n * n);
    b.params = {{"c1", c1}, {"c2", c2}, {"lambda", 0.25}, {"closeness", prob.value},
                {"closeness_stderr", prob.std_error}, {"sigma4_sq", s4}};
    return b;
}

using CharacteristicFunction = std::function<std::complex<double>(double)>;

/// \int_0^T |a(t) - b(t)| / t dt + (1/T) \int_0^T |b(t)| dt (without the constant c).
inline double smoothing_functional(const CharacteristicFunction& a, const CharacteristicFunction& b, double T)
{
    if (!(T > 0))
        throw invalid_parameter("smoothing functional needs T > 0");
    quad::Options opt;
    opt.abs_tol = 1e-11;
    opt.rel_tol = 1e-10;
    opt.initial_panels = 1 + static_cast<int>(std::ceil(T / 4));
    const double first = quad::integrate([&](double t) { return std::abs(a(t) - b(t)) / t; }, 0.0, T, opt).value;
    const double second = quad::integrate([&](double t) { return std::abs(b(t)); }, 0.0, T, opt).value;
    return first + second / T;
}

/// (1/(3T)) | \int_0^T (f(t) - e^{-t^2/2}) (1 - t/T) dt |.
inline double rho_lower_functional(const CharacteristicFunction& f, double T)
{
    if (!(T > 0))
        throw invalid_parameter("rho lower functional needs T > 0");
    quad::Options opt;
    opt.abs_tol = 1e-14;
    opt.rel_tol = 1e-12;
    opt.initial_panels = 1 + static_cast<int>(std::ceil(T));
    const auto v = quad::integrate(
        [&](double t) { return (f(t) - std::exp(-0.5 * t * t)) * (1 - t / T); }, 0.0, T, opt).value;
    return std::abs(v) / (3 * T);
}

/// Delta_n(t) = E J_n(t |X - Y|) - J_n(t sqrt n)^2.
inline Estimate delta_n(const System& s, double t, const Budget& budget)
{
    if (!s.flags().fixed_norm)
        throw unsupported_mode("delta_n requires a fixed-norm system");
    const int n = s.n();
    if (t == 0)
        return {0, 0};
    const Estimate e = pair_expectation<1>(s, budget, [n, t](const PairGram& g) {
        return std::array<double, 1>{jn(n, t * std::sqrt(g.dist_sq()))};
    })[0];
    const double j = jn(n, t * std::sqrt(static_cast<double>(n)));
    return {e.value - j * j, e.std_error};
}

/// sqrt(lambda) / (6 n sqrt(Var L)): lower bound on P{|X - Y|^2 <= lambda n}
/// for systems X_k = f(k L) with a Lipschitz profile.
inline double closeness_lower_bound(double lambda, int n, double var_l)
{
    return std::sqrt(lambda) / (6.0 * n * std::sqrt(var_l));
}

/// The characteristic function of sqrt(n) theta_1.
inline CharacteristicFunction typical_cf(int n)
{
    const double sn = std::sqrt(static_cast<double>(n));
    return [n, sn](double t) { return std::complex<double>(jn(n, t * sn), 0); };
}

inline CharacteristicFunction normal_cf()
{
    return [](double t) { return std::complex<double>(std::exp(-0.5 * t * t), 0); };
}

/// E exp(i t <X(u), theta>) for an interval system, by quadrature over u.
inline std::complex<double> theta_cf(const TrigForm& f, double t)
{
    double lip = 0;
    for (const auto& term : f.terms)
        lip += term.frequency * std::hypot(term.cos_coef, term.sin_coef);
    lip *= f.angle_span;
    quad::Options opt;
    opt.abs_tol = 1e-12;
    opt.rel_tol = 1e-12;
    opt.initial_panels = 1 + static_cast<int>(std::ceil(std::abs(t) * lip / 4));
    auto g = [&](double u) {
        const double a = f.angle_offset + f.angle_span * u;
        double s = 0;
        for (const auto& term : f.terms)
            s += term.cos_coef * std::cos(term.frequency * a) + term.sin_coef * std::sin(term.frequency * a);
        return std::polar(1.0, t * s);
    };
    return quad::integrate(g, 0.0, 1.0, opt).value;
}

/// omega^2(F_theta, F) by the Plancherel formula (1/pi) \int_0^inf |f_theta - f|^2 / t^2 dt,
/// truncated at T with the remainder bounded by 4/(pi T).
inline double plancherel_omega_sq(const TrigForm& f, int n, double T, double* tail_bound = nullptr)
{
    const double sn = std::sqrt(static_cast<double>(n));
    auto integrand = [&](double t) {
        const std::complex<double> d = theta_cf(f, t) - jn(n, t * sn);
        return std::norm(d) / (t * t);
    };
    quad::Options opt;
    opt.abs_tol = 1e-9;
    opt.rel_tol = 1e-9;
    opt.initial_panels = 1 + static_cast<int>(std::ceil(T));
    const double v = quad::integrate(integrand, 0.0, T, opt).value;
    if (tail_bound)
        *tail_bound = 4 / (std::numbers::pi * T);
    return v / std::numbers::pi;
}

} // namespace randclt

#endif
