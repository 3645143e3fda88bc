#ifndef RANDCLT_MOMENTS_HPP
#define RANDCLT_MOMENTS_HPP

#include "randclt/error.hpp"
#include "randclt/parallel.hpp"
#include "randclt/random.hpp"
#include "randclt/systems.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace randclt {

/// How an expectation over (X, Y) is evaluated.
struct Budget {
    enum class Mode { exact, monte_carlo };
    Mode mode = Mode::monte_carlo;
    std::size_t samples = 100'000;
    std::uint64_t seed = 0;
    unsigned threads = 1;

    static Budget exact() { return {Mode::exact, 0, 0, 1}; }
    static Budget monte_carlo(std::size_t n, std::uint64_t seed, unsigned threads = default_threads())
    {
        return {Mode::monte_carlo, n, seed, threads};
    }
    bool is_exact() const noexcept { return mode == Mode::exact; }
};

struct Estimate {
    double value = 0;
    double std_error = 0; ///< 0 for exact results
};

/// Gram entries of a pair: |x|^2, |y|^2, <x,y>.
struct PairGram {
    double xx, yy, xy;
    double dist_sq() const noexcept { return std::max(0.0, xx + yy - 2 * xy); }
};

/// The exact law of the Gram triple for finite systems. For the Walsh and
/// empirical systems it only depends on whether the two atoms coincide.
inline std::vector<std::pair<PairGram, double>> exact_pair_law(const System& s)
{
    const double n = s.n();
    switch (s.kind()) {
    case SystemKind::walsh: {
        const double atoms = static_cast<double>(s.atom_count());
        return {{{n, n, n}, 1 / atoms}, {{n, n, -1}, 1 - 1 / atoms}};
    }
    case SystemKind::empirical:
        return {{{n, n, n}, 1 / n}, {{n, n, 0}, 1 - 1 / n}};
    default:
        throw unsupported_mode("exact mode requires a finite sample space; " + s.label() + " is continuous");
    }
}

namespace detail {

template <std::size_t K>
struct Accum {
    std::array<long double, K> sum{}, sumsq{};
    std::size_t count = 0;

    void add(const std::array<double, K>& v)
    {
        for (std::size_t k = 0; k < K; ++k) {
            sum[k] += v[k];
            sumsq[k] += static_cast<long double>(v[k]) * v[k];
        }
        ++count;
    }

    void merge(const Accum& o)
    {
        for (std::size_t k = 0; k < K; ++k) {
            sum[k] += o.sum[k];
            sumsq[k] += o.sumsq[k];
        }
        count += o.count;
    }

    std::array<Estimate, K> finish() const
    {
        std::array<Estimate, K> out{};
        const long double N = static_cast<long double>(count);
        for (std::size_t k = 0; k < K; ++k) {
            const long double mean = sum[k] / N;
            long double var = count > 1 ? (sumsq[k] - N * mean * mean) / (N - 1) : 0;
            if (var < 0)
                var = 0;
            out[k] = {static_cast<double>(mean), static_cast<double>(std::sqrt(var / N))};
        }
        return out;
    }
};

/// Fills per-sample values in fixed chunks, each chunk from its own substream.
template <std::size_t K, class Draw>
std::array<Estimate, K> chunked_mc(std::size_t total, std::uint64_t seed, std::uint64_t tag, unsigned threads,
                                   Draw&& draw)
{
    if (total == 0)
        throw invalid_parameter("Monte Carlo budget must be at least 1 sample");
    const Stream root = Stream(seed).split(tag);
    const std::size_t chunks = chunk_count(total);
    std::vector<Accum<K>> parts(chunks);
    parallel_for(chunks, threads, [&](std::size_t c) {
        auto eng = root.split(c).engine();
        const std::size_t lo = c * mc_chunk_size, hi = std::min(total, lo + mc_chunk_size);
        for (std::size_t i = lo; i < hi; ++i)
            parts[c].add(draw(eng));
    });
    Accum<K> all;
    for (const auto& p : parts)
        all.merge(p);
    return all.finish();
}

inline double norm_sq(std::span<const double> v)
{
    double s = 0;
    for (double c : v)
        s += c * c;
    return s;
}

inline double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

} // namespace detail

/// E f(X, Y) for an independent pair, where f sees the Gram entries only.
/// Returns K estimates (exact values with zero stderr in exact mode).
template <std::size_t K, class F>
std::array<Estimate, K> pair_expectation(const System& s, const Budget& budget, F&& f)
{
    if (budget.is_exact()) {
        std::array<long double, K> acc{};
        for (const auto& [g, w] : exact_pair_law(s)) {
            const std::array<double, K> v = f(g);
            for (std::size_t k = 0; k < K; ++k)
                acc[k] += w * static_cast<long double>(v[k]);
        }
        std::array<Estimate, K> out{};
        for (std::size_t k = 0; k < K; ++k)
            out[k] = {static_cast<double>(acc[k]), 0};
        return out;
    }
    const std::size_t n = static_cast<std::size_t>(s.n());
    return detail::chunked_mc<K>(budget.samples, budget.seed, substream::pairs, budget.threads, [&](auto& eng) {
        std::vector<double> x(n), y(n);
        s.evaluate(s.sample_omega(eng), x);
        s.evaluate(s.sample_omega(eng), y);
        return f(PairGram{detail::norm_sq(x), detail::norm_sq(y), detail::dot(x, y)});
    });
}

/// E<X,Y>^p.
inline Estimate inner_moment(const System& s, int p, const Budget& budget)
{
    if (p < 1)
        throw invalid_parameter("inner moment order must be a positive integer");
    return pair_expectation<1>(s, budget, [p](const PairGram& g) {
        return std::array<double, 1>{std::pow(g.xy, p)};
    })[0];
}

struct MomentValue {
    Estimate inner;              ///< E<X,Y>^p (signed)
    std::optional<double> value; ///< m_p, empty when not estimable
    std::string note;
};

/// m_p = (1/sqrt n) (E<X,Y>^p)^{1/p}.
inline MomentValue m_p(const System& s, int p, const Budget& budget)
{
    MomentValue r;
    r.inner = inner_moment(s, p, budget);
    const double v = r.inner.value;
    if (v < 0) {
        if (p % 2 == 0)
            throw numeric_failure("negative estimate " + std::to_string(v) + " of an even inner moment");
        r.note = "odd inner moment estimated negative; m_p not estimable at this budget";
        return r;
    }
    r.value = std::pow(v, 1.0 / p) / std::sqrt(static_cast<double>(s.n()));
    return r;
}

/// sigma_{2p} = sqrt(n) (E | |X|^2/n - 1 |^p)^{1/p} for every p in ps, from
/// one shared sample so that the profile is monotone per sample.
inline std::vector<Estimate> sigma_profile(const System& s, std::span<const double> ps, const Budget& budget)
{
    for (double p : ps)
        if (!(p >= 1))
            throw invalid_parameter("sigma_2p needs p >= 1");
    std::vector<Estimate> out(ps.size());
    if (s.flags().fixed_norm)
        return out;
    if (budget.is_exact())
        throw unsupported_mode("exact sigma_2p is only available for fixed-norm systems");

    const std::size_t n = static_cast<std::size_t>(s.n());
    const double sqn = std::sqrt(static_cast<double>(n));
    const Stream root = Stream(budget.seed).split(substream::norms);
    const std::size_t chunks = chunk_count(budget.samples);
    std::vector<std::vector<double>> dev(chunks);
    parallel_for(chunks, budget.threads, [&](std::size_t c) {
        auto eng = root.split(c).engine();
        const std::size_t lo = c * mc_chunk_size, hi = std::min(budget.samples, lo + mc_chunk_size);
        std::vector<double> x(n);
        for (std::size_t i = lo; i < hi; ++i) {
            s.evaluate(s.sample_omega(eng), x);
            dev[c].push_back(std::abs(detail::norm_sq(x) / static_cast<double>(n) - 1));
        }
    });
    for (std::size_t k = 0; k < ps.size(); ++k) {
        detail::Accum<1> acc;
        for (const auto& chunk : dev)
            for (double d : chunk)
                acc.add({std::pow(d, ps[k])});
        const Estimate m = acc.finish()[0];
        if (m.value <= 0)
            continue;
        const double val = sqn * std::pow(m.value, 1 / ps[k]);
        // delta method through M -> sqrt(n) M^{1/p}
        out[k] = {val, val / (ps[k] * m.value) * m.std_error};
    }
    return out;
}

inline Estimate sigma_2p(const System& s, double p, const Budget& budget)
{
    const double ps[] = {p};
    return sigma_profile(s, ps, budget)[0];
}

/// Moments of xi = <X,Y>/n.
struct XiMoments {
    Estimate e1, e2, e3, e4;
    std::optional<Estimate> sqrt_term; ///< E(1 - sqrt(1 - xi)), fixed-norm only
};

inline XiMoments xi_functionals(const System& s, const Budget& budget)
{
    const double n = s.n();
    const bool with_sqrt = s.flags().fixed_norm;
    const auto e = pair_expectation<5>(s, budget, [n, with_sqrt](const PairGram& g) {
        const double xi = g.xy / n;
        const double sq = with_sqrt ? 1 - std::sqrt(std::max(0.0, 1 - xi)) : 0.0;
        return std::array<double, 5>{xi, xi * xi, xi * xi * xi, xi * xi * xi * xi, sq};
    });
    XiMoments r{e[0], e[1], e[2], e[3], std::nullopt};
    if (with_sqrt)
        r.sqrt_term = e[4];
    return r;
}

/// P{|X - Y|^2 <= lambda n}.
inline Estimate closeness_probability(const System& s, double lambda, const Budget& budget)
{
    if (!(lambda > 0 && lambda <= 1))
        throw invalid_parameter("closeness threshold lambda must lie in (0, 1]");
    const double bound = lambda * s.n() * (1 + 1e-12);
    return pair_expectation<1>(s, budget, [bound](const PairGram& g) {
        return std::array<double, 1>{g.dist_sq() <= bound ? 1.0 : 0.0};
    })[0];
}

/// Number of index triples i1 <= i2 < i3 with m_{i1} + m_{i2} = m_{i3}.
inline std::uint64_t sigma3_lacunary_count(std::span<const long long> m)
{
    for (std::size_t k = 0; k < m.size(); ++k)
        if (m[k] < 1 || (k > 0 && m[k] <= m[k - 1]))
            throw invalid_parameter("frequencies must be strictly increasing positive integers");
    std::uint64_t count = 0;
    for (std::size_t i3 = 0; i3 < m.size(); ++i3)
        for (std::size_t i1 = 0; i1 < i3; ++i1)
            if (std::binary_search(m.begin() + static_cast<std::ptrdiff_t>(i1), m.begin() + static_cast<std::ptrdiff_t>(i3),
                                   m[i3] - m[i1]))
                ++count;
    return count;
}

/// Exact E<X,Y>^3 for a trigonometric system with frequencies m:
/// 6 times the number of ordered solutions of m_i + m_j = m_l.
inline double trig_third_inner_moment(std::span<const long long> m)
{
    std::uint64_t ordered = 0;
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m.size(); ++j)
            if (std::binary_search(m.begin(), m.end(), m[i] + m[j]))
                ++ordered;
    return 6.0 * static_cast<double>(ordered);
}

/// Both sides of E xi >= (E xi^2)^2 / E xi^3 on the empirical law of
/// nonnegative samples.
struct InequalitySides {
    double lhs, rhs;
    bool satisfied;
};

inline InequalitySides lemma_12_3(std::span<const double> samples)
{
    if (samples.empty())
        throw invalid_parameter("lemma_12_3 needs at least one sample");
    long double m1 = 0, m2 = 0, m3 = 0;
    for (double v : samples) {
        if (v < 0)
            throw invalid_parameter("lemma_12_3 needs nonnegative samples");
        m1 += v;
        m2 += static_cast<long double>(v) * v;
        m3 += static_cast<long double>(v) * v * v;
    }
    const long double N = static_cast<long double>(samples.size());
    m1 /= N, m2 /= N, m3 /= N;
    const double lhs = static_cast<double>(m1);
    const double rhs = m3 > 0 ? static_cast<double>(m2 * m2 / m3) : 0.0;
    // Exact inequality; allow only the rounding of the long double sums.
    return {lhs, rhs, lhs >= rhs * (1 - 1e-12)};
}

/// Second half: P{xi >= ||xi||_2 / sqrt2} >= (1/8)(||xi||_2/||xi||_3)^6.
inline InequalitySides lemma_12_3_tail(std::span<const double> samples)
{
    long double m2 = 0, m3 = 0;
    for (double v : samples) {
        m2 += static_cast<long double>(v) * v;
        m3 += static_cast<long double>(std::abs(v)) * v * v;
    }
    const long double N = static_cast<long double>(samples.size());
    const double l2 = static_cast<double>(std::sqrt(m2 / N));
    const double l3 = static_cast<double>(std::cbrt(m3 / N));
    std::size_t hits = 0;
    for (double v : samples)
        if (v >= l2 / std::numbers::sqrt2)
            ++hits;
    const double lhs = static_cast<double>(hits) / static_cast<double>(samples.size());
    const double rhs = l3 > 0 ? std::pow(l2 / l3, 6) / 8 : 0.0;
    return {lhs, rhs, lhs >= rhs * (1 - 1e-12)};
}

/// Paired resample form of E (xi - eta)^2/(xi + eta)^{3/2} <= 12 Var(xi)/(E xi)^{3/2}.
inline InequalitySides lemma_4_3(std::span<const double> xi, std::span<const double> eta)
{
    if (xi.size() != eta.size() || xi.empty())
        throw invalid_parameter("lemma_4_3 needs two nonempty samples of equal size");
    long double lhs = 0, m1 = 0, m2 = 0;
    for (std::size_t i = 0; i < xi.size(); ++i) {
        if (xi[i] < 0 || eta[i] < 0)
            throw invalid_parameter("lemma_4_3 needs nonnegative samples");
        const double s = xi[i] + eta[i];
        if (s > 0)
            lhs += (xi[i] - eta[i]) * (xi[i] - eta[i]) / std::pow(s, 1.5);
        m1 += xi[i];
        m2 += static_cast<long double>(xi[i]) * xi[i];
    }
    const long double N = static_cast<long double>(xi.size());
    lhs /= N, m1 /= N, m2 /= N;
    if (!(m1 > 0))
        throw invalid_parameter("lemma_4_3 needs a positive sample mean");
    const double rhs = static_cast<double>(12 * (m2 - m1 * m1) / std::pow(m1, 1.5L));
    return {static_cast<double>(lhs), rhs, static_cast<double>(lhs) <= rhs * (1 + 1e-12)};
}

struct MomentReport {
    int n = 0;
    std::optional<double> m2, m3, m4;
    Estimate inner2, inner3, inner4;
    Estimate sigma2, sigma4;
    XiMoments xi;
    Budget budget;
};

inline MomentReport moment_report(const System& s, const Budget& budget)
{
    MomentReport r;
    r.n = s.n();
    r.budget = budget;
    const double n = s.n();
    const auto e = pair_expectation<3>(s, budget, [](const PairGram& g) {
        const double v = g.xy;
        return std::array<double, 3>{v * v, v * v * v, v * v * v * v};
    });
    r.inner2 = e[0], r.inner3 = e[1], r.inner4 = e[2];
    auto root = [n](double v, int p) -> std::optional<double> {
        if (v < 0)
            return std::nullopt;
        return std::pow(v, 1.0 / p) / std::sqrt(n);
    };
    r.m2 = root(e[0].value, 2);
    r.m3 = root(e[1].value, 3);
    r.m4 = root(e[2].value, 4);
    if (!s.flags().fixed_norm) {
        Budget b = budget;
        if (b.is_exact())
            b = Budget::monte_carlo(100'000, 0, 1);
        const double ps[] = {1, 2};
        const auto prof = sigma_profile(s, ps, b);
        r.sigma2 = prof[0], r.sigma4 = prof[1];
    }
    r.xi = xi_functionals(s, budget);
    return r;
}

inline nlohmann::json to_json(const Estimate& e) { return {{"value", e.value}, {"stderr", e.std_error}}; }

inline nlohmann::json to_json(const XiMoments& x)
{
    nlohmann::json j{{"E_xi", to_json(x.e1)}, {"E_xi2", to_json(x.e2)}, {"E_xi3", to_json(x.e3)},
                     {"E_xi4", to_json(x.e4)}};
    j["E_one_minus_sqrt"] = x.sqrt_term ? to_json(*x.sqrt_term) : nlohmann::json(nullptr);
    return j;
}

inline nlohmann::json to_json(const MomentReport& r)
{
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json mode = r.budget.is_exact()
                              ? nlohmann::json{{"kind", "exact"}}
                              : nlohmann::json{{"kind", "monte_carlo"}, {"samples", r.budget.samples}};
    return {{"n", r.n},
            {"m2", opt(r.m2)},
            {"m3", opt(r.m3)},
            {"m4", opt(r.m4)},
            {"inner_moments", {{"p2", to_json(r.inner2)}, {"p3", to_json(r.inner3)}, {"p4", to_json(r.inner4)}}},
            {"sigma2", to_json(r.sigma2)},
            {"sigma4", to_json(r.sigma4)},
            {"xi_moments", to_json(r.xi)},
            {"mode", mode},
            {"seed", r.budget.seed}};
}

} // namespace randclt

#endif
