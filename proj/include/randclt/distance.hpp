#ifndef RANDCLT_DISTANCE_HPP
#define RANDCLT_DISTANCE_HPP

#include "randclt/error.hpp"
#include "randclt/moments.hpp"
#include "randclt/normal.hpp"
#include "randclt/parallel.hpp"
#include "randclt/quadrature.hpp"
#include "randclt/random.hpp"
#include "randclt/sphere.hpp"
#include "randclt/systems.hpp"

#include <boost/math/tools/toms748_solve.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace randclt {

// ---------------------------------------------------------------------------
// Distribution representations
// ---------------------------------------------------------------------------

/// A discrete law: strictly increasing atoms with probability weights.
struct EmpiricalCDF {
    std::vector<double> atoms;
    std::vector<double> weights;

    double cdf(double x) const
    {
        const auto it = std::upper_bound(atoms.begin(), atoms.end(), x);
        double s = 0;
        for (auto i = atoms.begin(); i != it; ++i)
            s += weights[static_cast<std::size_t>(i - atoms.begin())];
        return std::min(1.0, s);
    }
};

/// Sorts, merges equal values and normalizes. Without weights every sample
/// gets 1/N.
inline EmpiricalCDF ecdf(std::span<const double> samples, std::span<const double> weights = {})
{
    if (samples.empty())
        throw invalid_parameter("ecdf needs at least one sample");
    if (!weights.empty() && weights.size() != samples.size())
        throw invalid_parameter("ecdf: weights and samples differ in length");
    std::vector<std::size_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return samples[a] < samples[b]; });
    double total = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        if (!(w >= 0) || !std::isfinite(samples[i]))
            throw invalid_parameter("ecdf: samples must be finite and weights nonnegative");
        total += w;
    }
    if (!(total > 0))
        throw invalid_parameter("ecdf: weights sum to zero");
    if (!weights.empty() && std::abs(total - 1) > 1e-12)
        throw invalid_parameter("ecdf: weights must sum to 1");
    EmpiricalCDF e;
    for (std::size_t i : idx) {
        const double w = (weights.empty() ? 1.0 : weights[i]) / total;
        if (!e.atoms.empty() && e.atoms.back() == samples[i])
            e.weights.back() += w;
        else {
            e.atoms.push_back(samples[i]);
            e.weights.push_back(w);
        }
    }
    return e;
}

/// A distribution function that is linear between breakpoints and may jump
/// at them. left[j] and right[j] are the one-sided limits at x[j]; left[0]
/// is 0 and right.back() is 1. Step functions and grid interpolants both fit.
struct PiecewiseCDF {
    std::vector<double> x, left, right;

    static PiecewiseCDF from_steps(const EmpiricalCDF& e)
    {
        PiecewiseCDF g;
        double cum = 0;
        for (std::size_t i = 0; i < e.atoms.size(); ++i) {
            g.x.push_back(e.atoms[i]);
            g.left.push_back(cum);
            cum += e.weights[i];
            g.right.push_back(i + 1 == e.atoms.size() ? 1.0 : std::min(cum, 1.0));
        }
        return g;
    }

    /// The law of a mixture of uniform laws on [lo_i, hi_i], each with
    /// weight 1/count. Cells narrower than `min_width` are treated as atoms
    /// at their midpoint, which moves at most min_width/2 of mass per cell.
    static PiecewiseCDF from_cells(std::span<const double> lo, std::span<const double> hi, double min_width)
    {
        const std::size_t m = lo.size();
        const long double w = 1.0L / static_cast<long double>(m);
        struct Event {
            double pos;
            long double slope_change;
            long double jump;
        };
        std::vector<Event> ev;
        ev.reserve(2 * m);
        for (std::size_t i = 0; i < m; ++i) {
            const double a = lo[i], b = hi[i];
            if (b - a <= min_width) {
                ev.push_back({0.5 * (a + b), 0, w});
            } else {
                const long double s = w / static_cast<long double>(b - a);
                ev.push_back({a, s, 0});
                ev.push_back({b, -s, 0});
            }
        }
        std::sort(ev.begin(), ev.end(), [](const Event& p, const Event& q) { return p.pos < q.pos; });

        // Neumaier-compensated running sums for the slope and the value.
        struct Sum {
            long double s = 0, c = 0;
            void add(long double v)
            {
                const long double t = s + v;
                c += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
                s = t;
            }
            long double get() const { return s + c; }
        };
        Sum slope, value;
        PiecewiseCDF g;
        double prev = ev.empty() ? 0 : ev.front().pos;
        for (std::size_t i = 0; i < ev.size();) {
            const double p = ev[i].pos;
            value.add(slope.get() * static_cast<long double>(p - prev));
            const double l = static_cast<double>(value.get());
            while (i < ev.size() && ev[i].pos == p) {
                slope.add(ev[i].slope_change);
                value.add(ev[i].jump);
                ++i;
            }
            g.x.push_back(p);
            g.left.push_back(std::clamp(l, 0.0, 1.0));
            g.right.push_back(std::clamp(static_cast<double>(value.get()), 0.0, 1.0));
            prev = p;
        }
        if (std::abs(static_cast<double>(value.get()) - 1) > 1e-9)
            throw numeric_failure("grid CDF construction drifted: final mass " +
                                  std::to_string(static_cast<double>(value.get())));
        g.left.front() = 0;
        g.right.back() = 1;
        return g;
    }

    double cdf(double t) const
    {
        if (x.empty() || t < x.front())
            return 0;
        if (t >= x.back())
            return 1;
        const std::size_t j = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), t) - x.begin()) - 1;
        if (t == x[j])
            return right[j];
        return right[j] + (left[j + 1] - right[j]) * (t - x[j]) / (x[j + 1] - x[j]);
    }
};

/// Continuous reference laws: the standard normal, the law of scale*theta_1,
/// and equal-weight mixtures of the latter (an atom at 0 for zero scales).
class AnalyticCDF {
public:
    enum class Kind { standard_normal, sphere_marginal, mixture };

    static AnalyticCDF standard_normal() { return AnalyticCDF(Kind::standard_normal, 2); }

    static AnalyticCDF sphere_marginal(int n, double scale)
    {
        if (!(scale > 0))
            throw invalid_parameter("sphere marginal scale must be positive");
        AnalyticCDF a(Kind::sphere_marginal, n);
        a.scales_ = {scale};
        return a;
    }

    static AnalyticCDF mixture(int n, std::vector<double> scales)
    {
        if (scales.empty())
            throw invalid_parameter("mixture needs at least one scale");
        AnalyticCDF a(Kind::mixture, n);
        const double w = 1.0 / static_cast<double>(scales.size());
        for (double r : scales) {
            if (!(r >= 0) || !std::isfinite(r))
                throw invalid_parameter("mixture scales must be finite and nonnegative");
            if (r == 0)
                a.atom_ += w;
            else
                a.scales_.push_back(r);
        }
        std::sort(a.scales_.begin(), a.scales_.end());
        a.weight_ = w;
        return a;
    }

    Kind kind() const noexcept { return kind_; }
    int n() const noexcept { return law_.n; }
    const std::vector<double>& scales() const noexcept { return scales_; }

    std::string label() const
    {
        std::ostringstream os;
        switch (kind_) {
        case Kind::standard_normal: return "normal";
        case Kind::sphere_marginal: os << "sphere_marginal(n=" << n() << ",scale=" << scales_[0] << ")"; break;
        case Kind::mixture: os << "mixture(n=" << n() << ",M=" << scales_.size() << ")"; break;
        }
        return os.str();
    }

    /// Radius of the support, empty for the normal law.
    std::optional<double> support_radius() const
    {
        if (kind_ == Kind::standard_normal)
            return std::nullopt;
        return scales_.empty() ? 0.0 : scales_.back();
    }

    double cdf(double x) const { return value(x, true); }
    double cdf_left(double x) const { return value(x, false); }

    /// Density of the continuous part.
    double density(double x) const
    {
        switch (kind_) {
        case Kind::standard_normal: return normal::pdf(x);
        case Kind::sphere_marginal: return law_.density(x / scales_[0]) / scales_[0];
        case Kind::mixture: {
            double s = 0;
            for (auto it = std::lower_bound(scales_.begin(), scales_.end(), std::abs(x)); it != scales_.end(); ++it)
                s += law_.density(x / *it) / *it;
            return weight_ * s;
        }
        }
        return 0;
    }

    /// \int_{-inf}^x cdf.
    double integral(double x) const
    {
        switch (kind_) {
        case Kind::standard_normal: return normal::int_cdf(x);
        case Kind::sphere_marginal: return scales_[0] * law_.integrated_cdf(x / scales_[0]);
        case Kind::mixture: {
            double s = 0;
            for (double r : scales_)
                s += r * law_.integrated_cdf(x / r);
            return weight_ * s + atom_ * std::max(x, 0.0);
        }
        }
        return 0;
    }

    /// Points splitting the line into cells on which the density is monotone.
    std::vector<double> breaks() const
    {
        std::vector<double> b{0.0};
        for (double r : scales_) {
            b.push_back(-r);
            b.push_back(r);
        }
        std::sort(b.begin(), b.end());
        b.erase(std::unique(b.begin(), b.end()), b.end());
        return b;
    }

    /// A point of (lo, hi) where density = level, given that the density is
    /// monotone there and density(lo) - level, density(hi) - level differ in sign.
    double level_point(double level, double lo, double hi) const
    {
        if (kind_ == Kind::standard_normal) {
            const double r = std::sqrt(std::max(0.0, -2 * std::log(level / normal::inv_sqrt_2pi)));
            return std::clamp(lo + hi >= 0 ? r : -r, lo, hi);
        }
        if (kind_ == Kind::sphere_marginal && n() != 3) {
            const double r = scales_[0];
            const double base = std::pow(level * r / law_.normalizer, 2.0 / (n() - 3));
            const double u = std::sqrt(std::max(0.0, 1 - base));
            return std::clamp(lo + hi >= 0 ? r * u : -r * u, lo, hi);
        }
        return root([&](double x) { return density(x) - level; }, lo, hi);
    }

    template <class F>
    static double root(F&& f, double lo, double hi)
    {
        double flo = f(lo), fhi = f(hi);
        if (flo == 0)
            return lo;
        if (fhi == 0)
            return hi;
        if ((flo > 0) == (fhi > 0))
            return std::abs(flo) < std::abs(fhi) ? lo : hi;
        std::uintmax_t iters = 200;
        const auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi,
                                                          boost::math::tools::eps_tolerance<double>(50), iters);
        return 0.5 * (r.first + r.second);
    }

private:
    AnalyticCDF(Kind k, int n) : kind_(k), law_(n) {}

    double value(double x, bool right) const
    {
        switch (kind_) {
        case Kind::standard_normal: return normal::cdf(x);
        case Kind::sphere_marginal: return law_.cdf(x / scales_[0]);
        case Kind::mixture: {
            double s = 0;
            for (double r : scales_) {
                if (x >= r)
                    s += 1;
                else if (x > -r)
                    s += law_.cdf(x / r);
            }
            const bool with_atom = right ? x >= 0 : x > 0;
            return std::min(1.0, weight_ * s + (with_atom ? atom_ : 0.0));
        }
        }
        return 0;
    }

    Kind kind_;
    SphereLaw law_;
    std::vector<double> scales_;
    double weight_ = 1;
    double atom_ = 0;
};

// ---------------------------------------------------------------------------
// Distances
// ---------------------------------------------------------------------------

/// Which of rho, omega^2, W to compute.
enum MetricMask : unsigned { want_rho = 1, want_omega_sq = 2, want_w = 4, want_all = 7 };

struct DistanceSet {
    double rho = 0;
    double omega_sq = 0;
    double kantorovich = 0;
};

namespace detail {

inline double gl3_sq(double g0, double slope, double p, double q, const AnalyticCDF& h)
{
    return quad::gauss<3>(
        [&](double x) {
            const double d = g0 + slope * (x - p) - h.cdf(x);
            return d * d;
        },
        p, q);
}

struct Node {
    double x, gl, gr;
};

/// G (piecewise linear with jumps) against an analytic H.
inline DistanceSet compare(const PiecewiseCDF& g, const AnalyticCDF& h, unsigned mask)
{
    if (g.x.empty())
        throw invalid_parameter("empty distribution function");
    // Merge G's breakpoints with H's monotonicity breaks; cover H's support.
    std::vector<Node> nodes;
    const auto hb = h.breaks();
    const auto radius = h.support_radius();
    {
        std::vector<double> extra;
        for (double b : hb)
            extra.push_back(b);
        std::size_t k = 0;
        auto emit_extra_until = [&](double limit) {
            while (k < extra.size() && extra[k] < limit) {
                const double t = extra[k++];
                const double v = g.cdf(t);
                nodes.push_back({t, v, v});
            }
            while (k < extra.size() && extra[k] == limit)
                ++k;
        };
        for (std::size_t j = 0; j < g.x.size(); ++j) {
            emit_extra_until(g.x[j]);
            nodes.push_back({g.x[j], g.left[j], g.right[j]});
        }
        emit_extra_until(std::numeric_limits<double>::infinity());
    }
    if (radius) {
        if (-*radius < nodes.front().x)
            nodes.insert(nodes.begin(), Node{-*radius, 0, 0});
        if (*radius > nodes.back().x)
            nodes.push_back({*radius, 1, 1});
    }

    const bool do_rho = mask & want_rho, do_sq = mask & want_omega_sq, do_w = mask & want_w;
    DistanceSet out;
    long double sq = 0, w = 0;

    auto h_int = [&](double x) { return h.integral(x); };
    double prev_hr = h.cdf(nodes.front().x);
    double prev_int = do_w ? h_int(nodes.front().x) : 0;
    if (do_rho)
        out.rho = std::max(std::abs(nodes.front().gl - h.cdf_left(nodes.front().x)),
                           std::abs(nodes.front().gr - prev_hr));

    for (std::size_t j = 0; j + 1 < nodes.size(); ++j) {
        const double p = nodes[j].x, q = nodes[j + 1].x;
        const double g0 = nodes[j].gr, g1 = nodes[j + 1].gl;
        const double width = q - p;
        const double slope = width > 0 ? (g1 - g0) / width : 0;
        const double hl_q = h.cdf_left(q), hr_q = h.cdf(q);
        const double int_q = do_w ? h_int(q) : 0;

        auto D = [&](double x) { return g0 + slope * (x - p) - h.cdf(x); };

        // Interior extremum of D where the density of H equals the slope.
        std::optional<double> crit;
        if ((do_rho || do_w) && width > 0 && slope > 0) {
            const double dp = slope - h.density(p), dq = slope - h.density(q);
            if ((dp > 0 && dq < 0) || (dp < 0 && dq > 0)) {
                const double c = h.level_point(slope, p, q);
                if (c > p && c < q)
                    crit = c;
            }
        }
        const double d_p = g0 - prev_hr, d_q = g1 - hl_q;
        double d_c = 0;
        if (crit)
            d_c = D(*crit);
        if (do_rho) {
            out.rho = std::max({out.rho, std::abs(d_q), std::abs(nodes[j + 1].gr - hr_q)});
            if (crit)
                out.rho = std::max(out.rho, std::abs(d_c));
        }
        if (do_w && width > 0) {
            // Split at the extremum and at the sign changes of D.
            double pts[5];
            double vals[5];
            int m = 0;
            pts[m] = p, vals[m++] = d_p;
            if (crit)
                pts[m] = *crit, vals[m++] = d_c;
            pts[m] = q, vals[m++] = d_q;
            double a = p, ia = prev_int;
            for (int i = 0; i + 1 < m; ++i) {
                if ((vals[i] > 0 && vals[i + 1] < 0) || (vals[i] < 0 && vals[i + 1] > 0)) {
                    const double r = AnalyticCDF::root(D, pts[i], pts[i + 1]);
                    const double ir = h_int(r);
                    const double ig = (g0 + 0.5 * slope * ((a - p) + (r - p))) * (r - a);
                    w += std::abs(ig - (ir - ia));
                    a = r, ia = ir;
                }
            }
            const double ig = (g0 + 0.5 * slope * ((a - p) + (q - p))) * (q - a);
            w += std::abs(ig - (int_q - ia));
        }
        if (do_sq && width > 0) {
            if (width < 0.05) {
                sq += gl3_sq(g0, slope, p, q, h);
            } else {
                quad::Options opt;
                opt.abs_tol = 1e-15;
                opt.rel_tol = 1e-13;
                sq += quad::integrate([&](double x) { double d = D(x); return d * d; }, p, q, opt).value;
            }
        }
        prev_hr = hr_q;
        prev_int = int_q;
    }

    if (!radius) {
        // Normal tails outside the nodes: G is 0 on the left and 1 on the right.
        const double lo = nodes.front().x, hi = nodes.back().x;
        sq += normal::left_tail_sq(lo) + normal::right_tail_sq(hi);
        w += normal::left_tail(lo) + normal::right_tail(hi);
    }
    out.omega_sq = static_cast<double>(sq);
    out.kantorovich = static_cast<double>(w);
    return out;
}

/// Both sides piecewise linear: D is linear between merged breakpoints.
inline DistanceSet compare(const PiecewiseCDF& a, const PiecewiseCDF& b, unsigned = want_all)
{
    std::vector<double> xs = a.x;
    xs.insert(xs.end(), b.x.begin(), b.x.end());
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    auto one_sided = [](const PiecewiseCDF& g, double t, bool right) {
        const auto it = std::lower_bound(g.x.begin(), g.x.end(), t);
        if (it != g.x.end() && *it == t) {
            const std::size_t j = static_cast<std::size_t>(it - g.x.begin());
            return right ? g.right[j] : g.left[j];
        }
        return g.cdf(t);
    };
    DistanceSet out;
    long double sq = 0, w = 0;
    for (std::size_t j = 0; j < xs.size(); ++j) {
        const double dl = one_sided(a, xs[j], false) - one_sided(b, xs[j], false);
        const double dr = one_sided(a, xs[j], true) - one_sided(b, xs[j], true);
        out.rho = std::max({out.rho, std::abs(dl), std::abs(dr)});
        if (j + 1 == xs.size())
            break;
        const double L = xs[j + 1] - xs[j];
        const double d0 = dr;
        const double d1 = one_sided(a, xs[j + 1], false) - one_sided(b, xs[j + 1], false);
        sq += L * (d0 * d0 + d0 * d1 + d1 * d1) / 3;
        if ((d0 > 0 && d1 < 0) || (d0 < 0 && d1 > 0)) {
            const double t = d0 / (d0 - d1);
            w += 0.5 * L * (t * std::abs(d0) + (1 - t) * std::abs(d1));
        } else {
            w += 0.5 * L * std::abs(d0 + d1);
        }
    }
    out.omega_sq = static_cast<double>(sq);
    out.kantorovich = static_cast<double>(w);
    return out;
}

/// Two analytic laws. Critical points of D are located on a uniform scan of
/// `cells` cells over the bounded part and refined by root finding; a pair of
/// sign changes of D' inside one cell would be missed.
inline DistanceSet compare(const AnalyticCDF& a, const AnalyticCDF& b, unsigned mask, int cells = 4000)
{
    const auto ra = a.support_radius(), rb = b.support_radius();
    if (!ra && !rb)
        return {};
    const double R = std::max(ra.value_or(0), rb.value_or(0));
    std::vector<double> xs;
    for (int i = 0; i <= cells; ++i)
        xs.push_back(-R + 2 * R * i / cells);
    for (double t : a.breaks())
        xs.push_back(t);
    for (double t : b.breaks())
        xs.push_back(t);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    xs.erase(std::remove_if(xs.begin(), xs.end(), [R](double t) { return t < -R || t > R; }), xs.end());

    auto D = [&](double x) { return a.cdf(x) - b.cdf(x); };
    auto dD = [&](double x) { return a.density(x) - b.density(x); };
    // Insert critical points of D.
    std::vector<double> pts;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        pts.push_back(xs[i]);
        const double lo = xs[i], hi = xs[i + 1];
        const double eps = 1e-12 * (hi - lo);
        const double f0 = dD(lo + eps), f1 = dD(hi - eps);
        if (std::isfinite(f0) && std::isfinite(f1) && ((f0 > 0 && f1 < 0) || (f0 < 0 && f1 > 0)))
            pts.push_back(AnalyticCDF::root(dD, lo + eps, hi - eps));
    }
    pts.push_back(xs.back());

    DistanceSet out;
    long double sq = 0, w = 0;
    for (double t : pts)
        out.rho = std::max({out.rho, std::abs(D(t)), std::abs(a.cdf_left(t) - b.cdf_left(t))});
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        double lo = pts[i], hi = pts[i + 1];
        if (mask & want_omega_sq) {
            quad::Options opt;
            opt.abs_tol = 1e-16;
            opt.rel_tol = 1e-12;
            sq += quad::integrate([&](double x) { double d = D(x); return d * d; }, lo, hi, opt).value;
        }
        if (mask & want_w) {
            const double d0 = D(lo), d1 = D(hi);
            double cut = lo;
            if ((d0 > 0 && d1 < 0) || (d0 < 0 && d1 > 0)) {
                cut = AnalyticCDF::root(D, lo, hi);
                w += std::abs((a.integral(cut) - a.integral(lo)) - (b.integral(cut) - b.integral(lo)));
            }
            w += std::abs((a.integral(hi) - a.integral(cut)) - (b.integral(hi) - b.integral(cut)));
        }
    }
    if (!ra || !rb) {
        // One side is the normal law; the other is 0 or 1 beyond +-R.
        sq += normal::left_tail_sq(-R) + normal::right_tail_sq(R);
        w += normal::left_tail(-R) + normal::right_tail(R);
        out.rho = std::max(out.rho, normal::cdf(-R));
    }
    out.omega_sq = static_cast<double>(sq);
    out.kantorovich = static_cast<double>(w);
    return out;
}

} // namespace detail

inline DistanceSet distances(const PiecewiseCDF& g, const AnalyticCDF& h, unsigned mask = want_all)
{
    return detail::compare(g, h, mask);
}
inline DistanceSet distances(const EmpiricalCDF& e, const AnalyticCDF& h, unsigned mask = want_all)
{
    return detail::compare(PiecewiseCDF::from_steps(e), h, mask);
}
inline DistanceSet distances(const AnalyticCDF& a, const AnalyticCDF& h, unsigned mask = want_all)
{
    return detail::compare(a, h, mask);
}
inline DistanceSet distances(const EmpiricalCDF& a, const EmpiricalCDF& b, unsigned mask = want_all)
{
    return detail::compare(PiecewiseCDF::from_steps(a), PiecewiseCDF::from_steps(b), mask);
}
inline DistanceSet distances(const PiecewiseCDF& a, const PiecewiseCDF& b, unsigned mask = want_all)
{
    return detail::compare(a, b, mask);
}

/// Kolmogorov distance sup |A - B|.
template <class A, class B>
double kolmogorov(const A& a, const B& b)
{
    return distances(a, b, want_rho).rho;
}

/// L2 distance of the distribution functions.
template <class A, class B>
double l2_dist(const A& a, const B& b)
{
    return std::sqrt(distances(a, b, want_omega_sq).omega_sq);
}

template <class A, class B>
double omega_sq(const A& a, const B& b)
{
    return distances(a, b, want_omega_sq).omega_sq;
}

/// Kantorovich (L1) distance of the distribution functions.
template <class A, class B>
double kantorovich(const A& a, const B& b)
{
    return distances(a, b, want_w).kantorovich;
}

// ---------------------------------------------------------------------------
// The typical distribution
// ---------------------------------------------------------------------------

/// |X_i| for i < count, drawn from the typical-mixture substream.
inline std::vector<double> sample_norms(const System& s, std::size_t count, std::uint64_t seed, unsigned threads = 1)
{
    const Stream root = Stream(seed).split(substream::typical_mixture);
    std::vector<double> out(count);
    const std::size_t n = static_cast<std::size_t>(s.n());
    parallel_for(chunk_count(count), threads, [&](std::size_t c) {
        auto eng = root.split(c).engine();
        std::vector<double> x(n);
        for (std::size_t i = c * mc_chunk_size; i < std::min(count, (c + 1) * mc_chunk_size); ++i) {
            s.evaluate(s.sample_omega(eng), x);
            out[i] = std::sqrt(detail::norm_sq(x));
        }
    });
    return out;
}

/// The typical law E_theta F_theta: exact for fixed-norm systems, otherwise
/// a frozen mixture over `mixture_size` samples of |X|.
inline AnalyticCDF typical_target(const System& s, std::size_t mixture_size, std::uint64_t seed)
{
    if (s.flags().fixed_norm)
        return AnalyticCDF::sphere_marginal(s.n(), std::sqrt(static_cast<double>(s.n())));
    return AnalyticCDF::mixture(s.n(), sample_norms(s, mixture_size, seed));
}

/// F(x) = P{|X| theta_1 <= x}.
inline Estimate typical_cdf(const System& s, double x, const Budget& budget)
{
    const SphereLaw law(s.n());
    if (s.flags().fixed_norm)
        return {law.cdf(x / std::sqrt(static_cast<double>(s.n()))), 0};
    if (budget.is_exact())
        throw unsupported_mode("exact typical distribution needs a fixed-norm system");
    const std::size_t n = static_cast<std::size_t>(s.n());
    return detail::chunked_mc<1>(budget.samples, budget.seed, substream::typical_mixture, budget.threads,
                                 [&](auto& eng) {
                                     std::vector<double> v(n);
                                     s.evaluate(s.sample_omega(eng), v);
                                     const double r = std::sqrt(detail::norm_sq(v));
                                     const double val = r > 0 ? law.cdf(x / r) : (x >= 0 ? 1.0 : 0.0);
                                     return std::array<double, 1>{val};
                                 })[0];
}

/// \int (1 + x^2) |F(dx) - Phi(dx)| for the typical law of a fixed-norm system.
inline double weighted_tv_typical(const System& s)
{
    if (!s.flags().fixed_norm)
        throw unsupported_mode("weighted_tv_typical requires a fixed-norm system");
    const int n = s.n();
    const double sn = std::sqrt(static_cast<double>(n));
    const SphereLaw law(n);
    // x = sqrt(n) sin v on [0, pi/2]; the sphere density times dx/dv is smooth.
    auto diff = [&](double v) {
        const double c = std::cos(v), x = sn * std::sin(v);
        const double f = law.normalizer * (n == 2 ? 1.0 : std::pow(c, n - 2));
        return f - normal::pdf(x) * sn * c;
    };
    auto weight = [&](double v) {
        const double x = sn * std::sin(v);
        return 1 + x * x;
    };
    const int scan = 2000;
    std::vector<double> cuts{0};
    double prev = diff(0);
    for (int i = 1; i <= scan; ++i) {
        const double v = 0.5 * std::numbers::pi * i / scan;
        const double cur = diff(v);
        if ((prev > 0 && cur < 0) || (prev < 0 && cur > 0))
            cuts.push_back(AnalyticCDF::root(diff, 0.5 * std::numbers::pi * (i - 1) / scan, v));
        prev = cur;
    }
    cuts.push_back(0.5 * std::numbers::pi);
    quad::Options opt;
    opt.abs_tol = 1e-12;
    opt.rel_tol = 1e-12;
    long double total = 0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        total += std::abs(
            quad::integrate([&](double v) { return weight(v) * diff(v); }, cuts[i], cuts[i + 1], opt).value);
    // Normal mass beyond sqrt(n): \int_a^inf (1+x^2) phi = 2(1-Phi(a)) + a phi(a).
    const double tail = 2 * normal::survival(sn) + sn * normal::pdf(sn);
    return static_cast<double>(2 * (total + tail));
}

// ---------------------------------------------------------------------------
// F_theta
// ---------------------------------------------------------------------------

/// The law of <X, theta>, with a bound on its Kantorovich distance to the
/// exact law (0 for finite systems; NaN when no certificate is available).
struct ThetaLaw {
    PiecewiseCDF cdf;
    std::optional<EmpiricalCDF> discrete;
    double w_error = 0;
};

namespace detail {

/// Values of a trig form at u = i/K, i = 0..K, by complex rotation with a
/// fresh start every 1024 steps.
inline std::vector<double> trig_grid(const TrigForm& f, std::size_t K)
{
    std::vector<double> v(K + 1, 0.0);
    for (const auto& term : f.terms) {
        const double step = term.frequency * f.angle_span / static_cast<double>(K);
        const std::complex<double> rot = std::polar(1.0, step);
        std::complex<double> z;
        for (std::size_t i = 0; i <= K; ++i) {
            if (i % 1024 == 0)
                z = std::polar(1.0, term.frequency * f.angle_offset + step * static_cast<double>(i));
            v[i] += term.cos_coef * z.real() + term.sin_coef * z.imag();
            z *= rot;
        }
    }
    return v;
}

inline double trig_curvature(const TrigForm& f)
{
    double m = 0;
    for (const auto& t : f.terms)
        m += t.frequency * t.frequency * std::hypot(t.cos_coef, t.sin_coef);
    return m * f.angle_span * f.angle_span;
}

} // namespace detail

/// Smallest grid size for which a trig-type F_theta is certified to `tol`.
inline std::size_t required_inner_budget(const TrigForm& f, double tol)
{
    return static_cast<std::size_t>(std::ceil(std::sqrt(detail::trig_curvature(f) / (8 * tol))));
}

/// Builds F_theta. Interval systems use the piecewise-linear interpolant of
/// u -> <X(u), theta> on K cells; its law is a mixture of uniform laws, and
/// the W distance to F_theta is at most sup|S''| / (8 K^2).
inline ThetaLaw theta_law(const System& s, std::span<const double> theta, std::size_t inner_budget, double tol)
{
    if (theta.size() != static_cast<std::size_t>(s.n()))
        throw invalid_parameter("theta has the wrong dimension");
    ThetaLaw out;
    if (s.finite()) {
        const std::size_t atoms = s.atom_count();
        std::vector<double> vals(atoms);
        std::vector<double> x(static_cast<std::size_t>(s.n()));
        for (std::size_t a = 0; a < atoms; ++a) {
            s.evaluate(s.atom(a), x);
            vals[a] = detail::dot(x, theta);
        }
        out.discrete = ecdf(vals);
        out.cdf = PiecewiseCDF::from_steps(*out.discrete);
        return out;
    }
    if (inner_budget < 2)
        throw invalid_parameter("inner budget must be at least 2");
    if (const auto form = s.trig_form(theta)) {
        const double eps = detail::trig_curvature(*form) / (8.0 * static_cast<double>(inner_budget) * inner_budget);
        if (eps > tol) {
            const std::size_t need = required_inner_budget(*form, tol);
            throw budget_error("inner budget " + std::to_string(inner_budget) + " certifies only " +
                                   std::to_string(eps) + " > " + std::to_string(tol) + "; need at least " +
                                   std::to_string(need),
                               need);
        }
        const auto v = detail::trig_grid(*form, inner_budget);
        std::vector<double> lo(inner_budget), hi(inner_budget);
        for (std::size_t i = 0; i < inner_budget; ++i) {
            lo[i] = std::min(v[i], v[i + 1]);
            hi[i] = std::max(v[i], v[i + 1]);
        }
        out.cdf = PiecewiseCDF::from_cells(lo, hi, 1e-13);
        out.w_error = eps + 1e-13;
        return out;
    }
    // Shifted periodic: slices in s, linear cells in t inside each slice.
    const auto* prof = s.profile();
    const std::size_t ks = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(inner_budget)) / 4));
    const std::size_t kt = std::max<std::size_t>(2, inner_budget / ks);
    std::vector<double> lo, hi;
    lo.reserve(ks * kt);
    hi.reserve(ks * kt);
    std::vector<double> row(kt + 1);
    for (std::size_t j = 0; j < ks; ++j) {
        const double sh = (static_cast<double>(j) + 0.5) / static_cast<double>(ks);
        for (std::size_t i = 0; i <= kt; ++i) {
            const double t = static_cast<double>(i) / static_cast<double>(kt);
            double acc = 0;
            for (std::size_t k = 0; k < theta.size(); ++k)
                acc += theta[k] * prof->psi(static_cast<double>(k + 1) * t + sh);
            row[i] = acc;
        }
        for (std::size_t i = 0; i < kt; ++i) {
            lo.push_back(std::min(row[i], row[i + 1]));
            hi.push_back(std::max(row[i], row[i + 1]));
        }
    }
    out.cdf = PiecewiseCDF::from_cells(lo, hi, 1e-13);
    if (!prof->lipschitz) {
        out.w_error = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    double sum_abs = 0, sum_k = 0, sum_k2 = 0;
    for (std::size_t k = 0; k < theta.size(); ++k) {
        const double a = std::abs(theta[k]), kk = static_cast<double>(k + 1);
        sum_abs += a, sum_k += a * kk, sum_k2 += a * kk * kk;
    }
    const double ht = 1.0 / static_cast<double>(kt), hs = 1.0 / static_cast<double>(ks);
    const double t_err = prof->curvature ? *prof->curvature * sum_k2 * ht * ht / 8 : *prof->lipschitz * sum_k * ht / 2;
    out.w_error = t_err + *prof->lipschitz * sum_abs * hs / 4;
    if (out.w_error > tol)
        throw budget_error("shifted_periodic grid certifies only " + std::to_string(out.w_error) + " > " +
                               std::to_string(tol),
                           static_cast<std::size_t>(std::ceil(static_cast<double>(inner_budget) *
                                                              std::pow(out.w_error / tol, 2))));
    return out;
}

// ---------------------------------------------------------------------------
// Sphere averages
// ---------------------------------------------------------------------------

enum class Metric { rho, omega, omega_sq, rho_sq, kantorovich };
enum class Target { normal, typical };

inline std::string_view to_string(Metric m)
{
    switch (m) {
    case Metric::rho: return "rho";
    case Metric::omega: return "omega";
    case Metric::omega_sq: return "omega_sq";
    case Metric::rho_sq: return "rho_sq";
    case Metric::kantorovich: return "kantorovich";
    }
    return "?";
}

inline std::string_view to_string(Target t) { return t == Target::normal ? "normal" : "typical"; }

inline Metric metric_from_string(std::string_view s)
{
    for (auto m : {Metric::rho, Metric::omega, Metric::omega_sq, Metric::rho_sq, Metric::kantorovich})
        if (to_string(m) == s)
            return m;
    throw invalid_parameter("unknown metric '" + std::string(s) + "'");
}

inline Target target_from_string(std::string_view s)
{
    if (s == "normal")
        return Target::normal;
    if (s == "typical")
        return Target::typical;
    throw invalid_parameter("unknown target '" + std::string(s) + "'");
}

inline unsigned mask_for(Metric m)
{
    switch (m) {
    case Metric::rho:
    case Metric::rho_sq: return want_rho;
    case Metric::omega:
    case Metric::omega_sq: return want_omega_sq;
    case Metric::kantorovich: return want_w;
    }
    return want_all;
}

inline double metric_value(const DistanceSet& d, Metric m)
{
    switch (m) {
    case Metric::rho: return d.rho;
    case Metric::rho_sq: return d.rho * d.rho;
    case Metric::omega: return std::sqrt(d.omega_sq);
    case Metric::omega_sq: return d.omega_sq;
    case Metric::kantorovich: return d.kantorovich;
    }
    return 0;
}

struct SphereOptions {
    std::size_t n_theta = 200;
    std::size_t inner_budget = std::size_t{1} << 16;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    double certify_tol = 1e-3;
    std::size_t mixture_size = 256;
};

/// theta_i for i < count, each from its own substream.
inline UnitVector sphere_direction(int n, std::uint64_t seed, std::size_t i)
{
    return sample_unit_sphere(n, Stream(seed).split(substream::theta).split(i));
}

/// Per-theta distances of F_theta to the target for theta_0, ..., theta_{n_theta-1}.
inline std::vector<DistanceSet> sphere_distance_samples(const System& s, Target target, const SphereOptions& opt,
                                                        unsigned mask = want_all)
{
    if (opt.n_theta < 1)
        throw invalid_parameter("n_theta must be at least 1");
    const AnalyticCDF ref = target == Target::normal ? AnalyticCDF::standard_normal()
                                                     : typical_target(s, opt.mixture_size, opt.seed);
    std::vector<DistanceSet> out(opt.n_theta);
    parallel_for(opt.n_theta, opt.threads, [&](std::size_t i) {
        const UnitVector th = sphere_direction(s.n(), opt.seed, i);
        const ThetaLaw law = theta_law(s, th.coords(), opt.inner_budget, opt.certify_tol);
        out[i] = distances(law.cdf, ref, mask);
    });
    return out;
}

struct SphereAverage {
    std::string system;
    std::string kind;
    int n = 0;
    Metric metric = Metric::omega_sq;
    Target target = Target::normal;
    double mean = 0;
    double std_error = 0;
    std::size_t n_theta = 0;
    std::size_t inner_budget = 0;
    std::uint64_t seed = 0;
    std::vector<double> samples; ///< per-theta values, not serialized
};

inline SphereAverage summarize(const System& s, Metric m, Target t, const SphereOptions& opt,
                               std::span<const DistanceSet> per_theta)
{
    SphereAverage a;
    a.system = s.label();
    a.kind = std::string(to_string(s.kind()));
    a.n = s.n();
    a.metric = m;
    a.target = t;
    a.n_theta = per_theta.size();
    a.inner_budget = s.finite() ? 0 : opt.inner_budget;
    a.seed = opt.seed;
    detail::Accum<1> acc;
    for (const auto& d : per_theta) {
        a.samples.push_back(metric_value(d, m));
        acc.add({a.samples.back()});
    }
    const Estimate e = acc.finish()[0];
    a.mean = e.value;
    a.std_error = e.std_error;
    return a;
}

/// E_theta d(F_theta, target) for several metrics from one set of directions.
inline std::vector<SphereAverage> sphere_average(const System& s, std::span<const Metric> metrics, Target target,
                                                 const SphereOptions& opt)
{
    unsigned mask = 0;
    for (auto m : metrics)
        mask |= mask_for(m);
    const auto per = sphere_distance_samples(s, target, opt, mask);
    std::vector<SphereAverage> out;
    for (auto m : metrics)
        out.push_back(summarize(s, m, target, opt, per));
    return out;
}

inline SphereAverage sphere_average_distance(const System& s, Metric metric, Target target, const SphereOptions& opt)
{
    const Metric ms[] = {metric};
    return sphere_average(s, ms, target, opt).front();
}

inline constexpr const char* csv_header = "system,kind,n,metric,target,mean,stderr,n_theta,inner_budget,seed";

inline std::string format_real(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline std::string to_csv_row(const SphereAverage& a)
{
    std::ostringstream os;
    os << '"' << a.system << "\"," << a.kind << ',' << a.n << ',' << to_string(a.metric) << ','
       << to_string(a.target) << ',' << format_real(a.mean) << ',' << format_real(a.std_error) << ',' << a.n_theta
       << ',' << a.inner_budget << ',' << a.seed;
    return os.str();
}

inline nlohmann::json to_json(const SphereAverage& a)
{
    return {{"system", a.system},   {"kind", a.kind},         {"n", a.n},
            {"metric", to_string(a.metric)}, {"target", to_string(a.target)}, {"mean", a.mean},
            {"stderr", a.std_error}, {"n_theta", a.n_theta}, {"inner_budget", a.inner_budget},
            {"seed", a.seed}};
}

} // namespace randclt

#endif
