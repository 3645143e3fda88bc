#ifndef RANDCLT_SYSTEMS_HPP
#define RANDCLT_SYSTEMS_HPP

#include "randclt/error.hpp"
#include "randclt/quadrature.hpp"
#include "randclt/random.hpp"
#include "randclt/sphere.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace randclt {

enum class SystemKind { trig, cosine, chebyshev, shifted_periodic, walsh, empirical, lacunary_trig };

inline std::string_view to_string(SystemKind k)
{
    switch (k) {
    case SystemKind::trig: return "trig";
    case SystemKind::cosine: return "cosine";
    case SystemKind::chebyshev: return "chebyshev";
    case SystemKind::shifted_periodic: return "shifted_periodic";
    case SystemKind::walsh: return "walsh";
    case SystemKind::empirical: return "empirical";
    case SystemKind::lacunary_trig: return "lacunary_trig";
    }
    return "?";
}

inline SystemKind system_kind_from_string(std::string_view s)
{
    for (auto k : {SystemKind::trig, SystemKind::cosine, SystemKind::chebyshev, SystemKind::shifted_periodic,
                   SystemKind::walsh, SystemKind::empirical, SystemKind::lacunary_trig})
        if (to_string(k) == s)
            return k;
    throw invalid_parameter("unknown system kind '" + std::string(s) + "'");
}

struct SystemFlags {
    bool isotropic = false;
    bool fixed_norm = false; ///< |X|^2 = n almost surely
    bool mean_zero = false;
    double sup_norm_bound = 0; ///< b with max_k |X_k| <= b
};

/// A 1-periodic profile Psi for the system X_k(t,s) = Psi(kt + s).
struct PeriodicProfile {
    std::string name;
    std::function<double(double)> psi;
    std::optional<double> lipschitz;     ///< sup |Psi'|; empty when Psi is not Lipschitz
    std::optional<double> curvature;     ///< sup |Psi''| where it exists
    std::optional<double> fourth_moment; ///< \int_0^1 Psi^4
    double sup_abs = 0;                  ///< sup |Psi|

    /// "cosine": sqrt(2) cos(2 pi x); "triangle": sqrt(3)(1 - 4|{x} - 1/2|);
    /// "sawtooth": sqrt(3)(2{x} - 1), which is not Lipschitz.
    static PeriodicProfile preset(std::string_view which)
    {
        using std::numbers::pi;
        PeriodicProfile p;
        p.name = std::string(which);
        if (which == "cosine") {
            p.psi = [](double x) { return std::numbers::sqrt2 * std::cos(2 * pi * x); };
            p.lipschitz = 2 * pi * std::numbers::sqrt2;
            p.curvature = 4 * pi * pi * std::numbers::sqrt2;
            p.fourth_moment = 1.5;
            p.sup_abs = std::numbers::sqrt2;
        } else if (which == "triangle") {
            p.psi = [](double x) {
                const double f = x - std::floor(x);
                return std::numbers::sqrt3 * (1 - 4 * std::abs(f - 0.5));
            };
            p.lipschitz = 4 * std::numbers::sqrt3;
            p.fourth_moment = 1.8;
            p.sup_abs = std::numbers::sqrt3;
        } else if (which == "sawtooth") {
            p.psi = [](double x) { return std::numbers::sqrt3 * (2 * (x - std::floor(x)) - 1); };
            p.fourth_moment = 1.8;
            p.sup_abs = std::numbers::sqrt3;
        } else {
            throw invalid_parameter("unknown periodic profile '" + std::string(which) + "'");
        }
        return p;
    }
};

/// A point of the underlying sample space. Continuous systems use t (and s
/// for the unit square); finite systems use the atom index.
struct Omega {
    double t = 0;
    double s = 0;
    std::uint64_t atom = 0;
};

struct SystemSample {
    std::vector<double> x;
    Omega omega;
};

/// <X(angle), theta> = sum_j c_j cos(f_j angle) + s_j sin(f_j angle), where
/// angle = offset + span * u and u is uniform on [0,1].
struct TrigTerm {
    double frequency;
    double cos_coef;
    double sin_coef;
};

struct TrigForm {
    double angle_offset;
    double angle_span;
    bool periodic;
    std::vector<TrigTerm> terms;
};

struct SystemParams {
    int d = 0;                          ///< walsh: n = 2^d - 1
    std::vector<long long> frequencies; ///< lacunary_trig, explicit
    double q = 0;                       ///< lacunary_trig, geometric rule
    long long m1 = 1;                   ///< lacunary_trig, geometric rule
    std::optional<PeriodicProfile> profile;
};

/// An orthonormal system X = (X_1, ..., X_n) on its probability space.
/// Immutable after construction.
class System {
public:
    SystemKind kind() const noexcept { return kind_; }
    int n() const noexcept { return n_; }
    int walsh_order() const noexcept { return d_; }
    const std::vector<long long>& frequencies() const noexcept { return freqs_; }
    const PeriodicProfile* profile() const noexcept { return profile_ ? &*profile_ : nullptr; }
    const SystemFlags& flags() const noexcept { return flags_; }

    std::string label() const
    {
        std::ostringstream os;
        os << to_string(kind_);
        if (kind_ == SystemKind::walsh)
            os << "(d=" << d_ << ")";
        else if (kind_ == SystemKind::shifted_periodic)
            os << "(" << profile_->name << ",n=" << n_ << ")";
        else
            os << "(n=" << n_ << ")";
        return os.str();
    }

    bool finite() const noexcept { return kind_ == SystemKind::walsh || kind_ == SystemKind::empirical; }

    std::size_t atom_count() const
    {
        if (kind_ == SystemKind::walsh)
            return std::size_t{1} << d_;
        if (kind_ == SystemKind::empirical)
            return static_cast<std::size_t>(n_);
        throw unsupported_mode(label() + " has a continuous sample space");
    }

    /// X(omega), written to out (length n).
    void evaluate(const Omega& w, std::span<double> out) const
    {
        using std::numbers::pi;
        using std::numbers::sqrt2;
        const int n = n_;
        switch (kind_) {
        case SystemKind::trig:
        case SystemKind::lacunary_trig:
            for (int k = 0; k < n / 2; ++k) {
                const double f = kind_ == SystemKind::trig ? k + 1.0 : static_cast<double>(freqs_[k]);
                out[2 * k] = sqrt2 * std::cos(f * w.t);
                out[2 * k + 1] = sqrt2 * std::sin(f * w.t);
            }
            break;
        case SystemKind::cosine:
            for (int k = 0; k < n; ++k)
                out[k] = sqrt2 * std::cos((k + 1.0) * w.t);
            break;
        case SystemKind::chebyshev: {
            const double a = std::acos(std::clamp(w.t, -1.0, 1.0));
            for (int k = 0; k < n; ++k)
                out[k] = sqrt2 * std::cos((k + 1.0) * a);
            break;
        }
        case SystemKind::shifted_periodic:
            for (int k = 0; k < n; ++k)
                out[k] = profile_->psi((k + 1.0) * w.t + w.s);
            break;
        case SystemKind::walsh:
            for (int j = 1; j <= n; ++j)
                out[j - 1] = (std::popcount(static_cast<std::uint64_t>(j) & w.atom) % 2) ? -1.0 : 1.0;
            break;
        case SystemKind::empirical:
            std::fill(out.begin(), out.end(), 0.0);
            out[w.atom] = std::sqrt(static_cast<double>(n));
            break;
        }
    }

    std::vector<double> evaluate(const Omega& w) const
    {
        std::vector<double> x(static_cast<std::size_t>(n_));
        evaluate(w, x);
        return x;
    }

    /// Walsh atoms are sign vectors t in {-1,1}^d; bit k of the atom index
    /// set means t_{k+1} = -1.
    static Omega walsh_atom(std::span<const int> signs)
    {
        Omega w;
        for (std::size_t k = 0; k < signs.size(); ++k)
            if (signs[k] < 0)
                w.atom |= std::uint64_t{1} << k;
        return w;
    }

    Omega atom(std::size_t i) const
    {
        Omega w;
        w.atom = i;
        return w;
    }

    template <class Engine>
    Omega sample_omega(Engine& eng) const
    {
        using std::numbers::pi;
        Omega w;
        switch (kind_) {
        case SystemKind::trig:
        case SystemKind::lacunary_trig:
            w.t = -pi + 2 * pi * uniform_open01(eng);
            break;
        case SystemKind::cosine:
            w.t = pi * uniform_open01(eng);
            break;
        case SystemKind::chebyshev:
            w.t = std::cos(pi * uniform_open01(eng));
            break;
        case SystemKind::shifted_periodic:
            w.t = uniform_open01(eng);
            w.s = uniform_open01(eng);
            break;
        case SystemKind::walsh:
        case SystemKind::empirical:
            w.atom = static_cast<std::uint64_t>(uniform_open01(eng) * static_cast<double>(atom_count()));
            break;
        }
        return w;
    }

    template <class Engine>
    SystemSample sample(Engine& eng) const
    {
        SystemSample s;
        s.omega = sample_omega(eng);
        s.x = evaluate(s.omega);
        return s;
    }

    /// <X, theta> as a trigonometric polynomial of a uniform parameter,
    /// for the trig, cosine, Chebyshev and lacunary systems.
    std::optional<TrigForm> trig_form(std::span<const double> theta) const
    {
        using std::numbers::pi;
        using std::numbers::sqrt2;
        TrigForm f{};
        switch (kind_) {
        case SystemKind::trig:
        case SystemKind::lacunary_trig:
            f.angle_offset = -pi;
            f.angle_span = 2 * pi;
            f.periodic = true;
            for (int k = 0; k < n_ / 2; ++k) {
                const double fr = kind_ == SystemKind::trig ? k + 1.0 : static_cast<double>(freqs_[k]);
                f.terms.push_back({fr, sqrt2 * theta[2 * k], sqrt2 * theta[2 * k + 1]});
            }
            return f;
        case SystemKind::cosine:
        case SystemKind::chebyshev:
            // Chebyshev with t = cos(pi U) is X_k = sqrt2 cos(k pi U).
            f.angle_offset = 0;
            f.angle_span = pi;
            f.periodic = false;
            for (int k = 0; k < n_; ++k)
                f.terms.push_back({k + 1.0, sqrt2 * theta[k], 0});
            return f;
        default:
            return std::nullopt;
        }
    }

private:
    friend System make_system(SystemKind, int, const SystemParams&);

    SystemKind kind_ = SystemKind::trig;
    int n_ = 0;
    int d_ = 0;
    std::vector<long long> freqs_;
    std::optional<PeriodicProfile> profile_;
    SystemFlags flags_;
};

namespace detail {

inline void validate_profile(const PeriodicProfile& p)
{
    if (!p.psi)
        throw invalid_parameter("periodic profile '" + p.name + "' has no callable");
    quad::Options opt;
    opt.abs_tol = 1e-10;
    opt.rel_tol = 1e-10;
    opt.initial_panels = 16;
    opt.throw_on_failure = false;
    const double mean = quad::integrate(p.psi, 0.0, 1.0, opt).value;
    const double second = quad::integrate([&](double x) { double v = p.psi(x); return v * v; }, 0.0, 1.0, opt).value;
    if (std::abs(mean) > 1e-6 || std::abs(second - 1) > 1e-6) {
        std::ostringstream os;
        os << "periodic profile '" << p.name << "' must have mean 0 and second moment 1 on (0,1); got " << mean
           << " and " << second;
        throw invalid_parameter(os.str());
    }
}

inline std::vector<long long> geometric_frequencies(std::size_t count, long long m1, double q)
{
    if (!(q > 1))
        throw invalid_parameter("lacunary ratio q must exceed 1");
    if (m1 < 1)
        throw invalid_parameter("lacunary m1 must be a positive integer");
    std::vector<long long> m{m1};
    while (m.size() < count) {
        const double next = std::ceil(q * static_cast<double>(m.back()) - 1e-9);
        if (next > 9.0e15)
            throw invalid_parameter("lacunary frequencies overflow");
        m.push_back(static_cast<long long>(next));
    }
    return m;
}

} // namespace detail

/// Builds a system. `n` is the dimension; for walsh pass n = 2^d - 1 or
/// n = 0 with params.d set; for lacunary_trig with explicit frequencies n
/// may be 0 (it becomes twice the number of frequencies).
inline System make_system(SystemKind kind, int n, const SystemParams& params = {})
{
    System s;
    s.kind_ = kind;
    using std::numbers::sqrt2;
    switch (kind) {
    case SystemKind::trig:
        require_dimension(n);
        if (n % 2)
            throw invalid_parameter("trig system needs even n, got " + std::to_string(n));
        s.flags_ = {true, true, true, sqrt2};
        break;
    case SystemKind::cosine:
    case SystemKind::chebyshev:
        require_dimension(n);
        s.flags_ = {true, false, true, sqrt2};
        break;
    case SystemKind::shifted_periodic: {
        require_dimension(n);
        if (!params.profile)
            throw invalid_parameter("shifted_periodic system needs a periodic profile");
        detail::validate_profile(*params.profile);
        s.profile_ = params.profile;
        s.flags_ = {true, false, true, params.profile->sup_abs};
        break;
    }
    case SystemKind::walsh: {
        int d = params.d;
        if (d == 0) {
            if (n < 1 || std::popcount(static_cast<unsigned>(n) + 1u) != 1)
                throw invalid_parameter("walsh system needs n = 2^d - 1, got " + std::to_string(n));
            d = std::countr_zero(static_cast<unsigned>(n) + 1u);
        } else if (n != 0 && n != (1 << d) - 1) {
            throw invalid_parameter("walsh system: n = " + std::to_string(n) + " does not equal 2^d - 1 for d = "
                                    + std::to_string(d));
        }
        if (d < 2 || d > 20)
            throw invalid_parameter("walsh order d must be in [2, 20], got " + std::to_string(d));
        s.d_ = d;
        n = (1 << d) - 1;
        s.flags_ = {true, true, true, 1.0};
        break;
    }
    case SystemKind::empirical:
        require_dimension(n);
        s.flags_ = {true, true, false, std::sqrt(static_cast<double>(n))};
        break;
    case SystemKind::lacunary_trig: {
        std::vector<long long> m = params.frequencies;
        if (m.empty()) {
            require_dimension(n);
            if (n % 2)
                throw invalid_parameter("lacunary system needs even n, got " + std::to_string(n));
            m = detail::geometric_frequencies(static_cast<std::size_t>(n / 2), params.m1, params.q);
        } else {
            if (n != 0 && n != 2 * static_cast<int>(m.size()))
                throw invalid_parameter("lacunary system: n must be twice the number of frequencies");
            n = 2 * static_cast<int>(m.size());
        }
        if (m.front() < 1)
            throw invalid_parameter("lacunary frequencies must be positive");
        for (std::size_t k = 1; k < m.size(); ++k)
            if (m[k] <= m[k - 1])
                throw invalid_parameter("lacunary frequencies must be strictly increasing");
        if (params.q > 0)
            for (std::size_t k = 1; k < m.size(); ++k)
                if (static_cast<double>(m[k]) < params.q * static_cast<double>(m[k - 1]) * (1 - 1e-12))
                    throw invalid_parameter("lacunary frequencies violate m_{k+1}/m_k >= q");
        s.freqs_ = std::move(m);
        s.flags_ = {true, true, true, sqrt2};
        break;
    }
    }
    s.n_ = n;
    return s;
}

/// Analytic sigma_4^2 = Var(|X|^2)/n when known.
inline std::optional<double> exact_sigma4(const System& s)
{
    if (s.flags().fixed_norm)
        return 0.0;
    switch (s.kind()) {
    case SystemKind::cosine:
    case SystemKind::chebyshev:
        return 0.5;
    case SystemKind::shifted_periodic:
        if (s.profile()->fourth_moment)
            return *s.profile()->fourth_moment - 1;
        return std::nullopt;
    default:
        return std::nullopt;
    }
}

// JSON descriptor {kind, n, params, flags}. Flags are derived on input.

inline nlohmann::json to_json(const System& s)
{
    nlohmann::json params = nlohmann::json::object();
    if (s.kind() == SystemKind::walsh)
        params["d"] = s.walsh_order();
    if (s.kind() == SystemKind::lacunary_trig)
        params["frequencies"] = s.frequencies();
    if (s.kind() == SystemKind::shifted_periodic)
        params["psi"] = s.profile()->name;
    const auto& f = s.flags();
    return {{"kind", to_string(s.kind())},
            {"n", s.n()},
            {"params", params},
            {"flags",
             {{"isotropic", f.isotropic},
              {"fixed_norm", f.fixed_norm},
              {"mean_zero", f.mean_zero},
              {"sup_norm_bound", f.sup_norm_bound}}}};
}

inline SystemParams system_params_from_json(const nlohmann::json& j)
{
    SystemParams p;
    if (!j.is_object())
        return p;
    if (j.contains("d"))
        p.d = j.at("d").get<int>();
    if (j.contains("frequencies"))
        p.frequencies = j.at("frequencies").get<std::vector<long long>>();
    if (j.contains("q"))
        p.q = j.at("q").get<double>();
    if (j.contains("m1"))
        p.m1 = j.at("m1").get<long long>();
    if (j.contains("psi"))
        p.profile = PeriodicProfile::preset(j.at("psi").get<std::string>());
    return p;
}

/// Parses a descriptor; `n_override` (when positive) replaces the n field,
/// which is how experiment configs sweep over dimensions.
inline System system_from_json(const nlohmann::json& j, int n_override = 0)
{
    try {
        const auto kind = system_kind_from_string(j.at("kind").get<std::string>());
        SystemParams p = system_params_from_json(j.value("params", nlohmann::json::object()));
        int n = j.value("n", 0);
        if (n_override > 0) {
            n = n_override;
            if (kind == SystemKind::walsh)
                p.d = 0;
            if (kind == SystemKind::lacunary_trig && !p.frequencies.empty()) {
                if (static_cast<std::size_t>(n / 2) > p.frequencies.size())
                    throw invalid_parameter("lacunary descriptor lists fewer frequencies than n/2");
                p.frequencies.resize(static_cast<std::size_t>(n / 2));
            }
        }
        return make_system(kind, n, p);
    } catch (const nlohmann::json::exception& e) {
        throw invalid_parameter(std::string("malformed system descriptor: ") + e.what());
    }
}

} // namespace randclt

#endif
