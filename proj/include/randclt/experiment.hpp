#ifndef RANDCLT_EXPERIMENT_HPP
#define RANDCLT_EXPERIMENT_HPP

#include "randclt/distance.hpp"
#include "randclt/error.hpp"
#include "randclt/expansions.hpp"
#include "randclt/moments.hpp"
#include "randclt/parallel.hpp"
#include "randclt/systems.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace randclt {

inline constexpr const char* version = "1.0.0";

struct ExperimentConfig {
    nlohmann::json system;
    std::vector<int> n_list;
    std::vector<Metric> metrics{Metric::omega_sq};
    std::vector<Target> targets{Target::normal};
    std::size_t n_theta = 200;
    std::size_t inner_budget = std::size_t{1} << 14;
    std::uint64_t seed = 0;
    std::string output_path;
    std::string format = "csv";
    std::vector<std::string> audits;
    std::vector<std::string> predictions;
    std::size_t moment_samples = 100'000;
    std::size_t mixture_size = 256;
    double certify_tol = 1e-3;
    unsigned threads = 1;
    bool timestamp = false;
};

inline const std::vector<std::string>& known_audits()
{
    static const std::vector<std::string> names{"lemma_12_3", "prop_11_1", "prop_11_2",   "omega_rho_w_chain",
                                                "two_sided_13_1", "prop_3_1", "prop_9_1", "jensen"};
    return names;
}

inline const std::vector<std::string>& known_predictions()
{
    static const std::vector<std::string> names{"cor51", "thm11", "prop42", "thm12"};
    return names;
}

/// Parses and validates a config; every problem is reported as invalid_parameter.
inline ExperimentConfig config_from_json(const nlohmann::json& j)
{
    ExperimentConfig c;
    try {
        if (!j.is_object())
            throw invalid_parameter("config must be a JSON object");
        static const std::set<std::string> allowed{"system", "n_list", "metrics", "targets", "n_theta",
                                                   "inner_budget", "seed", "output", "audits", "predictions",
                                                   "moment_samples", "mixture_size", "certify_tol", "timestamp"};
        for (const auto& [k, v] : j.items())
            if (!allowed.count(k))
                throw invalid_parameter("unknown config key '" + k + "'");
        c.system = j.at("system");
        if (!c.system.is_object() || !c.system.contains("kind"))
            throw invalid_parameter("config.system must be an object with a kind");
        c.n_list = j.at("n_list").get<std::vector<int>>();
        if (c.n_list.empty())
            throw invalid_parameter("config.n_list must not be empty");
        if (!j.contains("seed"))
            throw invalid_parameter("config.seed is mandatory");
        c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("metrics")) {
            c.metrics.clear();
            for (const auto& m : j.at("metrics"))
                c.metrics.push_back(metric_from_string(m.get<std::string>()));
        }
        if (j.contains("targets")) {
            c.targets.clear();
            for (const auto& t : j.at("targets"))
                c.targets.push_back(target_from_string(t.get<std::string>()));
        }
        c.n_theta = j.value("n_theta", c.n_theta);
        c.inner_budget = j.value("inner_budget", c.inner_budget);
        c.moment_samples = j.value("moment_samples", c.moment_samples);
        c.mixture_size = j.value("mixture_size", c.mixture_size);
        c.certify_tol = j.value("certify_tol", c.certify_tol);
        c.timestamp = j.value("timestamp", false);
        if (j.contains("output")) {
            const auto& o = j.at("output");
            c.output_path = o.value("path", "");
            c.format = o.value("format", "csv");
        }
        if (c.format != "csv" && c.format != "json")
            throw invalid_parameter("output format must be csv or json");
        if (j.contains("audits"))
            c.audits = j.at("audits").get<std::vector<std::string>>();
        for (const auto& a : c.audits)
            if (std::find(known_audits().begin(), known_audits().end(), a) == known_audits().end())
                throw invalid_parameter("unknown audit '" + a + "'");
        if (j.contains("predictions"))
            c.predictions = j.at("predictions").get<std::vector<std::string>>();
        for (const auto& p : c.predictions)
            if (std::find(known_predictions().begin(), known_predictions().end(), p) == known_predictions().end())
                throw invalid_parameter("unknown prediction '" + p + "'");
        if (c.n_theta < 1)
            throw invalid_parameter("n_theta must be at least 1");
        // Validate the descriptor at every listed dimension before any work.
        for (int n : c.n_list)
            (void)system_from_json(c.system, n);
    } catch (const nlohmann::json::exception& e) {
        throw invalid_parameter(std::string("malformed config: ") + e.what());
    }
    return c;
}

inline nlohmann::json to_json(const ExperimentConfig& c)
{
    nlohmann::json metrics = nlohmann::json::array(), targets = nlohmann::json::array();
    for (auto m : c.metrics)
        metrics.push_back(to_string(m));
    for (auto t : c.targets)
        targets.push_back(to_string(t));
    return {{"system", c.system},         {"n_list", c.n_list},          {"metrics", metrics},
            {"targets", targets},         {"n_theta", c.n_theta},        {"inner_budget", c.inner_budget},
            {"seed", c.seed},             {"audits", c.audits},          {"predictions", c.predictions},
            {"moment_samples", c.moment_samples}, {"mixture_size", c.mixture_size},
            {"certify_tol", c.certify_tol}};
}

struct AuditOutcome {
    std::string name;
    int n = 0; ///< 0 for cross-dimension audits
    std::string target;
    double lhs = 0;
    double rhs = 0;
    std::optional<bool> satisfied;
    std::optional<double> implied_constant;
    std::optional<double> band_factor;
    std::string note;
};

inline nlohmann::json to_json(const AuditOutcome& a)
{
    auto opt = [](const auto& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    return {{"name", a.name},
            {"n", a.n},
            {"target", a.target},
            {"lhs", a.lhs},
            {"rhs", a.rhs},
            {"satisfied", opt(a.satisfied)},
            {"implied_constant", opt(a.implied_constant)},
            {"band_factor", opt(a.band_factor)},
            {"note", a.note}};
}

struct PredictionRow {
    int n;
    ExpansionPrediction prediction;
    std::optional<double> measured;
    std::optional<double> measured_stderr;
};

struct BoundRow {
    int n;
    BoundEvaluation bound;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<SphereAverage> rows;
    std::vector<PredictionRow> predictions;
    std::vector<BoundRow> bounds;
    std::vector<AuditOutcome> audits;
    std::string timestamp;
};

namespace detail {

inline double band(const std::vector<double>& v)
{
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *lo > 0 ? *hi / *lo : std::numeric_limits<double>::infinity();
}

inline double mean_of(const std::vector<double>& v)
{
    long double s = 0;
    for (double x : v)
        s += x;
    return static_cast<double>(s / static_cast<long double>(v.size()));
}

inline double stderr_of(const std::vector<double>& v)
{
    if (v.size() < 2)
        return 0;
    const double m = mean_of(v);
    long double s = 0;
    for (double x : v)
        s += (x - m) * (x - m);
    return static_cast<double>(std::sqrt(s / static_cast<long double>(v.size() - 1) / v.size()));
}

} // namespace detail

/// Squared norm of the mean vector E X.
inline double mean_norm_sq(const System& s)
{
    if (s.flags().mean_zero)
        return 0;
    if (s.kind() == SystemKind::empirical)
        return 1;
    throw unsupported_mode("mean vector unknown for " + s.label());
}

/// Runs the cross-product of dimensions, metrics and targets, then the
/// requested predictions and audits.
inline ExperimentReport run(const ExperimentConfig& cfg)
{
    ExperimentReport rep;
    rep.config = cfg;
    const auto wants = [&](const std::string& a) {
        return std::find(cfg.audits.begin(), cfg.audits.end(), a) != cfg.audits.end();
    };
    const auto predicts = [&](const std::string& p) {
        return std::find(cfg.predictions.begin(), cfg.predictions.end(), p) != cfg.predictions.end();
    };

    // Targets and distances needed by rows and audits.
    std::set<Target> targets(cfg.targets.begin(), cfg.targets.end());
    unsigned mask = 0;
    for (auto m : cfg.metrics)
        mask |= mask_for(m);
    if (wants("prop_11_1") || wants("prop_11_2"))
        targets.insert(Target::typical), mask |= want_all;
    if (wants("prop_3_1"))
        targets.insert(Target::typical), mask |= want_omega_sq;
    if (wants("jensen") || wants("prop_9_1") || wants("two_sided_13_1"))
        targets.insert(Target::normal), mask |= want_rho | want_omega_sq;
    if (wants("omega_rho_w_chain"))
        mask |= want_all;
    if (wants("lemma_12_3"))
        mask |= want_omega_sq;
    if (predicts("cor51") || predicts("prop42"))
        targets.insert(Target::typical), mask |= want_omega_sq;
    if (predicts("thm11"))
        targets.insert(Target::normal), mask |= want_omega_sq;

    SphereOptions so;
    so.n_theta = cfg.n_theta;
    so.inner_budget = cfg.inner_budget;
    so.seed = cfg.seed;
    so.threads = cfg.threads;
    so.certify_tol = cfg.certify_tol;
    so.mixture_size = cfg.mixture_size;

    std::map<int, std::map<Target, std::vector<DistanceSet>>> per_n;
    std::map<int, double> n_omega_normal, n_omega_typical, rho_sq_normal;
    std::vector<double> implied_3_1, implied_9_1;

    for (int n : cfg.n_list) {
        const System sys = system_from_json(cfg.system, n);
        const int dim = sys.n();
        const Budget mb = sys.finite() ? Budget::exact() : Budget::monte_carlo(cfg.moment_samples, cfg.seed, cfg.threads);
        auto& dist = per_n[dim];
        for (Target t : targets)
            dist[t] = sphere_distance_samples(sys, t, so, mask);
        for (Target t : cfg.targets)
            for (Metric m : cfg.metrics)
                rep.rows.push_back(summarize(sys, m, t, so, dist[t]));

        auto avg = [&](Target t, Metric m) {
            std::vector<double> v;
            for (const auto& d : dist[t])
                v.push_back(metric_value(d, m));
            return std::pair{detail::mean_of(v), detail::stderr_of(v)};
        };

        // Predictions and bounds.
        std::optional<XiMoments> xi;
        auto get_xi = [&]() -> const XiMoments& {
            if (!xi)
                xi = xi_functionals(sys, mb);
            return *xi;
        };
        if (predicts("cor51")) {
            if (sys.flags().fixed_norm) {
                const auto [m, se] = avg(Target::typical, Metric::omega_sq);
                rep.predictions.push_back({dim, cor51_prediction(sys, get_xi()), m, se});
            } else {
                ExpansionPrediction p;
                p.kind = "cor51";
                p.applicable = false;
                p.note = "requires a fixed-norm system";
                rep.predictions.push_back({dim, p, std::nullopt, std::nullopt});
            }
        }
        if (predicts("thm11")) {
            MomentReport mr;
            mr.n = dim;
            mr.xi = get_xi();
            const auto [m, se] = avg(Target::normal, Metric::omega_sq);
            rep.predictions.push_back({dim, thm11_prediction(sys, mr), m, se});
        }
        if (predicts("prop42")) {
            const auto [m, se] = avg(Target::typical, Metric::omega_sq);
            rep.predictions.push_back({dim, prop42_prediction(sys, mb), m, se});
        }
        if (predicts("thm12"))
            rep.bounds.push_back({dim, thm12_lower_bound(sys, mb)});

        // Per-dimension audits.
        const double b = sys.flags().fixed_norm ? 1.0 : sys.flags().sup_norm_bound;
        const double logn = std::log(static_cast<double>(dim));
        if (wants("prop_11_1")) {
            const auto [w2, se1] = avg(Target::typical, Metric::omega_sq);
            const auto [r2, se2] = avg(Target::typical, Metric::rho_sq);
            AuditOutcome a{"prop_11_1", dim, "typical", w2 / b, 14 * std::sqrt(logn) * r2 + 8 / std::pow(dim, 4.0)};
            a.satisfied = a.lhs <= a.rhs;
            a.note = "alpha = 2, b = " + format_real(b);
            rep.audits.push_back(a);
        }
        if (wants("prop_11_2")) {
            const auto [w, se1] = avg(Target::typical, Metric::kantorovich);
            const auto [r, se2] = avg(Target::typical, Metric::rho);
            AuditOutcome a{"prop_11_2", dim, "typical", w, 14 * b * std::sqrt(logn) * r + 8 * b / std::pow(dim, 4.0)};
            a.satisfied = a.lhs <= a.rhs;
            a.note = "b = " + format_real(b);
            rep.audits.push_back(a);
        }
        if (wants("lemma_12_3")) {
            for (const auto& [t, ds] : dist) {
                std::vector<double> w;
                for (const auto& d : ds)
                    w.push_back(std::sqrt(d.omega_sq));
                const auto s = lemma_12_3(w);
                AuditOutcome a{"lemma_12_3", dim, std::string(to_string(t)), s.lhs, s.rhs};
                a.satisfied = s.satisfied;
                a.note = "omega samples over theta";
                rep.audits.push_back(a);
            }
        }
        if (wants("omega_rho_w_chain")) {
            for (const auto& [t, ds] : dist) {
                double worst = -std::numeric_limits<double>::infinity();
                std::size_t bad = 0;
                for (const auto& d : ds) {
                    const double gap = d.omega_sq - d.rho * d.kantorovich;
                    worst = std::max(worst, gap);
                    if (gap > 1e-12 * std::max(1.0, d.rho * d.kantorovich))
                        ++bad;
                }
                AuditOutcome a{"omega_rho_w_chain", dim, std::string(to_string(t)), worst, 0};
                a.satisfied = bad == 0;
                a.note = std::to_string(bad) + " violations over " + std::to_string(ds.size()) +
                         " directions; lhs is max(omega^2 - rho W)";
                rep.audits.push_back(a);
            }
        }
        if (wants("jensen")) {
            AuditOutcome a{"jensen", dim, "normal"};
            if (sys.flags().fixed_norm) {
                const auto [r, se] = avg(Target::normal, Metric::rho);
                a.lhs = r - 3 * se;
                a.rhs = kolmogorov(typical_target(sys, cfg.mixture_size, cfg.seed), AnalyticCDF::standard_normal());
                a.satisfied = a.lhs >= a.rhs;
                a.note = "lhs = mean - 3 stderr of rho(F_theta, Phi); rhs = rho(F, Phi)";
            } else {
                a.note = "requires a fixed-norm system";
            }
            rep.audits.push_back(a);
        }
        if (wants("two_sided_13_1"))
            n_omega_normal[dim] = dim * avg(Target::normal, Metric::omega_sq).first;
        if (wants("prop_3_1")) {
            const MomentValue m2 = m_p(sys, 2, mb);
            const double a_sq = mean_norm_sq(sys);
            const double A = 1 + a_sq + std::pow(m2.value.value_or(0), 2) + sigma4_sq(sys, mb);
            const double c = dim * avg(Target::typical, Metric::omega_sq).first / A;
            implied_3_1.push_back(c);
            AuditOutcome a{"prop_3_1", dim, "typical", avg(Target::typical, Metric::omega_sq).first, A / dim};
            a.implied_constant = c;
            a.note = "rhs = A/n with A = 1 + |a|^2 + m_2^2 + sigma_4^2";
            rep.audits.push_back(a);
        }
        if (wants("prop_9_1")) {
            double s2 = 0;
            if (!sys.flags().fixed_norm) {
                const double v = sigma_2p(sys, 1, Budget::monte_carlo(cfg.moment_samples, cfg.seed, cfg.threads)).value;
                s2 = v * v;
            }
            const double scale = (1 + s2) * logn * logn / dim;
            const double r2 = avg(Target::normal, Metric::rho_sq).first;
            implied_9_1.push_back(r2 / scale);
            AuditOutcome a{"prop_9_1", dim, "normal", r2, scale};
            a.implied_constant = r2 / scale;
            a.note = "rhs = (1 + sigma_2^2) (log n)^2 / n";
            rep.audits.push_back(a);
        }
    }

    if (wants("two_sided_13_1")) {
        std::vector<double> v;
        for (const auto& [n, x] : n_omega_normal)
            v.push_back(x);
        AuditOutcome a{"two_sided_13_1", 0, "normal", *std::max_element(v.begin(), v.end()),
                       *std::min_element(v.begin(), v.end())};
        a.band_factor = detail::band(v);
        a.satisfied = *a.band_factor <= 3;
        a.note = "lhs = max n E omega^2, rhs = min n E omega^2 across n; stable when band <= 3";
        rep.audits.push_back(a);
    }
    auto cross = [&](const char* name, const std::vector<double>& v, const char* target) {
        if (v.empty())
            return;
        AuditOutcome a{name, 0, target, *std::max_element(v.begin(), v.end()), *std::min_element(v.begin(), v.end())};
        a.band_factor = detail::band(v);
        a.satisfied = *a.band_factor <= 3;
        a.note = "implied constant max/min across n; stable when band <= 3";
        rep.audits.push_back(a);
    };
    if (wants("prop_3_1"))
        cross("prop_3_1", implied_3_1, "typical");
    if (wants("prop_9_1"))
        cross("prop_9_1", implied_9_1, "normal");

    if (cfg.timestamp) {
        const auto now = std::chrono::system_clock::now();
        rep.timestamp = std::to_string(std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count());
    }
    return rep;
}

inline std::string to_csv(const std::vector<SphereAverage>& rows)
{
    std::string out = std::string(csv_header) + "\n";
    for (const auto& r : rows)
        out += to_csv_row(r) + "\n";
    return out;
}

inline nlohmann::json to_json(const ExperimentReport& r)
{
    nlohmann::json rows = nlohmann::json::array(), preds = nlohmann::json::array(),
                   bounds = nlohmann::json::array(), audits = nlohmann::json::array();
    for (const auto& x : r.rows)
        rows.push_back(to_json(x));
    for (const auto& p : r.predictions) {
        nlohmann::json j{{"n", p.n}, {"prediction", to_json(p.prediction)}};
        j["measured"] = p.measured ? nlohmann::json(*p.measured) : nlohmann::json(nullptr);
        j["measured_stderr"] = p.measured_stderr ? nlohmann::json(*p.measured_stderr) : nlohmann::json(nullptr);
        preds.push_back(j);
    }
    for (const auto& b : r.bounds)
        bounds.push_back({{"n", b.n}, {"bound", to_json(b.bound)}});
    for (const auto& a : r.audits)
        audits.push_back(to_json(a));
    nlohmann::json prov{{"seed", r.config.seed}, {"version", version}, {"config", to_json(r.config)}};
    if (!r.timestamp.empty())
        prov["timestamp"] = r.timestamp;
    return {{"provenance", prov}, {"rows", rows}, {"predictions", preds}, {"bounds", bounds}, {"audits", audits}};
}

inline std::string render(const ExperimentReport& r, const std::string& format)
{
    if (format == "json")
        return to_json(r).dump(2) + "\n";
    return to_csv(r.rows);
}

/// Writes text to a file, or throws invalid_parameter if it cannot.
inline void write_file(const std::string& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw invalid_parameter("cannot open output path '" + path + "'");
    f << text;
    if (!f)
        throw invalid_parameter("cannot write output path '" + path + "'");
}

// Presets

inline ExperimentConfig preset_two_sided(std::uint64_t seed)
{
    ExperimentConfig c;
    c.system = {{"kind", "trig"}};
    c.n_list = {8, 16, 32, 64};
    c.metrics = {Metric::omega_sq};
    c.targets = {Target::normal};
    c.n_theta = 2000;
    c.inner_budget = std::size_t{1} << 14;
    c.seed = seed;
    c.audits = {"two_sided_13_1", "lemma_12_3"};
    return c;
}

inline ExperimentConfig preset_walsh(std::uint64_t seed)
{
    ExperimentConfig c;
    c.system = {{"kind", "walsh"}};
    c.n_list = {7, 15, 31, 63};
    c.metrics = {Metric::omega_sq, Metric::rho, Metric::kantorovich};
    c.targets = {Target::normal, Target::typical};
    c.n_theta = 1000;
    c.seed = seed;
    c.audits = {"prop_11_1", "prop_11_2", "lemma_12_3", "omega_rho_w_chain", "jensen"};
    c.predictions = {"cor51", "thm11", "prop42", "thm12"};
    return c;
}

struct LacunaryRow {
    int n;
    double q;
    long long m_max;
    std::uint64_t t3;
    double sigma3; ///< E<X,Y>^3, exact
};

/// T_3 and the exact third inner moment for geometric frequency lists of
/// every even length up to n_max.
inline std::vector<LacunaryRow> lacunary_table(double q, int n_max, long long m1 = 1)
{
    if (n_max < 2)
        throw invalid_parameter("n_max must be at least 2");
    std::vector<LacunaryRow> rows;
    const auto m_all = detail::geometric_frequencies(static_cast<std::size_t>(n_max / 2), m1, q);
    for (int n = 2; n <= n_max; n += 2) {
        const std::span<const long long> m(m_all.data(), static_cast<std::size_t>(n / 2));
        rows.push_back({n, q, m.back(), sigma3_lacunary_count(m), trig_third_inner_moment(m)});
    }
    return rows;
}

inline std::string lacunary_csv(const std::vector<LacunaryRow>& rows)
{
    std::ostringstream os;
    os << "n,q,m_max,T3,Sigma3\n";
    for (const auto& r : rows)
        os << r.n << ',' << format_real(r.q) << ',' << r.m_max << ',' << r.t3 << ',' << format_real(r.sigma3) << '\n';
    return os.str();
}

inline nlohmann::json lacunary_json(const std::vector<LacunaryRow>& rows, std::uint64_t seed)
{
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows)
        arr.push_back({{"n", r.n}, {"q", r.q}, {"m_max", r.m_max}, {"T3", r.t3}, {"Sigma3", r.sigma3}});
    return {{"provenance", {{"seed", seed}, {"version", version}}}, {"rows", arr}};
}

} // namespace randclt

#endif
