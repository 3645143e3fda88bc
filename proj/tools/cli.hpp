#ifndef RANDCLT_TOOLS_CLI_HPP
#define RANDCLT_TOOLS_CLI_HPP

#include "randclt/randclt.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace randclt::cli {

enum exit_code : int { ok = 0, config_error = 2, numeric_error = 3 };

struct SystemArgs {
    std::string kind;
    int n = 0;
    int d = 0;
    double q = 0;
    long long m1 = 1;
    std::vector<long long> frequencies;
    std::string psi = "cosine";
    std::string json_path;

    void add_to(CLI::App* app)
    {
        app->add_option("--system", kind, "system kind (see `systems list`)");
        app->add_option("--n", n, "dimension");
        app->add_option("--d", d, "walsh order, n = 2^d - 1");
        app->add_option("--q", q, "lacunary ratio for the geometric rule");
        app->add_option("--m1", m1, "first lacunary frequency");
        app->add_option("--frequencies", frequencies, "explicit lacunary frequencies")->delimiter(',');
        app->add_option("--psi", psi, "shifted_periodic profile: cosine|triangle|sawtooth");
        app->add_option("--system-json", json_path, "file holding a system descriptor");
    }

    nlohmann::json descriptor() const
    {
        if (!json_path.empty()) {
            std::ifstream f(json_path);
            if (!f)
                throw invalid_parameter("cannot read system descriptor '" + json_path + "'");
            try {
                return nlohmann::json::parse(f);
            } catch (const nlohmann::json::exception& e) {
                throw invalid_parameter(std::string("malformed system descriptor: ") + e.what());
            }
        }
        if (kind.empty())
            throw invalid_parameter("--system is required");
        nlohmann::json params = nlohmann::json::object();
        if (d > 0)
            params["d"] = d;
        if (q > 0)
            params["q"] = q;
        if (m1 != 1)
            params["m1"] = m1;
        if (!frequencies.empty())
            params["frequencies"] = frequencies;
        if (kind == "shifted_periodic")
            params["psi"] = psi;
        return {{"kind", kind}, {"n", n}, {"params", params}};
    }

    System build() const { return system_from_json(descriptor()); }
};

inline std::vector<double> parse_grid(const std::string& spec)
{
    std::vector<double> parts;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ':')) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stod(item, &used));
            if (used != item.size())
                throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw invalid_parameter("grid must be start:step:stop, got '" + spec + "'");
        }
    }
    if (parts.size() != 3 || !(parts[1] > 0) || !(parts[2] >= parts[0]) || !std::isfinite(parts[2]))
        throw invalid_parameter("grid must be start:step:stop with step > 0 and start <= stop, got '" + spec + "'");
    const double start = parts[0], step = parts[1], stop = parts[2];
    const double span = std::floor((stop - start) / step + 1e-9);
    if (span > 1e7)
        throw invalid_parameter("grid too large");
    std::vector<double> g;
    const auto count = static_cast<long long>(span);
    for (long long i = 0; i <= count; ++i)
        g.push_back(start + static_cast<double>(i) * step);
    return g;
}

/// Maps a library exception to the process exit code and prints it.
inline int exit_code_for(std::exception_ptr ep, std::ostream& err)
{
    try {
        std::rethrow_exception(ep);
    } catch (const budget_error& e) {
        err << "error: " << e.what() << " (required inner budget " << e.required_budget() << ")\n";
        return config_error;
    } catch (const invalid_parameter& e) {
        err << "error: " << e.what() << "\n";
        return config_error;
    } catch (const unsupported_mode& e) {
        err << "error: " << e.what() << "\n";
        return config_error;
    } catch (const numeric_failure& e) {
        err << "numeric failure: " << e.what() << "\n";
        return numeric_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return numeric_error;
    } catch (...) {
        err << "error: unknown failure\n";
        return numeric_error;
    }
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"randclt: typical distributions of randomly weighted sums"};
    app.require_subcommand(1);
    app.fallthrough();

    std::uint64_t seed = 0;
    std::string out_path, format;
    unsigned threads = default_threads();
    bool stamp = false;
    app.add_option("--seed", seed, "64-bit seed");
    app.add_option("--out", out_path, "write output to this file");
    app.add_option("--format", format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--threads", threads, "worker threads (default RANDCLT_THREADS or 1)")->check(CLI::PositiveNumber);
    app.add_flag("--stamp", stamp, "add a wall-clock timestamp to JSON provenance");

    std::string text;
    auto emit = [&](const std::string& s) { text = s; };
    auto fmt = [&](const char* fallback) { return format.empty() ? std::string(fallback) : format; };

    // systems list
    auto* systems = app.add_subcommand("systems", "system catalogue");
    systems->require_subcommand(1);
    auto* systems_list = systems->add_subcommand("list", "list the supported systems");
    int list_n = 16;
    systems_list->add_option("--n", list_n, "dimension used for the flag column");
    systems_list->callback([&] {
        nlohmann::json arr = nlohmann::json::array();
        std::string csv = "kind,example,isotropic,fixed_norm,mean_zero,sup_norm_bound,sigma4_sq\n";
        for (auto k : {SystemKind::trig, SystemKind::cosine, SystemKind::chebyshev, SystemKind::shifted_periodic,
                       SystemKind::walsh, SystemKind::empirical, SystemKind::lacunary_trig}) {
            SystemParams p;
            int n = list_n;
            if (k == SystemKind::walsh) {
                p.d = 4;
                n = 0;
            }
            if (k == SystemKind::lacunary_trig)
                p.q = 2;
            if (k == SystemKind::shifted_periodic)
                p.profile = PeriodicProfile::preset("cosine");
            if ((k == SystemKind::trig || k == SystemKind::lacunary_trig) && n % 2)
                ++n;
            const System s = make_system(k, n, p);
            const auto s4 = exact_sigma4(s);
            nlohmann::json j = to_json(s);
            j["sigma4_sq"] = s4 ? nlohmann::json(*s4) : nlohmann::json(nullptr);
            arr.push_back(j);
            const auto& f = s.flags();
            csv += std::string(to_string(k)) + ",\"" + s.label() + "\"," + (f.isotropic ? "1" : "0") + ',' +
                   (f.fixed_norm ? "1" : "0") + ',' + (f.mean_zero ? "1" : "0") + ',' + format_real(f.sup_norm_bound) +
                   ',' + (s4 ? format_real(*s4) : std::string("")) + '\n';
        }
        emit(fmt("csv") == "json" ? arr.dump(2) + "\n" : csv);
    });

    // jn
    auto* jn_cmd = app.add_subcommand("jn", "characteristic function of the first coordinate of a uniform unit vector");
    int jn_n = 0;
    std::string grid;
    bool jn_scaled = false, jn_edge = false;
    jn_cmd->add_option("--n", jn_n, "dimension")->required();
    jn_cmd->add_option("--t-grid", grid, "start:step:stop")->required();
    jn_cmd->add_flag("--scaled", jn_scaled, "evaluate J_n(t sqrt n), the law of sqrt(n) theta_1");
    jn_cmd->add_flag("--edgeworth", jn_edge, "add the second-order expansion column (implies --scaled)");
    jn_cmd->callback([&] {
        const auto g = parse_grid(grid);
        const bool scaled = jn_scaled || jn_edge;
        const double sn = std::sqrt(static_cast<double>(jn_n));
        nlohmann::json arr = nlohmann::json::array();
        std::string csv = jn_edge ? "t,jn,edgeworth\n" : "t,jn\n";
        for (double t : g) {
            const double v = jn(jn_n, scaled ? t * sn : t);
            nlohmann::json row{{"t", t}, {"jn", v}};
            csv += format_real(t) + ',' + format_real(v);
            if (jn_edge) {
                const double e = jn_edgeworth(jn_n, t);
                row["edgeworth"] = e;
                csv += ',' + format_real(e);
            }
            csv += '\n';
            arr.push_back(row);
        }
        emit(fmt("csv") == "json" ? nlohmann::json{{"n", jn_n}, {"scaled", scaled}, {"rows", arr}}.dump(2) + "\n"
                                  : csv);
    });

    // moments
    auto* moments_cmd = app.add_subcommand("moments", "moment functionals of a system");
    SystemArgs mom_sys;
    mom_sys.add_to(moments_cmd);
    std::size_t mom_samples = 100'000;
    bool mom_mc = false;
    moments_cmd->add_option("--samples", mom_samples, "Monte Carlo sample pairs");
    moments_cmd->add_flag("--monte-carlo", mom_mc, "force Monte Carlo for finite systems");
    moments_cmd->callback([&] {
        const System s = mom_sys.build();
        const Budget b = (s.finite() && !mom_mc) ? Budget::exact() : Budget::monte_carlo(mom_samples, seed, threads);
        const MomentReport r = moment_report(s, b);
        nlohmann::json j = to_json(r);
        j["system"] = to_json(s);
        if (fmt("json") == "json") {
            emit(j.dump(2) + "\n");
            return;
        }
        std::string csv = "quantity,value,stderr\n";
        auto row = [&](const std::string& k, double v, double se) {
            csv += k + ',' + format_real(v) + ',' + format_real(se) + '\n';
        };
        auto opt = [&](const std::string& k, const std::optional<double>& v) {
            if (v)
                row(k, *v, 0);
        };
        opt("m2", r.m2);
        opt("m3", r.m3);
        opt("m4", r.m4);
        row("inner2", r.inner2.value, r.inner2.std_error);
        row("inner3", r.inner3.value, r.inner3.std_error);
        row("inner4", r.inner4.value, r.inner4.std_error);
        row("sigma2", r.sigma2.value, r.sigma2.std_error);
        row("sigma4", r.sigma4.value, r.sigma4.std_error);
        row("xi1", r.xi.e1.value, r.xi.e1.std_error);
        row("xi2", r.xi.e2.value, r.xi.e2.std_error);
        row("xi3", r.xi.e3.value, r.xi.e3.std_error);
        row("xi4", r.xi.e4.value, r.xi.e4.std_error);
        if (r.xi.sqrt_term)
            row("one_minus_sqrt", r.xi.sqrt_term->value, r.xi.sqrt_term->std_error);
        emit(csv);
    });

    // distance
    auto* dist_cmd = app.add_subcommand("distance", "sphere-averaged distances E_theta d(F_theta, target)");
    SystemArgs dist_sys;
    dist_sys.add_to(dist_cmd);
    std::vector<std::string> dist_metrics{"omega_sq"};
    std::string dist_target = "normal";
    SphereOptions so;
    dist_cmd->add_option("--metric", dist_metrics, "rho|omega|omega_sq|rho_sq|kantorovich")->delimiter(',');
    dist_cmd->add_option("--target", dist_target, "normal|typical");
    dist_cmd->add_option("--n-theta", so.n_theta, "number of directions");
    dist_cmd->add_option("--inner-budget", so.inner_budget, "grid size for interval sample spaces");
    dist_cmd->add_option("--certify-tol", so.certify_tol, "largest accepted W error of the inner grid");
    dist_cmd->add_option("--mixture-size", so.mixture_size, "norm samples in the typical mixture");
    dist_cmd->callback([&] {
        const System s = dist_sys.build();
        std::vector<Metric> ms;
        for (const auto& m : dist_metrics)
            ms.push_back(metric_from_string(m));
        so.seed = seed;
        so.threads = threads;
        if (so.n_theta < 1)
            throw invalid_parameter("--n-theta must be at least 1");
        const auto rows = sphere_average(s, ms, target_from_string(dist_target), so);
        if (fmt("csv") == "json") {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& r : rows)
                arr.push_back(to_json(r));
            emit(nlohmann::json{{"provenance", {{"seed", seed}, {"version", version}}}, {"rows", arr}}.dump(2) + "\n");
        } else {
            emit(to_csv(rows));
        }
    });

    // predict
    auto* pred_cmd = app.add_subcommand("predict", "closed-form predictions of the sphere-averaged omega^2");
    SystemArgs pred_sys;
    pred_sys.add_to(pred_cmd);
    std::string pred_kind;
    std::size_t pred_samples = 100'000;
    pred_cmd->add_option("--kind", pred_kind, "thm11|cor51|prop42")
        ->required()
        ->check(CLI::IsMember({"thm11", "cor51", "prop42"}));
    pred_cmd->add_option("--samples", pred_samples, "Monte Carlo pairs for infinite systems");
    pred_cmd->callback([&] {
        const System s = pred_sys.build();
        const Budget b = s.finite() ? Budget::exact() : Budget::monte_carlo(pred_samples, seed, threads);
        ExpansionPrediction p;
        if (pred_kind == "cor51") {
            p = cor51_prediction(s, xi_functionals(s, b));
        } else if (pred_kind == "thm11") {
            MomentReport mr;
            mr.n = s.n();
            mr.xi = xi_functionals(s, b);
            p = thm11_prediction(s, mr);
        } else {
            p = prop42_prediction(s, b);
        }
        nlohmann::json j = to_json(p);
        j["system"] = to_json(s);
        j["exact"] = b.is_exact();
        if (fmt("json") == "json") {
            emit(j.dump(2) + "\n");
        } else {
            emit("kind,n,main,error_scale,slack,main_stderr,applicable\n" + p.kind + ',' + std::to_string(s.n()) + ',' +
                 format_real(p.main) + ',' + format_real(p.error_scale) + ',' + format_real(p.slack) + ',' +
                 format_real(p.main_stderr) + ',' + (p.applicable ? "1" : "0") + '\n');
        }
    });

    // bounds
    auto* bounds_cmd = app.add_subcommand("bounds", "lower-bound and smoothing functionals");
    SystemArgs bnd_sys;
    bnd_sys.add_to(bounds_cmd);
    std::string bnd_kind;
    double bnd_T = 1, c1 = 1.0 / 32, c2 = 1;
    std::size_t bnd_samples = 100'000;
    bounds_cmd->add_option("--kind", bnd_kind, "thm12|eq211|eq81")
        ->required()
        ->check(CLI::IsMember({"thm12", "eq211", "eq81"}));
    bounds_cmd->add_option("--T", bnd_T, "frequency cut-off for eq211 and eq81");
    bounds_cmd->add_option("--c1", c1, "constant of the closeness term (thm12)");
    bounds_cmd->add_option("--c2", c2, "constant of the remainder term (thm12)");
    bounds_cmd->add_option("--samples", bnd_samples, "Monte Carlo pairs for infinite systems");
    bounds_cmd->callback([&] {
        BoundEvaluation be;
        nlohmann::json sys_json;
        if (bnd_kind == "thm12") {
            const System s = bnd_sys.build();
            const Budget b = s.finite() ? Budget::exact() : Budget::monte_carlo(bnd_samples, seed, threads);
            be = thm12_lower_bound(s, b, c1, c2);
            sys_json = to_json(s);
        } else {
            // Functionals of the typical law of sqrt(n) theta_1 against the standard normal.
            const int n = bnd_sys.n;
            require_dimension(n);
            if (bnd_kind == "eq211") {
                be.kind = "eq211_lower";
                be.value = rho_lower_functional(typical_cf(n), bnd_T);
            } else {
                be.kind = "eq81_smoothing";
                be.value = smoothing_functional(typical_cf(n), normal_cf(), bnd_T);
            }
            be.params = {{"T", bnd_T}, {"n", n}, {"law", "sqrt(n) theta_1 vs standard normal"}};
        }
        nlohmann::json j = to_json(be);
        if (!sys_json.is_null())
            j["system"] = sys_json;
        if (fmt("json") == "json")
            emit(j.dump(2) + "\n");
        else
            emit("kind,value\n" + be.kind + ',' + format_real(be.value) + '\n');
    });

    // audit
    auto* audit_cmd = app.add_subcommand("audit", "run one named inequality audit");
    SystemArgs aud_sys;
    aud_sys.add_to(audit_cmd);
    std::string audit_name;
    std::vector<int> audit_ns;
    std::size_t audit_n_theta = 200, audit_inner = std::size_t{1} << 14;
    audit_cmd->add_option("--name", audit_name, "audit name")->required()->check(CLI::IsMember(known_audits()));
    audit_cmd->add_option("--n-list", audit_ns, "dimensions (default: --n or the descriptor's n)")->delimiter(',');
    audit_cmd->add_option("--n-theta", audit_n_theta, "number of directions");
    audit_cmd->add_option("--inner-budget", audit_inner, "grid size for interval sample spaces");
    audit_cmd->callback([&] {
        ExperimentConfig c;
        c.system = aud_sys.descriptor();
        if (audit_ns.empty())
            audit_ns.push_back(system_from_json(c.system).n());
        c.n_list = audit_ns;
        c.metrics = {};
        c.targets = {};
        c.n_theta = audit_n_theta;
        c.inner_budget = audit_inner;
        c.seed = seed;
        c.threads = threads;
        c.audits = {audit_name};
        (void)config_from_json(to_json(c));
        const auto rep = randclt::run(c);
        nlohmann::json arr = nlohmann::json::array();
        std::string csv = "name,n,target,lhs,rhs,satisfied,implied_constant,band_factor\n";
        for (const auto& a : rep.audits) {
            arr.push_back(to_json(a));
            csv += a.name + ',' + std::to_string(a.n) + ',' + a.target + ',' + format_real(a.lhs) + ',' +
                   format_real(a.rhs) + ',' + (a.satisfied ? (*a.satisfied ? "1" : "0") : "") + ',' +
                   (a.implied_constant ? format_real(*a.implied_constant) : "") + ',' +
                   (a.band_factor ? format_real(*a.band_factor) : "") + '\n';
        }
        emit(fmt("json") == "json" ? nlohmann::json{{"provenance", {{"seed", seed}, {"version", version}}},
                                                    {"audits", arr}}.dump(2) + "\n"
                                   : csv);
    });

    // table
    auto* table_cmd = app.add_subcommand("table", "reproduce a preset table");
    std::string preset;
    std::optional<std::size_t> t_n_theta, t_inner;
    double t_q = 2;
    int t_n_max = 20;
    std::vector<int> t_d;
    table_cmd->add_option("--preset", preset, "two_sided|lacunary|walsh")
        ->required()
        ->check(CLI::IsMember({"two_sided", "lacunary", "walsh"}));
    table_cmd->add_option("--n-theta", t_n_theta, "override the number of directions");
    table_cmd->add_option("--inner-budget", t_inner, "override the inner grid size");
    table_cmd->add_option("--q", t_q, "lacunary ratio");
    table_cmd->add_option("--n-max", t_n_max, "largest lacunary dimension");
    table_cmd->add_option("--d", t_d, "walsh orders")->delimiter(',');
    table_cmd->callback([&] {
        if (preset == "lacunary") {
            const auto rows = lacunary_table(t_q, t_n_max);
            emit(fmt("csv") == "json" ? lacunary_json(rows, seed).dump(2) + "\n" : lacunary_csv(rows));
            return;
        }
        ExperimentConfig c = preset == "two_sided" ? preset_two_sided(seed) : preset_walsh(seed);
        if (preset == "walsh" && !t_d.empty()) {
            c.n_list.clear();
            for (int d : t_d) {
                if (d < 2 || d > 20)
                    throw invalid_parameter("walsh order d must be in [2, 20]");
                c.n_list.push_back((1 << d) - 1);
            }
        }
        if (t_n_theta)
            c.n_theta = *t_n_theta;
        if (t_inner)
            c.inner_budget = *t_inner;
        c.threads = threads;
        c.timestamp = stamp;
        emit(render(randclt::run(c), fmt("csv")));
    });

    // run
    auto* run_cmd = app.add_subcommand("run", "run an experiment described by a JSON config");
    std::string config_path;
    run_cmd->add_option("--config", config_path, "config file")->required();
    run_cmd->callback([&] {
        std::ifstream f(config_path);
        if (!f)
            throw invalid_parameter("cannot read config '" + config_path + "'");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(f);
        } catch (const nlohmann::json::exception& e) {
            throw invalid_parameter(std::string("malformed config: ") + e.what());
        }
        ExperimentConfig c = config_from_json(j);
        c.threads = threads;
        c.timestamp = c.timestamp || stamp;
        if (app.get_option("--seed")->count())
            c.seed = seed;
        if (!format.empty())
            c.format = format;
        if (!out_path.empty())
            c.output_path = out_path;
        const std::string body = render(randclt::run(c), c.format);
        if (!c.output_path.empty() && out_path.empty())
            write_file(c.output_path, body);
        else
            emit(body);
    });

    try {
        app.parse(argc, argv);
        if (!out_path.empty())
            write_file(out_path, text);
        else
            out << text;
        return ok;
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? ok : config_error;
    } catch (...) {
        return exit_code_for(std::current_exception(), err);
    }
}

} // namespace randclt::cli

#endif
