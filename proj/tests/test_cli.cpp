#include "cli.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result call(std::vector<std::string> args)
{
    args.insert(args.begin(), "randclt");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = randclt::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& s)
{
    std::vector<std::string> v;
    std::istringstream is(s);
    for (std::string l; std::getline(is, l);)
        v.push_back(l);
    return v;
}

std::filesystem::path temp_file(const std::string& name)
{
    return std::filesystem::temp_directory_path() / ("randclt_cli_" + name);
}

} // namespace

TEST(Cli, SystemsList)
{
    const auto r = call({"systems", "list"});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* k : {"trig", "cosine", "chebyshev", "shifted_periodic", "walsh", "empirical", "lacunary_trig"})
        EXPECT_NE(r.out.find(k), std::string::npos) << k;
    const auto j = call({"systems", "list", "--format", "json"});
    EXPECT_EQ(nlohmann::json::parse(j.out).size(), 7u);
}

TEST(Cli, JnIsSincForThree)
{
    const auto r = call({"jn", "--n", "3", "--t-grid", "0:0.5:5"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto l = lines(r.out);
    ASSERT_EQ(l.size(), 12u);
    EXPECT_EQ(l[0], "t,jn");
    for (std::size_t i = 1; i < l.size(); ++i) {
        const double t = std::stod(l[i].substr(0, l[i].find(',')));
        const double v = std::stod(l[i].substr(l[i].find(',') + 1));
        EXPECT_NEAR(v, t == 0 ? 1.0 : std::sin(t) / t, 1e-12);
    }
}

TEST(Cli, PredictCor51Json)
{
    const auto r = call({"predict", "--kind", "cor51", "--system", "walsh", "--d", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_TRUE(j.contains("main"));
    EXPECT_TRUE(j.contains("error_scale"));
    EXPECT_EQ(j.at("kind"), "cor51");
    EXPECT_EQ(j.at("system").at("n"), 15);
}

TEST(Cli, TableLacunary)
{
    const auto r = call({"table", "--preset", "lacunary", "--q", "2.5", "--n-max", "20", "--seed", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto l = lines(r.out);
    ASSERT_EQ(l.size(), 11u);
    for (std::size_t i = 1; i < l.size(); ++i)
        EXPECT_EQ(l[i].substr(l[i].rfind(',') + 1), "0") << l[i];
}

TEST(Cli, TableWalshThreadIndependent)
{
    const std::vector<std::string> base{"table", "--preset", "walsh", "--d", "3,4", "--n-theta", "60", "--seed", "5"};
    auto a = base, b = base;
    a.insert(a.end(), {"--threads", "1"});
    b.insert(b.end(), {"--threads", "3"});
    const auto ra = call(a), rb = call(b);
    ASSERT_EQ(ra.code, 0) << ra.err;
    EXPECT_EQ(ra.out, rb.out);
    EXPECT_EQ(lines(ra.out).size(), 1u + 2 * 3 * 2);
}

TEST(Cli, ThreadsFromEnvironment)
{
    ::setenv("RANDCLT_THREADS", "2", 1);
    EXPECT_EQ(randclt::default_threads(), 2u);
    const auto r = call({"distance", "--system", "walsh", "--d", "3", "--metric", "rho,omega_sq", "--n-theta", "30"});
    ::unsetenv("RANDCLT_THREADS");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, call({"distance", "--system", "walsh", "--d", "3", "--metric", "rho,omega_sq", "--n-theta", "30"}).out);
    EXPECT_EQ(randclt::default_threads(), 1u);
}

TEST(Cli, MomentsAndBounds)
{
    const auto m = call({"moments", "--system", "walsh", "--d", "3"});
    ASSERT_EQ(m.code, 0) << m.err;
    EXPECT_EQ(nlohmann::json::parse(m.out).at("inner_moments").at("p3").at("value"), 42.0);
    const auto csv = call({"moments", "--system", "walsh", "--d", "3", "--format", "csv"});
    EXPECT_NE(csv.out.find("inner4,301,0"), std::string::npos) << csv.out;
    for (const char* kind : {"thm12", "eq211", "eq81"}) {
        const auto b = call({"bounds", "--kind", kind, "--system", "walsh", "--n", "15"});
        ASSERT_EQ(b.code, 0) << kind << b.err;
        EXPECT_TRUE(nlohmann::json::parse(b.out).contains("value"));
    }
}

TEST(Cli, Audit)
{
    const auto r = call({"audit", "--name", "prop_11_1", "--system", "walsh", "--d", "4", "--n-theta", "100"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    ASSERT_EQ(j.at("audits").size(), 1u);
    EXPECT_EQ(j.at("audits")[0].at("satisfied"), true);
}

TEST(Cli, RunConfigAndOutFile)
{
    const auto cfg = temp_file("config.json"), out = temp_file("out.csv");
    {
        std::ofstream f(cfg);
        f << R"({"system":{"kind":"empirical"},"n_list":[8],"n_theta":20,"seed":3})";
    }
    const auto r = call({"run", "--config", cfg.string(), "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    std::ifstream f(out);
    std::string header;
    std::getline(f, header);
    EXPECT_EQ(header, randclt::csv_header);
    std::filesystem::remove(cfg);
    std::filesystem::remove(out);
}

TEST(Cli, ShippedConfigsParse)
{
    for (const char* name : {"empirical_constant.json", "two_sided_trig.json", "walsh_expansions.json",
                             "cosine_constants.json"}) {
        std::ifstream f(std::string(RANDCLT_CONFIG_DIR) + "/" + name);
        ASSERT_TRUE(f) << name;
        EXPECT_NO_THROW(randclt::config_from_json(nlohmann::json::parse(f))) << name;
    }
    const auto r = call({"moments", "--system-json", std::string(RANDCLT_CONFIG_DIR) + "/lacunary_system.json",
                         "--samples", "2000"});
    EXPECT_EQ(r.code, 0) << r.err;
}

TEST(Cli, UsageErrorsExitTwo)
{
    EXPECT_EQ(call({}).code, 2);
    EXPECT_EQ(call({"frobnicate"}).code, 2);
    EXPECT_EQ(call({"systems", "list", "--bogus"}).code, 2);
    EXPECT_EQ(call({"jn", "--n", "3"}).code, 2);
    EXPECT_EQ(call({"jn", "--n", "3", "--t-grid", "1:0.5:0"}).code, 2);
    EXPECT_EQ(call({"jn", "--n", "1", "--t-grid", "0:1:1"}).code, 2);
    EXPECT_EQ(call({"table", "--preset", "nope"}).code, 2);
    EXPECT_EQ(call({"predict", "--kind", "cor51", "--system", "cosine", "--n", "8"}).code, 2);
    EXPECT_EQ(call({"predict", "--kind", "cor51", "--system", "walsh", "--n", "6"}).code, 2);
    EXPECT_EQ(call({"run", "--config", "/nonexistent.json"}).code, 2);
    EXPECT_EQ(call({"--format", "xml", "systems", "list"}).code, 2);
    EXPECT_EQ(call({"jn", "--n", "3", "--t-grid", "0:1:1", "--out", "/nonexistent-dir/x.csv"}).code, 2);
    EXPECT_EQ(call({"distance", "--system", "trig", "--n", "16", "--n-theta", "2", "--inner-budget", "4"}).code, 2);
    EXPECT_EQ(call({"--help"}).code, 0);
}

TEST(Cli, ExitCodeMapping)
{
    std::ostringstream err;
    auto code = [&](auto e) { return randclt::cli::exit_code_for(std::make_exception_ptr(e), err); };
    EXPECT_EQ(code(randclt::invalid_parameter("x")), 2);
    EXPECT_EQ(code(randclt::unsupported_mode("x")), 2);
    EXPECT_EQ(code(randclt::budget_error("x", 10)), 2);
    EXPECT_EQ(code(randclt::numeric_failure("x")), 3);
    EXPECT_EQ(code(std::runtime_error("x")), 3);
}
