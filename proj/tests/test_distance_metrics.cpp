#include "randclt/distance.hpp"
#include "randclt/normal.hpp"
#include "randclt/quadrature.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace randclt;

namespace {

// Brute-force sup, L2^2 and L1 of F - G on a fine grid plus quadrature.
struct Brute {
    double rho, omega_sq, w;
};

template <class F, class G>
Brute brute(F f, G g, double lo, double hi)
{
    Brute b{0, 0, 0};
    const int m = 200000;
    for (int i = 0; i <= m; ++i) {
        const double x = lo + (hi - lo) * i / m;
        b.rho = std::max(b.rho, std::abs(f(x) - g(x)));
    }
    quad::Options opt;
    opt.initial_panels = 400;
    opt.abs_tol = 1e-12;
    opt.throw_on_failure = false;
    b.omega_sq = quad::integrate([&](double x) { return std::pow(f(x) - g(x), 2); }, lo, hi, opt).value;
    b.w = quad::integrate([&](double x) { return std::abs(f(x) - g(x)); }, lo, hi, opt).value;
    return b;
}

} // namespace

TEST(Distances, PointMassVersusNormal)
{
    const double zero[] = {0.0};
    const auto d = distances(ecdf(zero), AnalyticCDF::standard_normal());
    EXPECT_NEAR(d.rho, 0.5, 1e-14);
    // W = E|Z|
    EXPECT_NEAR(d.kantorovich, std::sqrt(2 / std::numbers::pi), 1e-12);
    const double tail = quad::integrate_to_infinity([](double x) { return std::pow(normal::survival(x), 2); }, 0.0).value;
    EXPECT_NEAR(d.omega_sq, 2 * tail, 1e-12);
}

TEST(Distances, TwoPointMasses)
{
    const double a[] = {0.0}, b[] = {1.0};
    const auto d = distances(ecdf(a), ecdf(b));
    EXPECT_DOUBLE_EQ(d.rho, 1);
    EXPECT_DOUBLE_EQ(d.omega_sq, 1);
    EXPECT_DOUBLE_EQ(d.kantorovich, 1);
}

TEST(Distances, EqualSizeSamplesWassersteinIsSortedMatching)
{
    auto eng = Stream(21).engine();
    std::vector<double> a(200), b(200);
    for (auto& v : a)
        v = normal::quantile(uniform_open01(eng));
    for (auto& v : b)
        v = 0.5 + 2 * uniform_open01(eng);
    const auto d = distances(ecdf(a), ecdf(b));
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double w = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        w += std::abs(a[i] - b[i]) / a.size();
    EXPECT_NEAR(d.kantorovich, w, 1e-12);
    EXPECT_LE(d.omega_sq, d.rho * d.kantorovich + 1e-15);
}

TEST(Distances, UniformCellVersusNormal)
{
    const double s3 = std::sqrt(3.0);
    const double lo[] = {-s3}, hi[] = {s3};
    const auto g = PiecewiseCDF::from_cells(lo, hi, 1e-13);
    const auto d = distances(g, AnalyticCDF::standard_normal());
    const auto b = brute([&](double x) { return g.cdf(x); }, [](double x) { return normal::cdf(x); }, -12, 12);
    EXPECT_NEAR(d.rho, b.rho, 1e-8);
    EXPECT_NEAR(d.omega_sq, b.omega_sq, 1e-10);
    EXPECT_NEAR(d.kantorovich, b.w, 1e-10);
}

TEST(Distances, SphereMarginalVersusNormal)
{
    for (int n : {3, 8, 20}) {
        const auto f = AnalyticCDF::sphere_marginal(n, std::sqrt(double(n)));
        const auto d = distances(f, AnalyticCDF::standard_normal());
        const auto b = brute([&](double x) { return f.cdf(x); }, [](double x) { return normal::cdf(x); }, -12, 12);
        EXPECT_NEAR(d.rho, b.rho, 1e-8) << n;
        EXPECT_NEAR(d.omega_sq, b.omega_sq, 1e-10) << n;
        EXPECT_NEAR(d.kantorovich, b.w, 1e-10) << n;
        EXPECT_LE(d.omega_sq, d.rho * d.kantorovich);
    }
}

TEST(Distances, MixtureVersusSphereMarginal)
{
    const auto mix = AnalyticCDF::mixture(5, {0.0, 1.0, 2.5, 3.0});
    EXPECT_NEAR(mix.cdf(0.0) - mix.cdf_left(0.0), 0.25, 1e-15);
    const auto sm = AnalyticCDF::sphere_marginal(5, 2.0);
    const auto d = distances(mix, sm);
    const auto b = brute([&](double x) { return mix.cdf(x); }, [&](double x) { return sm.cdf(x); }, -4, 4);
    EXPECT_NEAR(d.rho, b.rho, 1e-6);
    EXPECT_NEAR(d.omega_sq, b.omega_sq, 1e-9);
    EXPECT_NEAR(d.kantorovich, b.w, 1e-9);
}

TEST(Distances, SymmetricAndZeroOnSelf)
{
    const auto f = AnalyticCDF::sphere_marginal(6, 2.0);
    const auto self = distances(f, f);
    EXPECT_NEAR(self.rho, 0, 1e-14);
    EXPECT_NEAR(self.omega_sq, 0, 1e-14);
    const double pts[] = {-1.0, 0.2, 0.4, 2.0};
    const auto e = ecdf(pts);
    EXPECT_NEAR(kolmogorov(e, f), kolmogorov(PiecewiseCDF::from_steps(e), f), 1e-15);
    EXPECT_NEAR(l2_dist(e, f) * l2_dist(e, f), omega_sq(e, f), 1e-15);
}

TEST(Ecdf, WeightsAndValidation)
{
    const double x[] = {2.0, 1.0, 1.0}, w[] = {0.5, 0.25, 0.25};
    const auto e = ecdf(x, w);
    EXPECT_DOUBLE_EQ(e.cdf(1.0), 0.5);
    EXPECT_DOUBLE_EQ(e.cdf(0.99), 0.0);
    EXPECT_DOUBLE_EQ(e.cdf(2.0), 1.0);
    const double bad[] = {0.5, 0.6, 0.1};
    EXPECT_THROW(ecdf(x, bad), invalid_parameter);
    const double nan[] = {std::nan("")};
    EXPECT_THROW(ecdf(nan), invalid_parameter);
}

TEST(Typical, FixedNormIsSphereMarginal)
{
    const System w = make_system(SystemKind::walsh, 15);
    const auto t = typical_target(w, 64, 1);
    EXPECT_EQ(t.kind(), AnalyticCDF::Kind::sphere_marginal);
    EXPECT_NEAR(typical_cdf(w, 1.0, Budget::exact()).value, theta1_cdf(15, 1 / std::sqrt(15.0)), 1e-15);
    EXPECT_GT(weighted_tv_typical(w), 0);
}

TEST(Typical, MixtureAgreesWithMonteCarlo)
{
    const System c = make_system(SystemKind::cosine, 8);
    const auto t = typical_target(c, 4096, 3);
    const Estimate e = typical_cdf(c, 0.7, Budget::monte_carlo(50'000, 4, 1));
    EXPECT_NEAR(t.cdf(0.7), e.value, 4 * e.std_error + 0.01);
}

TEST(ThetaLaw, FiniteSystemIsExactStepFunction)
{
    const System w = make_system(SystemKind::walsh, 7);
    const UnitVector th = sphere_direction(7, 5, 0);
    const auto law = theta_law(w, th.coords(), 0, 1e-3);
    ASSERT_TRUE(law.discrete);
    EXPECT_EQ(law.w_error, 0);
    double mean = 0;
    for (std::size_t i = 0; i < law.discrete->atoms.size(); ++i)
        mean += law.discrete->atoms[i] * law.discrete->weights[i];
    EXPECT_NEAR(mean, 0, 1e-14);
}

TEST(ThetaLaw, TrigGridMatchesSampling)
{
    const System s = make_system(SystemKind::trig, 6);
    const UnitVector th = sphere_direction(6, 2, 3);
    const auto law = theta_law(s, th.coords(), 1 << 14, 1e-3);
    EXPECT_LE(law.w_error, 1e-3);
    // Independent oracle: quantiles of <X(t), theta> on a fine midpoint grid.
    const int m = 400000;
    std::vector<double> v(m);
    for (int i = 0; i < m; ++i) {
        const auto x = s.evaluate(Omega{-std::numbers::pi + 2 * std::numbers::pi * (i + 0.5) / m});
        double d = 0;
        for (int k = 0; k < 6; ++k)
            d += x[k] * th[k];
        v[i] = d;
    }
    const auto e = ecdf(v);
    EXPECT_LT(kolmogorov(e, AnalyticCDF::standard_normal()) - kolmogorov(law.cdf, AnalyticCDF::standard_normal()), 1e-3);
    const auto pe = PiecewiseCDF::from_steps(e);
    EXPECT_LT(distances(pe, law.cdf).kantorovich, 1e-3);
}

TEST(ThetaLaw, BudgetErrorReportsRequirement)
{
    const System s = make_system(SystemKind::trig, 16);
    const UnitVector th = sphere_direction(16, 2, 0);
    try {
        theta_law(s, th.coords(), 8, 1e-4);
        FAIL() << "expected budget_error";
    } catch (const budget_error& e) {
        EXPECT_GT(e.required_budget(), 8u);
        EXPECT_NO_THROW(theta_law(s, th.coords(), e.required_budget(), 1e-4));
    }
}

TEST(ThetaLaw, SawtoothIsUncertified)
{
    SystemParams p;
    p.profile = PeriodicProfile::preset("sawtooth");
    const System s = make_system(SystemKind::shifted_periodic, 4, p);
    const UnitVector th = sphere_direction(4, 1, 0);
    EXPECT_TRUE(std::isnan(theta_law(s, th.coords(), 1 << 12, 1e-3).w_error));
}

TEST(SphereAverage, EmpiricalConstant)
{
    SphereOptions o;
    o.n_theta = 1000;
    o.seed = 6;
    const auto a = sphere_average_distance(make_system(SystemKind::empirical, 32), Metric::omega_sq, Target::normal, o);
    EXPECT_NEAR(32 * a.mean, 7 / (8 * std::sqrt(std::numbers::pi)), 4 * 32 * a.std_error + 2.0 / 32);
    EXPECT_EQ(a.inner_budget, 0u);
}

TEST(SphereAverage, ThreadIndependentAndSerialized)
{
    SphereOptions o;
    o.n_theta = 40;
    o.inner_budget = 1 << 12;
    o.seed = 8;
    const System s = make_system(SystemKind::trig, 4);
    const Metric ms[] = {Metric::rho, Metric::kantorovich};
    const auto one = sphere_average(s, ms, Target::typical, o);
    o.threads = 3;
    const auto three = sphere_average(s, ms, Target::typical, o);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(one[i].samples, three[i].samples);
        EXPECT_EQ(to_csv_row(one[i]), to_csv_row(three[i]));
    }
    const std::string row = to_csv_row(one[0]);
    EXPECT_EQ(std::count(row.begin(), row.end(), ','), std::count(csv_header, csv_header + std::strlen(csv_header), ','));
    EXPECT_EQ(to_json(one[1]).at("metric"), "kantorovich");
}

TEST(SphereAverage, SingleDirectionHasZeroStderr)
{
    SphereOptions o;
    o.n_theta = 1;
    const auto a = sphere_average_distance(make_system(SystemKind::walsh, 7), Metric::rho, Target::normal, o);
    EXPECT_EQ(a.std_error, 0);
    o.n_theta = 0;
    EXPECT_THROW(sphere_average_distance(make_system(SystemKind::walsh, 7), Metric::rho, Target::normal, o),
                 invalid_parameter);
}

TEST(Names, RoundTrip)
{
    for (auto m : {Metric::rho, Metric::omega, Metric::omega_sq, Metric::rho_sq, Metric::kantorovich})
        EXPECT_EQ(metric_from_string(to_string(m)), m);
    EXPECT_EQ(target_from_string("typical"), Target::typical);
    EXPECT_THROW(metric_from_string("hellinger"), invalid_parameter);
    EXPECT_THROW(target_from_string("uniform"), invalid_parameter);
}
