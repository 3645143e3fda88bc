#include "randclt/expansions.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace randclt;

TEST(PsiR, ClosedFormExamples)
{
    for (double r : {-2.0, 0.0, 0.3, 5.0})
        EXPECT_NEAR(psi_r(1, r), -r, 1e-15);
    EXPECT_DOUBLE_EQ(psi_r(4, 0), -1);
    EXPECT_NEAR(psi_r(0.25, 0.1), -0.3, 1e-15);
    EXPECT_EQ(psi_r(0, 0), 1);
    EXPECT_THROW(psi_r(-1, 0), invalid_parameter);
    EXPECT_THROW(psi_r(0, 1), invalid_parameter);
}

TEST(PsiR, QuadratureAgrees)
{
    for (double a : {0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 9.0})
        for (double r : {-1.0, 0.0, 0.1, 1.0, 3.0})
            EXPECT_NEAR(psi_r_quadrature(a, r), psi_r(a, r), 1e-8) << a << " " << r;
    EXPECT_THROW(psi_r_quadrature(0, 0), invalid_parameter);
}

TEST(Identity, MinIntegral)
{
    for (double eta : {0.1, 0.25, 1.0, 7.0})
        EXPECT_NEAR(identity_3_6(eta), 4 * eta, 1e-8);
    EXPECT_THROW(identity_3_6(0), invalid_parameter);
}

TEST(SqrtEnvelope, SandwichOnGrid)
{
    for (int i = 0; i <= 20000; ++i) {
        const double e = -1 + i / 10000.0;
        const double v = one_minus_sqrt(e);
        EXPECT_NEAR(v, 1 - std::sqrt(1 - e), 1e-15);
        EXPECT_LE(sqrt_lower_envelope(e), v);
        EXPECT_GE(sqrt_upper_envelope(e), v);
    }
}

TEST(RStatistic, HandValues)
{
    const std::vector<double> z(4, 0.0);
    EXPECT_EQ(r_statistic(z, z), 0);
    EXPECT_EQ(r_statistic_full(z, z), 0);
    const std::vector<double> x{1, 1, 1, 1}, y{1, -1, 1, -1};
    // |x|^2 = |y|^2 = 4, |x - y|^2 = 8, n = 4
    EXPECT_NEAR(r_statistic(x, y), std::sqrt(2.0) * (1 + 1.0 / 32) - std::sqrt(2.0) * (1 + 1.0 / 16), 1e-15);
    EXPECT_NEAR(r_statistic_full(x, y), std::sqrt(2.0) * (1 + 0.5 / 16) - std::sqrt(2.0) * (1 + 1.0 / 16), 1e-15);
    EXPECT_NEAR(r_statistic(x, x), std::sqrt(2.0) * (1 + 1.0 / 32), 1e-15);
    EXPECT_THROW(r_statistic(x, std::vector<double>{1, 2}), invalid_parameter);
}

TEST(Predictions, Cor51MatchesMeasurementOnWalsh)
{
    const System w = make_system(SystemKind::walsh, 0, SystemParams{.d = 3});
    const auto p = cor51_prediction(w, xi_functionals(w, Budget::exact()));
    SphereOptions o;
    o.n_theta = 3000;
    o.seed = 31;
    const auto a = sphere_average_distance(w, Metric::omega_sq, Target::typical, o);
    const double n = w.n();
    EXPECT_NEAR(a.mean, p.main, 3 * a.std_error + 2 / (n * n));
    EXPECT_THROW(cor51_prediction(make_system(SystemKind::cosine, 4), XiMoments{}), unsupported_mode);
}

TEST(Predictions, Prop42AgreesWithCor51)
{
    // Both expansions describe the same quantity to O(1/n^2).
    const System w = make_system(SystemKind::walsh, 0, SystemParams{.d = 6});
    const auto a = prop42_prediction(w, Budget::exact());
    const auto b = cor51_prediction(w, xi_functionals(w, Budget::exact()));
    EXPECT_NEAR(a.main, b.main, 3 * (a.error_scale + b.error_scale));
    EXPECT_EQ(a.main_stderr, 0);
}

TEST(Predictions, Thm11AndItsFallback)
{
    const System w = make_system(SystemKind::walsh, 0, SystemParams{.d = 4});
    MomentReport mr;
    mr.n = w.n();
    mr.xi = xi_functionals(w, Budget::exact());
    const auto p = thm11_prediction(w, mr);
    EXPECT_EQ(p.kind, "thm11");
    EXPECT_TRUE(p.applicable);
    EXPECT_NEAR(p.main, mr.xi.e3.value / (16 * std::sqrt(std::numbers::pi)), 1e-15);

    const System e = make_system(SystemKind::empirical, 16);
    MomentReport me;
    me.n = 16;
    me.xi = xi_functionals(e, Budget::exact());
    const auto q = thm11_prediction(e, me);
    EXPECT_EQ(q.kind, "remark53");
    EXPECT_FALSE(q.applicable);
    EXPECT_NEAR(q.main, (1.0 / 16) / (2 * std::sqrt(std::numbers::pi)), 1e-15);
    const auto j = to_json(q);
    EXPECT_TRUE(j.contains("main") && j.contains("error_scale"));
}

TEST(Bounds, Thm12OnWalsh)
{
    const System w = make_system(SystemKind::walsh, 0, SystemParams{.d = 4});
    const auto b = thm12_lower_bound(w, Budget::exact());
    EXPECT_NEAR(b.value, (1.0 / 32) / 16 - 1.0 / 225, 1e-15);
    EXPECT_EQ(b.kind, "thm12_lower");
    EXPECT_EQ(b.params.at("c1"), 1.0 / 32);
    const auto custom = thm12_lower_bound(w, Budget::exact(), 1, 0);
    EXPECT_NEAR(custom.value, 1.0 / 16, 1e-15);
}

TEST(Bounds, SmoothingFunctional)
{
    const auto phi = normal_cf();
    // a = b leaves only (1/T) \int_0^T e^{-t^2/2} dt
    const double T = 3;
    const double expect = std::sqrt(std::numbers::pi / 2) * std::erf(T / std::sqrt(2.0)) / T;
    EXPECT_NEAR(smoothing_functional(phi, phi, T), expect, 1e-10);
    EXPECT_GT(smoothing_functional(typical_cf(10), phi, T), expect);
    EXPECT_THROW(smoothing_functional(phi, phi, 0), invalid_parameter);
}

TEST(Bounds, RhoLowerFunctional)
{
    EXPECT_NEAR(rho_lower_functional(normal_cf(), 1), 0, 1e-15);
    // It is a lower bound for the Kolmogorov distance.
    for (int n : {5, 20}) {
        const double lower = rho_lower_functional(typical_cf(n), 1);
        const double rho = kolmogorov(AnalyticCDF::sphere_marginal(n, std::sqrt(double(n))), AnalyticCDF::standard_normal());
        EXPECT_GT(lower, 0);
        EXPECT_LE(lower, rho);
    }
}

TEST(Bounds, DeltaNOnWalsh)
{
    // Exact pair law: |X-Y| = 0 w.p. 2^-d, otherwise |X - Y|^2 = 2(n+1).
    const System w = make_system(SystemKind::walsh, 0, SystemParams{.d = 3});
    const double n = 7, p = 1.0 / 8, t = 0.4;
    const double jt = randclt::jn(7, t * std::sqrt(n));
    const double expect = p + (1 - p) * randclt::jn(7, t * std::sqrt(2 * (n + 1))) - jt * jt;
    EXPECT_NEAR(delta_n(w, t, Budget::exact()).value, expect, 1e-12);
    EXPECT_EQ(delta_n(w, 0, Budget::exact()).value, 0);
    EXPECT_THROW(delta_n(make_system(SystemKind::cosine, 4), 1, Budget::exact()), unsupported_mode);
}

TEST(Bounds, ClosenessLowerBound)
{
    EXPECT_NEAR(closeness_lower_bound(0.25, 10, 1.0 / 12), 0.5 / (60 * std::sqrt(1.0 / 12)), 1e-15);
}

TEST(CharacteristicFunctions, ThetaCfIsBesselForOneFrequency)
{
    // n = 2, theta = e_1: <X, theta> = sqrt2 cos(a), whose cf is J_0(sqrt2 t).
    const System s = make_system(SystemKind::trig, 2);
    const std::vector<double> th{1, 0};
    const auto f = *s.trig_form(th);
    for (double t : {0.0, 0.5, 2.0, 9.0})
        EXPECT_NEAR(theta_cf(f, t).real(), std::cyl_bessel_j(0.0, std::sqrt(2.0) * t), 1e-10);
    EXPECT_NEAR(std::abs(theta_cf(f, 3.0).imag()), 0, 1e-12);
    EXPECT_NEAR(typical_cf(7)(1.3).real(), randclt::jn(7, 1.3 * std::sqrt(7.0)), 1e-15);
}

TEST(CharacteristicFunctions, PlancherelMatchesCdfIntegration)
{
    const System s = make_system(SystemKind::trig, 4);
    const UnitVector th = sphere_direction(4, 12, 0);
    const auto law = theta_law(s, th.coords(), 1 << 16, 1e-5);
    const double direct = omega_sq(law.cdf, AnalyticCDF::sphere_marginal(4, 2.0));
    double tail = 0;
    const double pl = plancherel_omega_sq(*s.trig_form(th.coords()), 4, 120, &tail);
    EXPECT_NEAR(pl, direct, 1e-3);
    EXPECT_GT(tail, 0);
}
