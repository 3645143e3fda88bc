#include "randclt/quadrature.hpp"
#include "randclt/random.hpp"
#include "randclt/systems.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace randclt;
using std::numbers::pi;

namespace {

using Gram = std::vector<std::vector<double>>;

// E X_j X_k by quadrature over a uniform parameter u in (0,1).
Gram gram_1d(const System& s, std::function<Omega(double)> at)
{
    const int n = s.n();
    Gram g(n, std::vector<double>(n, 0));
    quad::Options opt;
    opt.initial_panels = 64;
    opt.abs_tol = 1e-12;
    for (int j = 0; j < n; ++j)
        for (int k = j; k < n; ++k) {
            auto f = [&](double u) {
                const auto x = s.evaluate(at(u));
                return x[j] * x[k];
            };
            g[j][k] = g[k][j] = quad::integrate(f, 0.0, 1.0, opt).value;
        }
    return g;
}

Gram gram_atoms(const System& s)
{
    const int n = s.n();
    Gram g(n, std::vector<double>(n, 0));
    const double w = 1.0 / static_cast<double>(s.atom_count());
    for (std::size_t a = 0; a < s.atom_count(); ++a) {
        const auto x = s.evaluate(s.atom(a));
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                g[j][k] += w * x[j] * x[k];
    }
    return g;
}

void expect_identity(const Gram& g, double tol)
{
    for (std::size_t j = 0; j < g.size(); ++j)
        for (std::size_t k = 0; k < g.size(); ++k)
            EXPECT_NEAR(g[j][k], j == k ? 1.0 : 0.0, tol) << j << "," << k;
}

} // namespace

TEST(Orthonormality, Trig)
{
    const System s = make_system(SystemKind::trig, 8);
    expect_identity(gram_1d(s, [](double u) { return Omega{-pi + 2 * pi * u}; }), 1e-10);
}

TEST(Orthonormality, Cosine)
{
    const System s = make_system(SystemKind::cosine, 6);
    expect_identity(gram_1d(s, [](double u) { return Omega{pi * u}; }), 1e-10);
}

TEST(Orthonormality, Chebyshev)
{
    // arcsine law: t = cos(pi u)
    const System s = make_system(SystemKind::chebyshev, 6);
    expect_identity(gram_1d(s, [](double u) { return Omega{std::cos(pi * u)}; }), 1e-10);
}

TEST(Orthonormality, LacunaryExplicit)
{
    SystemParams p;
    p.frequencies = {1, 3, 7};
    const System s = make_system(SystemKind::lacunary_trig, 0, p);
    EXPECT_EQ(s.n(), 6);
    expect_identity(gram_1d(s, [](double u) { return Omega{-pi + 2 * pi * u}; }), 1e-10);
}

TEST(Orthonormality, ShiftedPeriodic)
{
    for (const char* psi : {"cosine", "triangle"}) {
        SystemParams p;
        p.profile = PeriodicProfile::preset(psi);
        const System s = make_system(SystemKind::shifted_periodic, 4, p);
        // midpoint rule on a fine square grid; exact up to O(h^2) for these profiles
        const int m = 600;
        Gram g(4, std::vector<double>(4, 0));
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) {
                const auto x = s.evaluate(Omega{(a + 0.5) / m, (b + 0.5) / m});
                for (int j = 0; j < 4; ++j)
                    for (int k = 0; k < 4; ++k)
                        g[j][k] += x[j] * x[k] / (double(m) * m);
            }
        expect_identity(g, 2e-4);
    }
}

TEST(Orthonormality, FiniteSystems)
{
    expect_identity(gram_atoms(make_system(SystemKind::walsh, 0, SystemParams{.d = 4})), 1e-14);
    expect_identity(gram_atoms(make_system(SystemKind::empirical, 9)), 1e-14);
}

TEST(Walsh, AtomConvention)
{
    const System s = make_system(SystemKind::walsh, 7);
    EXPECT_EQ(s.walsh_order(), 3);
    const int signs[] = {-1, 1, -1};
    const auto x = s.evaluate(System::walsh_atom(signs));
    // X_j = prod of t_k over the binary digits of j: j=1 -> t1, j=3 -> t1 t2, j=5 -> t1 t3, j=7 -> t1 t2 t3
    EXPECT_EQ(x[0], -1);
    EXPECT_EQ(x[1], 1);
    EXPECT_EQ(x[2], -1);
    EXPECT_EQ(x[3], -1);
    EXPECT_EQ(x[4], 1);
    EXPECT_EQ(x[6], 1);
}

TEST(Flags, FixedNormHolds)
{
    auto eng = Stream(3).engine();
    SystemParams lac;
    lac.q = 3;
    for (const System& s : {make_system(SystemKind::trig, 10), make_system(SystemKind::walsh, 0, SystemParams{.d = 3}),
                            make_system(SystemKind::empirical, 5), make_system(SystemKind::lacunary_trig, 6, lac)}) {
        ASSERT_TRUE(s.flags().fixed_norm) << s.label();
        for (int r = 0; r < 50; ++r) {
            const auto x = s.sample(eng).x;
            double sq = 0;
            for (double v : x)
                sq += v * v;
            EXPECT_NEAR(sq, s.n(), 1e-11);
        }
    }
}

TEST(Flags, Values)
{
    const auto c = make_system(SystemKind::cosine, 4).flags();
    EXPECT_TRUE(c.isotropic);
    EXPECT_FALSE(c.fixed_norm);
    EXPECT_TRUE(c.mean_zero);
    EXPECT_DOUBLE_EQ(c.sup_norm_bound, std::sqrt(2.0));
    const auto e = make_system(SystemKind::empirical, 16).flags();
    EXPECT_FALSE(e.mean_zero);
    EXPECT_DOUBLE_EQ(e.sup_norm_bound, 4.0);
    EXPECT_DOUBLE_EQ(make_system(SystemKind::walsh, 3).flags().sup_norm_bound, 1.0);
    SystemParams p;
    p.profile = PeriodicProfile::preset("triangle");
    EXPECT_DOUBLE_EQ(make_system(SystemKind::shifted_periodic, 3, p).flags().sup_norm_bound, std::sqrt(3.0));
}

TEST(Sigma4, ExactValues)
{
    EXPECT_EQ(*exact_sigma4(make_system(SystemKind::cosine, 8)), 0.5);
    EXPECT_EQ(*exact_sigma4(make_system(SystemKind::chebyshev, 8)), 0.5);
    EXPECT_EQ(*exact_sigma4(make_system(SystemKind::trig, 8)), 0.0);
    SystemParams p;
    p.profile = PeriodicProfile::preset("cosine");
    EXPECT_DOUBLE_EQ(*exact_sigma4(make_system(SystemKind::shifted_periodic, 8, p)), 0.5);
}

TEST(Profiles, FourthMomentsByQuadrature)
{
    for (const char* name : {"cosine", "triangle", "sawtooth"}) {
        const auto p = PeriodicProfile::preset(name);
        const double m4 = quad::integrate([&](double x) { return std::pow(p.psi(x), 4); }, 0.0, 1.0).value;
        EXPECT_NEAR(m4, *p.fourth_moment, 1e-9) << name;
    }
}

TEST(Lacunary, GeometricRule)
{
    EXPECT_EQ(detail::geometric_frequencies(6, 1, 1.5), (std::vector<long long>{1, 2, 3, 5, 8, 12}));
    EXPECT_EQ(detail::geometric_frequencies(4, 1, 2), (std::vector<long long>{1, 2, 4, 8}));
    SystemParams p;
    p.q = 2;
    EXPECT_EQ(make_system(SystemKind::lacunary_trig, 8, p).frequencies(), (std::vector<long long>{1, 2, 4, 8}));
}

TEST(TrigForm, ReproducesInnerProduct)
{
    auto eng = Stream(8).engine();
    for (const System& s : {make_system(SystemKind::trig, 6), make_system(SystemKind::cosine, 5),
                            make_system(SystemKind::chebyshev, 5)}) {
        std::vector<double> th(s.n());
        for (int k = 0; k < s.n(); ++k)
            th[k] = std::cos(k + 1.0);
        const auto f = *s.trig_form(th);
        for (double u : {0.1, 0.37, 0.8}) {
            const double a = f.angle_offset + f.angle_span * u;
            double v = 0;
            for (const auto& t : f.terms)
                v += t.cos_coef * std::cos(t.frequency * a) + t.sin_coef * std::sin(t.frequency * a);
            const Omega w{s.kind() == SystemKind::chebyshev ? std::cos(a) : a};
            const auto x = s.evaluate(w);
            double dot = 0;
            for (int k = 0; k < s.n(); ++k)
                dot += x[k] * th[k];
            EXPECT_NEAR(v, dot, 1e-12) << s.label();
        }
    }
    (void)eng;
    EXPECT_FALSE(make_system(SystemKind::walsh, 3).trig_form(std::vector<double>(3, 0.5)).has_value());
}

TEST(Errors, ParameterChecks)
{
    EXPECT_THROW(make_system(SystemKind::trig, 7), invalid_parameter);
    EXPECT_THROW(make_system(SystemKind::walsh, 6), invalid_parameter);
    EXPECT_THROW(make_system(SystemKind::cosine, 1), invalid_parameter);
    SystemParams bad;
    bad.frequencies = {1, 3, 3};
    EXPECT_THROW(make_system(SystemKind::lacunary_trig, 0, bad), invalid_parameter);
    SystemParams low_q;
    low_q.frequencies = {1, 2, 3};
    low_q.q = 2;
    EXPECT_THROW(make_system(SystemKind::lacunary_trig, 0, low_q), invalid_parameter);
    EXPECT_THROW(PeriodicProfile::preset("square"), invalid_parameter);
    SystemParams unnormalized;
    unnormalized.profile = PeriodicProfile{"half", [](double x) { return std::cos(2 * pi * x); }};
    EXPECT_THROW(make_system(SystemKind::shifted_periodic, 4, unnormalized), invalid_parameter);
    EXPECT_THROW(make_system(SystemKind::trig, 4).atom_count(), unsupported_mode);
    EXPECT_THROW(system_kind_from_string("haar"), invalid_parameter);
}

TEST(Json, RoundTrip)
{
    SystemParams p;
    p.frequencies = {2, 5, 11};
    for (const System& s : {make_system(SystemKind::walsh, 15), make_system(SystemKind::lacunary_trig, 0, p),
                            make_system(SystemKind::empirical, 12)}) {
        const System t = system_from_json(to_json(s));
        EXPECT_EQ(t.kind(), s.kind());
        EXPECT_EQ(t.n(), s.n());
        EXPECT_EQ(t.frequencies(), s.frequencies());
        EXPECT_EQ(to_json(t), to_json(s));
    }
    const System w = system_from_json({{"kind", "walsh"}, {"params", {{"d", 3}}}}, 31);
    EXPECT_EQ(w.walsh_order(), 5);
    EXPECT_THROW(system_from_json({{"n", 4}}), invalid_parameter);
    EXPECT_THROW(system_from_json({{"kind", "trig"}, {"n", "four"}}), invalid_parameter);
}
