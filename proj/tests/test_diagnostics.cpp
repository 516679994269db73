#include "lbk/diagnostics.hpp"
#include "lbk/solver.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace lbk;

namespace {

// Smooth, decaying random perturbation: sqrt(mu) times a random quadratic polynomial.
std::vector<double> smooth_random(const GridPtr& g, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1, 1);
    double c[8];
    for (double& x : c) x = U(rng);
    const DensityField mu = maxwellian(g);
    std::vector<double> f(g->size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        const Vec& v = g->node(i);
        const double P = c[0] + c[1] * v[0] + c[2] * v[1] + c[3] * v[0] * v[1] + c[4] * v[0] * v[0] + c[5] * v[1] * v[1] +
                         c[6] * v[0] * v[0] * v[1] + c[7] * v[1] * v[1] * v[1];
        f[i] = std::sqrt(mu.values[i]) * P * std::exp(-0.2 * dot(v, v));
    }
    return f;
}

}

TEST(Diagnostics, MomentsOfMaxwellian)
{
    for (int d : {2, 3}) {
        const GridPtr g = make_grid(d, 6.0, d == 2 ? 33 : 25);
        const Moments m = moments(maxwellian(g));
        EXPECT_NEAR(m.mass, 1.0, 1e-12);
        EXPECT_NEAR(m.momentum[0], 0.0, 1e-15);
        EXPECT_NEAR(m.energy, d / 4.0, 1e-12);
        const Moments s = moments(maxwellian(g, 1.0, {0.5, -0.25, 0}));
        EXPECT_NEAR(s.momentum[0], 0.5, 1e-12);
        EXPECT_NEAR(s.momentum[1], -0.25, 1e-12);
    }
}

TEST(Diagnostics, EntropyOfMaxwellian)
{
    const GridPtr g = make_grid(2, 6.0, 33);
    const DensityField mu = maxwellian(g);
    // int mu log mu = -log(pi) - 1 for d = 2, beta = 1.
    const EntropyValue H = boltzmann_entropy(*g, mu.values);
    EXPECT_NEAR(H.value, -std::log(pi) - 1.0, 1e-10);
    EXPECT_NEAR(relative_entropy(*g, mu.values).value, 0.0, 1e-14);
    const DensityField other = maxwellian(g, 1.0, {0.3, 0, 0});
    // H(mu_u | mu) = |u|^2.
    EXPECT_NEAR(relative_entropy(*g, other.values).value, 0.09, 1e-10);
}

TEST(Diagnostics, EntropyExcludesTinyValues)
{
    const GridPtr g = make_grid(2, 3.0, 9);
    DensityField F = maxwellian(g);
    F.values[0] = 0.0;
    F.values[1] = 1e-301;
    const EntropyValue H = boltzmann_entropy(*g, F.values);
    EXPECT_EQ(H.excluded, 2u);
    EXPECT_TRUE(std::isfinite(H.value));
}

TEST(Diagnostics, NullSpaceIsOrthonormalAndCatchesCollisionInvariants)
{
    for (int d : {2, 3}) {
        const GridPtr g = make_grid(d, 6.0, d == 2 ? 25 : 13);
        const NullSpace S(g);
        ASSERT_EQ(S.dim(), std::size_t(d + 2));
        for (std::size_t a = 0; a < S.dim(); ++a)
            for (std::size_t b = 0; b < S.dim(); ++b)
                EXPECT_NEAR(weighted_inner(*g, S.vector(a), S.vector(b)), a == b ? 1.0 : 0.0, 1e-13);
        // sqrt(mu) (1 + v_1 - |v|^2) lies in S0.
        std::vector<double> f(g->size());
        for (std::size_t i = 0; i < f.size(); ++i) {
            const Vec& v = g->node(i);
            f[i] = S.sqrt_mu()[i] * (1 + v[0] - dot(v, v));
        }
        const auto split = S.project(f);
        EXPECT_LT(l2_norm(*g, split.residual), 1e-13 * l2_norm(*g, f));
        EXPECT_NEAR(S.projection_norm(f), l2_norm(*g, f), 1e-12);
    }
}

TEST(Diagnostics, H2NormOfZeroAndScaling)
{
    const GridPtr g = make_grid(2, 6.0, 17);
    const auto f = smooth_random(g, 3);
    std::vector<double> z(g->size(), 0.0), f2 = f;
    for (double& x : f2) x *= 2;
    EXPECT_EQ(discrete_h2_norm(*g, z), 0.0);
    EXPECT_NEAR(discrete_h2_norm(*g, f2), 2 * discrete_h2_norm(*g, f), 1e-13);
    EXPECT_GT(discrete_h2_norm(*g, f), l2_norm(*g, f));
}

TEST(Diagnostics, WeightSpecValidation)
{
    EXPECT_NO_THROW((WeightSpec{2, 0, 0}.validate()));
    EXPECT_NO_THROW((WeightSpec{0, 2, 0.9}.validate()));
    EXPECT_THROW((WeightSpec{-1, 0, 0}.validate()), ConfigError);
    EXPECT_THROW((WeightSpec{0, 2.5, 0.1}.validate()), ConfigError);
    EXPECT_THROW((WeightSpec{0, 2, 1.0}.validate()), ConfigError);
    EXPECT_THROW((WeightSpec{0, 1, -0.1}.validate()), ConfigError);
}

TEST(Diagnostics, WeightedNormFlagsOverflow)
{
    const GridPtr g = make_grid(2, 30.0, 7);
    std::vector<double> f(g->size(), 1e-3);
    const WeightedNorm w = weighted_l2(*g, f, {0, 2, 0.9});
    EXPECT_TRUE(w.overflow);
    EXPECT_TRUE(std::isinf(w.value));
    const GridPtr s = make_grid(2, 6.0, 7);
    std::vector<double> one(s->size(), 1.0);
    const WeightedNorm p = weighted_l2(*s, one, {0, 0, 0});
    EXPECT_FALSE(p.overflow);
    EXPECT_NEAR(p.value, 144.0, 1e-10);
}

TEST(Diagnostics, LinearizationMatchesDerivativeOfCollisionOperator)
{
    // The operator is the linearization of the log weak form (D log mu is exact, so B kills it).
    const GridPtr g = make_grid(2, 6.0, 17);
    auto pk = std::make_shared<const PairKernels>(PairKernels::landau(g, 0.07));
    const LinearizedOperator Lop(pk);
    const NullSpace S(g);
    const auto f = smooth_random(g, 5);
    const auto Lf = Lop.apply(f);
    const DensityField mu = maxwellian(g);
    const double e = 1e-4;
    std::vector<double> Fp(g->size()), Fm(g->size());
    for (std::size_t i = 0; i < Fp.size(); ++i) {
        Fp[i] = mu.values[i] + e * S.sqrt_mu()[i] * f[i];
        Fm[i] = mu.values[i] - e * S.sqrt_mu()[i] * f[i];
    }
    const auto Rp = collision_rate(*pk, Fp, WeakForm::log), Rm = collision_rate(*pk, Fm, WeakForm::log);
    double err = 0, scale = 0;
    for (std::size_t i = 0; i < Fp.size(); ++i) {
        const double fd = (Rp[i] - Rm[i]) / (2 * e) / S.sqrt_mu()[i];
        if (S.sqrt_mu()[i] < 1e-6) continue;  // avoid dividing round-off by tiny weights
        err = std::max(err, std::abs(fd - Lf[i]));
        scale = std::max(scale, std::abs(Lf[i]));
    }
    EXPECT_LT(err, 1e-6 * scale);
}

TEST(Diagnostics, LinearizedOperatorIsSymmetricAndNonpositive)
{
    const GridPtr g = make_grid(2, 6.0, 17);
    const KernelWeightTable I(maxwellian_screening_table(default_directions(2), marginal_axis(*g)), gaussian_spectrum(1, 1), 2);
    const LinearizedOperator Lop(std::make_shared<const PairKernels>(PairKernels::screened(g, I)));
    const NullSpace S(g);
    ASSERT_EQ(Lop.coefficients().grid, g);
    const auto f = smooth_random(g, 1), h = smooth_random(g, 2);
    EXPECT_GT(dissipation_norm(Lop.coefficients(), f), 0.0);
    const double a = weighted_inner(*g, h, Lop.apply(f)), b = weighted_inner(*g, f, Lop.apply(h));
    EXPECT_NEAR(a, b, 1e-12 * std::abs(a));
    for (std::uint64_t seed = 10; seed < 20; ++seed) {
        const auto r = smooth_random(g, seed);
        const double p = Lop.probe(r), q = Lop.symmetric_probe(r);
        EXPECT_GE(q, 0.0);
        EXPECT_NEAR(p, q, 1e-12 * q);
    }
    for (std::size_t k = 0; k < S.dim(); ++k) {
        const std::vector<double> e(S.vector(k).begin(), S.vector(k).end());
        EXPECT_LT(std::abs(Lop.probe(e)), 1e-15);
        EXPECT_LT(l2_norm(*g, Lop.apply(e)), 1e-13);
    }
}

TEST(Diagnostics, DissipationNormParts)
{
    const GridPtr g = make_grid(2, 6.0, 17);
    const CoefficientField A = equilibrium_coefficients(g, gaussian_spectrum(1, 1));
    const auto f = smooth_random(g, 4);
    const DissipationParts p = dissipation_parts(A, f);
    EXPECT_GT(p.gradient, 0);
    EXPECT_GT(p.velocity, 0);
    EXPECT_NEAR(dissipation_norm(A, f), std::sqrt(p.total()), 1e-12 * std::sqrt(p.total()));
}

TEST(Diagnostics, EntropyDissipationVanishesAtMaxwellian)
{
    const GridPtr g = make_grid(2, 6.0, 17);
    const PairKernels unit = PairKernels::landau(g, 1.0);
    const DensityField mu = maxwellian(g);
    EXPECT_LT(entropy_dissipation(unit, mu.values).value, 1e-20);
    const DensityField F = maxwellian(g, 1.5, {0.4, 0, 0});
    std::vector<double> mix(g->size());
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 0.5 * (mu.values[i] + F.values[i]);
    EXPECT_GT(entropy_dissipation(unit, mix).value, 1e-4);
}

TEST(Diagnostics, RowAndCsv)
{
    const GridPtr g = make_grid(2, 6.0, 17);
    const RadialSpectrum V = gaussian_spectrum(1, 1);
    const DiagnosticsContext ctx(g, V);
    const DensityField mu = maxwellian(g);
    const DiagnosticRow r = ctx.row(0.5, mu.values, nullptr);
    EXPECT_EQ(r.t, 0.5);
    EXPECT_NEAR(r.m.mass, 1.0, 1e-6);  // coarse n = 17 trapezoid
    EXPECT_NEAR(r.rel_entropy, 0.0, 1e-12);
    EXPECT_NEAR(r.l2_f, 0.0, 1e-12);
    EXPECT_TRUE(std::isnan(r.penrose_min));
    const ScreeningTable T = build_screening_table(mu, default_directions(2), marginal_axis(*g));
    EXPECT_GT(ctx.row(0.5, mu.values, &T).penrose_min, 0.5);

    EXPECT_EQ(csv_header(2),
              "t,mass,momentum_1,momentum_2,energy,entropy,rel_entropy,entropy_dissipation,l2_f,dissipation_norm,min_F,"
              "penrose_min");
    std::ostringstream os;
    const std::vector<DiagnosticRow> rows{r, r};
    write_csv(os, rows, 2);
    const std::string s = os.str();
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 3);
    // Round trip of a printed value is exact (17 significant digits).
    const std::string line = csv_line(r, 2);
    EXPECT_EQ(std::stod(line.substr(line.find(',') + 1)), r.m.mass);
}
