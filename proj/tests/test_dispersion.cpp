#include "lbk/dispersion.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace lbk;

namespace {

// Independent principal-value oracle for the unit Maxwellian marginal M(y) = exp(-y^2)/sqrt(pi):
// p.v. int M'(y)/(u - y) dy = int_0^inf (M'(u - s) - M'(u + s)) / s ds, plus i pi M'(u).
double dM(double y) { return -2.0 * y * std::exp(-y * y) / std::sqrt(pi); }

Complex z_oracle(double u)
{
    using boost::math::quadrature::gauss_kronrod;
    auto g = [u](double s) {
        if (s < 1e-6) return (4.0 - 8.0 * u * u) * std::exp(-u * u) / std::sqrt(pi);  // -2 M''(u)
        return (dM(u - s) - dM(u + s)) / s;
    };
    double pv = 0;
    const double top = std::abs(u) + 12.0;
    for (int k = 0; k < 24; ++k) pv += gauss_kronrod<double, 31>::integrate(g, top * k / 24, top * (k + 1) / 24, 20, 1e-14);
    return {pv, pi * dM(u)};
}

}

TEST(Dispersion, DawsonReferenceValues)
{
    EXPECT_NEAR(dawson(1.0), 0.53807950691276841914, 1e-15);
    EXPECT_NEAR(dawson(0.5), 0.42443638350202229593, 1e-15);
    EXPECT_NEAR(dawson(-2.0), -0.30134038892379196603, 1e-15);
    EXPECT_EQ(dawson(0.0), 0.0);
    // Large-argument expansion 1/(2x) + 1/(4x^3) + 3/(8x^5) + 15/(16x^7).
    const double x = 40.0;
    EXPECT_NEAR(dawson(x), 1 / (2 * x) + 1 / (4 * x * x * x) + 3 / (8 * std::pow(x, 5)) + 15 / (16 * std::pow(x, 7)), 2e-14);
}

TEST(Dispersion, HFunctionLimits)
{
    EXPECT_EQ(h_function(0.0), 1.0);
    EXPECT_NEAR(h_function(30.0), -1.0 / 900.0, 1e-5);
    EXPECT_DOUBLE_EQ(h_function(1.7), h_function(-1.7));
}

TEST(Dispersion, OraclePrincipalValueAtOrigin)
{
    // p.v. at u = 0 is 2 int y^2 exp(-y^2) ... = 2 exactly.
    EXPECT_NEAR(z_oracle(0.0).real(), 2.0, 1e-12);
}

TEST(Dispersion, ClosedFormMatchesPrincipalValueQuadrature)
{
    for (double vhat : {0.1, 1.0, 10.0})
        for (int k = 0; k <= 60; ++k) {
            const double w = -6.0 + 0.2 * k;
            const Complex z = z_oracle(w / std::sqrt(2.0));
            const Complex ref = 1.0 + vhat * z;
            const Complex e = eps_maxwellian(w, vhat);
            EXPECT_NEAR(e.real(), ref.real(), 1e-8) << "w=" << w << " vhat=" << vhat;
            EXPECT_NEAR(e.imag(), ref.imag(), 1e-8) << "w=" << w << " vhat=" << vhat;
            EXPECT_NEAR(eps_maxwellian_abs2(w, vhat), std::norm(ref), 1e-7 * std::max(1.0, std::norm(ref)));
        }
}

TEST(Dispersion, SignConventionOfImaginaryPart)
{
    // Im eps = -sqrt(2 pi) vhat w exp(-w^2/2): negative for w > 0.
    const Complex e = eps_maxwellian(1.0, 2.0);
    EXPECT_NEAR(e.imag(), -std::sqrt(2 * pi) * 2.0 * std::exp(-0.5), 1e-15);
    EXPECT_LT(z_maxwellian(0.8).imag(), 0.0);
    EXPECT_GT(z_maxwellian(-0.8).imag(), 0.0);
}

TEST(Dispersion, ZOfMaxwellianBetaScaling)
{
    // Z for mu_beta at u equals beta Z_1(sqrt(beta) u).
    for (double beta : {0.5, 2.0})
        for (double u : {-1.1, 0.3, 2.5}) {
            const Complex a = z_maxwellian(u, beta), b = beta * z_maxwellian(std::sqrt(beta) * u);
            EXPECT_NEAR(a.real(), b.real(), 1e-13);
            EXPECT_NEAR(a.imag(), b.imag(), 1e-13);
        }
}

TEST(Dispersion, HilbertDirectAndFftAgree)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-1, 1);
    for (std::size_t n : {std::size_t(17), std::size_t(1000), std::size_t(4097), std::size_t(5003)}) {
        std::vector<double> g(n);
        for (double& x : g) x = U(rng);
        const auto a = hilbert_odd_direct(g), b = hilbert_odd_fft(g);
        double err = 0, scale = 0;
        for (std::size_t j = 0; j < n; ++j) {
            err = std::max(err, std::abs(a[j] - b[j]));
            scale = std::max(scale, std::abs(a[j]));
        }
        EXPECT_LT(err, 1e-10 * std::max(1.0, scale)) << "n=" << n;
    }
}

TEST(Dispersion, HilbertRuleApproximatesPrincipalValue)
{
    const double du = 0.05;
    const int half = 300;
    std::vector<double> g(2 * half + 1);
    for (int j = 0; j <= 2 * half; ++j) g[j] = dM((j - half) * du);
    const auto h = hilbert_odd(g);
    for (int j : {half - 40, half, half + 17, half + 60}) EXPECT_NEAR(h[j], z_oracle((j - half) * du).real(), 1e-9);
}

TEST(Dispersion, GridTableMatchesClosedFormAtMaxwellian)
{
    const GridPtr g = make_grid(2, 6.0, 49);
    const DirectionSet dirs = default_directions(2);
    const UniformAxis u = marginal_axis(*g);
    const ScreeningTable T = build_screening_table(maxwellian(g), dirs, u);
    double err = 0;
    for (std::size_t m = 0; m < dirs.size(); m += 5)
        for (int j = 0; j < u.count; ++j) err = std::max(err, std::abs(T.at(m, j) - z_maxwellian(u.value(j))));
    EXPECT_LT(err, 2e-4);
    EXPECT_NEAR(T.tail_mass(0), 1.0, 1e-13);
    EXPECT_NEAR(T.tail_first_moment(0), 0.0, 1e-13);
}

TEST(Dispersion, GridTableMatchesShiftedMixture)
{
    // Z is linear in F, and the marginal of a shifted Maxwellian is a shifted Gaussian.
    const GridPtr g = make_grid(2, 6.0, 49);
    const double beta = 1.5;
    const Vec c{1.2, 0.3, 0};
    const DensityField F = sample(g, [&](const Vec& v) {
        return 0.6 * maxwellian_value(v, 2, beta, c) + 0.4 * maxwellian_value(v, 2, beta, -1.0 * c);
    });
    const DirectionSet dirs = make_directions_2d(16);
    const UniformAxis u = marginal_axis(*g);
    const ScreeningTable T = build_screening_table(F, dirs, u);
    double err = 0;
    for (std::size_t m = 0; m < dirs.size(); ++m) {
        const double uc = dot(dirs.dirs[m], c);
        for (int j = 0; j < u.count; ++j) {
            const Complex ref = 0.6 * z_maxwellian(u.value(j) - uc, beta) + 0.4 * z_maxwellian(u.value(j) + uc, beta);
            err = std::max(err, std::abs(T.at(m, j) - ref));
        }
    }
    EXPECT_LT(err, 1e-6);
}

TEST(Dispersion, LookupUsesRealTailOutsideAxis)
{
    const GridPtr g = make_grid(2, 6.0, 33);
    const ScreeningTable T = maxwellian_screening_table(default_directions(2), marginal_axis(*g));
    const double u = 3.0 * T.u_axis().last();
    const Complex z = T.lookup(std::size_t(0), u);
    EXPECT_EQ(z.imag(), 0.0);
    EXPECT_NEAR(z.real(), -1.0 / (u * u), 1e-4 / (u * u));
}

TEST(Dispersion, CubicLookupConvergesAtHighOrder)
{
    auto err = [](int n) {
        const GridPtr g = make_grid(2, 6.0, n);
        const ScreeningTable T = maxwellian_screening_table(default_directions(2), marginal_axis(*g));
        double e = 0;
        for (int k = 0; k < 200; ++k) {
            const double u = -4.0 + 0.0401 * k;
            e = std::max(e, std::abs(T.lookup(Vec{0.6, 0.8, 0}, u) - z_maxwellian(u)));
        }
        return e;
    };
    const double e33 = err(33), e65 = err(65);
    EXPECT_LT(e33, 5e-3);
    EXPECT_GT(e33 / e65, 8.0);
}

TEST(Dispersion, ZeroTableIsUnscreened)
{
    const GridPtr g = make_grid(2, 3.0, 9);
    const ScreeningTable T = ScreeningTable::zero(default_directions(2), marginal_axis(*g));
    EXPECT_EQ(T.lookup(std::size_t(3), 0.2), Complex(0.0, 0.0));
    EXPECT_EQ(T.lookup(std::size_t(3), 100.0), Complex(0.0, 0.0));
}

TEST(Dispersion, ProvenanceTracksTheField)
{
    const GridPtr g = make_grid(2, 6.0, 17);
    const DirectionSet dirs = make_directions_2d(8);
    const UniformAxis u = marginal_axis(*g);
    DensityField F = maxwellian(g);
    const auto p0 = build_screening_table(F, dirs, u).provenance();
    EXPECT_EQ(build_screening_table(F, dirs, u).provenance(), p0);
    F.values[100] *= 1.01;
    EXPECT_NE(build_screening_table(F, dirs, u).provenance(), p0);
}

TEST(Dispersion, PenroseScanAtMaxwellianWithinBounds)
{
    const GridPtr g = make_grid(2, 6.0, 33);
    const RadialSpectrum V = gaussian_spectrum(1.0, 1.0);
    const DensityField mu = maxwellian(g);
    const PenroseResult a = penrose_scan(mu, V, default_directions(2), scan_radii(V));
    const PenroseResult b =
        penrose_scan(build_screening_table(mu, default_directions(2), marginal_axis(*g)), V, scan_radii(V));
    EXPECT_DOUBLE_EQ(a.min_abs_eps, b.min_abs_eps);
    // Closed-form minimum of |eps|^2 for V(0) = 1 is about 0.3156; the scan samples a coarser lattice.
    EXPECT_GT(a.min_abs_eps * a.min_abs_eps, 0.3156);
    EXPECT_LT(a.min_abs_eps * a.min_abs_eps, 0.33);
    const auto r = scan_radii(V);
    EXPECT_EQ(r.front(), 0.0);
}
