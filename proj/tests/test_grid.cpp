#include "lbk/grid.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

using namespace lbk;

namespace {

std::filesystem::path temp_file(const std::string& name)
{
    return std::filesystem::temp_directory_path() / ("lbk_test_grid_" + name);
}

}

TEST(Grid, CentreNodeIsExactlyZeroAndAxisIsSymmetric)
{
    for (int d : {2, 3}) {
        const GridPtr g = make_grid(d, 6.0, 9);
        const Vec& c = g->node(g->size() / 2);
        EXPECT_EQ(c[0], 0.0);
        EXPECT_EQ(c[1], 0.0);
        EXPECT_EQ(c[2], 0.0);
        for (int l = 0; l < g->n(); ++l) EXPECT_EQ(g->coord(l), -g->coord(g->n() - 1 - l));
        EXPECT_DOUBLE_EQ(g->coord(g->n() - 1), 6.0);
    }
}

TEST(Grid, RowMajorWithLastAxisFastest)
{
    const GridPtr g = make_grid(3, 2.0, 5);
    EXPECT_EQ(g->stride(2), 1u);
    EXPECT_EQ(g->stride(1), 5u);
    EXPECT_EQ(g->stride(0), 25u);
    const std::size_t i = 2 * 25 + 3 * 5 + 4;
    EXPECT_EQ(g->index_along(i, 0), 2);
    EXPECT_EQ(g->index_along(i, 1), 3);
    EXPECT_EQ(g->index_along(i, 2), 4);
    EXPECT_DOUBLE_EQ(g->node(i)[2], g->coord(4));
}

TEST(Grid, TrapezoidWeightsSumToBoxVolume)
{
    for (int d : {2, 3}) {
        const GridPtr g = make_grid(d, 3.0, 13);
        const double s = std::accumulate(g->weights().begin(), g->weights().end(), 0.0);
        EXPECT_NEAR(s, std::pow(6.0, d), 1e-11);
        EXPECT_DOUBLE_EQ(g->weight(0), std::pow(g->h() / 2, d));
    }
}

TEST(Grid, RejectsBadShapes)
{
    EXPECT_THROW(make_grid(4, 1.0, 9), ConfigError);
    EXPECT_THROW(make_grid(2, 1.0, 8), ConfigError);
    EXPECT_THROW(make_grid(2, 1.0, 3), ConfigError);
    EXPECT_THROW(make_grid(2, -1.0, 9), ConfigError);
}

TEST(Grid, MaxwellianHasUnitMass)
{
    for (int d : {2, 3}) {
        const GridPtr g = make_grid(d, 6.0, d == 2 ? 33 : 25);
        const DensityField mu = maxwellian(g);
        double m = 0;
        for (std::size_t i = 0; i < g->size(); ++i) m += g->weight(i) * mu.values[i];
        EXPECT_NEAR(m, 1.0, 1e-12);
    }
}

TEST(Grid, GradientExactOnQuadraticsAtEveryNode)
{
    for (int d : {2, 3}) {
        const GridPtr g = make_grid(d, 2.0, 7);
        auto q = [](const Vec& v) { return 1.5 - 0.3 * v[0] + 2 * v[1] * v[1] + 0.7 * v[0] * v[1] - v[2] * v[2] + v[0] * v[2]; };
        auto dq = [](const Vec& v) { return Vec{-0.3 + 0.7 * v[1] + v[2], 4 * v[1] + 0.7 * v[0], -2 * v[2] + v[0]}; };
        const DensityField f = sample(g, q);
        const auto D = central_gradient(f);
        for (std::size_t i = 0; i < g->size(); ++i)
            for (int a = 0; a < d; ++a) EXPECT_NEAR(D[i][a], dq(g->node(i))[a], 1e-12) << "node " << i << " axis " << a;
    }
}

TEST(Grid, GradientStencilReproducesCentralGradient)
{
    const GridPtr g = make_grid(2, 3.0, 9);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-1, 1);
    std::vector<double> f(g->size());
    for (double& x : f) x = U(rng);
    const auto D = central_gradient(*g, f);
    for (std::size_t i = 0; i < g->size(); ++i)
        for (int a = 0; a < 2; ++a) {
            const GradientStencil s = gradient_stencil(*g, i, a);
            double v = 0;
            for (int k = 0; k < s.count; ++k) v += s.coef[k] * f[s.col[k]];
            EXPECT_NEAR(v, D[i][a], 1e-13);
        }
}

TEST(Grid, AdjointSatisfiesWeightedDuality)
{
    for (int d : {2, 3}) {
        const GridPtr g = make_grid(d, 2.0, 7);
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> U(-1, 1);
        std::vector<double> phi(g->size());
        std::vector<Vec> X(g->size());
        for (std::size_t i = 0; i < g->size(); ++i) {
            phi[i] = U(rng);
            X[i] = {U(rng), U(rng), d == 3 ? U(rng) : 0.0};
        }
        const auto Dphi = central_gradient(*g, phi);
        const auto adj = gradient_adjoint(*g, X);
        double lhs = 0, rhs = 0;
        for (std::size_t i = 0; i < g->size(); ++i) {
            lhs += g->weight(i) * phi[i] * adj[i];
            rhs += g->weight(i) * dot(Dphi[i], X[i]);
        }
        EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(rhs)));
    }
}

TEST(Grid, GaussLegendreIsExactToDegree2nMinus1)
{
    std::vector<double> x, w;
    gauss_legendre(6, x, w);
    double s = 0, s0 = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        s += w[k] * std::pow(x[k], 10);
        s0 += w[k];
    }
    EXPECT_NEAR(s, 2.0 / 11.0, 1e-14);
    EXPECT_NEAR(s0, 2.0, 1e-14);
}

TEST(Grid, DirectionSetsAreUnitAndSymmetric)
{
    const DirectionSet s2 = default_directions(2);
    double wsum = 0;
    for (std::size_t m = 0; m < s2.size(); ++m) {
        EXPECT_NEAR(norm(s2.dirs[m]), 1.0, 1e-15);
        wsum += s2.weights[m];
    }
    EXPECT_NEAR(wsum, 2 * pi, 1e-13);
    // Invariance under the swap (x, y) -> (y, x): every swapped direction is in the set.
    for (const Vec& k : s2.dirs) {
        bool found = false;
        for (const Vec& q : s2.dirs) found = found || (q[0] == k[1] && q[1] == k[0]);
        EXPECT_TRUE(found);
    }
    const DirectionSet s3 = default_directions(3);
    wsum = 0;
    for (std::size_t m = 0; m < s3.size(); ++m) {
        EXPECT_NEAR(norm(s3.dirs[m]), 1.0, 1e-14);
        wsum += s3.weights[m];
    }
    EXPECT_NEAR(wsum, 4 * pi, 1e-12);
    EXPECT_THROW(make_directions_2d(6 - 1), ConfigError);
}

TEST(Grid, DirectionStencilIsAPartitionOfUnity)
{
    const DirectionSet s2 = default_directions(2);
    const DirectionSet s3 = default_directions(3);
    for (double ang : {0.0, 0.123, 1.0, 2.9, -0.7}) {
        const DirectionStencil st = direction_stencil(s2, {std::cos(ang), std::sin(ang), 0});
        EXPECT_NEAR(st.weight[0] + st.weight[1] + st.weight[2] + st.weight[3], 1.0, 1e-14);
        const Vec k3 = {std::cos(ang) * 0.6, std::sin(ang) * 0.6, 0.8};
        const DirectionStencil s = direction_stencil(s3, k3);
        EXPECT_NEAR(s.weight[0] + s.weight[1] + s.weight[2] + s.weight[3], 1.0, 1e-14);
    }
}

TEST(Grid, MarginalPreservesMassAndMatchesGaussian)
{
    const GridPtr g = make_grid(2, 6.0, 33);
    const DensityField mu = maxwellian(g);
    const UniformAxis u = marginal_axis(*g);
    EXPECT_NEAR(u.value(0), -u.last(), 1e-13);
    for (double ang : {0.0, 0.4, pi / 4}) {
        const Vec k{std::cos(ang), std::sin(ang), 0};
        const auto M = directional_marginal(mu, k, u);
        double s = 0, err = 0;
        for (int j = 0; j < u.count; ++j) {
            s += u.step * M[j];
            err = std::max(err, std::abs(M[j] - std::exp(-u.value(j) * u.value(j)) / std::sqrt(pi)));
        }
        EXPECT_NEAR(s, 1.0, 1e-13);
        EXPECT_LT(err, 1e-8);
    }
    EXPECT_THROW(directional_marginal(mu, Vec{1, 1, 0}, u), ConfigError);
}

TEST(Grid, MarginalDerivativeMatchesAnalyticProfile)
{
    auto err = [](int n) {
        const GridPtr g = make_grid(3, 6.0, n);
        const DensityField mu = maxwellian(g);
        const UniformAxis u = marginal_axis(*g);
        const MarginalProfile p = directional_profile(mu, Vec{0.48, 0.6, 0.64}, u);
        double e = 0;
        for (int j = 0; j < u.count; ++j) {
            const double x = u.value(j);
            e = std::max(e, std::abs(p.dm[j] + 2 * x * std::exp(-x * x) / std::sqrt(pi)));
        }
        return e;
    };
    const double e25 = err(25), e33 = err(33);
    EXPECT_LT(e25, 1e-4);
    // Band-limited reconstruction: refinement gains far more than any fixed algebraic order.
    EXPECT_LT(e33, 1e-2 * e25);
}

TEST(Grid, SnapshotRoundTripIsBitExact)
{
    const GridPtr g = make_grid(3, 4.5, 7);
    DensityField F = maxwellian(g, 1.3, {0.1, 0, -0.2});
    F.kind = FieldKind::perturbation;
    const auto path = temp_file("roundtrip.lbkf");
    write_snapshot(path, F);
    const DensityField G = read_snapshot(path);
    EXPECT_TRUE(G.grid->same_as(*g));
    EXPECT_EQ(G.kind, FieldKind::perturbation);
    EXPECT_EQ(G.values, F.values);
    EXPECT_EQ(field_hash(G), field_hash(F));
    EXPECT_EQ(std::filesystem::file_size(path), 32 + 8 * g->size());
    std::filesystem::remove(path);
}

TEST(Grid, SnapshotRejectsCorruptFiles)
{
    const auto path = temp_file("bad.lbkf");
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOPE and some more bytes to fill a header............";
    }
    EXPECT_THROW(read_snapshot(path), IoError);
    EXPECT_THROW(read_snapshot(temp_file("does_not_exist.lbkf")), IoError);
    const GridPtr g = make_grid(2, 1.0, 5);
    write_snapshot(path, maxwellian(g));
    std::filesystem::resize_file(path, 32 + 8 * 10);
    EXPECT_THROW(read_snapshot(path), IoError);
    std::filesystem::remove(path);
}

TEST(Grid, FieldHashSeesEveryValue)
{
    const GridPtr g = make_grid(2, 2.0, 5);
    DensityField F = maxwellian(g);
    const auto h0 = field_hash(F);
    F.values[7] = std::nextafter(F.values[7], 1.0);
    EXPECT_NE(field_hash(F), h0);
}

TEST(Grid, DensityFieldChecksSize)
{
    const GridPtr g = make_grid(2, 2.0, 5);
    EXPECT_THROW(DensityField(g, std::vector<double>(3)), ConfigError);
}
