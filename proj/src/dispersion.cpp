#include "lbk/dispersion.hpp"

#include "lbk/parallel.hpp"

#include <fftw3.h>

#include <algorithm>
#include <limits>
#include <memory>
#include <mutex>

namespace lbk {

namespace {

// Rybicki's sampling-theorem representation:
// D(x) = lim_{h->0} pi^{-1/2} sum_{n odd} exp(-(x - n h)^2) / n.
// With h = 0.2 the aliasing error is about exp(-(pi/2h)^2) ~ 1e-27.
constexpr double ryb_h = 0.2;
constexpr int ryb_terms = 20;

struct RybickiCoefficients {
    double c[ryb_terms];
    RybickiCoefficients()
    {
        for (int i = 0; i < ryb_terms; ++i) {
            const double a = (2 * i + 1) * ryb_h;
            c[i] = std::exp(-a * a);
        }
    }
};

const RybickiCoefficients ryb;

}

double dawson(double x)
{
    const double ax = std::abs(x);
    if (ax < 0.2) {
        // Taylor series: sum_k (-2)^k x^{2k+1} / (2k+1)!!
        const double x2 = x * x;
        double term = x, sum = x;
        for (int k = 1; k < 12; ++k) {
            term *= -2.0 * x2 / (2 * k + 1);
            sum += term;
        }
        return sum;
    }
    const int n0 = 2 * int(std::lround(0.5 * ax / ryb_h));
    const double xp = ax - n0 * ryb_h;
    double e1 = std::exp(2.0 * xp * ryb_h);
    const double e2 = e1 * e1;
    double d1 = n0 + 1, d2 = d1 - 2.0;
    double sum = 0;
    for (int i = 0; i < ryb_terms; ++i) {
        sum += ryb.c[i] * (e1 / d1 + 1.0 / (d2 * e1));
        d1 += 2.0;
        d2 -= 2.0;
        e1 *= e2;
    }
    const double val = std::exp(-xp * xp) * sum / std::sqrt(pi);
    return x < 0 ? -val : val;
}

double h_function(double x)
{
    if (x == 0) return 1.0;
    return 1.0 - std::sqrt(2.0) * x * dawson(x / std::sqrt(2.0));
}

Complex eps_maxwellian(double w, double vhat)
{
    return {1.0 + 2.0 * vhat * h_function(w), -std::sqrt(2.0 * pi) * vhat * w * std::exp(-0.5 * w * w)};
}

double eps_maxwellian_abs2(double w, double vhat)
{
    const double re = 1.0 + 2.0 * vhat * h_function(w);
    return re * re + 2.0 * pi * vhat * vhat * w * w * std::exp(-w * w);
}

Complex z_maxwellian(double u, double beta)
{
    const double s = std::sqrt(beta) * u;
    return beta * Complex(2.0 * h_function(std::sqrt(2.0) * s), -2.0 * std::sqrt(pi) * s * std::exp(-s * s));
}

std::vector<double> hilbert_odd_direct(std::span<const double> g)
{
    const long n = long(g.size());
    std::vector<double> out(g.size(), 0.0);
    for (long j = 0; j < n; ++j) {
        double acc = 0;
        for (long m = 1; m <= n; m += 2) {
            const double c = 2.0 / double(m);
            if (j - m >= 0) acc += c * g[j - m];
            if (j + m < n) acc -= c * g[j + m];
        }
        out[j] = acc;
    }
    return out;
}

namespace {

std::mutex fftw_planner_mutex;

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};
struct FftwPlanDestroy {
    void operator()(fftw_plan p) const
    {
        std::lock_guard lock(fftw_planner_mutex);
        fftw_destroy_plan(p);
    }
};
using PlanPtr = std::unique_ptr<std::remove_pointer_t<fftw_plan>, FftwPlanDestroy>;

template <class T>
std::unique_ptr<T[], FftwFree> fftw_buffer(std::size_t n)
{
    return std::unique_ptr<T[], FftwFree>(static_cast<T*>(fftw_malloc(sizeof(T) * n)));
}

}

std::vector<double> hilbert_odd_fft(std::span<const double> g)
{
    const std::size_t n = g.size();
    if (n == 0) return {};
    const std::size_t L = 2 * n;
    const std::size_t nc = L / 2 + 1;
    auto a = fftw_buffer<double>(L);
    auto k = fftw_buffer<double>(L);
    auto A = fftw_buffer<fftw_complex>(nc);
    auto K = fftw_buffer<fftw_complex>(nc);
    PlanPtr pa, pk, pb;
    {
        std::lock_guard lock(fftw_planner_mutex);
        pa.reset(fftw_plan_dft_r2c_1d(int(L), a.get(), A.get(), FFTW_ESTIMATE));
        pk.reset(fftw_plan_dft_r2c_1d(int(L), k.get(), K.get(), FFTW_ESTIMATE));
        pb.reset(fftw_plan_dft_c2r_1d(int(L), A.get(), a.get(), FFTW_ESTIMATE));
    }
    std::fill(a.get(), a.get() + L, 0.0);
    std::fill(k.get(), k.get() + L, 0.0);
    std::copy(g.begin(), g.end(), a.get());
    // Kernel c_m = 2/m for odd m, stored circularly; |m| < n so the convolution is linear.
    for (std::size_t m = 1; m < n; m += 2) {
        k[m] = 2.0 / double(m);
        k[L - m] = -2.0 / double(m);
    }
    fftw_execute(pa.get());
    fftw_execute(pk.get());
    for (std::size_t q = 0; q < nc; ++q) {
        const double re = A[q][0] * K[q][0] - A[q][1] * K[q][1];
        const double im = A[q][0] * K[q][1] + A[q][1] * K[q][0];
        A[q][0] = re;
        A[q][1] = im;
    }
    fftw_execute(pb.get());
    std::vector<double> out(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = a[j] / double(L);
    return out;
}

std::vector<double> hilbert_odd(std::span<const double> g)
{
    return g.size() <= 4096 ? hilbert_odd_direct(g) : hilbert_odd_fft(g);
}

ScreeningTable::ScreeningTable(DirectionSet dirs, UniformAxis u, std::vector<Complex> z, std::vector<double> mass,
                               std::vector<double> first_moment, std::uint64_t provenance)
    : dirs_(std::move(dirs)), u_(u), z_(std::move(z)), mass_(std::move(mass)), m1_(std::move(first_moment)),
      provenance_(provenance)
{
    if (z_.size() != dirs_.size() * std::size_t(u_.count)) throw ConfigError("screening table shape mismatch");
}

ScreeningTable ScreeningTable::zero(DirectionSet dirs, UniformAxis u)
{
    const std::size_t nd = dirs.size();
    return ScreeningTable(std::move(dirs), u, std::vector<Complex>(nd * std::size_t(u.count)),
                          std::vector<double>(nd, 0.0), std::vector<double>(nd, 0.0), 0);
}

AxisStencil axis_stencil(const UniformAxis& u, double x)
{
    AxisStencil s;
    const double p = (x - u.start) / u.step;
    int j = int(std::floor(p));
    j = std::clamp(j, 1, u.count - 3);
    const double t = p - j;
    s.j0 = j - 1;
    s.w[0] = -t * (t - 1) * (t - 2) / 6.0;
    s.w[1] = (t + 1) * (t - 1) * (t - 2) / 2.0;
    s.w[2] = -(t + 1) * t * (t - 2) / 2.0;
    s.w[3] = (t + 1) * t * (t - 1) / 6.0;
    return s;
}

Complex ScreeningTable::lookup(std::size_t dir, double u) const
{
    if (u < u_.start || u > u_.last()) {
        const double r = -mass_[dir] / (u * u) - 2.0 * m1_[dir] / (u * u * u);
        return {r, 0.0};
    }
    const AxisStencil s = axis_stencil(u_, u);
    const Complex* row = &z_[dir * std::size_t(u_.count)];
    return s.w[0] * row[s.j0] + s.w[1] * row[s.j0 + 1] + s.w[2] * row[s.j0 + 2] + s.w[3] * row[s.j0 + 3];
}

Complex ScreeningTable::lookup(const Vec& khat, double u) const
{
    const DirectionStencil st = direction_stencil(dirs_, khat);
    Complex z = 0;
    for (int q = 0; q < 4; ++q)
        if (st.weight[q] != 0) z += st.weight[q] * lookup(st.index[q], u);
    return z;
}

ScreeningTable build_screening_table(const DensityField& F, const DirectionSet& dirs, const UniformAxis& u)
{
    const VelocityGrid& g = *F.grid;
    if (dirs.d != g.d()) throw ConfigError("direction set dimension does not match the grid");
    const double reach = g.extent() * std::sqrt(double(g.d()));
    if (u.start > -reach + 1e-9 || u.last() < reach - 1e-9)
        throw ConfigError("u axis does not cover the projected velocity range");
    for (double x : F.values)
        if (!std::isfinite(x)) throw NumericalAbort("non-finite density value while building screening table");

    const MarginalEngine eng(F, u);
    const std::size_t nd = dirs.size();
    const int nu = u.count;
    std::vector<Complex> z(nd * std::size_t(nu));
    std::vector<double> mass(nd), m1(nd);
    parallel_for(nd, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t m = b; m < e; ++m) {
            const MarginalProfile p = eng.profile(dirs.dirs[m]);
            const std::vector<double> re = hilbert_odd(p.dm);
            double s0 = 0, s1 = 0;
            for (int j = 0; j < nu; ++j) {
                z[m * nu + j] = {re[j], pi * p.dm[j]};
                s0 += u.step * p.m[j];
                s1 += u.step * u.value(j) * p.m[j];
            }
            mass[m] = s0;
            m1[m] = s1;
        }
    });
    return ScreeningTable(dirs, u, std::move(z), std::move(mass), std::move(m1), field_hash(F));
}

ScreeningTable maxwellian_screening_table(const DirectionSet& dirs, const UniformAxis& u, double beta)
{
    std::vector<Complex> row(u.count);
    for (int j = 0; j < u.count; ++j) row[j] = z_maxwellian(u.value(j), beta);
    std::vector<Complex> z;
    z.reserve(dirs.size() * std::size_t(u.count));
    for (std::size_t m = 0; m < dirs.size(); ++m) z.insert(z.end(), row.begin(), row.end());
    return ScreeningTable(dirs, u, std::move(z), std::vector<double>(dirs.size(), 1.0),
                          std::vector<double>(dirs.size(), 0.0), 0);
}

std::vector<double> scan_radii(const RadialSpectrum& V, int count)
{
    std::vector<double> r(std::max(count, 2));
    const double R = V.r_max();
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = R * double(k) / double(r.size() - 1);
    return r;
}

PenroseResult penrose_scan(const ScreeningTable& table, const RadialSpectrum& V, std::span<const double> r_nodes)
{
    std::vector<double> vh(r_nodes.size());
    for (std::size_t k = 0; k < r_nodes.size(); ++k) vh[k] = V(r_nodes[k]);
    PenroseResult best;
    best.min_abs_eps = std::numeric_limits<double>::infinity();
    const auto& dirs = table.directions();
    const auto& u = table.u_axis();
    for (std::size_t m = 0; m < dirs.size(); ++m)
        for (int j = 0; j < u.count; ++j) {
            const Complex z = table.at(m, j);
            for (std::size_t k = 0; k < vh.size(); ++k) {
                const double a = std::abs(1.0 + vh[k] * z);
                if (a < best.min_abs_eps) best = {a, dirs.dirs[m], r_nodes[k], u.value(j)};
            }
        }
    return best;
}

PenroseResult penrose_scan(const DensityField& F, const RadialSpectrum& V, const DirectionSet& dirs,
                           std::span<const double> r_nodes)
{
    return penrose_scan(build_screening_table(F, dirs, marginal_axis(*F.grid)), V, r_nodes);
}

}
