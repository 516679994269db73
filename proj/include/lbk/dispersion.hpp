#pragma once

#include "lbk/grid.hpp"
#include "lbk/potential.hpp"

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace lbk {

using Complex = std::complex<double>;

// D(x) = exp(-x^2) int_0^x exp(y^2) dy
double dawson(double x);

// H(x) = 1 - sqrt(2) x D(x / sqrt(2)), with H(0) = 1.
double h_function(double x);

// Dispersion function at the unit-temperature Maxwellian for w = sqrt(2) khat.v:
// 1 + 2 vhat H(w) - i sqrt(2 pi) vhat w exp(-w^2/2).
Complex eps_maxwellian(double w, double vhat);
double eps_maxwellian_abs2(double w, double vhat);

// Screening integral Z(u) of mu_beta: beta * (2 H(sqrt(2 beta) u) - 2 i sqrt(pi beta) u exp(-beta u^2)).
Complex z_maxwellian(double u, double beta = 1.0);

// Odd-kernel discrete Hilbert rule: out_j = sum_{m odd} (2/m) g_{j-m}, i.e. the principal value
// int g(y)/(u_j - y) dy for samples g on a uniform grid (the spacing cancels).
std::vector<double> hilbert_odd_direct(std::span<const double> g);
std::vector<double> hilbert_odd_fft(std::span<const double> g);
// Direct summation up to 4096 samples, FFT convolution above.
std::vector<double> hilbert_odd(std::span<const double> g);

// Z(khat, u) = p.v. int M'(y)/(u - y) dy + i pi M'(u) on a direction set x u-axis lattice,
// with eps(k, k.v) = 1 + V^(|k|) Z(khat, khat.v).
class ScreeningTable {
public:
    ScreeningTable(DirectionSet dirs, UniformAxis u, std::vector<Complex> z, std::vector<double> mass,
                   std::vector<double> first_moment, std::uint64_t provenance);

    // Z identically zero (unscreened kernel).
    static ScreeningTable zero(DirectionSet dirs, UniformAxis u);

    const DirectionSet& directions() const { return dirs_; }
    const UniformAxis& u_axis() const { return u_; }
    std::uint64_t provenance() const { return provenance_; }
    double tail_mass(std::size_t dir) const { return mass_[dir]; }
    double tail_first_moment(std::size_t dir) const { return m1_[dir]; }

    Complex at(std::size_t dir, int j) const { return z_[dir * std::size_t(u_.count) + std::size_t(j)]; }
    // Cubic interpolation in u; outside the axis, the asymptotic tail -m0/u^2 - 2 m1/u^3 with zero imaginary part.
    Complex lookup(std::size_t dir, double u) const;
    // Direction interpolation on the set, then lookup in u.
    Complex lookup(const Vec& khat, double u) const;

private:
    DirectionSet dirs_;
    UniformAxis u_;
    std::vector<Complex> z_;
    std::vector<double> mass_, m1_;
    std::uint64_t provenance_;
};

// Cubic Lagrange stencil on a uniform axis (clamped to stay inside).
struct AxisStencil {
    int j0 = 0;
    double w[4] = {0, 0, 0, 0};
};
AxisStencil axis_stencil(const UniformAxis& u, double x);

ScreeningTable build_screening_table(const DensityField& F, const DirectionSet& dirs, const UniformAxis& u);
// Same lattice, filled from the closed form for mu_beta.
ScreeningTable maxwellian_screening_table(const DirectionSet& dirs, const UniformAxis& u, double beta = 1.0);

struct PenroseResult {
    double min_abs_eps = 1.0;
    Vec khat{1, 0, 0};
    double r = 0;
    double u = 0;
};

// Radii for a scan: r = 0, the support radius, and a uniform interior sampling.
std::vector<double> scan_radii(const RadialSpectrum& V, int count = 48);

PenroseResult penrose_scan(const ScreeningTable& table, const RadialSpectrum& V, std::span<const double> r_nodes);
PenroseResult penrose_scan(const DensityField& F, const RadialSpectrum& V, const DirectionSet& dirs,
                           std::span<const double> r_nodes);

}
