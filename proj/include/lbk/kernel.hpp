#pragma once

#include "lbk/dispersion.hpp"
#include "lbk/grid.hpp"
#include "lbk/potential.hpp"

#include <span>
#include <vector>

namespace lbk {

struct KernelMatrix {
    int d = 3;
    Mat m;
    Vec w{0, 0, 0};

    std::array<double, 3> eigenvalues() const;  // ascending; third slot unused for d=2
};

struct RadialWeight {
    double value = 0;
    double min_abs_eps = 1;  // min over t in [0, sup V^] of |1 + t Z|
    bool degenerate = false;
};

// I(Z) = int_0^inf r^d pi V^(r)^2 / |1 + V^(r) Z|^2 dr (plain dr; the (2 pi)^{-d} factor of the
// momentum measure is applied in the kernel, not here).
RadialWeight radial_kernel_weight(const RadialSpectrum& V, Complex Z, int d, double floor = 1e-8);

// min_{0 <= t <= tmax} |1 + t Z|
double min_abs_eps_along(Complex Z, double tmax);

// I(khat, u) evaluated by quadrature at every node of a screening table.
class KernelWeightTable {
public:
    // Throws NumericalAbort if |eps| drops below `floor` at any node.
    KernelWeightTable(const ScreeningTable& table, RadialSpectrum V, int d, double floor = 1e-8);

    double at(std::size_t dir, int j) const { return I_[dir * std::size_t(u_.count) + std::size_t(j)]; }
    double lookup(std::size_t dir, double u) const;
    double lookup(const Vec& khat, double u) const;

    const DirectionSet& directions() const { return dirs_; }
    const UniformAxis& u_axis() const { return u_; }
    double unscreened() const { return I0_; }
    double min_abs_eps() const { return min_eps_; }
    int d() const { return d_; }

private:
    DirectionSet dirs_;
    UniformAxis u_;
    std::vector<double> I_;
    std::vector<double> tail_mass_, tail_m1_;
    RadialSpectrum V_;
    int d_;
    double floor_;
    double I0_ = 0;
    double min_eps_ = 1;
};

// B(v, v - v*) = |w|^{-1} (2 pi)^{-d} oint_{S^{d-2}(w^perp)} khat (x) khat I(Z(khat, khat.v)) dOmega,
// with d=2 summing the two unit vectors orthogonal to w and d=3 using `circle_nodes`
// equispaced angles. Evaluated at u = khat.(v + v*)/2, which equals khat.v on the hyperplane
// and makes the result exactly symmetric under v <-> v*.
KernelMatrix assemble_kernel(const Vec& v, const Vec& vstar, const KernelWeightTable& I, int circle_nodes = 32);

// (L/|w|)(Id - w^ (x) w^)
KernelMatrix landau_kernel(const Vec& w, double L, int d);

// Kernel matrices for every unordered pair of grid nodes, plus the pair sums built on them.
// d=2 stores one scalar per pair (B = s k k^T with k the +90 degree rotation of v_i - v_j);
// d=3 stores the six independent entries.
class PairKernels {
public:
    static PairKernels screened(GridPtr grid, const KernelWeightTable& I, int circle_nodes = 32);
    static PairKernels landau(GridPtr grid, double L);

    const VelocityGrid& grid() const { return *grid_; }
    GridPtr grid_ptr() const { return grid_; }
    std::size_t pair_count() const { return pairs_; }
    Mat matrix(std::size_t i, std::size_t j) const;

    // S_i = sum_{j != i} w_j c_j B_ij
    std::vector<Mat> matrix_sum(std::span<const double> c) const;
    // b_i = sum_{j != i} w_j B_ij x_j
    std::vector<Vec> vector_sum(std::span<const Vec> x) const;
    // J_i = sum_{j != i} w_j B_ij (a_j x_i - a_i x_j)
    std::vector<Vec> flux(std::span<const double> a, std::span<const Vec> x) const;
    // (1/2) sum_{i != j} w_i w_j D_ij . B_ij D_ij with D_ij = a_j x_i - a_i x_j
    double symmetric_quadratic(std::span<const double> a, std::span<const Vec> x) const;

    static constexpr double memory_limit_bytes = 2.0e9;

private:
    PairKernels(GridPtr grid);

    std::size_t offset(std::size_t i) const { return row_start_[i]; }

    GridPtr grid_;
    int d_;
    std::size_t pairs_ = 0;
    std::vector<std::size_t> row_start_;
    std::vector<double> coef_;
};

struct CoefficientField {
    GridPtr grid;
    std::vector<Mat> A;
    std::vector<double> lambda1, lambda2;
};

// A(v_i) = sum_j w_j B(v_i, v_i - v_j; grad mu) mu(v_j) with the closed-form Maxwellian screening.
// The temperature must already be folded into V (unit-temperature form).
CoefficientField equilibrium_coefficients(GridPtr grid, const RadialSpectrum& V, int circle_nodes = 32);
CoefficientField coefficients_from_pairs(const PairKernels& pk, std::span<const double> mu);

}
