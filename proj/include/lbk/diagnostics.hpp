#pragma once

#include "lbk/dispersion.hpp"
#include "lbk/grid.hpp"
#include "lbk/kernel.hpp"

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace lbk {

struct Moments {
    double mass = 0;
    Vec momentum{0, 0, 0};
    double energy = 0;  // (1/2) sum w |v|^2 F
};

Moments moments(const VelocityGrid& g, std::span<const double> F);
Moments moments(const DensityField& F);

// Entropy-type value plus the number of nodes left out because F < 1e-300 there.
struct EntropyValue {
    double value = 0;
    std::size_t excluded = 0;
};

inline constexpr double entropy_floor = 1e-300;

// sum_i w_i F_i log F_i
EntropyValue boltzmann_entropy(const VelocityGrid& g, std::span<const double> F);
// sum_i w_i F_i log(F_i / mu_beta(v_i))
EntropyValue relative_entropy(const VelocityGrid& g, std::span<const double> F, double beta = 1.0);

// (1/2) sum_{i != j} w_i w_j F_i F_j / |w| |(Id - w^ w^)(D log F_i - D log F_j)|^2.
// `landau_unit` must be PairKernels::landau(grid, 1.0).
EntropyValue entropy_dissipation(const PairKernels& landau_unit, std::span<const double> F);

// Orthonormal basis (discrete weighted L^2) of S0 = sqrt(mu) span{1, v_1..v_d, |v|^2}.
class NullSpace {
public:
    explicit NullSpace(GridPtr grid, double beta = 1.0);

    std::size_t dim() const { return basis_.size(); }
    std::span<const double> vector(std::size_t k) const { return basis_[k]; }
    std::span<const double> sqrt_mu() const { return sqrt_mu_; }
    const VelocityGrid& grid() const { return *grid_; }

    struct Split {
        std::vector<double> projection, residual;
    };
    Split project(std::span<const double> f) const;
    // sqrt(sum_i w_i (pi0 f)_i^2)
    double projection_norm(std::span<const double> f) const;

private:
    GridPtr grid_;
    std::vector<double> sqrt_mu_;
    std::vector<std::vector<double>> basis_;
};

double weighted_inner(const VelocityGrid& g, std::span<const double> a, std::span<const double> b);
double l2_norm(const VelocityGrid& g, std::span<const double> f);
// sqrt(||f||^2 + ||D f||^2 + ||D D f||^2) with the central-difference gradient.
double discrete_h2_norm(const VelocityGrid& g, std::span<const double> f);

// |||f|||^2 = sum_i w_i (D f_i . A_i D f_i + v_i f_i . A_i v_i f_i), kept as its two parts.
struct DissipationParts {
    double gradient = 0;
    double velocity = 0;
    double total() const { return gradient + velocity; }
};
DissipationParts dissipation_parts(const CoefficientField& A, std::span<const double> f);
double dissipation_norm(const CoefficientField& A, std::span<const double> f);

// Linearization at mu of the collision operator, in the perturbation variable f (F = mu + sqrt(mu) f).
// With X = D(f / sqrt(mu)) (the discrete version of (grad + v) f / sqrt(mu)) the flux is
// J_i = mu_i (A_i X_i - B0_i), A = sum_j w_j B_ij mu_j, B0 = sum_j w_j B_ij mu_j X_j.
// Because X is an exact discrete gradient, the probe equals the symmetric pair sum and vanishes
// on S0 up to round-off.
class LinearizedOperator {
public:
    LinearizedOperator(std::shared_ptr<const PairKernels> pk, double beta = 1.0);

    std::vector<double> apply(std::span<const double> f) const;
    // -sum_i w_i f_i L[f]_i through the adjoint of the gradient.
    double probe(std::span<const double> f) const;
    // Same quantity as a symmetric pair sum, nonnegative term by term.
    double symmetric_probe(std::span<const double> f) const;

    const CoefficientField& coefficients() const { return coef_; }
    const PairKernels& kernels() const { return *pk_; }

private:
    std::vector<Vec> scaled_gradient(std::span<const double> f) const;  // sqrt(mu) X

    std::shared_ptr<const PairKernels> pk_;
    std::vector<double> sqrt_mu_;
    CoefficientField coef_;
};

// w(v) = <v>^ell exp(K <v>^theta)
struct WeightSpec {
    double ell = 0;
    double theta = 0;
    double K = 0;

    // Throws ConfigError unless ell >= 0, theta in [0, 2], K >= 0 and, for theta = 2, K < k_ceiling.
    void validate(double k_ceiling = 1.0) const;
    std::string label() const;
};

struct WeightedNorm {
    double value = 0;  // sum_i w_i weight(v_i) f_i^2 (a squared norm)
    bool overflow = false;
};

// When K <v_max>^theta > 700 the weight exceeds double range: the result is flagged and its value is +inf.
WeightedNorm weighted_l2(const VelocityGrid& g, std::span<const double> f, const WeightSpec& w);

// One diagnostics tick.
struct DiagnosticRow {
    double t = 0;
    Moments m;
    double entropy = 0;
    double rel_entropy = 0;
    double entropy_dissipation = 0;
    double l2_f = 0;
    double dissipation_norm = 0;
    double min_F = 0;
    double penrose_min = 1;
    std::size_t excluded_nodes = 0;
};

// Shared, immutable ingredients for computing rows on a fixed grid.
class DiagnosticsContext {
public:
    DiagnosticsContext(GridPtr grid, RadialSpectrum V, int circle_nodes = 32);

    // Penrose minimum is taken from `table` when given, otherwise reported as NaN.
    DiagnosticRow row(double t, std::span<const double> F, const ScreeningTable* table) const;

    const NullSpace& null_space() const { return null_; }
    const CoefficientField& equilibrium() const { return coef_; }
    const PairKernels& landau_unit() const { return *landau_; }
    std::span<const double> mu() const { return mu_; }
    const VelocityGrid& grid() const { return *grid_; }

private:
    GridPtr grid_;
    RadialSpectrum V_;
    std::vector<double> mu_;
    NullSpace null_;
    CoefficientField coef_;
    std::shared_ptr<const PairKernels> landau_;
    std::vector<double> radii_;
};

std::string csv_header(int d);
std::string csv_line(const DiagnosticRow& r, int d);
void write_csv(std::ostream& os, std::span<const DiagnosticRow> rows, int d);

}
