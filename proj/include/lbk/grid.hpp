#pragma once

#include "lbk/types.hpp"

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

namespace lbk {

// Uniform tensor-product velocity grid on [-extent, extent]^d with n (odd) points per axis.
// Node coordinates are (l - (n-1)/2) * h, so the centre node is exactly zero and the
// grid is exactly symmetric under sign flips.
class VelocityGrid {
public:
    VelocityGrid(int d, double extent, int n);

    int d() const { return d_; }
    int n() const { return n_; }
    double extent() const { return extent_; }
    double h() const { return h_; }
    std::size_t size() const { return size_; }
    std::size_t stride(int axis) const { return strides_[axis]; }

    double coord(int l) const { return axis_[l]; }
    int index_along(std::size_t i, int axis) const { return int((i / strides_[axis]) % std::size_t(n_)); }
    const Vec& node(std::size_t i) const { return nodes_[i]; }
    double weight(std::size_t i) const { return weights_[i]; }
    std::span<const double> weights() const { return weights_; }
    std::span<const Vec> nodes() const { return nodes_; }

    bool on_boundary(std::size_t i) const;
    bool same_as(const VelocityGrid& o) const { return d_ == o.d_ && n_ == o.n_ && extent_ == o.extent_; }

private:
    int d_;
    int n_;
    double extent_;
    double h_;
    std::size_t size_;
    std::array<std::size_t, 3> strides_{};
    std::vector<double> axis_;
    std::vector<Vec> nodes_;
    std::vector<double> weights_;
};

using GridPtr = std::shared_ptr<const VelocityGrid>;

GridPtr make_grid(int d, double extent, int n);

struct DensityField {
    GridPtr grid;
    std::vector<double> values;
    FieldKind kind = FieldKind::absolute;

    DensityField() = default;
    DensityField(GridPtr g, std::vector<double> v, FieldKind k = FieldKind::absolute);

    std::size_t size() const { return values.size(); }
};

// Samples f at every node.
template <class Fn>
DensityField sample(const GridPtr& g, Fn&& f, FieldKind kind = FieldKind::absolute)
{
    std::vector<double> v(g->size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(g->node(i));
    return DensityField(g, std::move(v), kind);
}

// mu_beta(v) = (beta/pi)^{d/2} exp(-beta |v - shift|^2)
double maxwellian_value(const Vec& v, int d, double beta = 1.0, const Vec& shift = {0, 0, 0});
DensityField maxwellian(const GridPtr& g, double beta = 1.0, const Vec& shift = {0, 0, 0});

// Central differences in the interior, one-sided second-order stencils on the boundary layer.
// Exact on affine and quadratic fields at every node.
std::vector<Vec> central_gradient(const VelocityGrid& g, std::span<const double> f);
std::vector<Vec> central_gradient(const DensityField& F);

// Nonzeros of row i of the axis-`axis` difference matrix used by central_gradient.
struct GradientStencil {
    std::array<std::size_t, 3> col{};
    std::array<double, 3> coef{};
    int count = 0;
};
GradientStencil gradient_stencil(const VelocityGrid& g, std::size_t i, int axis);

// Weighted adjoint of central_gradient: returns W^{-1} D^T W X, so that
// sum_i w_i phi_i (adjoint X)_i = sum_i w_i (D phi)_i . X_i for every phi.
std::vector<double> gradient_adjoint(const VelocityGrid& g, std::span<const Vec> x);

// Uniform 1D axis: value(j) = start + j * step.
struct UniformAxis {
    double start = 0;
    double step = 1;
    int count = 0;

    double value(int j) const { return start + j * step; }
    double last() const { return value(count - 1); }
};

// Symmetric axis with spacing h/2 covering the projections k.v of every node, |k.v| <= extent*sqrt(d).
UniformAxis marginal_axis(const VelocityGrid& g);

struct DirectionSet {
    int d = 2;
    std::vector<Vec> dirs;
    std::vector<double> weights;
    int n_polar = 0;    // d=3 only: Gauss-Legendre rings in cos(theta)
    int n_azimuth = 0;  // points per ring (d=3) or total count (d=2)
    std::vector<double> cos_polar;  // d=3 ring abscissae, ascending

    std::size_t size() const { return dirs.size(); }
};

DirectionSet make_directions_2d(int count);
DirectionSet make_directions_3d(int n_polar, int n_azimuth);
DirectionSet default_directions(int d);

// Interpolation stencil on a DirectionSet for an arbitrary unit vector.
struct DirectionStencil {
    std::array<std::size_t, 4> index{};
    std::array<double, 4> weight{};
};
DirectionStencil direction_stencil(const DirectionSet& dirs, const Vec& khat);

// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w);

// Marginal M(u) = int_{k^perp} F and its derivative M'(u) on an axis.
struct MarginalProfile {
    std::vector<double> m;
    std::vector<double> dm;
};

// Band-limited projection-slice marginals. The lattice data are read as the
// isotropically band-limited (|xi| <= pi/h) reconstruction of F; M and M' are
// obtained from F^(t khat) by Gauss-Legendre quadrature in t. Build once per
// field, then query many directions concurrently.
class MarginalEngine {
public:
    MarginalEngine(const DensityField& F, const UniformAxis& u);

    MarginalProfile profile(const Vec& khat) const;
    // F^(t khat) = sum_i w_i F_i exp(-i t khat.v_i) at the internal t nodes.
    std::vector<std::complex<double>> slice_transform(const Vec& khat) const;

    std::span<const double> t_nodes() const { return t_; }
    std::span<const double> t_weights() const { return tw_; }
    double mass() const { return mass_; }
    double cutoff() const { return cutoff_; }

private:
    GridPtr grid_;
    UniformAxis u_;
    std::vector<double> wf_;  // w_i F_i
    double mass_ = 0;
    double cutoff_ = 0;
    std::vector<double> t_, tw_;
    std::vector<double> cos_tu_, sin_tu_;  // [q * count + j]
};

MarginalProfile directional_profile(const DensityField& F, const Vec& khat, const UniformAxis& u);

// Mass-preserving marginal: sum_j du * M_j equals sum_i w_i F_i to round-off.
std::vector<double> directional_marginal(const DensityField& F, const Vec& khat, const UniformAxis& u);

// 64-bit FNV-1a hash of the field bytes (grid shape included).
std::uint64_t field_hash(const DensityField& F);

// Binary snapshot: 32-byte little-endian header followed by row-major f64 values.
//   0 magic "LBKF" | 4 version u16 | 6 d u16 | 8 n u32 | 12 kind u32 | 16 extent f64 | 24 reserved
void write_snapshot(const std::filesystem::path& path, const DensityField& F);
DensityField read_snapshot(const std::filesystem::path& path);

}
