#include "lbk/kernel.hpp"

#include "lbk/parallel.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <sstream>

namespace lbk {

std::array<double, 3> KernelMatrix::eigenvalues() const
{
    std::array<double, 3> ev{0, 0, 0};
    if (d == 2) {
        Eigen::Matrix2d M;
        M << m(0, 0), m(0, 1), m(1, 0), m(1, 1);
        const Eigen::Vector2d e = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(M, Eigen::EigenvaluesOnly).eigenvalues();
        ev = {e[0], e[1], 0};
    } else {
        Eigen::Matrix3d M;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) M(i, j) = m(i, j);
        const Eigen::Vector3d e = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(M, Eigen::EigenvaluesOnly).eigenvalues();
        ev = {e[0], e[1], e[2]};
    }
    return ev;
}

double min_abs_eps_along(Complex Z, double tmax)
{
    const double z2 = std::norm(Z);
    double t = z2 > 0 ? -Z.real() / z2 : 0.0;
    t = std::clamp(t, 0.0, tmax);
    return std::abs(1.0 + t * Z);
}

RadialWeight radial_kernel_weight(const RadialSpectrum& V, Complex Z, int d, double floor)
{
    RadialWeight out;
    out.min_abs_eps = min_abs_eps_along(Z, V.peak());
    out.degenerate = out.min_abs_eps < floor;
    if (out.degenerate) return out;
    out.value = radial_integral(
        V,
        [d, Z](double r, double v) {
            const double e2 = std::norm(1.0 + v * Z);
            return std::pow(r, d) * pi * v * v / e2;
        },
        1e-10);
    return out;
}

namespace {

// Fixed Gauss-Kronrod 15 / Gauss 7 panels with V^ cached at the nodes, so that I(Z) at many Z
// costs one pass over ~120 cached values. The embedded Gauss sum gives an error estimate; nodes
// where the two disagree fall back to the adaptive quadrature.
class RadialRule {
public:
    RadialRule(const RadialSpectrum& V, int d)
    {
        using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
        using G = boost::math::quadrature::gauss<double, 7>;
        const double top = V.r_max();
        std::vector<double> cuts{0.0};
        for (double b : V.breakpoints())
            if (b > 0 && b < top) cuts.push_back(b);
        if (cuts.size() == 1)
            for (int k = 1; k < 8; ++k) cuts.push_back(top * k / 8.0);
        cuts.push_back(top);
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        const auto& xk = GK::abscissa();
        const auto& wk = GK::weights();
        const auto& xg = G::abscissa();
        const auto& wg = G::weights();
        auto gauss_weight = [&](double x) {
            for (std::size_t q = 0; q < xg.size(); ++q)
                if (std::abs(xg[q] - x) < 1e-12) return wg[q];
            return 0.0;
        };
        for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
            const double c = 0.5 * (cuts[p] + cuts[p + 1]), hw = 0.5 * (cuts[p + 1] - cuts[p]);
            for (std::size_t q = 0; q < xk.size(); ++q) {
                const double wgq = gauss_weight(xk[q]);
                for (int sgn : {1, -1}) {
                    if (q == 0 && sgn < 0) continue;
                    const double r = c + sgn * hw * xk[q];
                    const double vr = V(r);
                    const double base = std::pow(r, d) * pi * vr * vr * hw;
                    v_.push_back(vr);
                    wk_.push_back(base * wk[q]);
                    wg_.push_back(base * wgq);
                }
            }
        }
    }

    // Kronrod value and |Kronrod - Gauss|.
    std::pair<double, double> eval(Complex Z) const
    {
        double k = 0, g = 0;
        const double zr = Z.real(), zi = Z.imag();
        for (std::size_t q = 0; q < v_.size(); ++q) {
            const double er = 1.0 + v_[q] * zr, ei = v_[q] * zi;
            const double inv = 1.0 / (er * er + ei * ei);
            k += wk_[q] * inv;
            g += wg_[q] * inv;
        }
        return {k, std::abs(k - g)};
    }

private:
    std::vector<double> v_, wk_, wg_;
};

}

KernelWeightTable::KernelWeightTable(const ScreeningTable& table, RadialSpectrum V, int d, double floor)
    : dirs_(table.directions()), u_(table.u_axis()), V_(std::move(V)), d_(d), floor_(floor)
{
    if (dirs_.d != d) throw ConfigError("screening table dimension does not match kernel dimension");
    const std::size_t nd = dirs_.size();
    const int nu = u_.count;
    I_.assign(nd * std::size_t(nu), 0.0);
    std::vector<double> min_eps(nd, 1.0);
    std::vector<int> bad_dir(nd, -1);
    const RadialRule rule(V_, d_);
    const double vpeak = V_.peak();
    parallel_for(nd, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t m = b; m < e; ++m) {
            for (int j = 0; j < nu; ++j) {
                const Complex z = table.at(m, j);
                const double me = min_abs_eps_along(z, vpeak);
                min_eps[m] = std::min(min_eps[m], me);
                if (me < floor_) {
                    bad_dir[m] = j;
                    break;
                }
                const auto [val, err] = rule.eval(z);
                I_[m * std::size_t(nu) + std::size_t(j)] =
                    err <= 1e-9 * std::abs(val) ? val : radial_kernel_weight(V_, z, d_, floor_).value;
            }
        }
    });
    min_eps_ = *std::min_element(min_eps.begin(), min_eps.end());
    for (std::size_t m = 0; m < nd; ++m)
        if (bad_dir[m] >= 0) {
            std::ostringstream o;
            o << "dispersion degeneracy: |eps| = " << min_eps[m] << " below floor " << floor_ << " at direction " << m
              << ", u = " << u_.value(bad_dir[m]);
            throw NumericalAbort(o.str());
        }
    I0_ = radial_kernel_weight(V_, 0.0, d_, floor_).value;
    tail_mass_.resize(nd);
    tail_m1_.resize(nd);
    for (std::size_t m = 0; m < nd; ++m) {
        tail_mass_[m] = table.tail_mass(m);
        tail_m1_[m] = table.tail_first_moment(m);
    }
}

double KernelWeightTable::lookup(std::size_t dir, double u) const
{
    if (u < u_.start || u > u_.last()) {
        const Complex z(-tail_mass_[dir] / (u * u) - 2.0 * tail_m1_[dir] / (u * u * u), 0.0);
        const RadialWeight rw = radial_kernel_weight(V_, z, d_, floor_);
        if (rw.degenerate) throw NumericalAbort("dispersion degeneracy in the extrapolated tail");
        return rw.value;
    }
    const AxisStencil s = axis_stencil(u_, u);
    const double* row = &I_[dir * std::size_t(u_.count)];
    return s.w[0] * row[s.j0] + s.w[1] * row[s.j0 + 1] + s.w[2] * row[s.j0 + 2] + s.w[3] * row[s.j0 + 3];
}

double KernelWeightTable::lookup(const Vec& khat, double u) const
{
    const DirectionStencil st = direction_stencil(dirs_, khat);
    double acc = 0;
    for (int q = 0; q < 4; ++q)
        if (st.weight[q] != 0) acc += st.weight[q] * lookup(st.index[q], u);
    return acc;
}

namespace {

// d=2: unit normal to w with angle in [0, pi).
Vec canonical_normal_2d(const Vec& w)
{
    const double len = std::hypot(w[0], w[1]);
    Vec k{-w[1] / len, w[0] / len, 0};
    if (k[1] < 0 || (k[1] == 0 && k[0] < 0)) k = {-k[0], -k[1], 0};
    return k;
}

// d=3: flip w so that its first nonzero component is positive.
Vec canonical_sign_3d(const Vec& w)
{
    for (int a = 0; a < 3; ++a) {
        if (w[a] > 0) return w;
        if (w[a] < 0) return {-w[0], -w[1], -w[2]};
    }
    return w;
}

// Orthonormal basis of w^perp built from the coordinate axis least aligned with w.
std::pair<Vec, Vec> perp_frame(const Vec& w)
{
    const double len = norm(w);
    const Vec wh = (1.0 / len) * w;
    int a = 0;
    for (int b = 1; b < 3; ++b)
        if (std::abs(wh[b]) < std::abs(wh[a])) a = b;
    Vec e{0, 0, 0};
    e[a] = 1;
    Vec e1 = e - dot(e, wh) * wh;
    e1 = (1.0 / norm(e1)) * e1;
    const Vec e2 = cross(wh, e1);
    return {e1, e2};
}

double momentum_measure(int d) { return std::pow(2.0 * pi, -d); }

}

KernelMatrix assemble_kernel(const Vec& v, const Vec& vstar, const KernelWeightTable& I, int circle_nodes)
{
    const int d = I.d();
    KernelMatrix K;
    K.d = d;
    K.w = v - vstar;
    const double len = norm(K.w);
    if (len == 0) throw ConfigError("kernel requested at coincident velocities");
    const Vec mid = 0.5 * (v + vstar);
    if (d == 2) {
        const Vec k = canonical_normal_2d(K.w);
        const double u = dot(k, mid);
        const Vec km{-k[0], -k[1], 0};
        const double s = momentum_measure(2) * (I.lookup(k, u) + I.lookup(km, -u)) / len;
        K.m = outer(k, k);
        for (double& x : K.m.a) x *= s;
        return K;
    }
    if (circle_nodes < 3) throw ConfigError("circle_nodes must be at least 3");
    const Vec wc = canonical_sign_3d(K.w);
    const auto [e1, e2] = perp_frame(wc);
    Mat acc;
    for (int q = 0; q < circle_nodes; ++q) {
        const double ph = 2.0 * pi * q / circle_nodes;
        const Vec k = std::cos(ph) * e1 + std::sin(ph) * e2;
        const double wgt = I.lookup(k, dot(k, mid));
        Mat kk = outer(k, k);
        for (double& x : kk.a) x *= wgt;
        acc += kk;
    }
    const double s = momentum_measure(3) * (2.0 * pi / circle_nodes) / len;
    for (double& x : acc.a) x *= s;
    K.m = acc;
    return K;
}

KernelMatrix landau_kernel(const Vec& w, double L, int d)
{
    const double len = norm(w);
    if (len == 0) throw ConfigError("Landau kernel requested at w = 0");
    KernelMatrix K;
    K.d = d;
    K.w = w;
    const Vec wh = (1.0 / len) * w;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) K.m(i, j) = (L / len) * ((i == j ? 1.0 : 0.0) - wh[i] * wh[j]);
    return K;
}

PairKernels::PairKernels(GridPtr grid) : grid_(std::move(grid)), d_(grid_->d())
{
    const std::size_t N = grid_->size();
    pairs_ = N * (N - 1) / 2;
    const double per_pair = d_ == 2 ? 1 : 6;
    if (double(pairs_) * per_pair * sizeof(double) > memory_limit_bytes)
        throw ConfigError("pair kernel cache exceeds the memory limit; use a coarser grid");
    row_start_.resize(N);
    std::size_t acc = 0;
    for (std::size_t i = 0; i < N; ++i) {
        row_start_[i] = acc;
        acc += N - 1 - i;
    }
    coef_.assign(pairs_ * std::size_t(per_pair), 0.0);
}

PairKernels PairKernels::landau(GridPtr grid, double L)
{
    PairKernels pk(std::move(grid));
    const VelocityGrid& g = *pk.grid_;
    const std::size_t N = g.size();
    run_chunks(pair_row_bounds(N, thread_count()), [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            std::size_t p = pk.row_start_[i];
            for (std::size_t j = i + 1; j < N; ++j, ++p) {
                const Vec w = g.node(i) - g.node(j);
                const double len = norm(w);
                if (pk.d_ == 2) {
                    pk.coef_[p] = L / (len * len * len);
                } else {
                    const KernelMatrix K = landau_kernel(w, L, 3);
                    double* c = &pk.coef_[6 * p];
                    c[0] = K.m(0, 0), c[1] = K.m(0, 1), c[2] = K.m(0, 2);
                    c[3] = K.m(1, 1), c[4] = K.m(1, 2), c[5] = K.m(2, 2);
                }
            }
        }
    });
    return pk;
}

namespace {

struct CachedStencil {
    std::array<std::size_t, 4> row;  // direction index times u count
    std::array<double, 4> w;
};

inline double interp(const std::vector<double>& I, const CachedStencil& ds, const AxisStencil& us)
{
    double acc = 0;
    for (int q = 0; q < 4; ++q) {
        if (ds.w[q] == 0) continue;
        const double* r = &I[ds.row[q] + std::size_t(us.j0)];
        acc += ds.w[q] * (us.w[0] * r[0] + us.w[1] * r[1] + us.w[2] * r[2] + us.w[3] * r[3]);
    }
    return acc;
}

CachedStencil cache_stencil(const KernelWeightTable& I, const Vec& k)
{
    const DirectionStencil st = direction_stencil(I.directions(), k);
    CachedStencil c;
    for (int q = 0; q < 4; ++q) {
        c.row[q] = st.index[q] * std::size_t(I.u_axis().count);
        c.w[q] = st.weight[q];
    }
    return c;
}

}

PairKernels PairKernels::screened(GridPtr grid, const KernelWeightTable& I, int circle_nodes)
{
    PairKernels pk(std::move(grid));
    const VelocityGrid& g = *pk.grid_;
    if (I.d() != g.d()) throw ConfigError("kernel weight table dimension does not match the grid");
    const std::size_t N = g.size();
    const int n = g.n();
    const int span = 2 * n - 1;
    const double h = g.h();
    const UniformAxis& u = I.u_axis();
    const double reach = g.extent() * std::sqrt(double(g.d()));
    if (u.start > -reach + 1e-9 || u.last() < reach - 1e-9)
        throw ConfigError("kernel weight table does not cover the grid's projected velocities");
    // Lookup data depends only on the lattice offset between the two nodes.
    std::vector<double> Iv(std::size_t(I.directions().size()) * std::size_t(u.count));
    for (std::size_t m = 0; m < I.directions().size(); ++m)
        for (int j = 0; j < u.count; ++j) Iv[m * std::size_t(u.count) + std::size_t(j)] = I.at(m, j);

    if (g.d() == 2) {
        // Per lattice offset, tabulate s(u) = |w|^{-3} (2 pi)^{-2} (I(k0, u) + I(-k0, -u)) on the u axis,
        // so each pair costs a single cubic lookup. The axis is symmetric, so -u_j is node count-1-j.
        if (std::abs(u.start + u.last()) > 1e-12 * u.step) throw ConfigError("u axis must be symmetric about 0");
        struct Off {
            Vec k;
            std::size_t row;
        };
        const std::size_t nu = std::size_t(u.count);
        std::vector<Off> off(std::size_t(span) * span);
        std::vector<double> rows(off.size() * nu, 0.0);
        for (int da = -(n - 1); da <= n - 1; ++da)
            for (int db = -(n - 1); db <= n - 1; ++db) {
                if (da == 0 && db == 0) continue;
                const Vec w{-da * h, -db * h, 0};
                const double len = std::hypot(w[0], w[1]);
                const std::size_t o_idx = std::size_t(da + n - 1) * span + std::size_t(db + n - 1);
                Off& o = off[o_idx];
                o.k = canonical_normal_2d(w);
                o.row = o_idx * nu;
                const double scale = momentum_measure(2) / (len * len * len);
                const CachedStencil plus = cache_stencil(I, o.k), minus = cache_stencil(I, {-o.k[0], -o.k[1], 0});
                double* r = &rows[o.row];
                for (std::size_t j = 0; j < nu; ++j) {
                    double acc = 0;
                    for (int q = 0; q < 4; ++q)
                        acc += plus.w[q] * Iv[plus.row[q] + j] + minus.w[q] * Iv[minus.row[q] + (nu - 1 - j)];
                    r[j] = scale * acc;
                }
            }
        // Offset-major traversal keeps each tabulated row hot in cache; every pair is written once.
        const std::size_t n_off = off.size();
        parallel_for(n_off, [&](std::size_t, std::size_t ob, std::size_t oe) {
            for (std::size_t o_idx = ob; o_idx < oe; ++o_idx) {
                const int da = int(o_idx / std::size_t(span)) - (n - 1), db = int(o_idx % std::size_t(span)) - (n - 1);
                const long delta = long(da) * n + db;
                if (delta <= 0) continue;
                const Off& o = off[o_idx];
                const double* row = &rows[o.row];
                for (int a = std::max(0, -da); a < std::min(n, n - da); ++a)
                    for (int bb = std::max(0, -db); bb < std::min(n, n - db); ++bb) {
                        const std::size_t i = std::size_t(a) * std::size_t(n) + std::size_t(bb);
                        const std::size_t j = i + std::size_t(delta);
                        const Vec &vi = g.node(i), &vj = g.node(j);
                        const double uu = 0.5 * (o.k[0] * (vi[0] + vj[0]) + o.k[1] * (vi[1] + vj[1]));
                        const AxisStencil st = axis_stencil(u, uu);
                        const double* r = row + st.j0;
                        pk.coef_[pk.row_start_[i] + std::size_t(delta) - 1] =
                            st.w[0] * r[0] + st.w[1] * r[1] + st.w[2] * r[2] + st.w[3] * r[3];
                    }
            }
        });
        return pk;
    }

    if (circle_nodes < 3) throw ConfigError("circle_nodes must be at least 3");
    struct Off3 {
        std::vector<Vec> k;
        std::vector<CachedStencil> st;
        double scale = 0;
    };
    std::vector<Off3> off(std::size_t(span) * span * span);
    for (int da = -(n - 1); da <= n - 1; ++da)
        for (int db = -(n - 1); db <= n - 1; ++db)
            for (int dc = -(n - 1); dc <= n - 1; ++dc) {
                if (da == 0 && db == 0 && dc == 0) continue;
                Off3& o = off[(std::size_t(da + n - 1) * span + std::size_t(db + n - 1)) * span + std::size_t(dc + n - 1)];
                const Vec w = canonical_sign_3d({-da * h, -db * h, -dc * h});
                const auto [e1, e2] = perp_frame(w);
                o.scale = momentum_measure(3) * (2.0 * pi / circle_nodes) / norm(w);
                for (int q = 0; q < circle_nodes; ++q) {
                    const double ph = 2.0 * pi * q / circle_nodes;
                    const Vec k = std::cos(ph) * e1 + std::sin(ph) * e2;
                    o.k.push_back(k);
                    o.st.push_back(cache_stencil(I, k));
                }
            }
    run_chunks(pair_row_bounds(N, thread_count()), [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const int ai = g.index_along(i, 0), bi = g.index_along(i, 1), ci = g.index_along(i, 2);
            const Vec& vi = g.node(i);
            std::size_t p = pk.row_start_[i];
            for (std::size_t j = i + 1; j < N; ++j, ++p) {
                const int da = g.index_along(j, 0) - ai, db = g.index_along(j, 1) - bi, dc = g.index_along(j, 2) - ci;
                const Off3& o =
                    off[(std::size_t(da + n - 1) * span + std::size_t(db + n - 1)) * span + std::size_t(dc + n - 1)];
                const Vec mid = 0.5 * (vi + g.node(j));
                double c[6] = {0, 0, 0, 0, 0, 0};
                for (int q = 0; q < circle_nodes; ++q) {
                    const Vec& k = o.k[q];
                    const double wgt = interp(Iv, o.st[q], axis_stencil(u, dot(k, mid)));
                    c[0] += wgt * k[0] * k[0];
                    c[1] += wgt * k[0] * k[1];
                    c[2] += wgt * k[0] * k[2];
                    c[3] += wgt * k[1] * k[1];
                    c[4] += wgt * k[1] * k[2];
                    c[5] += wgt * k[2] * k[2];
                }
                double* out = &pk.coef_[6 * p];
                for (int t = 0; t < 6; ++t) out[t] = o.scale * c[t];
            }
        }
    });
    return pk;
}

namespace {

struct PairB2 {
    double s, k0, k1;
    Vec apply(const Vec& x) const
    {
        const double t = s * (k0 * x[0] + k1 * x[1]);
        return {t * k0, t * k1, 0};
    }
    double quad(const Vec& x) const
    {
        const double t = k0 * x[0] + k1 * x[1];
        return s * t * t;
    }
    void add_to(Mat& m, double c) const
    {
        const double cs = c * s;
        m(0, 0) += cs * k0 * k0;
        m(0, 1) += cs * k0 * k1;
        m(1, 0) += cs * k0 * k1;
        m(1, 1) += cs * k1 * k1;
    }
};

struct PairB3 {
    const double* c;
    Vec apply(const Vec& x) const
    {
        return {c[0] * x[0] + c[1] * x[1] + c[2] * x[2], c[1] * x[0] + c[3] * x[1] + c[4] * x[2],
                c[2] * x[0] + c[4] * x[1] + c[5] * x[2]};
    }
    double quad(const Vec& x) const { return dot(x, apply(x)); }
    void add_to(Mat& m, double s) const
    {
        m(0, 0) += s * c[0];
        m(0, 1) += s * c[1];
        m(0, 2) += s * c[2];
        m(1, 0) += s * c[1];
        m(1, 1) += s * c[3];
        m(1, 2) += s * c[4];
        m(2, 0) += s * c[2];
        m(2, 1) += s * c[4];
        m(2, 2) += s * c[5];
    }
};

// Visits every unordered pair (i < j) row chunk by row chunk; `body(chunk, i, j, B)`.
template <int D, class Body>
void visit_pairs(const VelocityGrid& g, const std::vector<std::size_t>& row_start, const std::vector<double>& coef,
                 const std::vector<std::size_t>& bounds, Body&& body)
{
    const std::size_t N = g.size();
    run_chunks(bounds, [&](std::size_t c, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const Vec& vi = g.node(i);
            std::size_t p = row_start[i];
            for (std::size_t j = i + 1; j < N; ++j, ++p) {
                if constexpr (D == 2) {
                    const Vec& vj = g.node(j);
                    body(c, i, j, PairB2{coef[p], vj[1] - vi[1], vi[0] - vj[0]});
                } else {
                    body(c, i, j, PairB3{&coef[6 * p]});
                }
            }
        }
    });
}

template <class T>
std::vector<T> merge_chunks(std::vector<std::vector<T>>& bufs)
{
    std::vector<T> out = std::move(bufs[0]);
    for (std::size_t c = 1; c < bufs.size(); ++c)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += bufs[c][i];
    return out;
}

Vec& operator+=(Vec& a, const Vec& b)
{
    a[0] += b[0];
    a[1] += b[1];
    a[2] += b[2];
    return a;
}

}

Mat PairKernels::matrix(std::size_t i, std::size_t j) const
{
    if (i == j) throw ConfigError("no kernel on the diagonal");
    if (i > j) std::swap(i, j);
    const std::size_t p = row_start_[i] + (j - i - 1);
    Mat m;
    if (d_ == 2) {
        const Vec &vi = grid_->node(i), &vj = grid_->node(j);
        PairB2{coef_[p], vj[1] - vi[1], vi[0] - vj[0]}.add_to(m, 1.0);
    } else {
        PairB3{&coef_[6 * p]}.add_to(m, 1.0);
    }
    return m;
}

std::vector<Mat> PairKernels::matrix_sum(std::span<const double> c) const
{
    const auto bounds = pair_row_bounds(grid_->size(), thread_count());
    std::vector<std::vector<Mat>> bufs(bounds.size() - 1, std::vector<Mat>(grid_->size()));
    const auto w = grid_->weights();
    auto body = [&](std::size_t ch, std::size_t i, std::size_t j, const auto& B) {
        B.add_to(bufs[ch][i], w[j] * c[j]);
        B.add_to(bufs[ch][j], w[i] * c[i]);
    };
    if (d_ == 2) visit_pairs<2>(*grid_, row_start_, coef_, bounds, body);
    else visit_pairs<3>(*grid_, row_start_, coef_, bounds, body);
    return merge_chunks(bufs);
}

std::vector<Vec> PairKernels::vector_sum(std::span<const Vec> x) const
{
    const auto bounds = pair_row_bounds(grid_->size(), thread_count());
    std::vector<std::vector<Vec>> bufs(bounds.size() - 1, std::vector<Vec>(grid_->size(), Vec{0, 0, 0}));
    const auto w = grid_->weights();
    auto body = [&](std::size_t ch, std::size_t i, std::size_t j, const auto& B) {
        bufs[ch][i] += w[j] * B.apply(x[j]);
        bufs[ch][j] += w[i] * B.apply(x[i]);
    };
    if (d_ == 2) visit_pairs<2>(*grid_, row_start_, coef_, bounds, body);
    else visit_pairs<3>(*grid_, row_start_, coef_, bounds, body);
    return merge_chunks(bufs);
}

std::vector<Vec> PairKernels::flux(std::span<const double> a, std::span<const Vec> x) const
{
    const auto bounds = pair_row_bounds(grid_->size(), thread_count());
    std::vector<std::vector<Vec>> bufs(bounds.size() - 1, std::vector<Vec>(grid_->size(), Vec{0, 0, 0}));
    const auto w = grid_->weights();
    auto body = [&](std::size_t ch, std::size_t i, std::size_t j, const auto& B) {
        const Vec D = a[j] * x[i] - a[i] * x[j];
        const Vec g = B.apply(D);
        bufs[ch][i] += w[j] * g;
        bufs[ch][j] += (-w[i]) * g;
    };
    if (d_ == 2) visit_pairs<2>(*grid_, row_start_, coef_, bounds, body);
    else visit_pairs<3>(*grid_, row_start_, coef_, bounds, body);
    return merge_chunks(bufs);
}

double PairKernels::symmetric_quadratic(std::span<const double> a, std::span<const Vec> x) const
{
    const auto bounds = pair_row_bounds(grid_->size(), thread_count());
    std::vector<double> part(bounds.size() - 1, 0.0);
    const auto w = grid_->weights();
    auto body = [&](std::size_t ch, std::size_t i, std::size_t j, const auto& B) {
        const Vec D = a[j] * x[i] - a[i] * x[j];
        part[ch] += w[i] * w[j] * B.quad(D);
    };
    if (d_ == 2) visit_pairs<2>(*grid_, row_start_, coef_, bounds, body);
    else visit_pairs<3>(*grid_, row_start_, coef_, bounds, body);
    double s = 0;
    for (double p : part) s += p;
    return s;
}

CoefficientField coefficients_from_pairs(const PairKernels& pk, std::span<const double> mu)
{
    CoefficientField cf;
    cf.grid = pk.grid_ptr();
    const VelocityGrid& g = pk.grid();
    cf.A = pk.matrix_sum(mu);
    const int d = g.d();
    cf.lambda1.resize(g.size());
    cf.lambda2.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec& v = g.node(i);
        const double len = norm(v);
        const Vec vh = len > 0 ? (1.0 / len) * v : Vec{1, 0, 0};
        const double l1 = dot(vh, cf.A[i].apply(vh));
        cf.lambda1[i] = l1;
        cf.lambda2[i] = (cf.A[i].trace() - l1) / (d - 1);
    }
    return cf;
}

CoefficientField equilibrium_coefficients(GridPtr grid, const RadialSpectrum& V, int circle_nodes)
{
    const int d = grid->d();
    const ScreeningTable table = maxwellian_screening_table(default_directions(d), marginal_axis(*grid));
    const KernelWeightTable I(table, V, d);
    const PairKernels pk = PairKernels::screened(grid, I, circle_nodes);
    const DensityField mu = maxwellian(grid);
    CoefficientField cf = coefficients_from_pairs(pk, mu.values);
    cf.grid = grid;
    return cf;
}

}
