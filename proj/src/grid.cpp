#include "lbk/grid.hpp"


#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace lbk {

VelocityGrid::VelocityGrid(int d, double extent, int n) : d_(d), n_(n), extent_(extent)
{
    if (d != 2 && d != 3) throw ConfigError("grid dimension must be 2 or 3");
    if (n < 5 || n % 2 == 0) throw ConfigError("grid points per axis must be odd and at least 5");
    if (!(extent > 0) || !std::isfinite(extent)) throw ConfigError("grid extent must be positive");

    h_ = 2.0 * extent / (n - 1);
    size_ = 1;
    for (int a = 0; a < d; ++a) size_ *= std::size_t(n);
    strides_ = {1, 1, 1};
    for (int a = d - 2; a >= 0; --a) strides_[a] = strides_[a + 1] * std::size_t(n);

    const int c = (n - 1) / 2;
    axis_.resize(n);
    for (int l = 0; l < n; ++l) axis_[l] = (l - c) * h_;

    nodes_.resize(size_);
    weights_.resize(size_);
    for (std::size_t i = 0; i < size_; ++i) {
        Vec v{0, 0, 0};
        double w = 1;
        for (int a = 0; a < d; ++a) {
            const int l = index_along(i, a);
            v[a] = axis_[l];
            w *= (l == 0 || l == n - 1) ? 0.5 * h_ : h_;
        }
        nodes_[i] = v;
        weights_[i] = w;
    }
}

bool VelocityGrid::on_boundary(std::size_t i) const
{
    for (int a = 0; a < d_; ++a) {
        const int l = index_along(i, a);
        if (l == 0 || l == n_ - 1) return true;
    }
    return false;
}

GridPtr make_grid(int d, double extent, int n) { return std::make_shared<const VelocityGrid>(d, extent, n); }

DensityField::DensityField(GridPtr g, std::vector<double> v, FieldKind k)
    : grid(std::move(g)), values(std::move(v)), kind(k)
{
    if (!grid) throw ConfigError("density field without grid");
    if (values.size() != grid->size()) throw ConfigError("density field size does not match its grid");
}

double maxwellian_value(const Vec& v, int d, double beta, const Vec& shift)
{
    const Vec x = v - shift;
    return std::pow(beta / pi, 0.5 * d) * std::exp(-beta * dot(x, x));
}

DensityField maxwellian(const GridPtr& g, double beta, const Vec& shift)
{
    const int d = g->d();
    return sample(g, [&](const Vec& v) { return maxwellian_value(v, d, beta, shift); });
}

namespace {

// Row l of the 1D difference matrix (scaled by 2h): up to three (column, coefficient) entries.
struct StencilRow {
    int col[3];
    double coef[3];
    int count;
};

StencilRow stencil_row(int l, int n)
{
    if (l == 0) return {{0, 1, 2}, {-3.0, 4.0, -1.0}, 3};
    if (l == n - 1) return {{n - 1, n - 2, n - 3}, {3.0, -4.0, 1.0}, 3};
    return {{l + 1, l - 1, 0}, {1.0, -1.0, 0.0}, 2};
}

}

std::vector<Vec> central_gradient(const VelocityGrid& g, std::span<const double> f)
{
    const int n = g.n();
    const double inv = 1.0 / (2.0 * g.h());
    std::vector<Vec> out(g.size(), Vec{0, 0, 0});
    for (int a = 0; a < g.d(); ++a) {
        const std::size_t s = g.stride(a);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const int l = g.index_along(i, a);
            const std::size_t base = i - std::size_t(l) * s;
            const StencilRow r = stencil_row(l, n);
            double acc = 0;
            for (int k = 0; k < r.count; ++k) acc += r.coef[k] * f[base + std::size_t(r.col[k]) * s];
            out[i][a] = acc * inv;
        }
    }
    return out;
}

GradientStencil gradient_stencil(const VelocityGrid& g, std::size_t i, int axis)
{
    const std::size_t s = g.stride(axis);
    const int l = g.index_along(i, axis);
    const std::size_t base = i - std::size_t(l) * s;
    const StencilRow r = stencil_row(l, g.n());
    GradientStencil out;
    out.count = r.count;
    for (int k = 0; k < r.count; ++k) {
        out.col[k] = base + std::size_t(r.col[k]) * s;
        out.coef[k] = r.coef[k] / (2.0 * g.h());
    }
    return out;
}

std::vector<Vec> central_gradient(const DensityField& F) { return central_gradient(*F.grid, F.values); }

std::vector<double> gradient_adjoint(const VelocityGrid& g, std::span<const Vec> x)
{
    const int n = g.n();
    const double inv = 1.0 / (2.0 * g.h());
    std::vector<double> out(g.size(), 0.0);
    for (int a = 0; a < g.d(); ++a) {
        const std::size_t s = g.stride(a);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double y = g.weight(i) * x[i][a] * inv;
            const int l = g.index_along(i, a);
            const std::size_t base = i - std::size_t(l) * s;
            const StencilRow r = stencil_row(l, n);
            for (int k = 0; k < r.count; ++k) out[base + std::size_t(r.col[k]) * s] += r.coef[k] * y;
        }
    }
    for (std::size_t i = 0; i < g.size(); ++i) out[i] /= g.weight(i);
    return out;
}

UniformAxis marginal_axis(const VelocityGrid& g)
{
    const double du = 0.5 * g.h();
    const double reach = g.extent() * std::sqrt(double(g.d()));
    const int half = int(std::ceil(reach / du - 1e-9));
    return UniformAxis{-half * du, du, 2 * half + 1};
}

DirectionSet make_directions_2d(int count)
{
    if (count < 4 || count % 2 != 0) throw ConfigError("d=2 direction count must be even and at least 4");
    DirectionSet s;
    s.d = 2;
    s.n_azimuth = count;
    s.dirs.resize(count);
    s.weights.assign(count, 2.0 * pi / count);
    if (count % 8 == 0) {
        // Fill one octant and reflect so the set is exactly invariant under the grid symmetries.
        const int q = count / 4;
        for (int m = 0; m <= count / 8; ++m) {
            const double th = 2.0 * pi * m / count;
            s.dirs[m] = {std::cos(th), std::sin(th), 0};
            if (m == 0) s.dirs[m] = {1, 0, 0};
            if (8 * m == count) s.dirs[m] = {std::sqrt(0.5), std::sqrt(0.5), 0};
        }
        for (int m = count / 8 + 1; m < q; ++m) s.dirs[m] = {s.dirs[q - m][1], s.dirs[q - m][0], 0};
        for (int m = q; m < count; ++m) {
            const Vec& p = s.dirs[m - q];
            s.dirs[m] = {-p[1], p[0], 0};
        }
    } else {
        for (int m = 0; m < count; ++m) {
            const double th = 2.0 * pi * m / count;
            s.dirs[m] = {std::cos(th), std::sin(th), 0};
        }
    }
    return s;
}

DirectionSet make_directions_3d(int n_polar, int n_azimuth)
{
    if (n_polar < 2 || n_azimuth < 4) throw ConfigError("d=3 direction set too small");
    DirectionSet s;
    s.d = 3;
    s.n_polar = n_polar;
    s.n_azimuth = n_azimuth;
    std::vector<double> x, w;
    gauss_legendre(n_polar, x, w);
    s.cos_polar = x;
    for (int p = 0; p < n_polar; ++p) {
        const double ct = x[p];
        const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
        for (int a = 0; a < n_azimuth; ++a) {
            const double ph = 2.0 * pi * a / n_azimuth;
            s.dirs.push_back({st * std::cos(ph), st * std::sin(ph), ct});
            s.weights.push_back(w[p] * 2.0 * pi / n_azimuth);
        }
    }
    return s;
}

DirectionSet default_directions(int d) { return d == 2 ? make_directions_2d(64) : make_directions_3d(16, 32); }

DirectionStencil direction_stencil(const DirectionSet& s, const Vec& k)
{
    DirectionStencil st;
    if (s.d == 2) {
        const int N = s.n_azimuth;
        double p = std::atan2(k[1], k[0]) / (2.0 * pi) * N;
        if (p < 0) p += N;
        int m0 = int(std::floor(p));
        const double t = p - m0;
        m0 %= N;
        const double w[4] = {-t * (t - 1) * (t - 2) / 6.0, (t + 1) * (t - 1) * (t - 2) / 2.0,
                             -(t + 1) * t * (t - 2) / 2.0, (t + 1) * t * (t - 1) / 6.0};
        for (int q = 0; q < 4; ++q) {
            st.index[q] = std::size_t(((m0 + q - 1) % N + N) % N);
            st.weight[q] = w[q];
        }
        return st;
    }
    const int A = s.n_azimuth;
    const auto& cp = s.cos_polar;
    int r0 = 0;
    double tr = 0;
    if (k[2] <= cp.front()) {
        r0 = 0;
        tr = 0;
    } else if (k[2] >= cp.back()) {
        r0 = int(cp.size()) - 2;
        tr = 1;
    } else {
        r0 = int(std::upper_bound(cp.begin(), cp.end(), k[2]) - cp.begin()) - 1;
        r0 = std::clamp(r0, 0, int(cp.size()) - 2);
        tr = (k[2] - cp[r0]) / (cp[r0 + 1] - cp[r0]);
    }
    double p = std::atan2(k[1], k[0]) / (2.0 * pi) * A;
    if (p < 0) p += A;
    int a0 = int(std::floor(p));
    const double ta = p - a0;
    a0 %= A;
    const int a1 = (a0 + 1) % A;
    st.index = {std::size_t(r0 * A + a0), std::size_t(r0 * A + a1), std::size_t((r0 + 1) * A + a0),
                std::size_t((r0 + 1) * A + a1)};
    st.weight = {(1 - tr) * (1 - ta), (1 - tr) * ta, tr * (1 - ta), tr * ta};
    return st;
}

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w)
{
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        double p0 = 1, p1 = z;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (z * p1 - p0) / (z * z - 1);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1 - z * z) * dp * dp);
    }
    if (n % 2 == 1) x[n / 2] = 0.0;
}

MarginalEngine::MarginalEngine(const DensityField& F, const UniformAxis& u) : grid_(F.grid), u_(u)
{
    const VelocityGrid& g = *grid_;
    if (!(u.step > 0) || u.count < 3) throw ConfigError("marginal axis must be uniform with positive step");
    wf_.resize(g.size());
    mass_ = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        wf_[i] = g.weight(i) * F.values[i];
        mass_ += wf_[i];
    }
    cutoff_ = pi / g.h();
    const double reach = g.extent() * std::sqrt(double(g.d()));
    const double umax = std::max(std::abs(u.start), std::abs(u.last()));
    const double phase = cutoff_ * (umax + reach);
    const int nt = int(std::ceil(0.25 * phase + 10.0 * std::cbrt(phase))) + 10;
    std::vector<double> x, w;
    gauss_legendre(nt, x, w);
    t_.resize(nt);
    tw_.resize(nt);
    for (int q = 0; q < nt; ++q) {
        t_[q] = 0.5 * cutoff_ * (x[q] + 1.0);
        tw_[q] = 0.5 * cutoff_ * w[q];
    }
    cos_tu_.resize(std::size_t(nt) * u.count);
    sin_tu_.resize(std::size_t(nt) * u.count);
    for (int q = 0; q < nt; ++q)
        for (int j = 0; j < u.count; ++j) {
            const double ph = t_[q] * u.value(j);
            cos_tu_[std::size_t(q) * u.count + j] = std::cos(ph);
            sin_tu_[std::size_t(q) * u.count + j] = std::sin(ph);
        }
}

std::vector<std::complex<double>> MarginalEngine::slice_transform(const Vec& k) const
{
    const VelocityGrid& g = *grid_;
    const int n = g.n();
    const int d = g.d();
    const std::size_t nt = t_.size();
    std::vector<std::complex<double>> out(nt);
    std::vector<double> ec(std::size_t(d) * n), es(std::size_t(d) * n);
    std::vector<std::complex<double>> partial(d == 3 ? std::size_t(n) * n : std::size_t(n));
    for (std::size_t q = 0; q < nt; ++q) {
        for (int a = 0; a < d; ++a)
            for (int l = 0; l < n; ++l) {
                const double ph = -t_[q] * k[a] * g.coord(l);
                ec[std::size_t(a) * n + l] = std::cos(ph);
                es[std::size_t(a) * n + l] = std::sin(ph);
            }
        // Contract the fastest axis first, then the others.
        const double* c_last = &ec[std::size_t(d - 1) * n];
        const double* s_last = &es[std::size_t(d - 1) * n];
        const std::size_t rows = g.size() / n;
        for (std::size_t r = 0; r < rows; ++r) {
            const double* f = &wf_[r * n];
            double re = 0, im = 0;
            for (int l = 0; l < n; ++l) {
                re += c_last[l] * f[l];
                im += s_last[l] * f[l];
            }
            partial[r] = {re, im};
        }
        std::size_t len = rows;
        for (int a = d - 2; a >= 0; --a) {
            const std::size_t outer = len / n;
            for (std::size_t r = 0; r < outer; ++r) {
                std::complex<double> acc = 0;
                for (int l = 0; l < n; ++l)
                    acc += std::complex<double>(ec[std::size_t(a) * n + l], es[std::size_t(a) * n + l]) *
                           partial[r * n + l];
                partial[r] = acc;
            }
            len = outer;
        }
        out[q] = partial[0];
    }
    return out;
}

MarginalProfile MarginalEngine::profile(const Vec& k) const
{
    const auto fh = slice_transform(k);
    MarginalProfile p;
    p.m.assign(u_.count, 0.0);
    p.dm.assign(u_.count, 0.0);
    for (std::size_t q = 0; q < t_.size(); ++q) {
        const double re = fh[q].real() * tw_[q] / pi;
        const double im = fh[q].imag() * tw_[q] / pi;
        const double* c = &cos_tu_[q * u_.count];
        const double* s = &sin_tu_[q * u_.count];
        const double tq = t_[q];
        for (int j = 0; j < u_.count; ++j) {
            p.m[j] += re * c[j] - im * s[j];
            p.dm[j] -= tq * (re * s[j] + im * c[j]);
        }
    }
    return p;
}

MarginalProfile directional_profile(const DensityField& F, const Vec& khat, const UniformAxis& u)
{
    if (std::abs(norm(khat) - 1.0) > 1e-10) throw ConfigError("marginal direction must be a unit vector");
    return MarginalEngine(F, u).profile(khat);
}

std::vector<double> directional_marginal(const DensityField& F, const Vec& khat, const UniformAxis& u)
{
    if (std::abs(norm(khat) - 1.0) > 1e-10) throw ConfigError("marginal direction must be a unit vector");
    const MarginalEngine eng(F, u);
    std::vector<double> m = eng.profile(khat).m;
    double sum = 0, abs_sum = 0;
    for (double x : m) {
        sum += u.step * x;
        abs_sum += u.step * std::abs(x);
    }
    if (abs_sum > 0) {
        const double defect = eng.mass() - sum;
        for (double& x : m) x += defect * std::abs(x) / abs_sum;
    }
    return m;
}

std::uint64_t field_hash(const DensityField& F)
{
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](const void* p, std::size_t len) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t k = 0; k < len; ++k) {
            h ^= b[k];
            h *= 1099511628211ull;
        }
    };
    const int d = F.grid->d(), n = F.grid->n();
    const double e = F.grid->extent();
    const auto kind = static_cast<std::uint32_t>(F.kind);
    mix(&d, sizeof d);
    mix(&n, sizeof n);
    mix(&e, sizeof e);
    mix(&kind, sizeof kind);
    mix(F.values.data(), F.values.size() * sizeof(double));
    return h;
}

namespace {

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

template <class T>
void put(char* buf, std::size_t off, T v)
{
    std::memcpy(buf + off, &v, sizeof v);
}

template <class T>
T get(const char* buf, std::size_t off)
{
    T v;
    std::memcpy(&v, buf + off, sizeof v);
    return v;
}

constexpr std::uint16_t snapshot_version = 1;

}

void write_snapshot(const std::filesystem::path& path, const DensityField& F)
{
    char header[32] = {};
    std::memcpy(header, "LBKF", 4);
    put<std::uint16_t>(header, 4, snapshot_version);
    put<std::uint16_t>(header, 6, std::uint16_t(F.grid->d()));
    put<std::uint32_t>(header, 8, std::uint32_t(F.grid->n()));
    put<std::uint32_t>(header, 12, static_cast<std::uint32_t>(F.kind));
    put<double>(header, 16, F.grid->extent());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open snapshot for writing: " + path.string());
    out.write(header, sizeof header);
    out.write(reinterpret_cast<const char*>(F.values.data()), std::streamsize(F.values.size() * sizeof(double)));
    if (!out) throw IoError("failed writing snapshot: " + path.string());
}

DensityField read_snapshot(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open snapshot: " + path.string());
    char header[32];
    if (!in.read(header, sizeof header)) throw IoError("truncated snapshot header: " + path.string());
    if (std::memcmp(header, "LBKF", 4) != 0) throw IoError("not a field snapshot (bad magic): " + path.string());
    if (get<std::uint16_t>(header, 4) != snapshot_version) throw IoError("unsupported snapshot version");
    const int d = get<std::uint16_t>(header, 6);
    const int n = int(get<std::uint32_t>(header, 8));
    const auto kind = get<std::uint32_t>(header, 12);
    const double extent = get<double>(header, 16);
    if (kind > 1) throw IoError("unknown field kind in snapshot");
    GridPtr g;
    try {
        g = make_grid(d, extent, n);
    } catch (const ConfigError& e) {
        throw IoError(std::string("invalid grid in snapshot: ") + e.what());
    }
    std::vector<double> v(g->size());
    if (!in.read(reinterpret_cast<char*>(v.data()), std::streamsize(v.size() * sizeof(double))))
        throw IoError("truncated snapshot data: " + path.string());
    return DensityField(g, std::move(v), static_cast<FieldKind>(kind));
}

}
