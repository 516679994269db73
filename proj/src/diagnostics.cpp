#include "lbk/diagnostics.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <sstream>

namespace lbk {

Moments moments(const VelocityGrid& g, std::span<const double> F)
{
    Moments m;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double wf = g.weight(i) * F[i];
        const Vec& v = g.node(i);
        m.mass += wf;
        m.momentum = m.momentum + wf * v;
        m.energy += 0.5 * wf * dot(v, v);
    }
    return m;
}

Moments moments(const DensityField& F) { return moments(*F.grid, F.values); }

EntropyValue boltzmann_entropy(const VelocityGrid& g, std::span<const double> F)
{
    EntropyValue e;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (F[i] < entropy_floor) {
            ++e.excluded;
            continue;
        }
        e.value += g.weight(i) * F[i] * std::log(F[i]);
    }
    return e;
}

EntropyValue relative_entropy(const VelocityGrid& g, std::span<const double> F, double beta)
{
    EntropyValue e;
    const double log_norm = 0.5 * g.d() * std::log(beta / pi);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (F[i] < entropy_floor) {
            ++e.excluded;
            continue;
        }
        const Vec& v = g.node(i);
        const double log_mu = log_norm - beta * dot(v, v);
        e.value += g.weight(i) * F[i] * (std::log(F[i]) - log_mu);
    }
    return e;
}

EntropyValue entropy_dissipation(const PairKernels& landau_unit, std::span<const double> F)
{
    const VelocityGrid& g = landau_unit.grid();
    EntropyValue e;
    std::vector<double> logF(g.size()), a(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (F[i] < entropy_floor) {
            ++e.excluded;
            logF[i] = std::log(entropy_floor);
            a[i] = 0;
        } else {
            logF[i] = std::log(F[i]);
            a[i] = std::sqrt(F[i]);
        }
    }
    std::vector<Vec> x = central_gradient(g, logF);
    for (std::size_t i = 0; i < g.size(); ++i) x[i] = a[i] * x[i];
    e.value = landau_unit.symmetric_quadratic(a, x);
    return e;
}

double weighted_inner(const VelocityGrid& g, std::span<const double> a, std::span<const double> b)
{
    double s = 0;
    for (std::size_t i = 0; i < g.size(); ++i) s += g.weight(i) * a[i] * b[i];
    return s;
}

double l2_norm(const VelocityGrid& g, std::span<const double> f) { return std::sqrt(weighted_inner(g, f, f)); }

double discrete_h2_norm(const VelocityGrid& g, std::span<const double> f)
{
    double s = weighted_inner(g, f, f);
    const std::vector<Vec> Df = central_gradient(g, f);
    std::vector<double> comp(g.size());
    for (int a = 0; a < g.d(); ++a) {
        for (std::size_t i = 0; i < g.size(); ++i) comp[i] = Df[i][a];
        s += weighted_inner(g, comp, comp);
        const std::vector<Vec> DDf = central_gradient(g, comp);
        for (std::size_t i = 0; i < g.size(); ++i)
            for (int b = 0; b < g.d(); ++b) s += g.weight(i) * DDf[i][b] * DDf[i][b];
    }
    return std::sqrt(s);
}

NullSpace::NullSpace(GridPtr grid, double beta) : grid_(std::move(grid))
{
    const VelocityGrid& g = *grid_;
    const int d = g.d();
    sqrt_mu_.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) sqrt_mu_[i] = std::sqrt(maxwellian_value(g.node(i), d, beta));
    std::vector<std::vector<double>> raw;
    raw.push_back(sqrt_mu_);
    for (int a = 0; a < d; ++a) {
        std::vector<double> b(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) b[i] = sqrt_mu_[i] * g.node(i)[a];
        raw.push_back(std::move(b));
    }
    {
        std::vector<double> b(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) b[i] = sqrt_mu_[i] * dot(g.node(i), g.node(i));
        raw.push_back(std::move(b));
    }
    // Modified Gram-Schmidt, two passes for orthogonality at round-off level.
    for (auto& b : raw) {
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& e : basis_) {
                const double c = weighted_inner(g, b, e);
                for (std::size_t i = 0; i < g.size(); ++i) b[i] -= c * e[i];
            }
        const double nb = l2_norm(g, b);
        for (double& x : b) x /= nb;
        basis_.push_back(std::move(b));
    }
}

NullSpace::Split NullSpace::project(std::span<const double> f) const
{
    const VelocityGrid& g = *grid_;
    Split s;
    s.projection.assign(g.size(), 0.0);
    for (const auto& e : basis_) {
        const double c = weighted_inner(g, f, e);
        for (std::size_t i = 0; i < g.size(); ++i) s.projection[i] += c * e[i];
    }
    s.residual.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) s.residual[i] = f[i] - s.projection[i];
    return s;
}

double NullSpace::projection_norm(std::span<const double> f) const
{
    double s = 0;
    for (const auto& e : basis_) {
        const double c = weighted_inner(*grid_, f, e);
        s += c * c;
    }
    return std::sqrt(s);
}

DissipationParts dissipation_parts(const CoefficientField& A, std::span<const double> f)
{
    const VelocityGrid& g = *A.grid;
    const std::vector<Vec> Df = central_gradient(g, f);
    DissipationParts p;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec vf = f[i] * g.node(i);
        p.gradient += g.weight(i) * dot(Df[i], A.A[i].apply(Df[i]));
        p.velocity += g.weight(i) * dot(vf, A.A[i].apply(vf));
    }
    return p;
}

double dissipation_norm(const CoefficientField& A, std::span<const double> f)
{
    return std::sqrt(dissipation_parts(A, f).total());
}

LinearizedOperator::LinearizedOperator(std::shared_ptr<const PairKernels> pk, double beta) : pk_(std::move(pk))
{
    const VelocityGrid& g = pk_->grid();
    sqrt_mu_.resize(g.size());
    std::vector<double> mu(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        mu[i] = maxwellian_value(g.node(i), g.d(), beta);
        sqrt_mu_[i] = std::sqrt(mu[i]);
    }
    coef_ = coefficients_from_pairs(*pk_, mu);
}

std::vector<Vec> LinearizedOperator::scaled_gradient(std::span<const double> f) const
{
    const VelocityGrid& g = pk_->grid();
    std::vector<double> q(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) q[i] = f[i] / sqrt_mu_[i];
    std::vector<Vec> x = central_gradient(g, q);
    for (std::size_t i = 0; i < g.size(); ++i) x[i] = sqrt_mu_[i] * x[i];
    return x;
}

std::vector<double> LinearizedOperator::apply(std::span<const double> f) const
{
    const VelocityGrid& g = pk_->grid();
    const std::vector<Vec> x = scaled_gradient(f);
    std::vector<Vec> sx(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) sx[i] = sqrt_mu_[i] * x[i];
    const std::vector<Vec> b0 = pk_->vector_sum(sx);
    std::vector<Vec> J(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        J[i] = sqrt_mu_[i] * (coef_.A[i].apply(x[i]) - sqrt_mu_[i] * b0[i]);
    std::vector<double> R = gradient_adjoint(g, J);
    for (std::size_t i = 0; i < g.size(); ++i) R[i] = -R[i] / sqrt_mu_[i];
    return R;
}

double LinearizedOperator::probe(std::span<const double> f) const
{
    const std::vector<double> Lf = apply(f);
    return -weighted_inner(pk_->grid(), f, Lf);
}

double LinearizedOperator::symmetric_probe(std::span<const double> f) const
{
    return pk_->symmetric_quadratic(sqrt_mu_, scaled_gradient(f));
}

void WeightSpec::validate(double k_ceiling) const
{
    if (!(ell >= 0)) throw ConfigError("weight exponent ell must be nonnegative");
    if (!(theta >= 0 && theta <= 2)) throw ConfigError("weight exponent theta must lie in [0, 2]");
    if (!(K >= 0)) throw ConfigError("weight rate K must be nonnegative");
    if (theta == 2 && K >= k_ceiling) throw ConfigError("theta = 2 requires K below the configured ceiling");
}

std::string WeightSpec::label() const
{
    std::ostringstream o;
    o << "ell=" << ell << ",theta=" << theta << ",K=" << K;
    return o.str();
}

WeightedNorm weighted_l2(const VelocityGrid& g, std::span<const double> f, const WeightSpec& w)
{
    WeightedNorm out;
    double vmax = 0;
    for (std::size_t i = 0; i < g.size(); ++i) vmax = std::max(vmax, norm(g.node(i)));
    if (w.K * std::pow(std::sqrt(1.0 + vmax * vmax), w.theta) > 700.0) {
        out.overflow = true;
        out.value = std::numeric_limits<double>::infinity();
        return out;
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec& v = g.node(i);
        const double br = std::sqrt(1.0 + dot(v, v));
        out.value += g.weight(i) * std::pow(br, w.ell) * std::exp(w.K * std::pow(br, w.theta)) * f[i] * f[i];
    }
    return out;
}

DiagnosticsContext::DiagnosticsContext(GridPtr grid, RadialSpectrum V, int circle_nodes)
    : grid_(grid), V_(std::move(V)), mu_(maxwellian(grid).values), null_(grid)
{
    coef_ = equilibrium_coefficients(grid, V_, circle_nodes);
    landau_ = std::make_shared<const PairKernels>(PairKernels::landau(grid, 1.0));
    radii_ = scan_radii(V_);
}

DiagnosticRow DiagnosticsContext::row(double t, std::span<const double> F, const ScreeningTable* table) const
{
    const VelocityGrid& g = *grid_;
    DiagnosticRow r;
    r.t = t;
    r.m = moments(g, F);
    const EntropyValue H = boltzmann_entropy(g, F);
    const EntropyValue Hrel = relative_entropy(g, F);
    const EntropyValue D = entropy_dissipation(*landau_, F);
    r.entropy = H.value;
    r.rel_entropy = Hrel.value;
    r.entropy_dissipation = D.value;
    r.excluded_nodes = std::max({H.excluded, Hrel.excluded, D.excluded});
    std::vector<double> f(g.size());
    const std::span<const double> sq = null_.sqrt_mu();
    for (std::size_t i = 0; i < g.size(); ++i) f[i] = (F[i] - mu_[i]) / sq[i];
    r.l2_f = l2_norm(g, f);
    r.dissipation_norm = dissipation_norm(coef_, f);
    r.min_F = *std::min_element(F.begin(), F.end());
    r.penrose_min = table ? penrose_scan(*table, V_, radii_).min_abs_eps : std::numeric_limits<double>::quiet_NaN();
    return r;
}

std::string csv_header(int d)
{
    std::string h = "t,mass";
    for (int a = 0; a < d; ++a) h += ",momentum_" + std::to_string(a + 1);
    h += ",energy,entropy,rel_entropy,entropy_dissipation,l2_f,dissipation_norm,min_F,penrose_min";
    return h;
}

std::string csv_line(const DiagnosticRow& r, int d)
{
    std::string s;
    char buf[32];
    auto put = [&](double x) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        if (!s.empty()) s += ',';
        s += buf;
    };
    put(r.t);
    put(r.m.mass);
    for (int a = 0; a < d; ++a) put(r.m.momentum[a]);
    put(r.m.energy);
    put(r.entropy);
    put(r.rel_entropy);
    put(r.entropy_dissipation);
    put(r.l2_f);
    put(r.dissipation_norm);
    put(r.min_F);
    put(r.penrose_min);
    return s;
}

void write_csv(std::ostream& os, std::span<const DiagnosticRow> rows, int d)
{
    os << csv_header(d) << '\n';
    for (const auto& r : rows) os << csv_line(r, d) << '\n';
}

}
