#include "lbk/potential.hpp"

#include "lbk/config.hpp"
#include "lbk/types.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace lbk {

namespace {

// Radius where exp(-sigma^2 r^2 / 2) drops below 1e-16.
const double gaussian_reach = std::sqrt(2.0 * std::log(1e16));

double ball_volume(int k) { return std::pow(pi, 0.5 * k) / std::tgamma(0.5 * k + 1.0); }

double sphere_area(int d) { return 2.0 * std::pow(pi, 0.5 * d) / std::tgamma(0.5 * d); }

}

RescaleParams::RescaleParams(double delta_, double a_, int d_) : delta(delta_), a(a_), d(d_)
{
    if (!(delta > 0)) throw ConfigError("rescale delta must be positive");
    if (!(a < d)) throw ConfigError("rescale exponent a must be smaller than the dimension");
}

double RescaleParams::time_factor() const { return std::pow(delta, 2.0 * a + 1.0 - d); }

RadialSpectrum gaussian_spectrum(double A, double sigma)
{
    if (!(A > 0) || !(sigma > 0)) throw ConfigError("gaussian spectrum needs positive amplitude and width");
    return RadialSpectrum(RadialSpectrum::Gaussian{A, sigma});
}

RadialSpectrum table_spectrum(std::vector<double> r, std::vector<double> v)
{
    if (r.size() != v.size() || r.size() < 2) throw ConfigError("table spectrum needs at least two (r, value) rows");
    if (r.front() < 0) throw ConfigError("table spectrum radii must be nonnegative");
    for (std::size_t k = 0; k + 1 < r.size(); ++k)
        if (!(r[k + 1] > r[k])) throw ConfigError("table spectrum radii must be strictly increasing");
    for (double x : v)
        if (!std::isfinite(x)) throw ConfigError("table spectrum values must be finite");

    // Fritsch-Carlson slopes keep each cubic piece monotone between nodes.
    const std::size_t n = r.size();
    std::vector<double> sec(n - 1), m(n);
    for (std::size_t k = 0; k + 1 < n; ++k) sec[k] = (v[k + 1] - v[k]) / (r[k + 1] - r[k]);
    m[0] = sec[0];
    m[n - 1] = sec[n - 2];
    for (std::size_t k = 1; k + 1 < n; ++k) m[k] = sec[k - 1] * sec[k] <= 0 ? 0.0 : 0.5 * (sec[k - 1] + sec[k]);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        if (sec[k] == 0) {
            m[k] = m[k + 1] = 0;
            continue;
        }
        const double al = m[k] / sec[k], be = m[k + 1] / sec[k];
        const double s = al * al + be * be;
        if (s > 9) {
            const double tau = 3.0 / std::sqrt(s);
            m[k] = tau * al * sec[k];
            m[k + 1] = tau * be * sec[k];
        }
    }
    return RadialSpectrum(RadialSpectrum::Table{std::move(r), std::move(v), std::move(m)});
}

RadialSpectrum load_table_spectrum(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read spectrum table: " + path.string());
    std::vector<double> r, v;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        double a, b;
        if (ls >> a >> b) {
            r.push_back(a);
            v.push_back(b);
        }
    }
    return table_spectrum(std::move(r), std::move(v));
}

RadialSpectrum rescale_spectrum(const RadialSpectrum& base, const RescaleParams& p)
{
    return RadialSpectrum(
        RadialSpectrum::Rescaled{std::make_shared<const RadialSpectrum>(base), p.delta, p.a, p.d});
}

RadialSpectrum fold_temperature(const RadialSpectrum& V, double beta)
{
    if (!(beta > 0)) throw ConfigError("temperature parameter beta must be positive");
    return std::visit(
        [&](const auto& s) -> RadialSpectrum {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, RadialSpectrum::Gaussian>) {
                return gaussian_spectrum(beta * s.A, s.sigma);
            } else if constexpr (std::is_same_v<T, RadialSpectrum::Table>) {
                std::vector<double> v = s.v;
                for (double& x : v) x *= beta;
                return table_spectrum(s.r, std::move(v));
            } else {
                return rescale_spectrum(fold_temperature(*s.base, beta), RescaleParams(s.delta, s.a, s.d));
            }
        },
        V.rep_);
}

double RadialSpectrum::operator()(double r) const
{
    return std::visit(
        [r](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Gaussian>) {
                return s.A * std::exp(-0.5 * s.sigma * s.sigma * r * r);
            } else if constexpr (std::is_same_v<T, Table>) {
                if (r <= s.r.front()) return s.v.front();
                if (r > s.r.back()) return 0.0;
                const std::size_t k =
                    std::min<std::size_t>(std::upper_bound(s.r.begin(), s.r.end(), r) - s.r.begin() - 1, s.r.size() - 2);
                const double hk = s.r[k + 1] - s.r[k];
                const double t = (r - s.r[k]) / hk;
                const double t2 = t * t, t3 = t2 * t;
                return (2 * t3 - 3 * t2 + 1) * s.v[k] + (t3 - 2 * t2 + t) * hk * s.slope[k] +
                       (-2 * t3 + 3 * t2) * s.v[k + 1] + (t3 - t2) * hk * s.slope[k + 1];
            } else {
                return std::pow(s.delta, s.d - s.a) * (*s.base)(s.delta * r);
            }
        },
        rep_);
}

double RadialSpectrum::derivative(double r) const
{
    return std::visit(
        [r](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Gaussian>) {
                return -s.sigma * s.sigma * r * s.A * std::exp(-0.5 * s.sigma * s.sigma * r * r);
            } else if constexpr (std::is_same_v<T, Table>) {
                if (r <= s.r.front() || r > s.r.back()) return 0.0;
                const std::size_t k =
                    std::min<std::size_t>(std::upper_bound(s.r.begin(), s.r.end(), r) - s.r.begin() - 1, s.r.size() - 2);
                const double hk = s.r[k + 1] - s.r[k];
                const double t = (r - s.r[k]) / hk;
                const double t2 = t * t;
                return ((6 * t2 - 6 * t) * s.v[k] + (-6 * t2 + 6 * t) * s.v[k + 1]) / hk +
                       (3 * t2 - 4 * t + 1) * s.slope[k] + (3 * t2 - 2 * t) * s.slope[k + 1];
            } else {
                return std::pow(s.delta, s.d - s.a + 1) * s.base->derivative(s.delta * r);
            }
        },
        rep_);
}

double RadialSpectrum::r_max() const
{
    return std::visit(
        [](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Gaussian>) return gaussian_reach / s.sigma;
            else if constexpr (std::is_same_v<T, Table>) return s.r.back();
            else return s.base->r_max() / s.delta;
        },
        rep_);
}

double RadialSpectrum::peak() const
{
    return std::visit(
        [](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Gaussian>) return s.A;
            else if constexpr (std::is_same_v<T, Table>) return std::max(0.0, *std::max_element(s.v.begin(), s.v.end()));
            else return std::pow(s.delta, s.d - s.a) * s.base->peak();
        },
        rep_);
}

std::vector<double> RadialSpectrum::breakpoints() const
{
    return std::visit(
        [](const auto& s) -> std::vector<double> {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Gaussian>) return {};
            else if constexpr (std::is_same_v<T, Table>) return s.r;
            else {
                auto b = s.base->breakpoints();
                for (double& x : b) x /= s.delta;
                return b;
            }
        },
        rep_);
}

SpectrumFamily RadialSpectrum::family() const
{
    if (std::holds_alternative<Gaussian>(rep_)) return SpectrumFamily::gaussian;
    if (std::holds_alternative<Table>(rep_)) return SpectrumFamily::table;
    return SpectrumFamily::rescaled;
}

std::string RadialSpectrum::describe() const
{
    return std::visit(
        [](const auto& s) -> std::string {
            using T = std::decay_t<decltype(s)>;
            std::ostringstream o;
            o.precision(17);
            if constexpr (std::is_same_v<T, Gaussian>) o << "gaussian(A=" << s.A << ", sigma=" << s.sigma << ")";
            else if constexpr (std::is_same_v<T, Table>) o << "table(" << s.r.size() << " nodes)";
            else o << "rescaled(" << s.base->describe() << ", delta=" << s.delta << ", a=" << s.a << ", d=" << s.d << ")";
            return o.str();
        },
        rep_);
}

double RadialSpectrum::amplitude() const
{
    if (const auto* g = std::get_if<Gaussian>(&rep_)) return g->A;
    return peak();
}

double RadialSpectrum::sigma() const
{
    if (const auto* g = std::get_if<Gaussian>(&rep_)) return g->sigma;
    return 0.0;
}

double radial_integral(const RadialSpectrum& V, const std::function<double(double, double)>& g, double rel_tol,
                       double upper)
{
    using boost::math::quadrature::gauss_kronrod;
    const double top = upper > 0 ? upper : V.r_max();
    std::vector<double> cuts{0.0};
    for (double b : V.breakpoints())
        if (b > 0 && b < top) cuts.push_back(b);
    if (cuts.size() == 1)
        for (int k = 1; k < 8; ++k) cuts.push_back(top * k / 8.0);
    cuts.push_back(top);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    auto f = [&](double r) { return g(r, V(r)); };
    double sum = 0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
        sum += gauss_kronrod<double, 15>::integrate(f, cuts[k], cuts[k + 1], 15, rel_tol);
    return sum;
}

namespace {

struct TailCheck {
    double value;
    bool converged;
};

// A convergent radial integral keeps almost nothing in the outer half of the support.
TailCheck integral_with_tail_check(const RadialSpectrum& V, const std::function<double(double, double)>& g)
{
    const double R = V.r_max();
    const double full = radial_integral(V, g, 1e-12, R);
    const double half = radial_integral(V, g, 1e-12, 0.5 * R);
    const double share = full == 0 ? 0.0 : std::abs(full - half) / std::abs(full);
    return {full, std::isfinite(full) && share < 1e-3};
}

}

double landau_constant(const RadialSpectrum& V, int d)
{
    if (d != 2 && d != 3) throw ConfigError("dimension must be 2 or 3");
    const auto chk = integral_with_tail_check(V, [d](double r, double v) { return std::pow(r, d) * v * v; });
    if (!chk.converged) throw ConfigError("radial integral of r^d V^2 does not converge: inadmissible potential");
    const double dk_measure = std::pow(2.0 * pi, -d);
    return ball_volume(d - 1) / (d * ball_volume(d)) * pi * sphere_area(d) * dk_measure * chk.value;
}

bool AdmissibilityReport::all_pass() const
{
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

const AdmissibilityCheck& AdmissibilityReport::get(const std::string& name) const
{
    for (const auto& c : checks)
        if (c.name == name) return c;
    throw std::out_of_range("no admissibility check named " + name);
}

AdmissibilityReport admissibility_report(const RadialSpectrum& V, int d)
{
    AdmissibilityReport rep;
    double vmin = V(0.0);
    const double R = V.r_max();
    for (int k = 0; k <= 4000; ++k) vmin = std::min(vmin, V(R * k / 4000.0));
    for (double b : V.breakpoints()) vmin = std::min(vmin, V(b));
    rep.checks.push_back({"positive_definite", vmin, true, vmin >= 0});

    auto add = [&](const std::string& name, const std::function<double(double, double)>& g) {
        const auto chk = integral_with_tail_check(V, g);
        rep.checks.push_back({name, chk.value, chk.converged, chk.converged});
    };
    add("integral_proxy", [](double, double v) { return v; });
    add("l1_proxy", [d](double r, double v) { return std::pow(r, d - 1) * v; });
    add("hdot2_proxy", [d](double r, double v) { return std::pow(r, d + 3) * v * v; });
    add("xv_l2_proxy", [d, &V](double r, double) {
        const double dv = V.derivative(r);
        return std::pow(r, d - 1) * dv * dv;
    });
    return rep;
}

RadialSpectrum spectrum_from_config(const Config& cfg, int d)
{
    const std::string family = cfg.get_string("potential.family", "gaussian");
    auto base_from = [&](const std::string& fam) -> RadialSpectrum {
        if (fam == "gaussian")
            return gaussian_spectrum(cfg.get_double("potential.amplitude", 1.0), cfg.get_double("potential.sigma", 1.0));
        if (fam == "table") {
            std::filesystem::path p = cfg.get_string("potential.table_path");
            if (p.is_relative()) p = cfg.source_dir() / p;
            return load_table_spectrum(p);
        }
        throw ConfigError("unknown potential family: " + fam);
    };
    RadialSpectrum V = family == "rescaled"
                           ? rescale_spectrum(base_from(cfg.get_string("potential.base", "gaussian")),
                                              RescaleParams(cfg.get_double("potential.delta"),
                                                            cfg.get_double("potential.a", 0.0), d))
                           : base_from(family);
    const double beta = cfg.get_double("potential.beta", 1.0);
    return beta == 1.0 ? V : fold_temperature(V, beta);
}

}
