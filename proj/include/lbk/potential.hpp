#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace lbk {

class Config;

enum class SpectrumFamily { gaussian, table, rescaled };

struct RescaleParams {
    double delta = 1.0;
    double a = 0.0;
    int d = 3;

    RescaleParams(double delta_, double a_, int d_);
    // Physical time per unit of rescaled time: delta^{2a+1-d}.
    double time_factor() const;
};

// Isotropic Fourier profile r = |k| -> V^(r) of the interaction potential.
class RadialSpectrum {
public:
    double operator()(double r) const;
    double derivative(double r) const;
    // Radius beyond which the profile is negligible (below 1e-16 of its peak) or zero.
    double r_max() const;
    double peak() const;
    // Points where the profile is only piecewise smooth (table nodes), useful quadrature breakpoints.
    std::vector<double> breakpoints() const;

    SpectrumFamily family() const;
    std::string describe() const;

    // Gaussian parameters; only meaningful when family() == gaussian.
    double amplitude() const;
    double sigma() const;

private:
    struct Gaussian {
        double A, sigma;
    };
    struct Table {
        std::vector<double> r, v, slope;
    };
    struct Rescaled {
        std::shared_ptr<const RadialSpectrum> base;
        double delta, a;
        int d;
    };
    std::variant<Gaussian, Table, Rescaled> rep_;

    explicit RadialSpectrum(std::variant<Gaussian, Table, Rescaled> rep) : rep_(std::move(rep)) {}

    friend RadialSpectrum gaussian_spectrum(double A, double sigma);
    friend RadialSpectrum table_spectrum(std::vector<double> r, std::vector<double> values);
    friend RadialSpectrum rescale_spectrum(const RadialSpectrum& base, const RescaleParams& p);
    friend RadialSpectrum fold_temperature(const RadialSpectrum& V, double beta);
};

// V^(r) = A exp(-sigma^2 r^2 / 2)
RadialSpectrum gaussian_spectrum(double A, double sigma);
// Monotone cubic Hermite interpolation of (r, V^) samples; zero beyond the last node.
RadialSpectrum table_spectrum(std::vector<double> r, std::vector<double> values);
RadialSpectrum load_table_spectrum(const std::filesystem::path& path);
// V^_delta(r) = delta^{d-a} V^(delta r)
RadialSpectrum rescale_spectrum(const RadialSpectrum& base, const RescaleParams& p);
// Replaces V by beta V, reducing mu_beta problems to beta = 1.
RadialSpectrum fold_temperature(const RadialSpectrum& V, double beta);

// Integral of g(r, V^(r)) over [0, r_max] with adaptive Gauss-Kronrod, split at breakpoints.
double radial_integral(const RadialSpectrum& V, const std::function<double(double, double)>& g,
                       double rel_tol = 1e-12, double upper = -1);

// Landau prefactor L = (omega_{d-1} / (d omega_d)) * pi * |S^{d-1}| * (2 pi)^{-d} * int_0^inf r^d V^(r)^2 dr,
// where omega_k is the volume of the unit ball in R^k. Throws ConfigError if the integral diverges.
double landau_constant(const RadialSpectrum& V, int d);

struct AdmissibilityCheck {
    std::string name;
    double value = 0;
    bool finite = true;
    bool pass = true;
};

struct AdmissibilityReport {
    std::vector<AdmissibilityCheck> checks;
    bool all_pass() const;
    const AdmissibilityCheck& get(const std::string& name) const;
};

// Radial proxies for the physical-space hypotheses (labelled "proxy"; they are not
// claimed to be equivalent). Divergence is detected as a non-negligible share of
// the integral sitting in the outer half of the support.
AdmissibilityReport admissibility_report(const RadialSpectrum& V, int d);

// Builds a spectrum from `potential.*` keys.
RadialSpectrum spectrum_from_config(const Config& cfg, int d);

}
