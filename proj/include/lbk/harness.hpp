#pragma once

#include "lbk/config.hpp"
#include "lbk/diagnostics.hpp"
#include "lbk/grid.hpp"
#include "lbk/potential.hpp"
#include "lbk/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace lbk {

inline constexpr const char* lbk_version = "1.0.0";

// grid.d (default 2), grid.extent (6), grid.n (33)
GridPtr grid_from_config(const Config& cfg);

struct TwoBumpSpec {
    double beta = 1.5;
    Vec center{1.2, 0.3, 0};  // the second bump sits at -center
    double mass_a = 0.6;
    double mass_b = 0.4;
};
DensityField two_bump(const GridPtr& g, const TwoBumpSpec& s = {});

// Centred Hermite bump: f = eta sqrt(mu) Q with Q = P(v) exp(-|v|^2/4) minus its discrete S0
// component, scaled to max |Q| = 1 on the grid, so F = mu (1 + eta Q) > 0 for eta < 1 and
// pi0[f] = 0 exactly. P has seeded random coefficients on the monomials of degree <= `degree`.
DensityField hermite_bump(const GridPtr& g, double eta, std::uint64_t seed = 1, int degree = 4);

// initial.kind = maxwellian | two_bump | hermite_bump | snapshot (plus the generator's keys)
DensityField initial_from_config(const Config& cfg, const GridPtr& g);

// Everything needed to start a run, resolved from a config.
struct Simulation {
    Config cfg;
    GridPtr grid;
    RadialSpectrum V;
    SolverConfig solver;
    DensityField initial;
    double t0 = 0;
    std::size_t steps0 = 0;

    static Simulation from_config(const Config& cfg);
    // Replaces the initial field and clock with a checkpoint (snapshot plus JSON sidecar).
    void resume_from(const std::filesystem::path& checkpoint);
};

struct SimulationOptions {
    std::filesystem::path out_dir;  // empty: write nothing
    bool diagnostics = true;
    bool verbose = false;
    std::function<void(const Solver&)> on_tick;
};

struct SimulationResult {
    std::vector<DiagnosticRow> rows;
    DensityField final_field;  // in the run's formulation
    double t_final = 0;
    std::size_t steps = 0;
};

SimulationResult simulate(const Simulation& sim, const SimulationOptions& opt);

// Checkpoint = snapshot + "<path>.json" sidecar with t, steps and the config hash.
void write_checkpoint(const std::filesystem::path& path, const Solver& s, const Config& cfg);

nlohmann::json manifest(const Config& cfg, const std::string& kind, const nlohmann::json& tolerances = {});
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

// ---- experiments ------------------------------------------------------------------------

struct LandauLimitReport {
    std::vector<double> deltas;
    std::vector<double> errors;         // sup over ticks of ||f~_delta - f_L||_{L2}
    std::vector<double> local_orders;   // between successive deltas
    double fitted_order = 0;            // least-squares slope of log e vs log delta
    double expected_order = 0;          // d - a
    bool strictly_decreasing = false;
    std::vector<std::string> aborted;   // messages of runs that failed (partial data kept)
    double landau_prefactor = 0;
    nlohmann::json to_json() const;
};
LandauLimitReport experiment_landau_limit(const Config& cfg);

struct WeightSeries {
    WeightSpec spec;
    std::vector<double> values;  // squared weighted norms per tick
    double fitted_algebraic_rate = 0;  // -slope of log value vs log <t> over the second half
    bool overflow = false;
};

struct RelaxationReport {
    std::vector<DiagnosticRow> rows;
    std::vector<double> pi0;  // ||pi0 f|| per tick
    std::vector<double> h2;   // discrete H^2 norm of f per tick
    double max_pi0 = 0;
    double h2_ratio_max = 0;  // max_t ||f^t||_H2 / ||f0||_H2
    std::size_t transient_ticks = 0;
    bool entropy_monotone = false;      // every tick
    bool l2_monotone_after_transient = false;
    double exp_rate_l2 = 0;             // ||f|| ~ exp(-rate t) fitted on the second half
    double stretched_exponent = 0;      // H ~ exp(-c t^kappa) fitted on log(-log(H/H0)) vs log t
    double h_monotone_tol = 0;
    std::vector<WeightSeries> weights;
    nlohmann::json to_json() const;
};
RelaxationReport experiment_relaxation(const Config& cfg);

struct LadderSeries {
    std::string name;
    std::vector<double> errors;
    std::vector<double> orders;  // NaN where undefined
    std::vector<std::string> flags;
    double expected_order = 2;
    nlohmann::json to_json() const;
};

struct ConvergenceReport {
    std::vector<int> ladder;
    std::vector<LadderSeries> series;
    // Angular quadrature of the d=3 kernel versus circle_nodes.
    std::vector<int> circle_nodes;
    std::vector<double> circle_errors;
    const LadderSeries& get(const std::string& name) const;
    nlohmann::json to_json() const;
};
// Orders between successive ladder entries; errors at or below `floor` are reported as converged.
LadderSeries make_ladder_series(std::string name, const std::vector<int>& ladder, std::vector<double> errors,
                                double expected_order, double floor = 1e-12);
ConvergenceReport experiment_convergence(const Config& cfg);

struct DispersionScanReport {
    std::vector<double> amplitudes;        // V^(0)
    std::vector<double> closed_min_eps2;   // closed form
    std::vector<double> table_min_eps2;    // grid-built screening table
    double fitted_C = 0;                   // smallest C with closed_min >= 0.5 exp(-C V^(0)^2)
    nlohmann::json to_json() const;
};
// min over w and 0 <= vhat <= A of |eps_maxwellian(w, vhat)|^2, on a fine scan.
double closed_form_min_eps2(const RadialSpectrum& V, int w_points = 4001, double w_max = 10.0);
DispersionScanReport experiment_dispersion_scan(const Config& cfg);

}
