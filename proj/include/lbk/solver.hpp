#pragma once

#include "lbk/config.hpp"
#include "lbk/dispersion.hpp"
#include "lbk/grid.hpp"
#include "lbk/kernel.hpp"
#include "lbk/potential.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lbk {

enum class Scheme { explicit_rk4, picard_semi_implicit };
enum class WeakForm { direct, log };
enum class Formulation { absolute_F, perturbative_f };
enum class KernelModel { lenard_balescu, landau };

struct SolverConfig {
    Scheme scheme = Scheme::explicit_rk4;
    WeakForm form = WeakForm::direct;
    Formulation formulation = Formulation::absolute_F;
    KernelModel model = KernelModel::lenard_balescu;
    double dt = 0.05;
    double t_end = 0;
    int eps_refresh_every = 1;
    double degeneracy_floor = 1e-8;
    int circle_nodes = 32;
    int directions = 0;  // d=2: direction count; d=3: azimuth count (polar rings = half). 0 selects the default set.
    double c_stab = 0.5;
    bool enforce_stability = true;
    int inner_iters = 1;
    double linear_tol = 1e-10;
    int max_linear_iters = 500;
    double entropy_tol = 1e-10;  // allowed entropy increase per accepted step (log form)
    int max_halvings = 8;
    int cadence = 1;  // steps between diagnostics ticks
    int checkpoint_every = 0;

    void validate() const;
    static SolverConfig from_config(const Config& cfg);
};

std::string to_string(Scheme s);
std::string to_string(WeakForm f);
std::string to_string(Formulation f);
std::string to_string(KernelModel m);

// Pair flux of the weak form for F on the grid:
// direct J_i = sum_j w_j B_ij (F_j DF_i - F_i DF_j), log J_i = sum_j w_j B_ij F_i F_j (D log F_i - D log F_j).
std::vector<Vec> collision_flux(const PairKernels& pk, std::span<const double> F, WeakForm form);
// dF/dt = -W^{-1} D^T W J, the adjoint of the symmetric weak form.
std::vector<double> collision_rate(const PairKernels& pk, std::span<const double> F, WeakForm form);

// Screening table, radial weights and pair kernels for the current field.
class CollisionOperator {
public:
    CollisionOperator(GridPtr grid, RadialSpectrum V, const SolverConfig& cfg);

    // Rebuilds the screening table and pair kernels from F (no-op after the first call for Landau).
    void refresh(std::span<const double> F);

    std::vector<double> rate(std::span<const double> F) const;
    std::vector<double> rate(std::span<const double> F, WeakForm form) const;

    // c_stab h^2 / max_i lambda_max(A_i) for A_i = sum_j w_j B_ij F_j.
    double stability_limit(std::span<const double> F) const;

    bool ready() const { return pk_ != nullptr; }
    const PairKernels& kernels() const;
    std::shared_ptr<const PairKernels> shared_kernels() const { return pk_; }
    const ScreeningTable* table() const { return table_ ? &*table_ : nullptr; }
    const DirectionSet& directions() const { return dirs_; }
    const RadialSpectrum& spectrum() const { return V_; }
    double landau_prefactor() const { return L_; }
    const VelocityGrid& grid() const { return *grid_; }
    GridPtr grid_ptr() const { return grid_; }
    std::size_t refresh_count() const { return refreshes_; }

private:
    GridPtr grid_;
    RadialSpectrum V_;
    SolverConfig cfg_;
    DirectionSet dirs_;
    UniformAxis u_;
    double L_ = 0;
    std::optional<ScreeningTable> table_;
    std::shared_ptr<const PairKernels> pk_;
    std::size_t refreshes_ = 0;
};

struct StepReport {
    double dt = 0;
    int substeps = 1;
    int linear_iters = 0;
    double entropy_change = 0;
    double min_F = 0;
    double max_F = 0;
};

// Owns the evolving field. In the perturbative formulation the stored field is f with
// F = mu + sqrt(mu) f; the collision operator always acts on F.
class Solver {
public:
    Solver(DensityField initial, RadialSpectrum V, SolverConfig cfg, double t0 = 0);

    // Advances by cfg.dt (or by `dt` if given).
    const StepReport& step();
    const StepReport& step(double dt);

    double time() const { return t_; }
    std::size_t steps() const { return steps_; }
    const DensityField& state() const { return state_; }
    DensityField absolute() const;
    std::vector<double> absolute_values() const;
    const CollisionOperator& op() const { return op_; }
    const SolverConfig& config() const { return cfg_; }
    const StepReport& last() const { return last_; }
    std::span<const double> sqrt_mu() const { return sqrt_mu_; }

    // Explicit stability limit at the current state.
    double stability_limit() const;

private:
    std::vector<double> to_absolute(std::span<const double> s) const;
    std::vector<double> from_absolute(std::span<const double> F) const;
    std::vector<double> state_rate(std::span<const double> s) const;
    std::vector<double> rk4(std::span<const double> s, double dt) const;
    std::vector<double> picard(std::span<const double> s, double dt, int& iters) const;
    void check_field(std::span<const double> F) const;
    double entropy_of(std::span<const double> s) const;

    SolverConfig cfg_;
    CollisionOperator op_;
    DensityField state_;
    std::vector<double> mu_, sqrt_mu_;
    double t_ = 0;
    std::size_t steps_ = 0;
    StepReport last_;
};

// Boundary-layer values must be at most 1e-12 of the maximum; throws ConfigError otherwise.
void check_boundary_decay(const VelocityGrid& g, std::span<const double> F, double rel = 1e-12);

struct RunHooks {
    // Called at t0 and after every `cadence` steps (and at the final step).
    std::function<void(const Solver&)> on_tick;
    // Called every `checkpoint_every` steps.
    std::function<void(const Solver&)> on_checkpoint;
};

// Steps from the initial state to cfg.t_end. The step count is round((t_end - t0) / dt).
void run(Solver& solver, const RunHooks& hooks);

}
