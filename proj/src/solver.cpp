#include "lbk/solver.hpp"

#include "lbk/diagnostics.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lbk {

namespace {

template <class E>
E parse_enum(const std::string& key, const std::string& value, std::initializer_list<std::pair<const char*, E>> options)
{
    for (const auto& [name, e] : options)
        if (value == name) return e;
    std::string msg = "unknown value '" + value + "' for " + key + " (expected one of:";
    for (const auto& [name, e] : options) msg += std::string(" ") + name;
    throw ConfigError(msg + ")");
}

}

void SolverConfig::validate() const
{
    if (!(dt > 0) || !std::isfinite(dt)) throw ConfigError("solver.dt must be positive");
    if (!(t_end >= 0)) throw ConfigError("solver.t_end must be nonnegative");
    if (eps_refresh_every < 1) throw ConfigError("solver.eps_refresh_every must be at least 1");
    if (!(degeneracy_floor > 0)) throw ConfigError("solver.degeneracy_floor must be positive");
    if (circle_nodes < 3) throw ConfigError("solver.circle_nodes must be at least 3");
    if (directions < 0) throw ConfigError("solver.directions must be nonnegative");
    if (!(c_stab > 0)) throw ConfigError("solver.c_stab must be positive");
    if (inner_iters < 1) throw ConfigError("solver.inner_iters must be at least 1");
    if (!(linear_tol > 0)) throw ConfigError("solver.linear_tol must be positive");
    if (max_halvings < 0) throw ConfigError("solver.max_halvings must be nonnegative");
    if (cadence < 1) throw ConfigError("solver.cadence must be at least 1");
    if (checkpoint_every < 0) throw ConfigError("solver.checkpoint_every must be nonnegative");
}

SolverConfig SolverConfig::from_config(const Config& c)
{
    SolverConfig s;
    s.scheme = parse_enum<Scheme>("solver.scheme", c.get_string("solver.scheme", "explicit_rk4"),
                                  {{"explicit_rk4", Scheme::explicit_rk4}, {"picard_semi_implicit", Scheme::picard_semi_implicit}});
    s.form = parse_enum<WeakForm>("solver.form", c.get_string("solver.form", "direct"),
                                  {{"direct", WeakForm::direct}, {"log", WeakForm::log}});
    s.formulation = parse_enum<Formulation>(
        "solver.formulation", c.get_string("solver.formulation", "absolute_F"),
        {{"absolute_F", Formulation::absolute_F}, {"perturbative_f", Formulation::perturbative_f}});
    s.model = parse_enum<KernelModel>("solver.model", c.get_string("solver.model", "lenard_balescu"),
                                      {{"lenard_balescu", KernelModel::lenard_balescu}, {"landau", KernelModel::landau}});
    s.dt = c.get_double("solver.dt", s.dt);
    s.t_end = c.get_double("solver.t_end", s.t_end);
    s.eps_refresh_every = int(c.get_int("solver.eps_refresh_every", s.eps_refresh_every));
    s.degeneracy_floor = c.get_double("solver.degeneracy_floor", s.degeneracy_floor);
    s.circle_nodes = int(c.get_int("solver.circle_nodes", s.circle_nodes));
    s.directions = int(c.get_int("solver.directions", s.directions));
    s.c_stab = c.get_double("solver.c_stab", s.c_stab);
    s.enforce_stability = c.get_bool("solver.enforce_stability", s.enforce_stability);
    s.inner_iters = int(c.get_int("solver.inner_iters", s.inner_iters));
    s.linear_tol = c.get_double("solver.linear_tol", s.linear_tol);
    s.max_linear_iters = int(c.get_int("solver.max_linear_iters", s.max_linear_iters));
    s.entropy_tol = c.get_double("solver.entropy_tol", s.entropy_tol);
    s.max_halvings = int(c.get_int("solver.max_halvings", s.max_halvings));
    s.cadence = int(c.get_int("solver.cadence", s.cadence));
    s.checkpoint_every = int(c.get_int("solver.checkpoint_every", s.checkpoint_every));
    s.validate();
    return s;
}

std::string to_string(Scheme s) { return s == Scheme::explicit_rk4 ? "explicit_rk4" : "picard_semi_implicit"; }
std::string to_string(WeakForm f) { return f == WeakForm::direct ? "direct" : "log"; }
std::string to_string(Formulation f) { return f == Formulation::absolute_F ? "absolute_F" : "perturbative_f"; }
std::string to_string(KernelModel m) { return m == KernelModel::lenard_balescu ? "lenard_balescu" : "landau"; }

std::vector<Vec> collision_flux(const PairKernels& pk, std::span<const double> F, WeakForm form)
{
    const VelocityGrid& g = pk.grid();
    if (form == WeakForm::direct) return pk.flux(F, central_gradient(g, F));
    // Nodes with F <= 0 (underflowed or undershooting tails) lie outside the support: their pair
    // weight F_i F_j is zero and their logarithm is floored so neighbouring gradients stay finite.
    // The entropy identity holds exactly for the floored logarithm.
    constexpr double log_floor = 1e-300;
    std::vector<double> logF(g.size()), Fp(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (std::isnan(F[i])) throw NumericalAbort("log weak form: NaN in the density field");
        Fp[i] = std::max(F[i], 0.0);
        logF[i] = std::log(std::max(F[i], log_floor));
    }
    std::vector<Vec> x = central_gradient(g, logF);
    for (std::size_t i = 0; i < g.size(); ++i) x[i] = Fp[i] * x[i];
    return pk.flux(Fp, x);
}

std::vector<double> collision_rate(const PairKernels& pk, std::span<const double> F, WeakForm form)
{
    std::vector<double> R = gradient_adjoint(pk.grid(), collision_flux(pk, F, form));
    for (double& r : R) r = -r;
    return R;
}

CollisionOperator::CollisionOperator(GridPtr grid, RadialSpectrum V, const SolverConfig& cfg)
    : grid_(std::move(grid)), V_(std::move(V)), cfg_(cfg), u_(marginal_axis(*grid_))
{
    cfg_.validate();
    const int d = grid_->d();
    if (cfg_.directions == 0) dirs_ = default_directions(d);
    else if (d == 2) dirs_ = make_directions_2d(cfg_.directions);
    else dirs_ = make_directions_3d(std::max(2, cfg_.directions / 2), cfg_.directions);
    if (cfg_.model == KernelModel::landau) L_ = landau_constant(V_, d);
}

void CollisionOperator::refresh(std::span<const double> F)
{
    if (cfg_.model == KernelModel::landau) {
        if (!pk_) {
            pk_ = std::make_shared<const PairKernels>(PairKernels::landau(grid_, L_));
            ++refreshes_;
        }
        return;
    }
    DensityField field(grid_, std::vector<double>(F.begin(), F.end()));
    table_.emplace(build_screening_table(field, dirs_, u_));
    const KernelWeightTable I(*table_, V_, grid_->d(), cfg_.degeneracy_floor);
    pk_ = std::make_shared<const PairKernels>(PairKernels::screened(grid_, I, cfg_.circle_nodes));
    ++refreshes_;
}

const PairKernels& CollisionOperator::kernels() const
{
    if (!pk_) throw ConfigError("collision operator used before refresh");
    return *pk_;
}

std::vector<double> CollisionOperator::rate(std::span<const double> F) const { return rate(F, cfg_.form); }

std::vector<double> CollisionOperator::rate(std::span<const double> F, WeakForm form) const
{
    return collision_rate(kernels(), F, form);
}

double CollisionOperator::stability_limit(std::span<const double> F) const
{
    const std::vector<Mat> A = kernels().matrix_sum(F);
    const int d = grid_->d();
    double lmax = 0;
    for (const Mat& m : A) {
        KernelMatrix K;
        K.d = d;
        K.m = m;
        lmax = std::max(lmax, K.eigenvalues()[d - 1]);
    }
    const double h = grid_->h();
    return lmax > 0 ? cfg_.c_stab * h * h / lmax : std::numeric_limits<double>::infinity();
}

void check_boundary_decay(const VelocityGrid& g, std::span<const double> F, double rel)
{
    double fmax = 0;
    for (double x : F) fmax = std::max(fmax, std::abs(x));
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g.on_boundary(i) && std::abs(F[i]) > rel * fmax) {
            std::ostringstream o;
            o << "initial field is not negligible on the boundary layer: |F| = " << std::abs(F[i]) << " at node " << i
              << " exceeds " << rel << " * max|F|; enlarge the extent";
            throw ConfigError(o.str());
        }
}

Solver::Solver(DensityField initial, RadialSpectrum V, SolverConfig cfg, double t0)
    : cfg_(cfg), op_(initial.grid, std::move(V), cfg), t_(t0)
{
    cfg_.validate();
    const VelocityGrid& g = *initial.grid;
    if (initial.values.size() != g.size()) throw ConfigError("initial field does not match its grid");
    mu_ = maxwellian(initial.grid).values;
    sqrt_mu_.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) sqrt_mu_[i] = std::sqrt(mu_[i]);

    const FieldKind want =
        cfg_.formulation == Formulation::perturbative_f ? FieldKind::perturbation : FieldKind::absolute;
    state_ = std::move(initial);
    if (state_.kind != want) {
        // Convert between F and f = (F - mu)/sqrt(mu).
        std::vector<double> v(g.size());
        for (std::size_t i = 0; i < g.size(); ++i)
            v[i] = want == FieldKind::perturbation ? (state_.values[i] - mu_[i]) / sqrt_mu_[i]
                                                   : mu_[i] + sqrt_mu_[i] * state_.values[i];
        state_.values = std::move(v);
        state_.kind = want;
    }
    const std::vector<double> F = absolute_values();
    check_field(F);
    // The decay requirement is on the initial datum; a resumed run's tails have legitimately spread.
    if (t0 == 0) check_boundary_decay(g, F);
    op_.refresh(F);
    if (cfg_.scheme == Scheme::explicit_rk4 && cfg_.enforce_stability) {
        const double lim = op_.stability_limit(F);
        if (cfg_.dt > lim) {
            std::ostringstream o;
            o << "solver.dt = " << cfg_.dt << " exceeds the explicit stability estimate " << lim
              << " (c_stab h^2 / max lambda); reduce dt or use picard_semi_implicit";
            throw ConfigError(o.str());
        }
    }
    last_.min_F = *std::min_element(F.begin(), F.end());
    last_.max_F = *std::max_element(F.begin(), F.end());
}

std::vector<double> Solver::to_absolute(std::span<const double> s) const
{
    if (cfg_.formulation == Formulation::absolute_F) return {s.begin(), s.end()};
    std::vector<double> F(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) F[i] = mu_[i] + sqrt_mu_[i] * s[i];
    return F;
}

std::vector<double> Solver::from_absolute(std::span<const double> F) const
{
    if (cfg_.formulation == Formulation::absolute_F) return {F.begin(), F.end()};
    std::vector<double> f(F.size());
    for (std::size_t i = 0; i < F.size(); ++i) f[i] = (F[i] - mu_[i]) / sqrt_mu_[i];
    return f;
}

DensityField Solver::absolute() const { return DensityField(state_.grid, absolute_values(), FieldKind::absolute); }

std::vector<double> Solver::absolute_values() const { return to_absolute(state_.values); }

double Solver::stability_limit() const { return op_.stability_limit(absolute_values()); }

std::vector<double> Solver::state_rate(std::span<const double> s) const
{
    if (cfg_.formulation == Formulation::absolute_F) return op_.rate(s);
    std::vector<double> R = op_.rate(to_absolute(s));
    for (std::size_t i = 0; i < R.size(); ++i) R[i] /= sqrt_mu_[i];
    return R;
}

std::vector<double> Solver::rk4(std::span<const double> s, double dt) const
{
    const std::size_t N = s.size();
    std::vector<double> tmp(N), out(s.begin(), s.end());
    auto stage = [&](const std::vector<double>& k, double c) {
        for (std::size_t i = 0; i < N; ++i) tmp[i] = s[i] + c * dt * k[i];
    };
    const std::vector<double> k1 = state_rate(s);
    stage(k1, 0.5);
    const std::vector<double> k2 = state_rate(tmp);
    stage(k2, 0.5);
    const std::vector<double> k3 = state_rate(tmp);
    stage(k3, 1.0);
    const std::vector<double> k4 = state_rate(tmp);
    for (std::size_t i = 0; i < N; ++i) out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

std::vector<double> Solver::picard(std::span<const double> s, double dt, int& iters) const
{
    using SpMat = Eigen::SparseMatrix<double>;
    const VelocityGrid& g = op_.grid();
    const std::size_t N = g.size();
    const auto n = Eigen::Index(N);
    const int d = g.d();
    const PairKernels& pk = op_.kernels();
    const std::vector<double> F_old = to_absolute(s);
    Eigen::Map<const Eigen::VectorXd> rhs(F_old.data(), n);

    std::vector<SpMat> D(d, SpMat(n, n));
    for (int a = 0; a < d; ++a) {
        std::vector<Eigen::Triplet<double>> t;
        t.reserve(3 * N);
        for (std::size_t i = 0; i < N; ++i) {
            const GradientStencil st = gradient_stencil(g, i, a);
            for (int k = 0; k < st.count; ++k) t.emplace_back(Eigen::Index(i), Eigen::Index(st.col[k]), st.coef[k]);
        }
        D[a].setFromTriplets(t.begin(), t.end());
    }
    Eigen::VectorXd w(n);
    for (std::size_t i = 0; i < N; ++i) w[Eigen::Index(i)] = g.weight(i);

    Eigen::VectorXd F = rhs;
    iters = 0;
    for (int it = 0; it < cfg_.inner_iters; ++it) {
        const std::span<const double> Fs(F.data(), N);
        const std::vector<Mat> A = pk.matrix_sum(Fs);
        const std::vector<Vec> b = pk.vector_sum(central_gradient(g, Fs));
        // Flux J_a = sum_b A_ab D_b F - b_a F, rate = -W^{-1} sum_a D_a^T W J_a.
        SpMat M(n, n);
        for (int a = 0; a < d; ++a) {
            Eigen::VectorXd ba(n);
            for (std::size_t i = 0; i < N; ++i) ba[Eigen::Index(i)] = b[i][a];
            SpMat Ja(n, n);
            Ja.setIdentity();
            Ja = SpMat((-ba).asDiagonal() * Ja);
            for (int c = 0; c < d; ++c) {
                Eigen::VectorXd ac(n);
                for (std::size_t i = 0; i < N; ++i) ac[Eigen::Index(i)] = A[i](a, c);
                Ja += ac.asDiagonal() * D[c];
            }
            M += SpMat(D[a].transpose()) * (w.asDiagonal() * Ja);
        }
        const Eigen::VectorXd winv = w.cwiseInverse();
        SpMat sys = SpMat(winv.asDiagonal() * M) * dt;  // sys = I - dt L with L = -W^{-1} M
        for (Eigen::Index i = 0; i < n; ++i) sys.coeffRef(i, i) += 1.0;
        sys.makeCompressed();

        Eigen::BiCGSTAB<SpMat, Eigen::IncompleteLUT<double>> solver;
        solver.setTolerance(cfg_.linear_tol);
        solver.setMaxIterations(cfg_.max_linear_iters);
        solver.compute(sys);
        if (solver.info() != Eigen::Success) throw NumericalAbort("Picard step: preconditioner setup failed");
        Eigen::VectorXd next = solver.solveWithGuess(rhs, F);
        if (solver.info() != Eigen::Success) {
            std::ostringstream o;
            o << "Picard step: linear solve did not converge (residual " << solver.error() << " after "
              << solver.iterations() << " iterations)";
            throw NumericalAbort(o.str());
        }
        iters += int(solver.iterations());
        F = std::move(next);
    }
    return from_absolute(std::span<const double>(F.data(), N));
}

void Solver::check_field(std::span<const double> F) const
{
    double fmax = 0, fmin = 0;
    for (double x : F) {
        if (!std::isfinite(x)) throw NumericalAbort("non-finite value in the density field");
        fmax = std::max(fmax, x);
        fmin = std::min(fmin, x);
    }
    if (fmin < -0.01 * fmax) {
        std::ostringstream o;
        o << "density undershoot: min F = " << fmin << " below -0.01 * max F = " << -0.01 * fmax;
        throw NumericalAbort(o.str());
    }
}

double Solver::entropy_of(std::span<const double> s) const
{
    const std::vector<double> F = to_absolute(s);
    return boltzmann_entropy(op_.grid(), F).value;
}

const StepReport& Solver::step() { return step(cfg_.dt); }

const StepReport& Solver::step(double dt)
{
    StepReport rep;
    rep.dt = dt;
    if (dt == 0) {
        const std::vector<double> F = absolute_values();
        rep.min_F = *std::min_element(F.begin(), F.end());
        rep.max_F = *std::max_element(F.begin(), F.end());
        last_ = rep;
        return last_;
    }
    if (steps_ > 0 && steps_ % std::size_t(cfg_.eps_refresh_every) == 0) op_.refresh(absolute_values());

    std::vector<double> next;
    if (cfg_.scheme == Scheme::picard_semi_implicit) {
        next = picard(state_.values, dt, rep.linear_iters);
        if (cfg_.form == WeakForm::log) rep.entropy_change = entropy_of(next) - entropy_of(state_.values);
    } else if (cfg_.form == WeakForm::log) {
        const double H0 = entropy_of(state_.values);
        bool accepted = false;
        for (int k = 0; k <= cfg_.max_halvings && !accepted; ++k) {
            const int sub = 1 << k;
            const double h = dt / sub;
            std::vector<double> s = state_.values;
            double Hs = H0;
            accepted = true;
            for (int q = 0; q < sub; ++q) {
                std::vector<double> trial = rk4(s, h);
                check_field(to_absolute(trial));
                const double Ht = entropy_of(trial);
                if (Ht - Hs > cfg_.entropy_tol) {
                    accepted = false;
                    break;
                }
                s = std::move(trial);
                Hs = Ht;
            }
            if (accepted) {
                next = std::move(s);
                rep.substeps = sub;
                rep.entropy_change = Hs - H0;
            }
        }
        if (!accepted) {
            std::ostringstream o;
            o << "entropy increased by more than " << cfg_.entropy_tol << " at t = " << t_ << " even after "
              << cfg_.max_halvings << " step halvings";
            throw NumericalAbort(o.str());
        }
    } else {
        next = rk4(state_.values, dt);
    }
    const std::vector<double> F = to_absolute(next);
    check_field(F);
    state_.values = std::move(next);
    t_ += dt;
    ++steps_;
    rep.min_F = *std::min_element(F.begin(), F.end());
    rep.max_F = *std::max_element(F.begin(), F.end());
    last_ = rep;
    return last_;
}

void run(Solver& solver, const RunHooks& hooks)
{
    const SolverConfig& cfg = solver.config();
    const long total = std::lround(std::max(0.0, cfg.t_end - solver.time()) / cfg.dt);
    if (hooks.on_tick) hooks.on_tick(solver);
    for (long k = 1; k <= total; ++k) {
        solver.step();
        if (hooks.on_tick && (k % cfg.cadence == 0 || k == total)) hooks.on_tick(solver);
        if (hooks.on_checkpoint && cfg.checkpoint_every > 0 && k % cfg.checkpoint_every == 0) hooks.on_checkpoint(solver);
    }
}

}
