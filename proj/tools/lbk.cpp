// Command-line front end: simulation runs, experiments and small inspection tools.
#include "lbk/harness.hpp"
#include "lbk/parallel.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace {

using namespace lbk;

enum Exit { ok = 0, other = 1, config_error = 2, numerical_abort = 3, io_error = 4 };

struct Common {
    std::string config;
    std::string out_dir;
    int threads = 0;
    bool verbose = false;
};

Config load_config(const std::string& path)
{
    if (path.empty()) return Config{};
    return Config::load(path);
}

std::filesystem::path out_or(const Common& c, const char* fallback)
{
    return c.out_dir.empty() ? std::filesystem::path(fallback) : std::filesystem::path(c.out_dir);
}

Vec parse_vec(const std::string& s, int d)
{
    Vec v{0, 0, 0};
    std::size_t pos = 0;
    int k = 0;
    while (pos <= s.size() && k < 3) {
        const std::size_t e = std::min(s.find(',', pos), s.size());
        try {
            v[k++] = std::stod(s.substr(pos, e - pos));
        } catch (const std::exception&) {
            throw ConfigError("bad vector component in '" + s + "'");
        }
        pos = e + 1;
        if (e == s.size()) break;
    }
    if (k != d) throw ConfigError("vector '" + s + "' must have " + std::to_string(d) + " components");
    return v;
}

DirectionSet directions_for(int d, int count)
{
    if (count <= 0) return default_directions(d);
    return d == 2 ? make_directions_2d(count) : make_directions_3d(std::max(2, count / 2), count);
}

// Field from --field (snapshot) or the Maxwellian on the configured grid.
DensityField field_or_maxwellian(const std::string& path, const Config& cfg)
{
    if (!path.empty()) {
        DensityField F = read_snapshot(path);
        if (F.kind == FieldKind::perturbation) {
            const DensityField mu = maxwellian(F.grid);
            for (std::size_t i = 0; i < F.size(); ++i) F.values[i] = mu.values[i] + std::sqrt(mu.values[i]) * F.values[i];
            F.kind = FieldKind::absolute;
        }
        return F;
    }
    return maxwellian(grid_from_config(cfg));
}

int cmd_run(const Common& c, const std::string& resume)
{
    const Config cfg = load_config(c.config);
    Simulation sim = Simulation::from_config(cfg);
    if (!resume.empty()) sim.resume_from(resume);
    SimulationOptions opt;
    opt.out_dir = out_or(c, "out");
    opt.verbose = c.verbose;
    const SimulationResult r = simulate(sim, opt);
    std::cout << "steps " << r.steps << " t " << r.t_final << " output " << opt.out_dir.string() << '\n';
    return ok;
}

int cmd_landau_limit(const Common& c)
{
    const Config cfg = load_config(c.config);
    const LandauLimitReport rep = experiment_landau_limit(cfg);
    const auto out = out_or(c, "out");
    write_json(out / "landau_limit.json", rep.to_json());
    write_json(out / "manifest.json", manifest(cfg, "landau_limit"));
    std::cout << rep.to_json().dump(2) << '\n';
    return rep.aborted.empty() ? ok : numerical_abort;
}

int cmd_relaxation(const Common& c)
{
    const Config cfg = load_config(c.config);
    const RelaxationReport rep = experiment_relaxation(cfg);
    const auto out = out_or(c, "out");
    std::filesystem::create_directories(out);
    std::ofstream csv(out / "diagnostics.csv");
    if (!csv) throw IoError("cannot write " + (out / "diagnostics.csv").string());
    write_csv(csv, rep.rows, int(cfg.get_int("grid.d", 2)));
    write_json(out / "relaxation.json", rep.to_json());
    write_json(out / "manifest.json", manifest(cfg, "relaxation", {{"h_monotone_tol", rep.h_monotone_tol}}));
    if (c.verbose) std::cout << rep.to_json().dump(2) << '\n';
    std::cout << "entropy_monotone " << rep.entropy_monotone << " l2_monotone_after_transient "
              << rep.l2_monotone_after_transient << " max_pi0 " << rep.max_pi0 << '\n';
    return ok;
}

int cmd_convergence(const Common& c)
{
    const Config cfg = load_config(c.config);
    const ConvergenceReport rep = experiment_convergence(cfg);
    const auto out = out_or(c, "out");
    write_json(out / "convergence.json", rep.to_json());
    write_json(out / "manifest.json", manifest(cfg, "convergence"));
    std::cout << rep.to_json().dump(2) << '\n';
    return ok;
}

int cmd_dispersion_scan(const Common& c, const std::string& field, const std::string& potential, int dirs,
                        const std::string& out_csv)
{
    Config cfg = load_config(c.config);
    if (!potential.empty()) cfg = Config::load(potential);
    const DensityField F = field_or_maxwellian(field, cfg);
    const int d = F.grid->d();
    const RadialSpectrum V = spectrum_from_config(cfg, d);
    const DirectionSet ds = directions_for(d, dirs);
    const UniformAxis u = marginal_axis(*F.grid);
    const ScreeningTable table = build_screening_table(F, ds, u);

    std::filesystem::path csv_path = out_csv.empty() ? out_or(c, "out") / "dispersion_scan.csv" : std::filesystem::path(out_csv);
    if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
    std::FILE* fp = std::fopen(csv_path.string().c_str(), "w");
    if (!fp) throw IoError("cannot write " + csv_path.string());
    std::fputs(d == 2 ? "khat_1,khat_2" : "khat_1,khat_2,khat_3", fp);
    std::fputs(",r,u,re_eps,im_eps,abs_eps\n", fp);
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < ds.size(); ++m)
        for (double r : scan_radii(V))
            for (int j = 0; j < u.count; ++j) {
                const Complex e = 1.0 + V(r) * table.at(m, j);
                worst = std::min(worst, std::abs(e));
                for (int a = 0; a < d; ++a) std::fprintf(fp, "%.17g,", ds.dirs[m][a]);
                std::fprintf(fp, "%.17g,%.17g,%.17g,%.17g,%.17g\n", r, u.value(j), e.real(), e.imag(), std::abs(e));
            }
    const bool bad = std::ferror(fp) != 0;
    std::fclose(fp);
    if (bad) throw IoError("write failed: " + csv_path.string());

    nlohmann::json j = {{"min_abs_eps", worst}, {"csv", csv_path.string()}};
    if (field.empty() && cfg.has("dispersion.amplitudes")) {
        const DispersionScanReport rep = experiment_dispersion_scan(cfg);
        j["amplitude_scan"] = rep.to_json();
        write_json(out_or(c, "out") / "dispersion_scan.json", rep.to_json());
    }
    if (!c.out_dir.empty()) write_json(std::filesystem::path(c.out_dir) / "manifest.json", manifest(cfg, "dispersion_scan"));
    std::cout << j.dump(2) << '\n';
    return ok;
}

int cmd_kernel_dump(const Common& c, const std::string& vs, const std::string& vss, const std::string& field,
                    const std::string& potential)
{
    Config cfg = load_config(c.config);
    if (!potential.empty()) cfg = Config::load(potential);
    const DensityField F = field_or_maxwellian(field, cfg);
    const int d = F.grid->d();
    const Vec v = parse_vec(vs, d), vstar = parse_vec(vss, d);
    const RadialSpectrum V = spectrum_from_config(cfg, d);
    const int circle = int(cfg.get_int("solver.circle_nodes", 32));
    const ScreeningTable table =
        build_screening_table(F, directions_for(d, int(cfg.get_int("solver.directions", 0))), marginal_axis(*F.grid));
    const KernelWeightTable I(table, V, d, cfg.get_double("solver.degeneracy_floor", 1e-8));
    const KernelMatrix K = assemble_kernel(v, vstar, I, circle);
    const double L = landau_constant(V, d);
    const KernelMatrix KL = landau_kernel(v - vstar, L, d);
    auto mat = [d](const Mat& m) {
        nlohmann::json a = nlohmann::json::array();
        for (int i = 0; i < d; ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (int j = 0; j < d; ++j) row.push_back(m(i, j));
            a.push_back(row);
        }
        return a;
    };
    auto eig = [d](const KernelMatrix& k) {
        const auto e = k.eigenvalues();
        return std::vector<double>(e.begin(), e.begin() + d);
    };
    const double rel = (K.m - KL.m).frobenius() / KL.m.frobenius();
    const nlohmann::json j = {{"v", std::vector<double>(v.begin(), v.begin() + d)},
                              {"vstar", std::vector<double>(vstar.begin(), vstar.begin() + d)},
                              {"matrix", mat(K.m)},
                              {"eigenvalues", eig(K)},
                              {"landau",
                               {{"prefactor", L}, {"matrix", mat(KL.m)}, {"eigenvalues", eig(KL)}, {"relative_difference", rel}}},
                              {"min_abs_eps", I.min_abs_eps()},
                              {"circle_nodes", circle}};
    std::cout << j.dump(2) << '\n';
    if (!c.out_dir.empty()) write_json(std::filesystem::path(c.out_dir) / "kernel_dump.json", j);
    return ok;
}

int cmd_field(const Common& c, const std::string& action, const std::string& in, const std::string& out)
{
    if (action == "init") {
        const Config cfg = load_config(c.config);
        const GridPtr g = grid_from_config(cfg);
        const DensityField F = initial_from_config(cfg, g);
        if (out.empty()) throw ConfigError("field init needs --out");
        write_snapshot(out, F);
        std::cout << "wrote " << out << " hash " << field_hash(F) << '\n';
        return ok;
    }
    if (action == "dump") {
        if (in.empty()) throw ConfigError("field dump needs --in");
        const DensityField F = read_snapshot(in);
        const VelocityGrid& g = *F.grid;
        std::ostream* os = &std::cout;
        std::ofstream file;
        if (!out.empty()) {
            file.open(out);
            if (!file) throw IoError("cannot write " + out);
            os = &file;
        }
        *os << (g.d() == 2 ? "v_1,v_2,value\n" : "v_1,v_2,v_3,value\n");
        char buf[64];
        for (std::size_t i = 0; i < F.size(); ++i) {
            for (int a = 0; a < g.d(); ++a) {
                std::snprintf(buf, sizeof buf, "%.17g,", g.node(i)[a]);
                *os << buf;
            }
            std::snprintf(buf, sizeof buf, "%.17g\n", F.values[i]);
            *os << buf;
        }
        if (!*os) throw IoError("write failed");
        return ok;
    }
    if (action == "load") {
        if (in.empty()) throw ConfigError("field load needs --in");
        const DensityField F = read_snapshot(in);
        const VelocityGrid& g = *F.grid;
        nlohmann::json j = {{"d", g.d()},
                            {"n", g.n()},
                            {"extent", g.extent()},
                            {"kind", F.kind == FieldKind::perturbation ? "perturbation" : "absolute"},
                            {"hash", field_hash(F)}};
        if (F.kind == FieldKind::absolute) {
            const Moments m = moments(F);
            j["mass"] = m.mass;
            j["energy"] = m.energy;
            j["momentum"] = std::vector<double>(m.momentum.begin(), m.momentum.begin() + g.d());
        }
        std::cout << j.dump(2) << '\n';
        return ok;
    }
    throw ConfigError("field action must be init, dump or load");
}

}

int main(int argc, char** argv)
{
    CLI::App app{"Lenard-Balescu kinetic solver and experiment harness"};
    app.set_version_flag("--version", std::string(lbk::lbk_version));
    app.require_subcommand(1);
    Common c;
    app.add_option("--config", c.config, "Key-value configuration file")->check(CLI::ExistingFile);
    app.add_option("--out-dir", c.out_dir, "Output directory");
    app.add_option("--threads", c.threads, "Worker threads (0: hardware concurrency)")->check(CLI::NonNegativeNumber);
    app.add_flag("--verbose", c.verbose, "Print diagnostics while running");
    auto global = [&](CLI::App* s) {
        s->fallthrough();
        return s;
    };

    std::string resume;
    auto* run = global(app.add_subcommand("run", "Time-integrate a configuration"));
    run->add_option("--resume", resume, "Checkpoint to resume from");

    auto* ll = global(app.add_subcommand("landau-limit", "Landau-limit sweep over delta"));
    auto* rx = global(app.add_subcommand("relaxation", "Relaxation and weighted-decay study"));
    auto* cv = global(app.add_subcommand("convergence", "Refinement ladder study"));

    std::string field, potential, out_csv;
    int dirs = 0;
    auto* ds = global(app.add_subcommand("dispersion-scan", "Scan |eps| over directions, radii and u"));
    ds->add_option("--field", field, "Snapshot of F (default: Maxwellian on the configured grid)");
    ds->add_option("--potential", potential, "Config file holding potential.* keys");
    ds->add_option("--dirs", dirs, "Number of directions (0: default set)");
    ds->add_option("--out", out_csv, "CSV output path");

    std::string kv, kvs;
    auto* kd = global(app.add_subcommand("kernel-dump", "Print one kernel matrix as JSON"));
    kd->add_option("--v", kv, "Velocity v, comma separated")->required();
    kd->add_option("--vstar", kvs, "Velocity v*, comma separated")->required();
    kd->add_option("--field", field, "Snapshot of F (default: Maxwellian)");
    kd->add_option("--potential", potential, "Config file holding potential.* keys");

    std::string action, fin, fout;
    auto* fd = global(app.add_subcommand("field", "Create, dump or inspect field snapshots"));
    fd->add_option("action", action, "init | dump | load")->required();
    fd->add_option("--in", fin, "Input snapshot");
    fd->add_option("--out", fout, "Output path");

    // Config errors in the command line (bad flags, missing files) share exit code 2.
    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return config_error;
    }

    try {
        if (c.threads > 0) lbk::set_thread_count(c.threads);
        if (*run) return cmd_run(c, resume);
        if (*ll) return cmd_landau_limit(c);
        if (*rx) return cmd_relaxation(c);
        if (*cv) return cmd_convergence(c);
        if (*ds) return cmd_dispersion_scan(c, field, potential, dirs, out_csv);
        if (*kd) return cmd_kernel_dump(c, kv, kvs, field, potential);
        if (*fd) return cmd_field(c, action, fin, fout);
    } catch (const lbk::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const lbk::NumericalAbort& e) {
        std::cerr << "numerical abort: " << e.what() << '\n';
        return numerical_abort;
    } catch (const lbk::IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return io_error;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return io_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return other;
    }
    return other;
}
