#pragma once

#include "aniso/analysis.hpp"
#include "aniso/convolution.hpp"
#include "aniso/errors.hpp"
#include "aniso/initial.hpp"
#include "aniso/io.hpp"
#include "aniso/onedim.hpp"
#include "aniso/particles.hpp"
#include "aniso/scheme.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace aniso {

/// Homogeneous direction or a tensor field file.
struct TensorSpec {
    bool from_file = false;
    Vec2 s{0.0, 1.0};
    std::string path;

    TensorField build(int nx, int ny) const {
        return from_file ? load_tensor_field(path, nx, ny) : build_homogeneous_tensor(s, nx, ny);
    }
};

/// Settings of a continuum simulation.
struct RunConfig {
    int nx = 50;
    int ny = 50;
    double delta = 1e-10;
    ForceParams params;
    TensorSpec tensor;
    InitialSpec initial;
    double safety = 0.9;
    double tol_stat = 1e-8;
    long max_steps = 100000;
    long snapshot_every = 0;
    long record_every = 1;
    int q = 4;
    std::string table_cache;
    std::string out_dir = "out";
    bool cross_section = false;
    double stripe_threshold = 1e-3;

    /// Checks every field against the module preconditions, including input files.
    void validate() const {
        if (nx < 2 || ny < 2)
            throw ConfigError("grid dimensions must be at least 2");
        params.validate();
        if (!(delta >= 0) || !std::isfinite(delta))
            throw ConfigError("delta must be nonnegative");
        if (!(safety > 0 && safety <= 1))
            throw ConfigError("safety must lie in (0, 1]");
        if (!(tol_stat >= 0))
            throw ConfigError("tol_stat must be nonnegative");
        if (max_steps < 0 || snapshot_every < 0 || record_every < 1)
            throw ConfigError("max_steps and snapshot_every must be nonnegative, record_every positive");
        if (q < 1 || q > 20)
            throw ConfigError("quadrature order q must lie in [1, 20]");
        if (out_dir.empty())
            throw ConfigError("out_dir must not be empty");
        if (tensor.from_file && !std::filesystem::exists(tensor.path))
            throw ConfigError("tensor field file not found: " + tensor.path);
        if (!tensor.from_file && !(norm(tensor.s) > 0))
            throw ConfigError("tensor direction must be nonzero");
        if (initial.kind == InitialSpec::Kind::File && !std::filesystem::exists(initial.path))
            throw ConfigError("initial density file not found: " + initial.path);
        if (initial.kind == InitialSpec::Kind::Disc && !(initial.radius > 0))
            throw ConfigError("init_radius must be positive");
        if (initial.kind == InitialSpec::Kind::Gaussian && !(initial.sigma > 0))
            throw ConfigError("init_sigma must be positive");
        if (initial.kind == InitialSpec::Kind::Noise && !(initial.amplitude >= 0 && initial.amplitude < 1))
            throw ConfigError("init_amplitude must lie in [0, 1)");
        if (!(stripe_threshold > 0 && stripe_threshold < 1))
            throw ConfigError("stripe_threshold must lie in (0, 1)");
    }
};

namespace detail {

inline const std::set<std::string>& force_keys() {
    static const std::set<std::string> k{"alpha", "beta", "gamma", "e_A", "e_R", "chi", "cutoff", "eta"};
    return k;
}

inline const std::set<std::string>& tensor_keys() {
    static const std::set<std::string> k{"tensor", "tensor_sx", "tensor_sy", "tensor_file"};
    return k;
}

inline std::set<std::string> key_union(std::initializer_list<std::set<std::string>> sets) {
    std::set<std::string> out;
    for (const auto& s : sets)
        out.insert(s.begin(), s.end());
    return out;
}

inline void read_grid(const KeyValueConfig& c, int& nx, int& ny) {
    const int n = c.get_int("grid", nx);
    nx = c.get_int("nx", n);
    ny = c.get_int("ny", c.has("grid") ? n : ny);
}

inline void write_force_settings(Manifest& m, const ForceParams& p) {
    m.setting("alpha", p.alpha);
    m.setting("beta", p.beta);
    m.setting("gamma", p.gamma);
    m.setting("e_A", p.e_A);
    m.setting("e_R", p.e_R);
    m.setting("chi", p.chi);
    m.setting("cutoff", p.cutoff);
    m.setting("eta", p.eta);
}

inline void write_tensor_settings(Manifest& m, const TensorSpec& t) {
    m.setting("tensor", t.from_file ? "file" : "homogeneous");
    if (t.from_file) {
        m.setting("tensor_file", std::filesystem::absolute(t.path).string());
    } else {
        m.setting("tensor_sx", t.s.x);
        m.setting("tensor_sy", t.s.y);
    }
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::string step_tag(long n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%08ld", n);
    return buf;
}

} // namespace detail

inline ForceParams read_force_params(const KeyValueConfig& c) {
    ForceParams p;
    p.alpha = c.get_double("alpha", p.alpha);
    p.beta = c.get_double("beta", p.beta);
    p.gamma = c.get_double("gamma", p.gamma);
    p.e_A = c.get_double("e_A", p.e_A);
    p.e_R = c.get_double("e_R", p.e_R);
    p.chi = c.get_double("chi", p.chi);
    p.cutoff = c.get_double("cutoff", p.cutoff);
    p.eta = c.get_double("eta", p.eta);
    try {
        p.validate();
    } catch (const PreconditionError& e) {
        throw ConfigError(e.what());
    }
    return p;
}

inline TensorSpec read_tensor_spec(const KeyValueConfig& c) {
    TensorSpec t;
    const std::string kind = c.get_string("tensor", c.has("tensor_file") ? "file" : "homogeneous");
    if (kind == "file") {
        t.from_file = true;
        t.path = c.get_path("tensor_file", "");
        if (t.path.empty())
            throw ConfigError("tensor = file requires tensor_file");
        if (!std::filesystem::exists(t.path))
            throw ConfigError("tensor field file not found: " + t.path);
    } else if (kind == "homogeneous") {
        t.s = {c.get_double("tensor_sx", 0.0), c.get_double("tensor_sy", 1.0)};
        if (!(norm(t.s) > 0))
            throw ConfigError("tensor direction must be nonzero");
    } else {
        throw ConfigError("tensor must be 'homogeneous' or 'file', got: " + kind);
    }
    return t;
}

inline const std::set<std::string>& simulate_keys() {
    static const std::set<std::string> k = detail::key_union(
        {detail::force_keys(), detail::tensor_keys(),
         {"grid", "nx", "ny", "delta", "init", "init_cx", "init_cy", "init_radius", "init_sigma", "init_amplitude",
          "init_file", "seed", "safety", "tol_stat", "max_steps", "snapshot_every", "record_every", "q",
          "table_cache", "out_dir", "cross_section", "stripe_threshold"}});
    return k;
}

/// Builds and validates a simulation config from key-value settings.
inline RunConfig read_run_config(const KeyValueConfig& c) {
    c.check_known(simulate_keys());
    RunConfig r;
    detail::read_grid(c, r.nx, r.ny);
    r.delta = c.get_double("delta", r.delta);
    r.params = read_force_params(c);
    r.tensor = read_tensor_spec(c);
    const std::string init = c.get_string("init", "disc");
    const Vec2 center{c.get_double("init_cx", 0.0), c.get_double("init_cy", 0.0)};
    if (init == "uniform") {
        r.initial = InitialSpec::uniform();
    } else if (init == "disc") {
        r.initial = InitialSpec::disc(center, c.get_double("init_radius", 0.05));
    } else if (init == "gaussian") {
        r.initial = InitialSpec::gaussian(center, c.get_double("init_sigma", 0.05));
    } else if (init == "noise") {
        r.initial = InitialSpec::noise(c.get_double("init_amplitude", 1e-3),
                                       static_cast<std::uint64_t>(c.get_long("seed", 1)));
    } else if (init == "file") {
        r.initial = InitialSpec::file(c.get_path("init_file", ""));
        if (r.initial.path.empty())
            throw ConfigError("init = file requires init_file");
    } else {
        throw ConfigError("init must be uniform, disc, gaussian, noise or file, got: " + init);
    }
    if (c.get_long("seed", 1) < 0)
        throw ConfigError("seed must be nonnegative");
    r.safety = c.get_double("safety", r.safety);
    r.tol_stat = c.get_double("tol_stat", r.tol_stat);
    r.max_steps = c.get_long("max_steps", r.max_steps);
    r.snapshot_every = c.get_long("snapshot_every", r.snapshot_every);
    r.record_every = c.get_long("record_every", r.record_every);
    r.q = c.get_int("q", r.q);
    r.table_cache = c.get_path("table_cache", "");
    r.out_dir = c.get_path("out_dir", r.out_dir);
    r.cross_section = c.get_bool("cross_section", r.cross_section);
    r.stripe_threshold = c.get_double("stripe_threshold", r.stripe_threshold);
    r.validate();
    return r;
}

inline void write_run_settings(Manifest& m, const RunConfig& r) {
    m.setting("nx", r.nx);
    m.setting("ny", r.ny);
    m.setting("delta", r.delta);
    detail::write_force_settings(m, r.params);
    detail::write_tensor_settings(m, r.tensor);
    switch (r.initial.kind) {
    case InitialSpec::Kind::Uniform:
        m.setting("init", "uniform");
        break;
    case InitialSpec::Kind::Disc:
        m.setting("init", "disc");
        m.setting("init_cx", r.initial.center.x);
        m.setting("init_cy", r.initial.center.y);
        m.setting("init_radius", r.initial.radius);
        break;
    case InitialSpec::Kind::Gaussian:
        m.setting("init", "gaussian");
        m.setting("init_cx", r.initial.center.x);
        m.setting("init_cy", r.initial.center.y);
        m.setting("init_sigma", r.initial.sigma);
        break;
    case InitialSpec::Kind::Noise:
        m.setting("init", "noise");
        m.setting("init_amplitude", r.initial.amplitude);
        m.setting("seed", static_cast<long>(r.initial.seed));
        break;
    case InitialSpec::Kind::File:
        m.setting("init", "file");
        m.setting("init_file", std::filesystem::absolute(r.initial.path).string());
        break;
    }
    m.setting("safety", r.safety);
    m.setting("tol_stat", r.tol_stat);
    m.setting("max_steps", r.max_steps);
    m.setting("snapshot_every", r.snapshot_every);
    m.setting("record_every", r.record_every);
    m.setting("q", r.q);
    if (!r.table_cache.empty())
        m.setting("table_cache", std::filesystem::absolute(r.table_cache).string());
    m.setting("out_dir", std::filesystem::absolute(r.out_dir).string());
    m.setting("cross_section", r.cross_section ? "true" : "false");
    m.setting("stripe_threshold", r.stripe_threshold);
}

/// Loads the table from the cache when its key matches, otherwise computes it (and stores it).
inline ForceTable obtain_force_table(const RunConfig& r, const TensorField& tensor, bool* from_cache = nullptr) {
    const Grid2D grid(r.nx, r.ny);
    if (!r.table_cache.empty()) {
        if (auto t = load_force_table(r.table_cache, grid, tensor, r.params, r.q)) {
            if (from_cache)
                *from_cache = true;
            return std::move(*t);
        }
    }
    ForceTable t = precompute_force_table(grid, tensor, r.params, r.q);
    if (!r.table_cache.empty())
        save_force_table(r.table_cache, t);
    if (from_cache)
        *from_cache = false;
    return t;
}

struct SimulateOutcome {
    SimulationResult result;
    double force_bound = 0.0;
    double wall_seconds = 0.0;
    StripeReport stripes;
};

/**
 * Runs the continuum scheme and writes into out_dir:
 * diagnostics.csv, snapshot_<n>.csv/.pgm, final.csv, final.pgm, cross_section.csv
 * (when enabled) and manifest.txt.
 */
inline SimulateOutcome run_simulate(const RunConfig& r, std::ostream* log = nullptr) {
    r.validate();
    const auto t0 = std::chrono::steady_clock::now();
    ensure_directory(r.out_dir);
    const Grid2D grid(r.nx, r.ny);
    const TensorField tensor = r.tensor.build(r.nx, r.ny);
    DensityField rho0 = discretize_initial(r.initial, grid);
    bool cached = false;
    const ForceTable table = obtain_force_table(r, tensor, &cached);
    if (log)
        *log << "force table " << (cached ? "loaded from cache" : "computed") << " (" << r.nx << "x" << r.ny
             << ", q=" << r.q << ")\n";

    const std::filesystem::path dir(r.out_dir);
    CsvWriter diag((dir / "diagnostics.csv").string(), "n,t,dt,mass,comx,comy,min,max,l2,umax");
    SimulationConfig sc;
    sc.delta = r.delta;
    sc.safety = r.safety;
    sc.tol_stat = r.tol_stat;
    sc.max_steps = r.max_steps;
    sc.record_every = r.record_every;
    sc.snapshot_every = r.snapshot_every;
    sc.on_record = [&diag](const StepRecord& s) {
        diag.row(s.n, s.t, s.dt, s.diag.mass, s.diag.comx, s.diag.comy, s.diag.min, s.diag.max, s.diag.l2,
                 s.diag.umax);
    };
    sc.on_snapshot = [&dir](const SchemeState& st, const VelocityField&) {
        const std::string tag = detail::step_tag(st.n);
        write_density_csv((dir / ("snapshot_" + tag + ".csv")).string(), st.rho);
        write_pgm((dir / ("snapshot_" + tag + ".pgm")).string(), st.rho);
    };

    SimulateOutcome out;
    out.force_bound = force_bound(r.params);
    Manifest man;
    write_run_settings(man, r);
    man.result("force_bound", out.force_bound);
    try {
        out.result = simulate(sc, table, std::move(rho0));
    } catch (const SimulationAborted& e) {
        diag.close();
        write_density_csv((dir / "last_finite.csv").string(), e.last_state().rho);
        man.result("termination", "aborted_nonfinite");
        man.result("steps", std::to_string(e.last_state().n));
        man.result("wall_seconds", detail::seconds_since(t0));
        man.write((dir / "manifest.txt").string());
        throw;
    }
    diag.close();
    const DensityField& fin = out.result.state.rho;
    write_density_csv((dir / "final.csv").string(), fin);
    write_pgm((dir / "final.pgm").string(), fin);
    if (r.cross_section)
        write_cross_section_csv((dir / "cross_section.csv").string(), fin);
    out.stripes = find_stripes(fin, r.stripe_threshold);
    out.wall_seconds = detail::seconds_since(t0);
    man.result("termination", to_string(out.result.reason));
    man.result("steps", std::to_string(out.result.state.n));
    man.result("final_time", out.result.state.t);
    man.result("last_rate", out.result.last_rate);
    man.result("max_rho", fin.max());
    man.result("max_column_variation", max_column_variation(fin));
    man.result("stripe_count",
               out.stripes.full_support ? std::string("0 (full support)") : std::to_string(out.stripes.stripes.size()));
    man.result("wall_seconds", out.wall_seconds);
    man.write((dir / "manifest.txt").string());
    if (log)
        *log << "termination " << to_string(out.result.reason) << " after " << out.result.state.n << " steps, t = "
             << out.result.state.t << "\n";
    return out;
}

/// Builds the table for a config and stores it at table_cache.
inline void run_precompute(const RunConfig& r, std::ostream* log = nullptr) {
    r.validate();
    if (r.table_cache.empty())
        throw ConfigError("precompute requires table_cache");
    const TensorField tensor = r.tensor.build(r.nx, r.ny);
    const auto t0 = std::chrono::steady_clock::now();
    const ForceTable t = precompute_force_table(Grid2D(r.nx, r.ny), tensor, r.params, r.q);
    save_force_table(r.table_cache, t);
    if (log)
        *log << "wrote " << r.table_cache << " in " << detail::seconds_since(t0) << " s\n";
}

// ---------------------------------------------------------------------------------------------
// one-dimensional experiments

struct OneDimConfig {
    ForceParams params;
    int potential_m = 2001;
    std::string out_dir = "out";
};

namespace detail {

inline const std::set<std::string>& onedim_common_keys() {
    static const std::set<std::string> k = key_union({force_keys(), {"potential_m", "out_dir"}});
    return k;
}

inline OneDimConfig read_onedim_common(const KeyValueConfig& c) {
    OneDimConfig o;
    o.params = read_force_params(c);
    o.potential_m = c.get_int("potential_m", o.potential_m);
    if (o.potential_m < 64)
        throw ConfigError("potential_m must be at least 64");
    o.out_dir = c.get_path("out_dir", o.out_dir);
    return o;
}

inline void write_onedim_settings(Manifest& m, const OneDimConfig& o) {
    write_force_settings(m, o.params);
    m.setting("potential_m", o.potential_m);
    m.setting("out_dir", std::filesystem::absolute(o.out_dir).string());
}

inline void write_potential_csv(const std::string& path, const Potential1D& pot) {
    CsvWriter w(path, "x,G,W");
    for (int i = 0; i < pot.m(); ++i)
        w.row(pot.x()[i], pot.G()[i], pot.W()[i]);
    w.close();
}

inline void write_density1d_csv(const std::string& path, const Density1D& rho) {
    CsvWriter w(path, "x,rho");
    for (int i = 0; i < rho.grid.m; ++i)
        w.row(rho.grid.x(i), rho.values[i]);
    w.close();
}

/// delta from "delta" (absolute) or "delta_rel" (multiple of ||W||_L1).
inline double read_delta(const KeyValueConfig& c, double W_L1, double def_rel) {
    if (c.has("delta") && c.has("delta_rel"))
        throw ConfigError("give either delta or delta_rel, not both");
    if (c.has("delta"))
        return c.get_double("delta", 0.0);
    return c.get_double("delta_rel", def_rel) * W_L1;
}

} // namespace detail

struct Stationary1DOutcome {
    Potential1D potential;
    double delta = 0.0;
    Density1D rho;
    double C = 0.0;
    double residual = 0.0;
    int iterations = 0;
};

/// Solves for the 1D stationary state. Writes potential.csv, rho.csv and manifest.txt.
inline Stationary1DOutcome run_stationary1d(const KeyValueConfig& c, std::ostream* log = nullptr) {
    c.check_known(detail::key_union({detail::onedim_common_keys(),
                                     {"delta", "delta_rel", "m", "a", "b", "method", "omega", "tol", "max_iter"}}));
    const OneDimConfig o = detail::read_onedim_common(c);
    const int m = c.get_int("m", 1024);
    const double a = c.get_double("a", -2.0), b = c.get_double("b", 2.0);
    const std::string method = c.get_string("method", "fixed_point");
    if (method != "fixed_point" && method != "minimizer")
        throw ConfigError("method must be fixed_point or minimizer");
    if (m < 8 || !(b > a))
        throw ConfigError("need m >= 8 and b > a");
    const auto t0 = std::chrono::steady_clock::now();
    Stationary1DOutcome out;
    out.potential = build_potential(o.params, o.potential_m);
    out.delta = detail::read_delta(c, out.potential.W_L1(), 0.5);
    const Grid1D grid(a, b, m);
    if (method == "fixed_point") {
        FixedPointOptions fo;
        fo.omega = c.get_double("omega", fo.omega);
        fo.tol = c.get_double("tol", fo.tol);
        fo.max_iter = c.get_int("max_iter", fo.max_iter);
        FixedPointResult r = stationary_fixed_point(out.delta, out.potential, grid, fo);
        out.rho = std::move(r.rho);
        out.C = r.C;
        out.residual = r.residual;
        out.iterations = r.iterations;
    } else {
        MinimizerOptions mo;
        mo.tol = c.get_double("tol", mo.tol);
        mo.max_iter = c.get_int("max_iter", mo.max_iter);
        MinimizerResult r = minimize_energy(out.delta, out.potential, grid, mo);
        out.rho = std::move(r.rho);
        out.iterations = r.iterations;
        const std::vector<double> V = convolve_W(out.rho, out.potential);
        double sum = 0.0;
        int cnt = 0;
        for (int i = 0; i < m; ++i)
            if (out.rho.values[i] > 0) {
                sum += V[i] + out.delta * out.rho.values[i];
                ++cnt;
            }
        out.C = sum / cnt;
        for (int i = 0; i < m; ++i)
            if (out.rho.values[i] > 0)
                out.residual = std::max(out.residual, std::abs(V[i] + out.delta * out.rho.values[i] - out.C));
    }
    ensure_directory(o.out_dir);
    const std::filesystem::path dir(o.out_dir);
    detail::write_potential_csv((dir / "potential.csv").string(), out.potential);
    detail::write_density1d_csv((dir / "rho.csv").string(), out.rho);
    Manifest man;
    detail::write_onedim_settings(man, o);
    man.setting("delta", out.delta);
    man.setting("m", m);
    man.setting("a", a);
    man.setting("b", b);
    man.setting("method", method);
    man.result("W_L1", out.potential.W_L1());
    man.result("level_constant", out.C);
    man.result("residual", out.residual);
    man.result("iterations", std::to_string(out.iterations));
    man.result("energy_delta", energy_delta(out.rho, out.potential, out.delta));
    man.result("wall_seconds", detail::seconds_since(t0));
    man.write((dir / "manifest.txt").string());
    if (log)
        *log << method << ": delta = " << out.delta << ", residual = " << out.residual << ", " << out.iterations
             << " iterations\n";
    return out;
}

/// delta(L) sweep. Writes delta_of_L.csv ("L,delta_of_L") and manifest.txt.
inline std::vector<std::pair<double, double>> run_deltaL(const KeyValueConfig& c, std::ostream* log = nullptr) {
    c.check_known(detail::key_union({detail::onedim_common_keys(), {"L", "m_L"}}));
    const OneDimConfig o = detail::read_onedim_common(c);
    const std::vector<double> Ls = c.get_doubles("L", {0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2});
    const int mL = c.get_int("m_L", 0);
    for (double L : Ls)
        if (!(L > 0))
            throw ConfigError("L values must be positive");
    if (mL != 0 && mL < 2)
        throw ConfigError("m_L must be 0 (automatic) or at least 2");
    const auto t0 = std::chrono::steady_clock::now();
    const Potential1D pot = build_potential(o.params, o.potential_m);
    std::vector<std::pair<double, double>> table;
    ensure_directory(o.out_dir);
    const std::filesystem::path dir(o.out_dir);
    CsvWriter w((dir / "delta_of_L.csv").string(), "L,delta_of_L");
    for (double L : Ls) {
        const double d = delta_of_L(L, pot, mL == 0 ? default_m_L(L) : mL);
        table.emplace_back(L, d);
        w.row(L, d);
        if (log)
            *log << "L = " << L << "  delta(L) = " << d << "  ratio " << d / pot.W_L1() << "\n";
    }
    w.close();
    Manifest man;
    detail::write_onedim_settings(man, o);
    std::string list;
    for (double L : Ls)
        list += (list.empty() ? "" : ",") + detail::fmt(L);
    man.setting("L", list);
    man.setting("m_L", mL);
    man.result("W_L1", pot.W_L1());
    man.result("wall_seconds", detail::seconds_since(t0));
    man.write((dir / "manifest.txt").string());
    return table;
}

/// Stripe residuals for n equidistant lines or explicit positions. Writes residual.csv.
inline std::vector<double> run_stripes(const KeyValueConfig& c, std::ostream* log = nullptr) {
    c.check_known(detail::key_union({detail::force_keys(), {"n", "positions", "out_dir"}}));
    const ForceParams p = read_force_params(c);
    const std::string out_dir = c.get_path("out_dir", "out");
    if (c.has("n") && c.has("positions"))
        throw ConfigError("give either n or positions, not both");
    StripeConfig cfg;
    if (c.has("positions")) {
        cfg.x = c.get_doubles("positions", {});
    } else {
        const int n = c.get_int("n", 3);
        if (n < 1)
            throw ConfigError("n must be positive");
        cfg = equidistant_positions(n);
    }
    try {
        cfg.validate();
    } catch (const PreconditionError& e) {
        throw ConfigError(e.what());
    }
    const std::vector<double> res = stripe_residual(cfg, p);
    ensure_directory(out_dir);
    const std::filesystem::path dir(out_dir);
    CsvWriter w((dir / "residual.csv").string(), "k,x_k,residual");
    for (int k = 0; k < cfg.n(); ++k)
        w.row(k + 1, cfg.x[k], res[k]);
    w.close();
    Manifest man;
    detail::write_force_settings(man, p);
    std::string list;
    for (double x : cfg.x)
        list += (list.empty() ? "" : ",") + detail::fmt(x);
    man.setting("positions", list);
    man.setting("out_dir", std::filesystem::absolute(out_dir).string());
    double mx = 0.0;
    for (double r : res)
        mx = std::max(mx, std::abs(r));
    man.result("max_abs_residual", mx);
    man.write((dir / "manifest.txt").string());
    if (log)
        *log << cfg.n() << " stripes, max |residual| = " << mx << "\n";
    return res;
}

struct GammaOutcome {
    GammaReport minimizers;
    RecoveryProbe recovery;
};

/**
 * Gamma-convergence probe: minimizers along deltas_rel * ||W||_L1 (gamma.csv) and the
 * recovery gap E_delta(mollify(rho, delta)) - E(rho) for a Dirac test density (recovery.csv).
 */
inline GammaOutcome run_gamma(const KeyValueConfig& c, std::ostream* log = nullptr) {
    c.check_known(detail::key_union(
        {detail::onedim_common_keys(), {"deltas_rel", "m", "a", "b", "recovery_deltas", "recovery_m", "recovery_a",
                                        "recovery_b"}}));
    const OneDimConfig o = detail::read_onedim_common(c);
    const std::vector<double> rel = c.get_doubles("deltas_rel", {0.8, 0.4, 0.2, 0.1});
    const int m = c.get_int("m", 1024);
    const double a = c.get_double("a", -2.0), b = c.get_double("b", 2.0);
    const std::vector<double> rd = c.get_doubles("recovery_deltas", {1e-2, 1e-3, 1e-4, 1e-5, 1e-6});
    const int rm = c.get_int("recovery_m", 32769);
    const double ra = c.get_double("recovery_a", -2.0), rb = c.get_double("recovery_b", 2.0);
    if (m < 8 || rm < 8 || !(b > a) || !(rb > ra))
        throw ConfigError("grids need at least 8 points and b > a");
    for (double d : rd)
        if (!(d > 0))
            throw ConfigError("recovery_deltas must be positive");
    const auto t0 = std::chrono::steady_clock::now();
    const Potential1D pot = build_potential(o.params, o.potential_m);
    std::vector<double> deltas;
    for (double r : rel)
        deltas.push_back(r * pot.W_L1());
    GammaOutcome out;
    out.minimizers = gamma_probe(pot, deltas, Grid1D(a, b, m));
    out.recovery = recovery_rate_probe(dirac_density(Grid1D(ra, rb, rm), 0.0), pot, rd);

    ensure_directory(o.out_dir);
    const std::filesystem::path dir(o.out_dir);
    CsvWriter w((dir / "gamma.csv").string(), "delta,energy_delta,energy,bl_to_previous");
    for (const GammaEntry& e : out.minimizers.entries)
        w.row(e.delta, e.energy_delta, e.energy, e.bl_to_previous);
    w.close();
    CsvWriter wr((dir / "recovery.csv").string(), "delta,gap");
    for (std::size_t k = 0; k < out.recovery.deltas.size(); ++k)
        wr.row(out.recovery.deltas[k], out.recovery.gaps[k]);
    wr.close();
    Manifest man;
    detail::write_onedim_settings(man, o);
    std::string list;
    for (double r : rel)
        list += (list.empty() ? "" : ",") + detail::fmt(r);
    man.setting("deltas_rel", list);
    man.setting("m", m);
    man.setting("a", a);
    man.setting("b", b);
    list.clear();
    for (double d : rd)
        list += (list.empty() ? "" : ",") + detail::fmt(d);
    man.setting("recovery_deltas", list);
    man.setting("recovery_m", rm);
    man.setting("recovery_a", ra);
    man.setting("recovery_b", rb);
    man.result("W_L1", pot.W_L1());
    man.result("energies_nonincreasing", out.minimizers.energies_nonincreasing ? "true" : "false");
    man.result("distances_decreasing", out.minimizers.distances_decreasing ? "true" : "false");
    man.result("recovery_rate", out.recovery.rate);
    man.result("wall_seconds", detail::seconds_since(t0));
    man.write((dir / "manifest.txt").string());
    if (log)
        *log << "recovery rate exponent " << out.recovery.rate << "\n";
    return out;
}

// ---------------------------------------------------------------------------------------------
// particles

struct ParticleRunConfig {
    int n = 400;
    long steps = 100000;
    std::uint64_t seed = 1;
    double dt = 0.0; ///< 0 selects 0.2 / f
    int nx = 50;
    int ny = 50;
    ForceParams params;
    TensorSpec tensor;
    long snapshot_every = 0;
    std::string out_dir = "out";
    double stripe_threshold = 1e-3;
};

inline ParticleRunConfig read_particle_config(const KeyValueConfig& c) {
    c.check_known(detail::key_union({detail::force_keys(), detail::tensor_keys(),
                                     {"N", "steps", "seed", "dt", "grid", "nx", "ny", "snapshot_every", "out_dir",
                                      "stripe_threshold"}}));
    ParticleRunConfig r;
    r.n = c.get_int("N", r.n);
    r.steps = c.get_long("steps", r.steps);
    const long seed = c.get_long("seed", 1);
    if (seed < 0)
        throw ConfigError("seed must be nonnegative");
    r.seed = static_cast<std::uint64_t>(seed);
    r.dt = c.get_double("dt", r.dt);
    detail::read_grid(c, r.nx, r.ny);
    r.params = read_force_params(c);
    r.tensor = read_tensor_spec(c);
    r.snapshot_every = c.get_long("snapshot_every", r.snapshot_every);
    r.out_dir = c.get_path("out_dir", r.out_dir);
    r.stripe_threshold = c.get_double("stripe_threshold", r.stripe_threshold);
    if (r.n < 1 || r.steps < 0 || r.snapshot_every < 0 || !(r.dt >= 0) || r.nx < 1 || r.ny < 1)
        throw ConfigError("particle run needs N >= 1, steps >= 0, snapshot_every >= 0, dt >= 0, grid >= 1");
    return r;
}

struct ParticleOutcome {
    ParticleEnsemble ensemble;
    DensityField histogram;
    double dt = 0.0;
};

/// Euler particle run. Writes positions_<n>.csv snapshots, positions_final.csv,
/// histogram.csv, histogram.pgm and manifest.txt.
inline ParticleOutcome run_particles(const ParticleRunConfig& r, std::ostream* log = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    auto tensor = std::make_shared<const TensorField>(r.tensor.build(r.nx, r.ny));
    ParticleOutcome out{random_ensemble(r.n, r.seed, tensor, r.params), DensityField(), 0.0};
    const double f = force_bound(r.params);
    out.dt = r.dt > 0 ? r.dt : default_particle_dt(f);
    ensure_directory(r.out_dir);
    const std::filesystem::path dir(r.out_dir);
    for (long s = 0; s < r.steps; ++s) {
        if (r.snapshot_every > 0 && s % r.snapshot_every == 0)
            write_positions_csv((dir / ("positions_" + detail::step_tag(s) + ".csv")).string(), out.ensemble.x);
        particle_step(out.ensemble, out.dt);
    }
    write_positions_csv((dir / "positions_final.csv").string(), out.ensemble.x);
    const Grid2D grid(r.nx, r.ny);
    out.histogram = histogram(out.ensemble, grid);
    write_density_csv((dir / "histogram.csv").string(), out.histogram);
    write_pgm((dir / "histogram.pgm").string(), out.histogram);
    const StripeReport st = find_stripes(out.histogram, r.stripe_threshold);
    Manifest man;
    man.setting("N", r.n);
    man.setting("steps", r.steps);
    man.setting("seed", static_cast<long>(r.seed));
    man.setting("dt", out.dt);
    man.setting("nx", r.nx);
    man.setting("ny", r.ny);
    detail::write_force_settings(man, r.params);
    detail::write_tensor_settings(man, r.tensor);
    man.setting("snapshot_every", r.snapshot_every);
    man.setting("out_dir", std::filesystem::absolute(r.out_dir).string());
    man.setting("stripe_threshold", r.stripe_threshold);
    man.result("force_bound", f);
    man.result("stripe_count", st.full_support ? std::string("0 (full support)") : std::to_string(st.stripes.size()));
    man.result("wall_seconds", detail::seconds_since(t0));
    man.write((dir / "manifest.txt").string());
    if (log)
        *log << r.steps << " particle steps with dt = " << out.dt << "\n";
    return out;
}

} // namespace aniso
