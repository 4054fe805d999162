// Command-line driver: one subcommand per experiment family.

#include "aniso/aniso.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

namespace {

struct Common {
    std::string config;
    std::vector<std::string> overrides;
    bool quiet = false;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("-c,--config", c.config, "key = value config file");
    sub->add_option("-s,--set", c.overrides, "override, key=value (repeatable)");
    sub->add_flag("-q,--quiet", c.quiet, "no progress output");
}

aniso::KeyValueConfig load(const Common& c) {
    aniso::KeyValueConfig kv;
    if (!c.config.empty())
        kv = aniso::KeyValueConfig::from_file(c.config);
    else
        kv.set_base_dir(std::filesystem::current_path().string());
    for (const std::string& o : c.overrides)
        kv.apply_override(o);
    return kv;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"anisotropic nonlocal aggregation solver"};
    app.require_subcommand(1);
    Common common;
    auto* sim = app.add_subcommand("simulate", "continuum finite-volume run");
    auto* pre = app.add_subcommand("precompute", "build and cache the cell-pair force table");
    auto* s1d = app.add_subcommand("stationary1d", "1D stationary state (fixed point or energy minimizer)");
    auto* dl = app.add_subcommand("deltaL", "delta(L) eigenvalue sweep");
    auto* st = app.add_subcommand("stripes", "torus stripe equilibrium residuals");
    auto* pa = app.add_subcommand("particles", "interacting particle run");
    auto* ga = app.add_subcommand("gamma", "Gamma-convergence probe");
    for (CLI::App* s : {sim, pre, s1d, dl, st, pa, ga})
        add_common(s, common);

    CLI11_PARSE(app, argc, argv);

    std::ostream* log = common.quiet ? nullptr : &std::cerr;
    try {
        const aniso::KeyValueConfig kv = load(common);
        if (*sim) {
            aniso::run_simulate(aniso::read_run_config(kv), log);
        } else if (*pre) {
            aniso::run_precompute(aniso::read_run_config(kv), log);
        } else if (*s1d) {
            aniso::run_stationary1d(kv, log);
        } else if (*dl) {
            aniso::run_deltaL(kv, log);
        } else if (*st) {
            aniso::run_stripes(kv, log);
        } else if (*pa) {
            aniso::run_particles(aniso::read_particle_config(kv), log);
        } else if (*ga) {
            aniso::run_gamma(kv, log);
        }
    } catch (const aniso::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const aniso::PreconditionError& e) {
        std::cerr << "precondition error: " << e.what() << '\n';
        return 2;
    } catch (const aniso::IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return 3;
    } catch (const aniso::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 4;
    } catch (const aniso::ConvergenceError& e) {
        std::cerr << "convergence error: " << e.what() << '\n';
        return 4;
    } catch (const aniso::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
