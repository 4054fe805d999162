#include "aniso/analysis.hpp"
#include "aniso/io.hpp"
#include "aniso/runs.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace aniso;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / "aniso_test_io" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

KeyValueConfig small_run(const fs::path& out) {
    KeyValueConfig c;
    c.set("grid", "16");
    c.set("delta", "1e-9");
    c.set("init", "gaussian");
    c.set("init_sigma", "0.1");
    c.set("max_steps", "6");
    c.set("tol_stat", "0");
    c.set("snapshot_every", "3");
    c.set("cross_section", "true");
    c.set("out_dir", out.string());
    return c;
}

} // namespace

TEST(Config, ParseFileAndOverrides) {
    const fs::path d = scratch("cfg");
    {
        std::ofstream out(d / "run.cfg");
        out << "# comment\n\n  grid = 20  \ndelta=1e-9\ninit_file = rho.csv\nL = 0.1, 0.2,0.4\nflag = yes\n";
    }
    KeyValueConfig c = KeyValueConfig::from_file((d / "run.cfg").string());
    EXPECT_EQ(c.get_int("grid", 0), 20);
    EXPECT_EQ(c.get_double("delta", 0), 1e-9);
    EXPECT_EQ(c.get_path("init_file", ""), (d / "rho.csv").lexically_normal().string());
    EXPECT_EQ(c.get_doubles("L", {}), (std::vector<double>{0.1, 0.2, 0.4}));
    EXPECT_TRUE(c.get_bool("flag", false));
    EXPECT_EQ(c.get_double("missing", 7.5), 7.5);
    c.apply_override("grid=30");
    c.apply_override(" delta = 2e-9 ");
    EXPECT_EQ(c.get_int("grid", 0), 30);
    EXPECT_EQ(c.get_double("delta", 0), 2e-9);
    EXPECT_EQ(c.get_path("abs", "/tmp/x"), "/tmp/x");
}

TEST(Config, Errors) {
    KeyValueConfig c;
    EXPECT_THROW(c.apply_override("novalue"), ConfigError);
    EXPECT_THROW(c.apply_override("=3"), ConfigError);
    c.set("x", "1.5e");
    EXPECT_THROW(c.get_double("x", 0), ConfigError);
    c.set("x", "2.5");
    EXPECT_THROW(c.get_long("x", 0), ConfigError);
    c.set("x", "maybe");
    EXPECT_THROW(c.get_bool("x", false), ConfigError);
    c.set("x", "1,,2");
    EXPECT_THROW(c.get_doubles("x", {}), ConfigError);
    c.set("x", "99999999999");
    EXPECT_THROW(c.get_int("x", 0), ConfigError);
    EXPECT_THROW(c.check_known({"y"}), ConfigError);
    EXPECT_NO_THROW(c.check_known({"x"}));
    EXPECT_THROW(KeyValueConfig::from_file("/nonexistent/run.cfg"), IoError);
    const fs::path d = scratch("cfgbad");
    {
        std::ofstream out(d / "bad.cfg");
        out << "grid 20\n";
    }
    EXPECT_THROW(KeyValueConfig::from_file((d / "bad.cfg").string()), ConfigError);
}

TEST(RunConfig, Validation) {
    KeyValueConfig c;
    EXPECT_NO_THROW(read_run_config(c));
    const RunConfig d = read_run_config(c);
    EXPECT_EQ(d.nx, 50);
    EXPECT_EQ(d.delta, 1e-10);
    EXPECT_EQ(d.initial.kind, InitialSpec::Kind::Disc);
    EXPECT_EQ(d.initial.radius, 0.05);
    c.set("unknown_key", "1");
    EXPECT_THROW(read_run_config(c), ConfigError);
    KeyValueConfig b;
    b.set("safety", "1.2");
    EXPECT_THROW(read_run_config(b), ConfigError);
    b = {};
    b.set("init", "spiral");
    EXPECT_THROW(read_run_config(b), ConfigError);
    b = {};
    b.set("chi", "2");
    EXPECT_THROW(read_run_config(b), Error);
    b = {};
    b.set("tensor", "file");
    b.set("tensor_file", "/nonexistent/field.txt");
    EXPECT_THROW(read_run_config(b), ConfigError);
    b = {};
    b.set("init", "file");
    EXPECT_THROW(read_run_config(b), ConfigError);
}

TEST(Writers, DensityCsvRoundTripAndPgm) {
    const fs::path d = scratch("writers");
    const Grid2D g(7, 5);
    DensityField r(g);
    for (std::size_t c = 0; c < g.cells(); ++c)
        r.values[c] = 0.1 + 1.0 / (3.0 + c);
    write_density_csv((d / "rho.csv").string(), r);
    const DensityField back = read_density_csv((d / "rho.csv").string(), g);
    EXPECT_EQ(back.values, r.values);
    write_pgm((d / "rho.pgm").string(), r);
    std::ifstream in(d / "rho.pgm");
    std::string magic;
    int w, h, mx;
    in >> magic >> w >> h >> mx;
    EXPECT_EQ(magic, "P2");
    EXPECT_EQ(w, 7);
    EXPECT_EQ(h, 5);
    EXPECT_EQ(mx, 255);
    write_cross_section_csv((d / "cs.csv").string(), r);
    const std::string cs = slurp(d / "cs.csv");
    EXPECT_EQ(cs.substr(0, 6), "x,rho\n");
    EXPECT_EQ(std::count(cs.begin(), cs.end(), '\n'), 8);
    EXPECT_THROW(write_density_csv("/nonexistent/dir/rho.csv", r), IoError);
}

TEST(Analysis, StripeDetection) {
    std::vector<double> p(20, 0.0);
    p[0] = 1.0;
    p[19] = 0.5;
    p[8] = 2.0;
    p[9] = 2.0;
    const StripeReport s = find_stripes(p, 1e-3);
    ASSERT_EQ(s.stripes.size(), 2u);
    EXPECT_FALSE(s.full_support);
    EXPECT_NEAR(s.stripes[0].center, 8.5, 1e-14);
    EXPECT_NEAR(s.stripes[1].center, std::fmod((19 * 0.5 + 20 * 1.0) / 1.5, 20.0), 1e-14);
    const std::vector<double> sp = stripe_spacings(s, 20);
    EXPECT_NEAR(sp[0] + sp[1], 20.0, 1e-12);
    const StripeReport f = find_stripes(std::vector<double>(10, 1.0), 1e-3);
    EXPECT_TRUE(f.full_support);
    EXPECT_EQ(f.components(), 1);
    std::vector<char> a(10, 0), b(10, 0);
    a[0] = 1;
    b[3] = 1;
    b[9] = 1;
    EXPECT_EQ(column_set_distance(a, b), 3);
    EXPECT_EQ(column_set_distance(a, a), 0);
}

TEST(Runs, SimulateWritesOutputs) {
    const fs::path d = scratch("sim");
    const SimulateOutcome o = run_simulate(read_run_config(small_run(d)));
    EXPECT_EQ(o.result.state.n, 6);
    for (const char* f : {"diagnostics.csv", "final.csv", "final.pgm", "cross_section.csv", "manifest.txt",
                          "snapshot_00000000.csv", "snapshot_00000003.csv", "snapshot_00000000.pgm"})
        EXPECT_TRUE(fs::exists(d / f)) << f;
    const std::string diag = slurp(d / "diagnostics.csv");
    EXPECT_EQ(diag.substr(0, diag.find('\n')), "n,t,dt,mass,comx,comy,min,max,l2,umax");
    EXPECT_EQ(std::count(diag.begin(), diag.end(), '\n'), 8);
    const std::string man = slurp(d / "manifest.txt");
    EXPECT_NE(man.find("nx = 16\n"), std::string::npos);
    EXPECT_NE(man.find("delta = 1e-09\n"), std::string::npos);
    EXPECT_NE(man.find("# termination = max_steps"), std::string::npos);
    EXPECT_NEAR(read_density_csv((d / "final.csv").string(), Grid2D(16, 16)).mass(), 1.0, 1e-13);
}

TEST(Runs, SimulateDeterministic) {
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    KeyValueConfig ca = small_run(a), cb = small_run(b);
    ca.set("init", "noise");
    cb.set("init", "noise");
    run_simulate(read_run_config(ca));
    run_simulate(read_run_config(cb));
    EXPECT_EQ(slurp(a / "final.csv"), slurp(b / "final.csv"));
    EXPECT_EQ(slurp(a / "diagnostics.csv"), slurp(b / "diagnostics.csv"));
}

TEST(Runs, TableCacheReused) {
    const fs::path d = scratch("cache");
    KeyValueConfig c = small_run(d);
    c.set("table_cache", (d / "t.bin").string());
    run_precompute(read_run_config(c));
    ASSERT_TRUE(fs::exists(d / "t.bin"));
    bool cached = false;
    const RunConfig r = read_run_config(c);
    obtain_force_table(r, r.tensor.build(r.nx, r.ny), &cached);
    EXPECT_TRUE(cached);
    KeyValueConfig n = small_run(d);
    EXPECT_THROW(run_precompute(read_run_config(n)), ConfigError);
}

TEST(Runs, StripesAndDeltaL) {
    const fs::path d = scratch("oned");
    KeyValueConfig s;
    s.set("n", "4");
    s.set("out_dir", d.string());
    const std::vector<double> r = run_stripes(s);
    ASSERT_EQ(r.size(), 4u);
    const std::string csv = slurp(d / "residual.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "k,x_k,residual");
    KeyValueConfig bad;
    bad.set("positions", "0.2,0.1");
    EXPECT_THROW(run_stripes(bad), ConfigError);
    bad = {};
    bad.set("n", "2");
    bad.set("positions", "0.1");
    EXPECT_THROW(run_stripes(bad), ConfigError);

    KeyValueConfig l;
    l.set("L", "0.05,0.1");
    l.set("out_dir", d.string());
    const auto dl = run_deltaL(l);
    ASSERT_EQ(dl.size(), 2u);
    EXPECT_LT(dl[0].second, dl[1].second);
    EXPECT_TRUE(fs::exists(d / "delta_of_L.csv"));
}

TEST(Runs, Stationary1D) {
    const fs::path d = scratch("stat");
    KeyValueConfig c;
    c.set("m", "256");
    c.set("out_dir", d.string());
    const Stationary1DOutcome o = run_stationary1d(c);
    EXPECT_NEAR(o.delta, 0.5 * o.potential.W_L1(), 1e-25);
    EXPECT_NEAR(o.rho.mass(), 1.0, 1e-13);
    for (const char* f : {"potential.csv", "rho.csv", "manifest.txt"})
        EXPECT_TRUE(fs::exists(d / f)) << f;
    KeyValueConfig above = c;
    above.set("delta_rel", "1.1");
    EXPECT_THROW(run_stationary1d(above), PreconditionError);
    KeyValueConfig both = c;
    both.set("delta", "1e-8");
    both.set("delta_rel", "0.5");
    EXPECT_THROW(run_stationary1d(both), ConfigError);
    KeyValueConfig meth = c;
    meth.set("method", "newton");
    EXPECT_THROW(run_stationary1d(meth), ConfigError);
}

TEST(Runs, ParticlesShort) {
    const fs::path d = scratch("part");
    KeyValueConfig c;
    c.set("N", "30");
    c.set("steps", "20");
    c.set("seed", "3");
    c.set("grid", "10");
    c.set("out_dir", d.string());
    const ParticleOutcome o = run_particles(read_particle_config(c));
    EXPECT_EQ(o.ensemble.n(), 30);
    for (const char* f : {"positions_final.csv", "histogram.csv", "histogram.pgm", "manifest.txt"})
        EXPECT_TRUE(fs::exists(d / f)) << f;
    KeyValueConfig bad = c;
    bad.set("N", "0");
    EXPECT_THROW(read_particle_config(bad), ConfigError);
}
