#include "aniso/convolution.hpp"
#include "aniso/initial.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace aniso;

namespace {

DensityField random_density(const Grid2D& g, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    DensityField r(g);
    for (double& v : r.values)
        v = u(gen) * u(gen);
    normalize_mass(r, "test");
    return r;
}

double rel_linf(const VelocityField& a, const VelocityField& b) {
    double d = 0.0, m = 0.0;
    for (std::size_t c = 0; c < a.ux.size(); ++c) {
        d = std::max({d, std::abs(a.ux[c] - b.ux[c]), std::abs(a.uy[c] - b.uy[c])});
        m = std::max({m, std::abs(b.ux[c]), std::abs(b.uy[c])});
    }
    return d / m;
}

} // namespace

TEST(ForceBound, OnlyBeta) {
    ForceParams p;
    p.alpha = 0;
    p.gamma = 0;
    p.e_R = 0;
    p.e_A = 0;
    EXPECT_GE(force_bound(p), p.beta * p.cutoff);
}

TEST(ForceBound, DefaultAgainstDenseSampling) {
    ForceParams p;
    const double f = force_bound(p);
    EXPECT_TRUE(std::isfinite(f));
    EXPECT_GT(f, 0.0);
    // 1e6-point sampling oracle times 1.01
    EXPECT_NEAR(f, 4.418556472808023e-4, 1e-6 * 4.42e-4);
    // the bound dominates |F| at dense radii
    for (int k = 0; k <= 200000; ++k) {
        const double r = 0.5 * k / 200000.0;
        EXPECT_LE(r * std::max(std::abs(coeff_s(r, p)), std::abs(coeff_l(r, p))), f);
    }
}

TEST(ForceBound, IsotropicEqualsLongitudinalOnly) {
    ForceParams p;
    p.chi = 1.0;
    double m = 0.0;
    for (int k = 0; k <= 20000; ++k) {
        const double r = 0.5 * k / 20000.0;
        m = std::max(m, r * std::abs(coeff_l(r, p)));
    }
    EXPECT_DOUBLE_EQ(force_bound(p), 1.01 * m);
}

TEST(ForceTable, HomogeneousAntisymmetryAndCutoff) {
    const Grid2D g(24, 24);
    const TensorField t = build_homogeneous_tensor({0.6, 0.8}, 24, 24);
    const ForceTable tab = precompute_force_table(g, t, ForceParams{});
    ASSERT_EQ(tab.mode, TableMode::Homogeneous);
    const double diag = std::hypot(g.dx(), g.dy());
    for (std::size_t c = 0; c < g.cells(); ++c) {
        const std::size_t pc = tab.partner(c);
        EXPECT_EQ(tab.force.x[c], -tab.force.x[pc]);
        EXPECT_EQ(tab.force.y[c], -tab.force.y[pc]);
        const int di = static_cast<int>(c / g.ny), dj = static_cast<int>(c % g.ny);
        const double d = std::hypot(wrap_periodic(di * g.dx()), wrap_periodic(dj * g.dy()));
        if (d > 0.5 + diag) {
            EXPECT_EQ(tab.force.x[c], 0.0);
            EXPECT_EQ(tab.force.y[c], 0.0);
        }
    }
}

TEST(ForceTable, QuadratureOrderRefinement) {
    const Grid2D g(20, 20);
    const TensorField t = build_homogeneous_tensor({0, 1}, 20, 20);
    const ForceTable a = precompute_force_table(g, t, ForceParams{}, 4, true);
    const ForceTable b = precompute_force_table(g, t, ForceParams{}, 8, true);
    double mx = 0.0;
    for (const auto* v : {&b.ks.x, &b.ks.y, &b.kl.x, &b.kl.y})
        for (double x : *v)
            mx = std::max(mx, std::abs(x));
    const std::vector<double>* av[] = {&a.ks.x, &a.ks.y, &a.kl.x, &a.kl.y};
    const std::vector<double>* bv[] = {&b.ks.x, &b.ks.y, &b.kl.x, &b.kl.y};
    for (int k = 0; k < 4; ++k)
        for (std::size_t c = 0; c < g.cells(); ++c) {
            const double x = (*av[k])[c], y = (*bv[k])[c];
            EXPECT_LE(std::abs(x - y), 1e-10 * std::max(std::abs(y), 1e-6 * mx)) << "component " << k << " cell " << c;
        }
}

TEST(Velocity, UniformDensityGivesZero) {
    const Grid2D g(30, 30);
    const ForceTable tab = precompute_force_table(g, build_homogeneous_tensor({0, 1}, 30, 30), ForceParams{});
    const VelocityField u = velocity_field(DensityField(g, 1.0), tab);
    EXPECT_LE(u.max_abs(), 1e-18);
}

TEST(Velocity, ColumnSymmetry) {
    const Grid2D g(32, 32);
    const ForceTable tab = precompute_force_table(g, build_homogeneous_tensor({0, 1}, 32, 32), ForceParams{});
    DensityField r(g);
    const int c0 = 10;
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (int k = 0; k <= 16; ++k)
        for (int j = 0; j < 32; ++j) {
            const double v = u(gen);
            r(g.wrap_i(c0 + k), j) = v;
            r(g.wrap_i(c0 - k), j) = v;
        }
    normalize_mass(r, "test");
    const VelocityField v = velocity_field(r, tab);
    const double f = force_bound(ForceParams{});
    for (int k = 0; k <= 16; ++k)
        for (int j = 0; j < 32; ++j)
            EXPECT_NEAR(v.ux[g.index(g.wrap_i(c0 + k), j)], -v.ux[g.index(g.wrap_i(c0 - k), j)], 1e-15 * f);
}

TEST(Velocity, FastMatchesDirectHomogeneous) {
    const Grid2D g(32, 32);
    const ForceTable tab = precompute_force_table(g, build_homogeneous_tensor({0.28, 0.96}, 32, 32), ForceParams{});
    const DensityField r = random_density(g, 17);
    EXPECT_LE(rel_linf(velocity_field(r, tab), velocity_field_direct(r, tab)), 1e-10);
}

TEST(Velocity, FastMatchesDirectInhomogeneous) {
    const Grid2D g(32, 32);
    const TensorField t = load_tensor_field(std::string(ANISO_TEST_DATA) + "/tensor_swirl_32.txt", 32, 32);
    ASSERT_FALSE(t.is_homogeneous());
    const ForceTable tab = precompute_force_table(g, t, ForceParams{});
    ASSERT_EQ(tab.mode, TableMode::Factored);
    const DensityField r = random_density(g, 23);
    EXPECT_LE(rel_linf(velocity_field(r, tab), velocity_field_direct(r, tab)), 1e-10);
}

TEST(Velocity, FactoredAgreesWithHomogeneousTable) {
    const Grid2D g(24, 24);
    const TensorField t = build_homogeneous_tensor({0.6, -0.8}, 24, 24);
    const ForceTable a = precompute_force_table(g, t, ForceParams{});
    const ForceTable b = precompute_force_table(g, t, ForceParams{}, 4, true);
    const DensityField r = random_density(g, 31);
    EXPECT_LE(rel_linf(velocity_field(r, b), velocity_field(r, a)), 1e-12);
}

TEST(Velocity, BoundedByForceBound) {
    const Grid2D g(40, 40);
    const ForceParams p;
    const ForceTable tab = precompute_force_table(g, build_homogeneous_tensor({0, 1}, 40, 40), p);
    const double f = force_bound(p);
    ConvolutionEngine eng(tab);
    for (std::uint64_t s = 0; s < 20; ++s) {
        DensityField r(g);
        r.values[s * 37 % g.cells()] = 1.0;
        normalize_mass(r, "dirac");
        EXPECT_LE(eng.velocity(r).max_abs(), f);
        EXPECT_LE(eng.velocity(random_density(g, s)).max_abs(), f);
    }
}

TEST(Velocity, Linearity) {
    const Grid2D g(32, 32);
    const TensorField t = load_tensor_field(std::string(ANISO_TEST_DATA) + "/tensor_swirl_32.txt", 32, 32);
    const ForceTable tab = precompute_force_table(g, t, ForceParams{});
    const DensityField r1 = random_density(g, 1), r2 = random_density(g, 2);
    DensityField mix(g);
    for (std::size_t c = 0; c < g.cells(); ++c)
        mix.values[c] = 0.3 * r1.values[c] + 0.7 * r2.values[c];
    const VelocityField a = velocity_field(r1, tab), b = velocity_field(r2, tab), m = velocity_field(mix, tab);
    const double f = force_bound(ForceParams{});
    for (std::size_t c = 0; c < g.cells(); ++c) {
        EXPECT_NEAR(m.ux[c], 0.3 * a.ux[c] + 0.7 * b.ux[c], 1e-15 * f);
        EXPECT_NEAR(m.uy[c], 0.3 * a.uy[c] + 0.7 * b.uy[c], 1e-15 * f);
    }
}

TEST(Velocity, GridMismatchRejected) {
    const ForceTable tab = precompute_force_table(Grid2D(8, 8), build_homogeneous_tensor({0, 1}, 8, 8), ForceParams{});
    EXPECT_THROW(velocity_field(DensityField(Grid2D(8, 9), 1.0), tab), PreconditionError);
    EXPECT_THROW(precompute_force_table(Grid2D(8, 8), build_homogeneous_tensor({0, 1}, 8, 9), ForceParams{}),
                 PreconditionError);
}

TEST(TableCache, RoundTripAndKeyMismatch) {
    const auto dir = std::filesystem::temp_directory_path() / "aniso_test_conv";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "table.bin").string();
    const Grid2D g(16, 16);
    const TensorField t = load_tensor_field(std::string(ANISO_TEST_DATA) + "/tensor_swirl_32.txt", 32, 32);
    const TensorField h = build_homogeneous_tensor({0, 1}, 16, 16);
    const ForceTable a = precompute_force_table(g, h, ForceParams{});
    save_force_table(path, a);
    const auto b = load_force_table(path, g, h, ForceParams{}, 4);
    ASSERT_TRUE(b.has_value());
    EXPECT_EQ(b->force.x, a.force.x);
    EXPECT_EQ(b->force.y, a.force.y);
    ForceParams other;
    other.chi = 0.3;
    EXPECT_FALSE(load_force_table(path, g, h, other, 4).has_value());
    EXPECT_FALSE(load_force_table(path, g, h, ForceParams{}, 5).has_value());
    EXPECT_FALSE(load_force_table(path, g, build_homogeneous_tensor({1, 0}, 16, 16), ForceParams{}, 4).has_value());
    EXPECT_FALSE(load_force_table((dir / "missing.bin").string(), g, h, ForceParams{}, 4).has_value());
    {
        std::ofstream bad((dir / "bad.bin").string(), std::ios::binary);
        bad << "NOTATABLE-------------------------------------------------------------------------------------"
               "------------------------------------------";
    }
    EXPECT_THROW(load_force_table((dir / "bad.bin").string(), g, h, ForceParams{}, 4), IoError);

    const Grid2D g32(32, 32);
    const ForceTable f = precompute_force_table(g32, t, ForceParams{});
    save_force_table(path, f);
    const auto fl = load_force_table(path, g32, t, ForceParams{}, 4);
    ASSERT_TRUE(fl.has_value());
    EXPECT_EQ(fl->mode, TableMode::Factored);
    EXPECT_EQ(fl->ks.x, f.ks.x);
    EXPECT_EQ(fl->kl.y, f.kl.y);
}
