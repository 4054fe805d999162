#include "aniso/kernels.hpp"

#include <gtest/gtest.h>

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace aniso;

namespace {

std::string temp_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "aniso_test_kernels";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

} // namespace

TEST(ForceParams, DefaultsAndValidation) {
    ForceParams p;
    EXPECT_EQ(p.alpha, 270.0);
    EXPECT_EQ(p.beta, 0.1);
    EXPECT_EQ(p.gamma, 10.5);
    EXPECT_EQ(p.e_A, 95.0);
    EXPECT_EQ(p.e_R, 100.0);
    EXPECT_EQ(p.chi, 0.2);
    EXPECT_EQ(p.cutoff, 0.5);
    EXPECT_NO_THROW(p.validate());
    ForceParams bad = p;
    bad.chi = 1.5;
    EXPECT_THROW(bad.validate(), PreconditionError);
    bad = p;
    bad.gamma = -1;
    EXPECT_THROW(bad.validate(), PreconditionError);
    bad = p;
    bad.cutoff = 0;
    EXPECT_THROW(bad.validate(), PreconditionError);
}

TEST(RepulsionCoeff, Values) {
    ForceParams p;
    EXPECT_DOUBLE_EQ(repulsion_coeff(0.0, p), 0.1);
    EXPECT_EQ(repulsion_coeff(0.6, p), 0.0);
    EXPECT_EQ(repulsion_coeff(0.5, p), 0.0);
    // 2.8 e^{-10}
    EXPECT_NEAR(repulsion_coeff(0.1, p), 1.271198033349575843e-4, 1e-14 * 1.3e-4);
    EXPECT_THROW(repulsion_coeff(-1e-3, p), PreconditionError);
}

TEST(AttractionCoeff, Values) {
    ForceParams p;
    EXPECT_EQ(attraction_coeff(0.0, p), 0.0);
    EXPECT_EQ(attraction_coeff(0.5, p), 0.0);
    // -10.5 * 0.05 * e^{-4.75}
    EXPECT_NEAR(attraction_coeff(0.05, p), -4.542139981638332943e-3, 1e-14 * 4.6e-3);
    EXPECT_THROW(attraction_coeff(-0.1, p), PreconditionError);
}

TEST(AttractionCoeff, SignsPointwise) {
    ForceParams p;
    for (int k = 0; k <= 1000; ++k) {
        const double t = 0.6 * k / 1000.0;
        EXPECT_LE(attraction_coeff(t, p), 0.0);
        EXPECT_GE(repulsion_coeff(t, p), 0.0);
    }
}

TEST(CoeffSL, IsotropicCaseAndOrigin) {
    ForceParams p;
    EXPECT_DOUBLE_EQ(coeff_l(0.0, p), 0.1);
    p.chi = 1.0;
    for (int k = 0; k <= 100; ++k) {
        const double t = 0.55 * k / 100.0;
        EXPECT_EQ(coeff_s(t, p), coeff_l(t, p));
    }
    EXPECT_EQ(coeff_s(0.5, ForceParams{}), 0.0);
    EXPECT_EQ(coeff_l(0.7, ForceParams{}), 0.0);
}

TEST(CoeffSL, LongitudinalZeroCrossing) {
    ForceParams p;
    EXPECT_GT(coeff_l(0.01, p), 0.0);
    EXPECT_LT(coeff_l(0.02, p), 0.0);
    std::uintmax_t it = 200;
    auto f = [&p](double t) { return coeff_l(t, p); };
    const auto r = boost::math::tools::toms748_solve(
        f, 0.01, 0.02, [](double a, double b) { return std::abs(b - a) < 1e-16; }, it);
    // extended-precision bisection oracle
    EXPECT_NEAR(0.5 * (r.first + r.second), 0.012992430115498940449, 1e-14);
}

TEST(TotalForce, Basics) {
    ForceParams p;
    const Vec2 s{0, 1}, l{1, 0};
    const Vec2 z = total_force({0, 0}, s, l, p);
    EXPECT_EQ(z.x, 0.0);
    EXPECT_EQ(z.y, 0.0);
    for (double x : {-0.3, -0.05, 0.01, 0.2}) {
        const Vec2 f = total_force({x, 0}, s, l, p);
        EXPECT_DOUBLE_EQ(f.x, coeff_l(std::abs(x), p) * x);
        EXPECT_EQ(f.y, 0.0);
    }
}

TEST(TotalForce, OddnessAndCutoff) {
    ForceParams p;
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-0.6, 0.6), a(0, 2 * M_PI);
    for (int k = 0; k < 2000; ++k) {
        const double th = a(gen);
        const Vec2 s{std::cos(th), std::sin(th)};
        const Vec2 l = normal_of(s);
        const Vec2 d{u(gen), u(gen)};
        const Vec2 f = total_force(d, s, l, p);
        const Vec2 g = total_force(-d, s, l, p);
        const double scale = std::max(norm(f), 1e-300);
        EXPECT_LE(norm(f + g), 1e-14 * scale);
        if (norm(d) >= p.cutoff) {
            EXPECT_EQ(f.x, 0.0);
            EXPECT_EQ(f.y, 0.0);
        }
    }
}

TEST(TotalForce, IsotropyCollapse) {
    ForceParams p;
    p.chi = 1.0;
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-0.4, 0.4), a(0, 2 * M_PI);
    for (int k = 0; k < 500; ++k) {
        const double th = a(gen);
        const Vec2 s{std::cos(th), std::sin(th)};
        const Vec2 d{u(gen), u(gen)};
        const Vec2 f = total_force(d, s, normal_of(s), p);
        const double c = coeff_l(norm(d), p);
        const double tol = 1e-13 * std::abs(c) * norm(d) + 1e-300;
        EXPECT_NEAR(f.x, c * d.x, tol);
        EXPECT_NEAR(f.y, c * d.y, tol);
    }
}

TEST(TotalForce, RejectsBadFrames) {
    ForceParams p;
    EXPECT_THROW(total_force({0.1, 0}, {0, 2}, {1, 0}, p), PreconditionError);
    EXPECT_THROW(total_force({0.1, 0}, {0, 1}, {std::sqrt(0.5), std::sqrt(0.5)}, p), PreconditionError);
}

TEST(TotalForce, EtaRescaling) {
    ForceParams p;
    ForceParams q = p;
    q.eta = 2.0;
    const Vec2 s{0.6, 0.8};
    const Vec2 d{0.03, -0.02};
    const Vec2 a = total_force(d, s, normal_of(s), q);
    const Vec2 b = total_force(2.0 * d, s, normal_of(s), p);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.y, b.y);
}

TEST(HomogeneousTensor, Construction) {
    const TensorField t = build_homogeneous_tensor({0, 1}, 4, 3);
    EXPECT_TRUE(t.is_homogeneous());
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j) {
            EXPECT_EQ(t.l(i, j).x, 1.0);
            EXPECT_EQ(t.l(i, j).y, 0.0);
        }
    const TensorField n = build_homogeneous_tensor({0, 2}, 2, 2);
    EXPECT_EQ(n.s(1, 1).x, 0.0);
    EXPECT_EQ(n.s(1, 1).y, 1.0);
    const TensorField r = build_homogeneous_tensor({1, 1}, 2, 2);
    EXPECT_NEAR(r.l(0, 0).x, 1 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(r.l(0, 0).y, -1 / std::sqrt(2.0), 1e-15);
    EXPECT_THROW(build_homogeneous_tensor({0, 0}, 2, 2), PreconditionError);
}

TEST(TensorFieldFile, HomogeneousFile) {
    const std::string path = temp_path("hom.txt");
    std::string text = "3 2\n";
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j)
            text += std::to_string(i) + " " + std::to_string(j) + " 0 1\n";
    write_file(path, text);
    const TensorField t = load_tensor_field(path);
    EXPECT_EQ(t.nx(), 3);
    EXPECT_EQ(t.ny(), 2);
    EXPECT_TRUE(t.is_homogeneous());
    EXPECT_EQ(t.hash(), build_homogeneous_tensor({0, 1}, 3, 2).hash());
    EXPECT_THROW(load_tensor_field(path, 4, 2), IoError);
}

TEST(TensorFieldFile, Errors) {
    const std::string path = temp_path("bad.txt");
    write_file(path, "1 2\n0 0 0 1\n0 1 0 0\n");
    EXPECT_THROW(load_tensor_field(path), IoError);
    write_file(path, "1 2\n0 0 0 1\n0 0 0 1\n");
    EXPECT_THROW(load_tensor_field(path), IoError);
    write_file(path, "1 2\n0 0 0 1\n");
    EXPECT_THROW(load_tensor_field(path), IoError);
    write_file(path, "1 2\n0 0 0 1\n0 1 zero 1\n");
    EXPECT_THROW(load_tensor_field(path), IoError);
    write_file(path, "1 2\n0 0 0 1\n0 5 0 1\n");
    EXPECT_THROW(load_tensor_field(path), IoError);
    EXPECT_THROW(load_tensor_field(temp_path("does_not_exist.txt")), IoError);
}

TEST(TensorFieldFile, RoundTrip) {
    std::mt19937_64 gen(11);
    std::normal_distribution<double> n(0, 1);
    std::vector<Vec2> s(5 * 4);
    for (Vec2& v : s)
        v = {n(gen), n(gen)};
    const TensorField t(5, 4, s);
    const std::string path = temp_path("rt.txt");
    save_tensor_field(path, t);
    const TensorField u = load_tensor_field(path, 5, 4);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 4; ++j) {
            EXPECT_NEAR(u.s(i, j).x, t.s(i, j).x, 4e-16);
            EXPECT_NEAR(u.s(i, j).y, t.s(i, j).y, 4e-16);
            EXPECT_NEAR(norm(u.s(i, j)), 1.0, kUnitTolerance);
            EXPECT_NEAR(dot(u.s(i, j), u.l(i, j)), 0.0, kUnitTolerance);
        }
}
