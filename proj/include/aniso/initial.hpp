#pragma once

#include "aniso/errors.hpp"
#include "aniso/grid.hpp"
#include "aniso/kernels.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace aniso {

/// Initial-data recipe. `Noise` is 1 + amplitude * U(-1, 1) per cell from a seeded generator.
struct InitialSpec {
    enum class Kind { Uniform, Disc, Gaussian, Noise, File };
    Kind kind = Kind::Uniform;
    Vec2 center{};
    double radius = 0.05;
    double sigma = 0.05;
    double amplitude = 1e-3;
    std::uint64_t seed = 1;
    std::string path;

    static InitialSpec uniform() { return {}; }
    static InitialSpec disc(Vec2 c, double r) {
        InitialSpec s;
        s.kind = Kind::Disc;
        s.center = c;
        s.radius = r;
        return s;
    }
    static InitialSpec gaussian(Vec2 c, double sigma) {
        InitialSpec s;
        s.kind = Kind::Gaussian;
        s.center = c;
        s.sigma = sigma;
        return s;
    }
    static InitialSpec noise(double amplitude, std::uint64_t seed) {
        InitialSpec s;
        s.kind = Kind::Noise;
        s.amplitude = amplitude;
        s.seed = seed;
        return s;
    }
    static InitialSpec file(std::string path) {
        InitialSpec s;
        s.kind = Kind::File;
        s.path = std::move(path);
        return s;
    }
};

inline void normalize_mass(DensityField& rho, const std::string& what) {
    const double m = rho.mass();
    if (!(m > 0) || !std::isfinite(m))
        throw PreconditionError(what + ": initial data has no positive mass");
    for (double& v : rho.values)
        v /= m;
}

/// Reads a density CSV "i,j,x_center,y_center,rho" (header line required).
inline DensityField read_density_csv(const std::string& path, const Grid2D& grid) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open density file: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw IoError(path + ": empty density file");
    DensityField rho(grid, 0.0);
    std::vector<char> seen(grid.cells(), 0);
    std::size_t count = 0;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        for (char& ch : line)
            if (ch == ',')
                ch = ' ';
        std::istringstream ls(line);
        long i, j;
        double x, y, v;
        if (!(ls >> i >> j >> x >> y >> v))
            throw IoError(path + ":" + std::to_string(lineno) + ": malformed density row");
        if (i < 0 || i >= grid.nx || j < 0 || j >= grid.ny)
            throw IoError(path + ":" + std::to_string(lineno) + ": cell index out of range for grid");
        const std::size_t c = grid.index(static_cast<int>(i), static_cast<int>(j));
        if (seen[c])
            throw IoError(path + ":" + std::to_string(lineno) + ": duplicate cell");
        if (!(v >= 0) || !std::isfinite(v))
            throw IoError(path + ":" + std::to_string(lineno) + ": negative or non-finite density");
        seen[c] = 1;
        rho.values[c] = v;
        ++count;
    }
    if (count != grid.cells())
        throw IoError(path + ": expected " + std::to_string(grid.cells()) + " cells, found " + std::to_string(count));
    return rho;
}

/// Cell averages by 4x4 subsampling per cell, normalized to unit mass.
inline DensityField discretize_initial(const InitialSpec& spec, const Grid2D& grid) {
    DensityField rho(grid, 0.0);
    switch (spec.kind) {
    case InitialSpec::Kind::Uniform:
        rho.values.assign(grid.cells(), 1.0);
        break;
    case InitialSpec::Kind::Noise: {
        if (!(spec.amplitude >= 0 && spec.amplitude < 1))
            throw PreconditionError("noise amplitude must lie in [0, 1)");
        std::mt19937_64 gen(spec.seed);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        for (double& v : rho.values)
            v = 1.0 + spec.amplitude * dist(gen);
        break;
    }
    case InitialSpec::Kind::Disc:
    case InitialSpec::Kind::Gaussian: {
        const bool disc = spec.kind == InitialSpec::Kind::Disc;
        if (disc && !(spec.radius > 0))
            throw PreconditionError("disc radius must be positive");
        if (!disc && !(spec.sigma > 0))
            throw PreconditionError("gaussian width must be positive");
        constexpr int sub = 4;
        for (int i = 0; i < grid.nx; ++i)
            for (int j = 0; j < grid.ny; ++j) {
                double acc = 0.0;
                for (int a = 0; a < sub; ++a)
                    for (int b = 0; b < sub; ++b) {
                        const Vec2 p{-0.5 + (i + (a + 0.5) / sub) * grid.dx(), -0.5 + (j + (b + 0.5) / sub) * grid.dy()};
                        const Vec2 d = wrap_periodic(p - spec.center);
                        const double r2 = dot(d, d);
                        acc += disc ? (r2 <= spec.radius * spec.radius ? 1.0 : 0.0)
                                    : std::exp(-r2 / (2.0 * spec.sigma * spec.sigma));
                    }
                rho(i, j) = acc / (sub * sub);
            }
        break;
    }
    case InitialSpec::Kind::File:
        rho = read_density_csv(spec.path, grid);
        break;
    }
    normalize_mass(rho, "discretize_initial");
    return rho;
}

} // namespace aniso
