#pragma once

#include "aniso/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace aniso {

/// Periodic Cartesian grid on [-0.5, 0.5]^2; cell (i,j) covers [x_i, x_i+dx) x [y_j, y_j+dy).
struct Grid2D {
    int nx = 0;
    int ny = 0;

    Grid2D() = default;
    Grid2D(int nx_, int ny_) : nx(nx_), ny(ny_) {
        if (nx <= 0 || ny <= 0)
            throw PreconditionError("grid dimensions must be positive");
    }

    double dx() const { return 1.0 / nx; }
    double dy() const { return 1.0 / ny; }
    double x_center(int i) const { return -0.5 + (i + 0.5) * dx(); }
    double y_center(int j) const { return -0.5 + (j + 0.5) * dy(); }
    std::size_t cells() const { return static_cast<std::size_t>(nx) * ny; }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * ny + j; }
    int wrap_i(int i) const { return ((i % nx) + nx) % nx; }
    int wrap_j(int j) const { return ((j % ny) + ny) % ny; }

    bool operator==(const Grid2D&) const = default;
};

/// Cell-averaged density; value (i,j) stored at i*ny + j.
struct DensityField {
    Grid2D grid;
    std::vector<double> values;

    DensityField() = default;
    explicit DensityField(Grid2D g, double fill = 0.0) : grid(g), values(g.cells(), fill) {}
    DensityField(Grid2D g, std::vector<double> v) : grid(g), values(std::move(v)) {
        if (values.size() != grid.cells())
            throw PreconditionError("density size does not match grid");
    }

    double& operator()(int i, int j) { return values[grid.index(i, j)]; }
    double operator()(int i, int j) const { return values[grid.index(i, j)]; }

    double mass() const {
        double m = 0.0;
        for (double v : values)
            m += v;
        return m * grid.dx() * grid.dy();
    }

    double max() const { return *std::max_element(values.begin(), values.end()); }
    double min() const { return *std::min_element(values.begin(), values.end()); }

    /// Checks nonnegativity, finiteness and unit mass within `mass_tol`.
    void validate(double mass_tol = 1e-12) const {
        if (values.size() != grid.cells())
            throw PreconditionError("density size does not match grid");
        for (double v : values)
            if (!(v >= 0) || !std::isfinite(v))
                throw PreconditionError("density must be finite and nonnegative");
        if (std::abs(mass() - 1.0) > mass_tol)
            throw PreconditionError("density must have unit mass");
    }
};

/// Per-cell velocity components.
struct VelocityField {
    Grid2D grid;
    std::vector<double> ux;
    std::vector<double> uy;

    VelocityField() = default;
    explicit VelocityField(Grid2D g) : grid(g), ux(g.cells(), 0.0), uy(g.cells(), 0.0) {}

    double max_abs() const {
        double m = 0.0;
        for (std::size_t c = 0; c < ux.size(); ++c)
            m = std::max({m, std::abs(ux[c]), std::abs(uy[c])});
        return m;
    }
};

} // namespace aniso
