#pragma once

#include "aniso/errors.hpp"
#include "aniso/grid.hpp"
#include "aniso/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

namespace aniso {

/// Interacting particles on the unit torus; the tensor is sampled in the cell containing x_j.
struct ParticleEnsemble {
    std::vector<Vec2> x;
    std::shared_ptr<const TensorField> tensor;
    ForceParams params;

    int n() const { return static_cast<int>(x.size()); }

    int cell_i(double px) const {
        return std::clamp(static_cast<int>(std::floor((px + 0.5) * tensor->nx())), 0, tensor->nx() - 1);
    }
    int cell_j(double py) const {
        return std::clamp(static_cast<int>(std::floor((py + 0.5) * tensor->ny())), 0, tensor->ny() - 1);
    }
};

inline ParticleEnsemble make_ensemble(std::vector<Vec2> x, std::shared_ptr<const TensorField> tensor,
                                      const ForceParams& p) {
    if (!tensor)
        throw PreconditionError("particle ensemble needs a tensor field");
    p.validate();
    for (Vec2& v : x)
        v = wrap_periodic(v);
    return ParticleEnsemble{std::move(x), std::move(tensor), p};
}

/// N positions drawn uniformly from the unit square with a seeded generator.
inline ParticleEnsemble random_ensemble(int n, std::uint64_t seed, std::shared_ptr<const TensorField> tensor,
                                        const ForceParams& p) {
    if (n < 1)
        throw PreconditionError("particle count must be positive");
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    std::vector<Vec2> x(static_cast<std::size_t>(n));
    for (Vec2& v : x) {
        v.x = u(gen);
        v.y = u(gen);
    }
    return make_ensemble(std::move(x), std::move(tensor), p);
}

/// Velocities (1/N) sum_{k != j} F(x_j - x_k, T(x_j)) with minimum-image differences.
inline std::vector<Vec2> particle_velocities(const ParticleEnsemble& ens) {
    const int n = ens.n();
    std::vector<Vec2> v(static_cast<std::size_t>(n));
    const bool homogeneous = ens.tensor->is_homogeneous();
    if (homogeneous) {
        const Vec2 s = ens.tensor->s(0, 0), l = ens.tensor->l(0, 0);
        for (int j = 0; j < n; ++j)
            for (int k = j + 1; k < n; ++k) {
                const Vec2 f = detail::force_unchecked(wrap_periodic(ens.x[j] - ens.x[k]), s, l, ens.params);
                v[j].x += f.x;
                v[j].y += f.y;
                v[k].x -= f.x;
                v[k].y -= f.y;
            }
    } else {
        for (int j = 0; j < n; ++j) {
            const int ci = ens.cell_i(ens.x[j].x), cj = ens.cell_j(ens.x[j].y);
            const Vec2 s = ens.tensor->s(ci, cj), l = ens.tensor->l(ci, cj);
            for (int k = 0; k < n; ++k) {
                if (k == j)
                    continue;
                const Vec2 f = detail::force_unchecked(wrap_periodic(ens.x[j] - ens.x[k]), s, l, ens.params);
                v[j].x += f.x;
                v[j].y += f.y;
            }
        }
    }
    const double inv = 1.0 / n;
    for (Vec2& w : v)
        w = inv * w;
    return v;
}

/// Explicit Euler step followed by periodic wrap.
inline void particle_step(ParticleEnsemble& ens, double dt) {
    if (!(dt > 0))
        throw PreconditionError("particle time step must be positive");
    const std::vector<Vec2> v = particle_velocities(ens);
    for (std::size_t j = 0; j < ens.x.size(); ++j)
        ens.x[j] = wrap_periodic(ens.x[j] + dt * v[j]);
}

/// Default step 0.2 / f with f the force bound.
inline double default_particle_dt(double force_bound) { return 0.2 / force_bound; }

/// Cell-count histogram normalized to unit mass.
inline DensityField histogram(const ParticleEnsemble& ens, const Grid2D& grid) {
    DensityField rho(grid, 0.0);
    const double w = 1.0 / (ens.n() * grid.dx() * grid.dy());
    for (const Vec2& p : ens.x) {
        const int i = std::clamp(static_cast<int>(std::floor((p.x + 0.5) * grid.nx)), 0, grid.nx - 1);
        const int j = std::clamp(static_cast<int>(std::floor((p.y + 0.5) * grid.ny)), 0, grid.ny - 1);
        rho(i, j) += w;
    }
    return rho;
}

} // namespace aniso
