#pragma once

#include "aniso/convolution.hpp"
#include "aniso/errors.hpp"
#include "aniso/grid.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace aniso {

struct SchemeState {
    DensityField rho;
    double t = 0.0;
    long n = 0;
    double delta = 0.0;
    double f = 0.0;
};

struct Diagnostics {
    double mass = 0.0;
    double comx = 0.0;
    double comy = 0.0;
    double min = 0.0;
    double max = 0.0;
    double l2 = 0.0;
    double umax = 0.0;
};

inline Diagnostics diagnostics(const DensityField& rho, const VelocityField& u) {
    const Grid2D& g = rho.grid;
    const double area = g.dx() * g.dy();
    Diagnostics d;
    d.min = rho.values.front();
    d.max = rho.values.front();
    double sx = 0, sy = 0, m = 0, q = 0;
    for (int i = 0; i < g.nx; ++i) {
        const double x = g.x_center(i);
        for (int j = 0; j < g.ny; ++j) {
            const double r = rho(i, j);
            m += r;
            q += r * r;
            sx += x * r;
            sy += g.y_center(j) * r;
            d.min = std::min(d.min, r);
            d.max = std::max(d.max, r);
        }
    }
    d.mass = m * area;
    d.comx = sx * area;
    d.comy = sy * area;
    d.l2 = std::sqrt(q * area);
    d.umax = u.max_abs();
    return d;
}

/// Delta t = safety / (2 f (1/dx + 1/dy) + delta r_n (1/dx^2 + 1/dy^2)).
inline double cfl_dt(const Grid2D& grid, double f, double r_n, double delta, double safety) {
    if (!(safety > 0) || !std::isfinite(safety))
        throw ConfigError("CFL safety factor must be positive");
    if (f < 0 || delta < 0 || r_n < 0)
        throw ConfigError("force bound, diffusion and density maximum must be nonnegative");
    const double ix = 1.0 / grid.dx(), iy = 1.0 / grid.dy();
    const double denom = 2.0 * f * (ix + iy) + delta * r_n * (ix * ix + iy * iy);
    if (!(denom > 0))
        throw ConfigError("degenerate CFL bound: force bound and delta*r_n are both zero");
    return safety / denom;
}

/// Smallest linear coefficient of the rewritten update and the cell where it occurs.
struct CoefficientReport {
    double min_coefficient = 0.0;
    int i = 0;
    int j = 0;
};

namespace detail {

/// One update in nonnegative-coefficient form. Writes into `out` and reports the
/// smallest coefficient over all cells.
inline CoefficientReport update(const DensityField& rho, const VelocityField& u, double f, double delta, double dt,
                                std::vector<double>* out) {
    const Grid2D& g = rho.grid;
    const int nx = g.nx, ny = g.ny;
    const double lx = dt / g.dx(), ly = dt / g.dy();
    const double mx = delta * dt / (2.0 * g.dx() * g.dx());
    const double my = delta * dt / (2.0 * g.dy() * g.dy());
    const std::vector<double>& r = rho.values;
    CoefficientReport rep{1e300, 0, 0};
    for (int i = 0; i < nx; ++i) {
        const int ip = i + 1 == nx ? 0 : i + 1;
        const int im = i == 0 ? nx - 1 : i - 1;
        for (int j = 0; j < ny; ++j) {
            const int jp = j + 1 == ny ? 0 : j + 1;
            const int jm = j == 0 ? ny - 1 : j - 1;
            const std::size_t c = g.index(i, j);
            const std::size_t e = g.index(ip, j), w = g.index(im, j);
            const std::size_t nn = g.index(i, jp), s = g.index(i, jm);
            const double ue = 0.5 * (u.ux[c] + u.ux[e]);
            const double uw = 0.5 * (u.ux[w] + u.ux[c]);
            const double vn = 0.5 * (u.uy[c] + u.uy[nn]);
            const double vs = 0.5 * (u.uy[s] + u.uy[c]);
            const double ce = 0.5 * lx * (f - ue);
            const double cw = 0.5 * lx * (f + uw);
            const double cn = 0.5 * ly * (f - vn);
            const double cs = 0.5 * ly * (f + vs);
            const double c0 = 1.0 - lx * (0.5 * (ue - uw) + f) - ly * (0.5 * (vn - vs) + f) -
                              2.0 * (mx + my) * r[c];
            const double cmin = std::min({c0, ce, cw, cn, cs});
            if (cmin < rep.min_coefficient)
                rep = {cmin, i, j};
            if (out)
                (*out)[c] = c0 * r[c] + ce * r[e] + cw * r[w] + cn * r[nn] + cs * r[s] +
                            mx * (r[e] * r[e] + r[w] * r[w]) + my * (r[nn] * r[nn] + r[s] * r[s]);
        }
    }
    return rep;
}

} // namespace detail

/// Smallest coefficient a step of size dt would use; negative means the CFL bound is violated.
inline CoefficientReport min_update_coefficient(const DensityField& rho, const VelocityField& u, double f,
                                                double delta, double dt) {
    return detail::update(rho, u, f, delta, dt, nullptr);
}

/// Advances by dt with a precomputed velocity of state.rho. Rejects the step if any
/// coefficient of the rewritten update is negative.
inline SchemeState step(const SchemeState& state, const VelocityField& u, double dt) {
    if (!(dt > 0) || !std::isfinite(dt))
        throw PreconditionError("time step must be positive and finite");
    if (!(u.grid == state.rho.grid))
        throw PreconditionError("velocity grid does not match density grid");
    SchemeState next;
    next.rho = DensityField(state.rho.grid);
    const CoefficientReport rep = detail::update(state.rho, u, state.f, state.delta, dt, &next.rho.values);
    if (rep.min_coefficient < 0)
        throw CflViolation("negative update coefficient " + std::to_string(rep.min_coefficient) + " at cell (" +
                               std::to_string(rep.i) + "," + std::to_string(rep.j) + ")",
                           rep.min_coefficient, rep.i, rep.j);
    next.t = state.t + dt;
    next.n = state.n + 1;
    next.delta = state.delta;
    next.f = state.f;
    return next;
}

inline SchemeState step(const SchemeState& state, ConvolutionEngine& engine, double dt) {
    return step(state, engine.velocity(state.rho), dt);
}

inline SchemeState step(const SchemeState& state, const ForceTable& table, double dt) {
    return step(state, velocity_field(state.rho, table), dt);
}

struct StepRecord {
    long n = 0;
    double t = 0.0;
    double dt = 0.0;
    Diagnostics diag;
};

enum class Termination { Stationary, MaxSteps };

inline const char* to_string(Termination t) { return t == Termination::Stationary ? "stationary" : "max_steps"; }

struct SimulationConfig {
    double delta = 0.0;
    double safety = 0.9;
    double tol_stat = 1e-8;
    long max_steps = 100000;
    long record_every = 1;
    long snapshot_every = 0;
    std::function<void(const SchemeState&, const VelocityField&)> on_snapshot;
    std::function<void(const StepRecord&)> on_record;

    void validate() const {
        if (!(delta >= 0) || !std::isfinite(delta))
            throw ConfigError("delta must be nonnegative");
        if (!(safety > 0 && safety <= 1))
            throw ConfigError("safety must lie in (0, 1]");
        if (!(tol_stat >= 0))
            throw ConfigError("tol_stat must be nonnegative");
        if (max_steps < 0)
            throw ConfigError("max_steps must be nonnegative");
        if (record_every < 1)
            throw ConfigError("record_every must be at least 1");
        if (snapshot_every < 0)
            throw ConfigError("snapshot_every must be nonnegative");
    }
};

struct SimulationResult {
    SchemeState state;
    std::vector<StepRecord> series;
    Termination reason = Termination::MaxSteps;
    double last_rate = 0.0;
};

/// Thrown when a non-finite density appears; carries the last finite state.
class SimulationAborted : public NumericalError {
  public:
    SimulationAborted(const std::string& what, SchemeState last) : NumericalError(what), last_(std::move(last)) {}
    const SchemeState& last_state() const { return last_; }

  private:
    SchemeState last_;
};

/// Steps until ||rho^{n+1} - rho^n||_inf / dt < tol_stat or max_steps.
/// Records diagnostics of rho^n together with the dt used to leave it.
inline SimulationResult simulate(const SimulationConfig& cfg, const ForceTable& table, DensityField initial) {
    cfg.validate();
    initial.validate(1e-10);
    SimulationResult res;
    ConvolutionEngine engine(table);
    SchemeState st;
    st.rho = std::move(initial);
    st.delta = cfg.delta;
    st.f = force_bound(table.params);
    VelocityField u = engine.velocity(st.rho);
    auto record = [&](double dt) {
        StepRecord rec{st.n, st.t, dt, diagnostics(st.rho, u)};
        if (cfg.on_record)
            cfg.on_record(rec);
        res.series.push_back(rec);
    };
    if (cfg.on_snapshot && cfg.snapshot_every > 0)
        cfg.on_snapshot(st, u);
    res.reason = Termination::MaxSteps;
    while (st.n < cfg.max_steps) {
        const double dt = cfl_dt(st.rho.grid, st.f, st.rho.max(), st.delta, cfg.safety);
        if (st.n % cfg.record_every == 0)
            record(dt);
        SchemeState next = step(st, u, dt);
        double change = 0.0;
        for (std::size_t c = 0; c < next.rho.values.size(); ++c) {
            const double v = next.rho.values[c];
            if (!std::isfinite(v))
                throw SimulationAborted("non-finite density at step " + std::to_string(next.n), st);
            change = std::max(change, std::abs(v - st.rho.values[c]));
        }
        st = std::move(next);
        u = engine.velocity(st.rho);
        res.last_rate = change / dt;
        if (cfg.on_snapshot && cfg.snapshot_every > 0 && st.n % cfg.snapshot_every == 0)
            cfg.on_snapshot(st, u);
        if (res.last_rate < cfg.tol_stat) {
            res.reason = Termination::Stationary;
            break;
        }
    }
    record(0.0);
    res.state = std::move(st);
    return res;
}

} // namespace aniso
