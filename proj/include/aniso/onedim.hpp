#pragma once

#include "aniso/errors.hpp"
#include "aniso/kernels.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

namespace aniso {

/// Uniform 1D grid x_i = a + i h, h = (b - a)/(m - 1).
struct Grid1D {
    double a = -2.0;
    double b = 2.0;
    int m = 1024;

    Grid1D() = default;
    Grid1D(double a_, double b_, int m_) : a(a_), b(b_), m(m_) {
        if (m < 2 || !(b > a))
            throw PreconditionError("1D grid needs m >= 2 and b > a");
    }

    double h() const { return (b - a) / (m - 1); }
    double x(int i) const { return a + i * h(); }

    /// m points covering one period [-0.5, 0.5) with spacing 1/m.
    static Grid1D periodic(int m) { return Grid1D(-0.5, -0.5 + (m - 1.0) / m, m); }

    bool operator==(const Grid1D&) const = default;
};

struct Density1D {
    Grid1D grid;
    std::vector<double> values;

    Density1D() = default;
    Density1D(Grid1D g, std::vector<double> v) : grid(g), values(std::move(v)) {
        if (values.size() != static_cast<std::size_t>(grid.m))
            throw PreconditionError("1D density size does not match grid");
    }

    double mass() const { return std::accumulate(values.begin(), values.end(), 0.0) * grid.h(); }

    void validate(double tol = 1e-12) const {
        for (double v : values)
            if (!(v >= 0) || !std::isfinite(v))
                throw PreconditionError("1D density must be finite and nonnegative");
        if (std::abs(mass() - 1.0) > tol)
            throw PreconditionError("1D density must have unit mass");
    }
};

enum class ConvolutionMode { FreeSpace, Periodic };

namespace detail {

/// Single Gauss-Kronrod 15/31 panel; the error estimate is rescaled from [-1, 1].
template <class F>
double gk_panel(F& f, double a, double b, double& err) {
    const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 0, 0.0, &err);
    err *= 0.5 * (b - a);
    return v;
}

template <class F>
double gk_panel_rec(F& f, double a, double b, double whole, double err, double abs_tol, double rel_tol, int depth) {
    if (err <= std::max(abs_tol, rel_tol * std::abs(whole)) || depth <= 0)
        return whole;
    const double m = 0.5 * (a + b);
    double el = 0.0, er = 0.0;
    const double l = gk_panel(f, a, m, el);
    const double r = gk_panel(f, m, b, er);
    return gk_panel_rec(f, a, m, l, el, 0.5 * abs_tol, rel_tol, depth - 1) +
           gk_panel_rec(f, m, b, r, er, 0.5 * abs_tol, rel_tol, depth - 1);
}

/// Adaptive Gauss-Kronrod (15/31) bisection until the estimated error is below
/// max(abs_tol, rel_tol * |value|) on each panel.
template <class F>
double gk_integrate(F&& f, double a, double b, double abs_tol = 1e-20, double rel_tol = 1e-13) {
    if (!(b > a))
        return 0.0;
    double err = 0.0;
    const double v = gk_panel(f, a, b, err);
    return gk_panel_rec(f, a, b, v, err, abs_tol, rel_tol, 30);
}

template <class F>
double gk_integrate_split(F&& f, double a, double b, std::vector<double> breaks, double abs_tol = 1e-20,
                          double rel_tol = 1e-13) {
    breaks.push_back(a);
    breaks.push_back(b);
    std::sort(breaks.begin(), breaks.end());
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        const double lo = std::max(a, breaks[k]), hi = std::min(b, breaks[k + 1]);
        if (hi > lo)
            acc += gk_integrate(f, lo, hi, abs_tol, rel_tol);
    }
    return acc;
}

} // namespace detail

/// G(x) = x * int_{-0.5}^{0.5} f_l(|(x, z)|) dz, evaluated at eta*(x, z); odd in x, zero for |x| >= 0.5.
inline double scalar_force_G(double x, const ForceParams& p) {
    const double ax = std::abs(x);
    if (ax == 0.0 || ax >= 0.5)
        return 0.0;
    const double reach = p.cutoff / p.eta;
    if (ax >= reach)
        return 0.0;
    const double zmax = std::min(0.5, std::sqrt(reach * reach - ax * ax));
    auto integrand = [&](double z) {
        double fs, fl;
        detail::coeffs_unchecked(p.eta * std::hypot(ax, z), p, fs, fl);
        return fl;
    };
    const double v = 2.0 * p.eta * ax *
                     detail::gk_integrate_split(integrand, 0.0, zmax, {ax, 2 * ax, 0.02, 0.05, 0.1, 0.2});
    return x < 0 ? -v : v;
}

/// Sampled G and W on m points of [-0.5, 0.5] with sup W = 0, plus ||W||_{L^1}.
class Potential1D {
  public:
    Potential1D() = default;

    Potential1D(const ForceParams& p, int m) : params_(p), m_(m) {
        if (m < 64)
            throw PreconditionError("potential grid needs at least 64 points");
        p.validate();
        h_ = 1.0 / (m - 1);
        x_.resize(m);
        G_.resize(m);
        W_.resize(m);
        for (int i = 0; i < m; ++i)
            x_[i] = -0.5 + i * h_;
        const int half = m / 2; // first index with x >= 0 up to rounding
        for (int i = m - 1; i >= half; --i) {
            G_[i] = scalar_force_G(x_[i], p);
            G_[m - 1 - i] = -G_[i];
        }
        if (m % 2 == 1)
            G_[half] = 0.0;
        // U(x) = int_x^{0.5} G, accumulated from the right on the nonnegative half.
        std::vector<double> U(m, 0.0);
        auto g = [&p](double t) { return scalar_force_G(t, p); };
        for (int i = m - 2; i >= half; --i)
            U[i] = U[i + 1] + detail::gk_integrate(g, std::abs(x_[i]), x_[i + 1]);
        // sup of U over [0, 0.5]: both endpoints and every root where G turns from - to +.
        double best = U[half] + detail::gk_integrate(g, 0.0, std::max(0.0, x_[half]));
        for (int i = half; i + 1 < m; ++i) {
            if (G_[i] < 0 && G_[i + 1] > 0) {
                const double r = root_of_G(std::max(0.0, x_[i]), x_[i + 1]);
                best = std::max(best, U[i + 1] + detail::gk_integrate(g, r, x_[i + 1]));
            }
        }
        best = std::max(best, 0.0);
        c_ = -best;
        for (int i = half; i < m; ++i) {
            W_[i] = U[i] + c_;
            W_[m - 1 - i] = W_[i];
        }
        // ||W||_1 = -2 int_0^{0.5} W = -c - 2 int_0^{0.5} t G(t) dt when W <= 0.
        auto tg = [&p](double t) { return t * scalar_force_G(t, p); };
        const double moment = detail::gk_integrate_split(tg, 0.0, 0.5, {0.005, 0.01, 0.02, 0.03, 0.05, 0.1, 0.2});
        W_L1_ = -c_ - 2.0 * moment;
    }

    const ForceParams& params() const { return params_; }
    int m() const { return m_; }
    double h() const { return h_; }
    const std::vector<double>& x() const { return x_; }
    const std::vector<double>& G() const { return G_; }
    const std::vector<double>& W() const { return W_; }
    double W_L1() const { return W_L1_; }
    double normalization_constant() const { return c_; }

    /// W(x) by cubic Hermite interpolation with W' = -G; constant beyond |x| = 0.5.
    double W_at(double x) const {
        const double ax = std::abs(x);
        if (ax >= 0.5)
            return c_;
        double s = (ax + 0.5) / h_;
        int i = std::min(static_cast<int>(s), m_ - 2);
        const double t = s - i;
        const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
        const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
        return h00 * W_[i] + h10 * h_ * (-G_[i]) + h01 * W_[i + 1] + h11 * h_ * (-G_[i + 1]);
    }

    /// W extended by zero outside (-0.5, 0.5); the kernel of the problem on the line.
    double W_padded(double x) const { return std::abs(x) >= 0.5 ? 0.0 : W_at(x); }

  private:
    double root_of_G(double a, double b) const {
        auto g = [this](double t) { return scalar_force_G(t, params_); };
        std::uintmax_t iters = 200;
        auto tol = [](double lo, double hi) { return std::abs(hi - lo) <= 1e-15; };
        const auto r = boost::math::tools::toms748_solve(g, a, b, tol, iters);
        return 0.5 * (r.first + r.second);
    }

    ForceParams params_;
    int m_ = 0;
    double h_ = 0.0;
    std::vector<double> x_;
    std::vector<double> G_;
    std::vector<double> W_;
    double c_ = 0.0;
    double W_L1_ = 0.0;
};

inline Potential1D build_potential(const ForceParams& p, int m) { return Potential1D(p, m); }

namespace detail {

/// Kernel samples k -> W at distance k h, for k = 0..m-1.
inline std::vector<double> kernel_samples(const Potential1D& pot, const Grid1D& grid, ConvolutionMode mode) {
    const double h = grid.h();
    std::vector<double> w(grid.m, 0.0);
    if (mode == ConvolutionMode::Periodic && std::abs(grid.m * h - 1.0) > 1e-9)
        throw PreconditionError("periodic convolution needs a grid covering one period with spacing 1/m");
    for (int k = 0; k < grid.m; ++k) {
        const double d = k * h;
        if (mode == ConvolutionMode::FreeSpace) {
            if (d >= 0.5)
                break;
            w[k] = pot.W_padded(d);
        } else {
            w[k] = pot.W_at(wrap_periodic(d));
        }
    }
    return w;
}

} // namespace detail

/// (W * rho)_i = h sum_j W((i-j) h) rho_j.
inline std::vector<double> convolve_W(const Density1D& rho, const Potential1D& pot,
                                      ConvolutionMode mode = ConvolutionMode::FreeSpace) {
    const Grid1D& g = rho.grid;
    const std::vector<double> w = detail::kernel_samples(pot, g, mode);
    int reach = g.m - 1;
    while (reach > 0 && w[reach] == 0.0 && mode == ConvolutionMode::FreeSpace)
        --reach;
    const double h = g.h();
    std::vector<double> out(g.m, 0.0);
    for (int i = 0; i < g.m; ++i) {
        double acc = 0.0;
        if (mode == ConvolutionMode::FreeSpace) {
            const int lo = std::max(0, i - reach), hi = std::min(g.m - 1, i + reach);
            for (int j = lo; j <= hi; ++j)
                acc += w[std::abs(i - j)] * rho.values[j];
        } else {
            for (int j = 0; j < g.m; ++j)
                acc += w[std::abs(i - j)] * rho.values[j];
        }
        out[i] = h * acc;
    }
    return out;
}

inline double energy(const Density1D& rho, const Potential1D& pot, ConvolutionMode mode = ConvolutionMode::FreeSpace) {
    const std::vector<double> v = convolve_W(rho, pot, mode);
    double acc = 0.0;
    for (int i = 0; i < rho.grid.m; ++i)
        acc += rho.values[i] * v[i];
    return 0.5 * rho.grid.h() * acc;
}

inline double l2_sq(const Density1D& rho) {
    double acc = 0.0;
    for (double v : rho.values)
        acc += v * v;
    return acc * rho.grid.h();
}

inline double energy_delta(const Density1D& rho, const Potential1D& pot, double delta,
                           ConvolutionMode mode = ConvolutionMode::FreeSpace) {
    return energy(rho, pot, mode) + 0.5 * delta * l2_sq(rho);
}

/// Symmetric starting density: indicator of [-0.5, 0.5] clipped to the grid, unit mass.
inline Density1D symmetric_start(const Grid1D& grid) {
    std::vector<double> v(grid.m, 0.0);
    for (int i = 0; i < grid.m; ++i) {
        const int k = grid.m - 1 - i;
        const double ax = std::max(std::abs(grid.x(i)), std::abs(grid.x(k)));
        if (ax <= 0.5 + 1e-12)
            v[i] = 1.0;
    }
    Density1D rho(grid, v);
    const double m = rho.mass();
    if (!(m > 0))
        throw PreconditionError("working interval too small for the starting density");
    for (double& x : rho.values)
        x /= m;
    return rho;
}

/// Unit mass on the grid node nearest to x0.
inline Density1D dirac_density(const Grid1D& grid, double x0) {
    const double s = (x0 - grid.a) / grid.h();
    if (!(s >= -0.5 && s <= grid.m - 0.5))
        throw PreconditionError("Dirac location outside the working interval");
    const int i = std::clamp(static_cast<int>(std::lround(s)), 0, grid.m - 1);
    std::vector<double> v(grid.m, 0.0);
    v[i] = 1.0 / grid.h();
    return Density1D(grid, std::move(v));
}

struct FixedPointOptions {
    double omega = 0.5;
    double tol = 1e-12;
    int max_iter = 100000;
};

struct FixedPointResult {
    Density1D rho;
    double C = 0.0;
    int iterations = 0;
    double last_change = 0.0;
    double residual = 0.0; ///< max |W*rho + delta rho - C| on {rho > 0}
};

namespace detail {

inline void check_delta(double delta, const Potential1D& pot) {
    if (!(delta > 0) || !(delta < pot.W_L1()))
        throw PreconditionError("delta must satisfy 0 < delta < ||W||_L1 = " + std::to_string(pot.W_L1()) +
                                "; no stationary solution exists for delta >= ||W||_L1");
}

inline double candidate_mass(const std::vector<double>& V, double C, double delta, double h) {
    double acc = 0.0;
    for (double v : V)
        acc += std::max(C - v, 0.0);
    return acc * h / delta;
}

inline void check_support_interior(const Density1D& rho) {
    const int m = rho.grid.m;
    if (rho.values[0] > 0 || rho.values[1] > 0 || rho.values[m - 1] > 0 || rho.values[m - 2] > 0)
        throw ConvergenceError("support reaches the working-interval boundary; enlarge the interval");
}

} // namespace detail

/// Damped iteration rho <- (1-omega) rho + omega (C - W*rho)_+ / delta with C set by
/// bisection so the candidate has unit mass.
inline FixedPointResult stationary_fixed_point(double delta, const Potential1D& pot, const Grid1D& grid,
                                               const FixedPointOptions& opt = {}) {
    detail::check_delta(delta, pot);
    if (!(opt.omega > 0 && opt.omega <= 1))
        throw PreconditionError("damping must lie in (0, 1]");
    const double h = grid.h();
    Density1D rho = symmetric_start(grid);
    FixedPointResult res;
    std::vector<double> cand(grid.m);
    for (int it = 1; it <= opt.max_iter; ++it) {
        const std::vector<double> V = convolve_W(rho, pot);
        const double vmin = *std::min_element(V.begin(), V.end());
        const double vmax = *std::max_element(V.begin(), V.end());
        double lo = vmin;
        double hi = vmax + delta * *std::max_element(rho.values.begin(), rho.values.end()) + 1.0;
        double mlo = detail::candidate_mass(V, lo, delta, h), mhi = detail::candidate_mass(V, hi, delta, h);
        if (!(mlo <= 1.0 && mhi >= 1.0))
            throw ConvergenceError("mass bracket for the level constant is invalid");
        for (int k = 0; k < 400; ++k) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi)
                break;
            const double mm = detail::candidate_mass(V, mid, delta, h);
            if (mm < mlo || mm > mhi)
                throw ConvergenceError("mass is not monotone in the level constant");
            if (mm < 1.0) {
                lo = mid;
                mlo = mm;
            } else {
                hi = mid;
                mhi = mm;
            }
        }
        const double C = (1.0 - mlo) <= (mhi - 1.0) ? lo : hi;
        double cm = 0.0;
        for (int i = 0; i < grid.m; ++i) {
            cand[i] = std::max(C - V[i], 0.0) / delta;
            cm += cand[i];
        }
        cm *= h;
        double change = 0.0;
        for (int i = 0; i < grid.m; ++i) {
            const double nv = (1.0 - opt.omega) * rho.values[i] + opt.omega * cand[i] / cm;
            change += std::abs(nv - rho.values[i]);
            rho.values[i] = nv;
        }
        change *= h;
        res.iterations = it;
        res.last_change = change;
        res.C = C;
        if (change < opt.tol) {
            // The damped iterate keeps geometrically decaying mass outside the level set;
            // the converged state is the undamped candidate.
            for (int i = 0; i < grid.m; ++i)
                rho.values[i] = cand[i] / cm;
            const double m = rho.mass();
            for (double& v : rho.values)
                v /= m;
            detail::check_support_interior(rho);
            const std::vector<double> Vf = convolve_W(rho, pot);
            // Level constant of the converged state: mean of W*rho + delta rho over its support.
            double sum = 0.0;
            int cnt = 0;
            for (int i = 0; i < grid.m; ++i)
                if (rho.values[i] > 0) {
                    sum += Vf[i] + delta * rho.values[i];
                    ++cnt;
                }
            res.C = sum / cnt;
            double r = 0.0;
            for (int i = 0; i < grid.m; ++i)
                if (rho.values[i] > 0)
                    r = std::max(r, std::abs(Vf[i] + delta * rho.values[i] - res.C));
            res.residual = r;
            res.rho = std::move(rho);
            return res;
        }
    }
    throw ConvergenceError("fixed-point iteration did not converge in " + std::to_string(opt.max_iter) +
                           " iterations");
}

inline FixedPointResult stationary_fixed_point(double delta, const Potential1D& pot, int m,
                                               const FixedPointOptions& opt = {}) {
    return stationary_fixed_point(delta, pot, Grid1D(-2.0, 2.0, m), opt);
}

/// Euclidean projection (in the h-weighted inner product) onto {rho >= 0, sum rho h = 1}.
inline std::vector<double> project_simplex(const std::vector<double>& y, double h) {
    // find theta with h * sum (y_i - theta)_+ = 1
    std::vector<double> s(y);
    std::sort(s.begin(), s.end(), std::greater<double>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        cum += s[k];
        const double t = (cum - 1.0 / h) / static_cast<double>(k + 1);
        if (k + 1 == s.size() || s[k + 1] <= t) {
            theta = t;
            break;
        }
    }
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        out[i] = std::max(y[i] - theta, 0.0);
    return out;
}

struct MinimizerOptions {
    double tol = 1e-13;
    int max_iter = 200000;
};

struct MinimizerResult {
    Density1D rho;
    int iterations = 0;
    std::vector<double> energy_history;
};

/// Projected gradient descent for E_delta on the discrete simplex with Armijo backtracking.
inline MinimizerResult minimize_energy(double delta, const Potential1D& pot, const Grid1D& grid,
                                       const MinimizerOptions& opt = {}) {
    detail::check_delta(delta, pot);
    const double h = grid.h();
    Density1D rho = symmetric_start(grid);
    MinimizerResult res;
    double E = energy_delta(rho, pot, delta);
    res.energy_history.push_back(E);
    double tau = 1.0 / (delta + pot.W_L1());
    for (int it = 1; it <= opt.max_iter; ++it) {
        const std::vector<double> V = convolve_W(rho, pot);
        std::vector<double> y(grid.m);
        bool accepted = false;
        double change = 0.0;
        for (int bt = 0; bt < 80; ++bt) {
            for (int i = 0; i < grid.m; ++i)
                y[i] = rho.values[i] - tau * (V[i] + delta * rho.values[i]);
            Density1D trial(grid, project_simplex(y, h));
            double d2 = 0.0;
            change = 0.0;
            for (int i = 0; i < grid.m; ++i) {
                const double d = trial.values[i] - rho.values[i];
                d2 += d * d;
                change += std::abs(d);
            }
            d2 *= h;
            change *= h;
            const double Et = energy_delta(trial, pot, delta);
            if (Et <= E - 1e-4 * d2 / tau) {
                rho = std::move(trial);
                E = Et;
                accepted = true;
                break;
            }
            tau *= 0.5;
        }
        res.iterations = it;
        if (!accepted || change < opt.tol) {
            if (accepted)
                res.energy_history.push_back(E);
            detail::check_support_interior(rho);
            res.rho = std::move(rho);
            return res;
        }
        res.energy_history.push_back(E);
        tau *= 1.5;
    }
    throw ConvergenceError("energy minimization did not converge");
}

inline MinimizerResult minimize_energy(double delta, const Potential1D& pot, int m, const MinimizerOptions& opt = {}) {
    return minimize_energy(delta, pot, Grid1D(-2.0, 2.0, m), opt);
}

/// Convolution with phi_delta(x) = delta^{-1/2} (4 pi)^{-1/2} exp(-x^2 / (4 delta)), renormalized.
inline Density1D mollify(const Density1D& rho, double delta) {
    if (!(delta > 0))
        throw PreconditionError("mollification parameter must be positive");
    const Grid1D& g = rho.grid;
    const double h = g.h();
    const double c = 1.0 / std::sqrt(4.0 * M_PI * delta);
    const int reach = std::min(g.m - 1, static_cast<int>(std::ceil(40.0 * std::sqrt(delta) / h)));
    std::vector<double> phi(reach + 1);
    for (int k = 0; k <= reach; ++k) {
        const double x = k * h;
        phi[k] = c * std::exp(-x * x / (4.0 * delta));
    }
    std::vector<double> out(g.m, 0.0);
    for (int j = 0; j < g.m; ++j) {
        const double r = rho.values[j];
        if (r == 0.0)
            continue;
        const int lo = std::max(0, j - reach), hi = std::min(g.m - 1, j + reach);
        for (int i = lo; i <= hi; ++i)
            out[i] += h * phi[std::abs(i - j)] * r;
    }
    Density1D res(g, std::move(out));
    const double m = res.mass();
    for (double& v : res.values)
        v /= m;
    return res;
}

/// sup { sum f_i (a_i - b_i) h : |f_i| <= 1, |f_{i+1} - f_i| <= h } computed exactly by
/// dynamic programming over concave piecewise-linear value functions.
inline double bounded_lipschitz_distance(const Density1D& a, const Density1D& b) {
    if (!(a.grid == b.grid))
        throw PreconditionError("densities must share a grid");
    const double h = a.grid.h();
    struct Seg {
        double len;
        double slope;
    };
    std::deque<Seg> segs{{2.0, 0.0}};
    double vleft = 0.0;
    for (int i = 0; i < a.grid.m; ++i) {
        if (i > 0) {
            // window maximum over [f - h, f + h]
            double A = 0.0;
            std::size_t split = 0;
            while (split < segs.size() && segs[split].slope > 0) {
                A += segs[split].len;
                ++split;
            }
            const double B = 2.0 - A;
            double cutl = std::min(A, h), cutr = std::min(B, h);
            std::deque<Seg> inc(segs.begin(), segs.begin() + static_cast<long>(split));
            std::deque<Seg> dec(segs.begin() + static_cast<long>(split), segs.end());
            while (cutl > 0 && !inc.empty()) {
                const double take = std::min(cutl, inc.front().len);
                vleft += take * inc.front().slope;
                inc.front().len -= take;
                cutl -= take;
                if (inc.front().len <= 0)
                    inc.pop_front();
            }
            while (cutr > 0 && !dec.empty()) {
                const double take = std::min(cutr, dec.back().len);
                dec.back().len -= take;
                cutr -= take;
                if (dec.back().len <= 0)
                    dec.pop_back();
            }
            segs = std::move(inc);
            const double flat = std::min(A, h) + std::min(B, h);
            if (flat > 0)
                segs.push_back({flat, 0.0});
            for (const Seg& s : dec)
                segs.push_back(s);
        }
        const double g = (a.values[i] - b.values[i]) * h;
        for (Seg& s : segs)
            s.slope += g;
        vleft -= g;
    }
    double best = vleft, v = vleft;
    for (const Seg& s : segs) {
        v += s.len * s.slope;
        best = std::max(best, v);
    }
    return best;
}

struct GammaEntry {
    double delta = 0.0;
    double energy_delta = 0.0; ///< E_delta at the minimizer
    double energy = 0.0;       ///< E at the minimizer
    double bl_to_previous = std::numeric_limits<double>::quiet_NaN();
    Density1D rho;
};

struct GammaReport {
    std::vector<GammaEntry> entries;
    bool energies_nonincreasing = true;
    bool distances_decreasing = true;
};

/// Minimizers along a decreasing delta sequence with their energies and successive distances.
inline GammaReport gamma_probe(const Potential1D& pot, const std::vector<double>& deltas, const Grid1D& grid,
                               double energy_tol = 1e-15) {
    if (deltas.empty())
        throw PreconditionError("delta sequence must be nonempty");
    for (std::size_t k = 0; k < deltas.size(); ++k) {
        detail::check_delta(deltas[k], pot);
        if (k > 0 && !(deltas[k] < deltas[k - 1]))
            throw PreconditionError("delta sequence must be strictly decreasing");
    }
    GammaReport rep;
    for (double d : deltas) {
        GammaEntry e;
        e.delta = d;
        e.rho = minimize_energy(d, pot, grid).rho;
        e.energy = energy(e.rho, pot);
        e.energy_delta = e.energy + 0.5 * d * l2_sq(e.rho);
        if (!rep.entries.empty()) {
            const GammaEntry& prev = rep.entries.back();
            e.bl_to_previous = bounded_lipschitz_distance(e.rho, prev.rho);
            if (e.energy_delta > prev.energy_delta + energy_tol)
                rep.energies_nonincreasing = false;
            if (rep.entries.size() >= 2 && !(e.bl_to_previous < prev.bl_to_previous))
                rep.distances_decreasing = false;
        }
        rep.entries.push_back(std::move(e));
    }
    return rep;
}

struct RecoveryProbe {
    std::vector<double> deltas;
    std::vector<double> gaps; ///< E_delta(mollify(rho, delta)) - E(rho)
    double rate = 0.0;        ///< least-squares slope of log gap against log delta
};

inline RecoveryProbe recovery_rate_probe(const Density1D& rho, const Potential1D& pot,
                                         const std::vector<double>& deltas) {
    RecoveryProbe pr;
    const double E0 = energy(rho, pot);
    for (double d : deltas) {
        const Density1D md = mollify(rho, d);
        pr.deltas.push_back(d);
        pr.gaps.push_back(energy_delta(md, pot, d) - E0);
    }
    const std::size_t n = pr.deltas.size();
    if (n >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t k = 0; k < n; ++k) {
            const double x = std::log(pr.deltas[k]), y = std::log(std::abs(pr.gaps[k]));
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        pr.rate = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    return pr;
}

struct DeltaOfLOptions {
    int max_iter = 200000;
    double rel_tol = 1e-10;
};

namespace detail {

/// Dominant eigenvalue of A + shift I by power iteration; returns false on stagnation.
inline bool power_iteration(const std::vector<double>& A, int n, double shift, const DeltaOfLOptions& opt,
                            double& lambda) {
    std::vector<double> v(n, 1.0), w(n);
    double prev = std::numeric_limits<double>::quiet_NaN();
    int stable = 0;
    for (int it = 0; it < opt.max_iter; ++it) {
        double nv = 0.0;
        for (double x : v)
            nv += x * x;
        nv = std::sqrt(nv);
        for (double& x : v)
            x /= nv;
        for (int i = 0; i < n; ++i) {
            double acc = shift * v[i];
            const double* row = &A[static_cast<std::size_t>(i) * n];
            for (int j = 0; j < n; ++j)
                acc += row[j] * v[j];
            w[i] = acc;
        }
        double num = 0.0;
        for (int i = 0; i < n; ++i)
            num += v[i] * w[i];
        lambda = num;
        if (std::abs(lambda - prev) <= opt.rel_tol * std::abs(lambda)) {
            if (++stable >= 3) {
                lambda -= shift;
                return true;
            }
        } else {
            stable = 0;
        }
        prev = lambda;
        v.swap(w);
    }
    lambda -= shift;
    return false;
}

} // namespace detail

/// Discretized operator (A phi)(x) = int_0^L [W(L-w) + W(L+w) - W(x-w) - W(x+w)] phi(w) dw
/// on m_L trapezoid nodes, W zero outside (-0.5, 0.5).
inline std::vector<double> delta_of_L_matrix(double L, const Potential1D& pot, int m_L) {
    if (!(L > 0))
        throw PreconditionError("L must be positive");
    if (m_L < 2)
        throw PreconditionError("m_L must be at least 2");
    const double hL = L / (m_L - 1);
    std::vector<double> A(static_cast<std::size_t>(m_L) * m_L);
    for (int i = 0; i < m_L; ++i) {
        const double x = i * hL;
        for (int j = 0; j < m_L; ++j) {
            const double w = j * hL;
            const double wt = (j == 0 || j == m_L - 1) ? 0.5 * hL : hL;
            const double k = pot.W_padded(L - w) + pot.W_padded(L + w) - pot.W_padded(x - w) - pot.W_padded(x + w);
            A[static_cast<std::size_t>(i) * m_L + j] = wt * k;
        }
    }
    return A;
}

/// Largest eigenvalue of the operator above. Power iteration is rerun with a shift when
/// the dominant eigenvalue in magnitude is negative or does not settle.
inline double delta_of_L(double L, const Potential1D& pot, int m_L, const DeltaOfLOptions& opt = {}) {
    const std::vector<double> A = delta_of_L_matrix(L, pot, m_L);
    double lambda = 0.0;
    if (detail::power_iteration(A, m_L, 0.0, opt, lambda) && lambda > 0)
        return lambda;
    double shift = 0.0;
    for (int i = 0; i < m_L; ++i) {
        double row = 0.0;
        for (int j = 0; j < m_L; ++j)
            row += std::abs(A[static_cast<std::size_t>(i) * m_L + j]);
        shift = std::max(shift, row);
    }
    double mu = 0.0;
    if (!detail::power_iteration(A, m_L, shift, opt, mu))
        throw ConvergenceError("power iteration stagnated for L = " + std::to_string(L));
    return mu;
}

/// Node count giving spacing about 1e-3 on [0, L], at least 400 and at most 4001.
inline int default_m_L(double L) {
    return static_cast<int>(std::clamp(std::ceil(L / 1e-3) + 1.0, 400.0, 4001.0));
}

inline double delta_of_L(double L, const Potential1D& pot) { return delta_of_L(L, pot, default_m_L(L)); }

struct StripeConfig {
    std::vector<double> x;

    int n() const { return static_cast<int>(x.size()); }

    void validate() const {
        if (x.empty())
            throw PreconditionError("stripe configuration needs at least one position");
        for (std::size_t k = 0; k < x.size(); ++k) {
            if (!(x[k] > -0.5 && x[k] < 0.5))
                throw PreconditionError("stripe positions must lie in (-0.5, 0.5)");
            if (k > 0 && !(x[k] > x[k - 1]))
                throw PreconditionError("stripe positions must be strictly increasing");
        }
    }
};

/// x_k = k/n - (n+1)/(2n), k = 1..n.
inline StripeConfig equidistant_positions(int n) {
    if (n < 1)
        throw PreconditionError("number of stripes must be positive");
    StripeConfig c;
    for (int k = 1; k <= n; ++k)
        c.x.push_back(static_cast<double>(2 * k - n - 1) / (2.0 * n));
    return c;
}

/// residual_k = sum_{j != k} W'(d_per(x_k, x_j)) with W' = -G.
inline std::vector<double> stripe_residual(const StripeConfig& cfg, const ForceParams& p) {
    cfg.validate();
    std::vector<double> r(cfg.x.size(), 0.0);
    for (std::size_t k = 0; k < cfg.x.size(); ++k)
        for (std::size_t j = 0; j < cfg.x.size(); ++j)
            if (j != k)
                r[k] -= scalar_force_G(wrap_periodic(cfg.x[k] - cfg.x[j]), p);
    return r;
}

inline std::vector<double> stripe_residual(const StripeConfig& cfg, const Potential1D& pot) {
    return stripe_residual(cfg, pot.params());
}

} // namespace aniso
