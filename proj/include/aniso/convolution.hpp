#pragma once

#include "aniso/errors.hpp"
#include "aniso/grid.hpp"
#include "aniso/kernels.hpp"
#include "aniso/quadrature.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace aniso {

/// Certified bound on sup |F|: max of r*max(|f_s|,|f_l|) over a dense radial
/// sampling of [0, cutoff], inflated by 1%. Rescaling by eta does not change it.
inline double force_bound(const ForceParams& p, int samples = 20000) {
    p.validate();
    double m = 0.0;
    for (int k = 0; k <= samples; ++k) {
        const double r = p.cutoff * k / samples;
        double fs, fl;
        detail::coeffs_unchecked(r, p, fs, fl);
        m = std::max(m, r * std::max(std::abs(fs), std::abs(fl)));
    }
    return 1.01 * m;
}

enum class TableMode { Homogeneous, Factored };

/// Offset-indexed kernel: entry (di, dj) for periodic offset target - source, stored at di*ny + dj.
struct OffsetKernel {
    std::vector<double> x;
    std::vector<double> y;
};

/// Cell-pair averages of the force over C_target x C_source.
///
/// Homogeneous mode holds the projected force in `force`. Factored mode holds the
/// vector kernels K_s and K_l (averages of f(|d|) d) and applies the per-cell
/// projections s s^T and l l^T of the tensor sampled at the target cell centre.
/// The double integral (F)_ij^kl of the scheme equals (dx dy)^2 times the stored average.
struct ForceTable {
    Grid2D grid;
    TableMode mode = TableMode::Homogeneous;
    int q = 4;
    ForceParams params;
    TensorField tensor;
    OffsetKernel force;
    OffsetKernel ks;
    OffsetKernel kl;

    std::size_t partner(std::size_t c) const {
        const int di = static_cast<int>(c / grid.ny), dj = static_cast<int>(c % grid.ny);
        return grid.index(grid.wrap_i(-di), grid.wrap_j(-dj));
    }
};

namespace detail {

/// Smallest distance from the origin to the box [cx-hx, cx+hx] x [cy-hy, cy+hy] and its periodic images.
inline double box_distance(double cx, double cy, double hx, double hy) {
    double best = 1e300;
    for (int a = -1; a <= 1; ++a)
        for (int b = -1; b <= 1; ++b) {
            const double x = cx + a, y = cy + b;
            const double ex = std::max(0.0, std::abs(x) - hx);
            const double ey = std::max(0.0, std::abs(y) - hy);
            best = std::min(best, std::hypot(ex, ey));
        }
    return best;
}

/// Averages of (f_s(|eta d|) eta d, f_l(|eta d|) eta d) over two cells separated by
/// (cx, cy), written as an integral over the difference t with tent weights.
inline std::array<double, 4> cell_pair_average(double cx, double cy, double hx, double hy, const ForceParams& p,
                                               const GaussRule& rule, double abs_tol) {
    auto g = [&](double tx, double ty) -> std::array<double, 4> {
        const double wx = (hx - std::abs(tx)) / (hx * hx);
        const double wy = (hy - std::abs(ty)) / (hy * hy);
        const Vec2 d = wrap_periodic(Vec2{cx + tx, cy + ty});
        const Vec2 e = p.eta * d;
        const double r = std::hypot(e.x, e.y);
        double fs, fl;
        coeffs_unchecked(r, p, fs, fl);
        const double w = wx * wy;
        return {w * fs * e.x, w * fs * e.y, w * fl * e.x, w * fl * e.y};
    };
    std::array<double, 4> acc{};
    const std::array<double, 3> xs{-hx, 0.0, hx};
    const std::array<double, 3> ys{-hy, 0.0, hy};
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            const std::array<double, 4> v = integrate_rect<4>(g, rule, xs[a], xs[a + 1], ys[b], ys[b + 1],
                                                              0.25 * abs_tol, 1e-14);
            for (int k = 0; k < 4; ++k)
                acc[k] += v[k];
        }
    return acc;
}

} // namespace detail

/// Builds the cell-pair force table. Homogeneous tensor fields yield an offset-indexed
/// table unless `force_factored` is set; inhomogeneous fields always use the factored form.
inline ForceTable precompute_force_table(const Grid2D& grid, const TensorField& tensor, const ForceParams& p,
                                         int q = 4, bool force_factored = false) {
    if (q < 1)
        throw PreconditionError("quadrature order must be at least 1");
    p.validate();
    if (tensor.nx() != grid.nx || tensor.ny() != grid.ny)
        throw PreconditionError("tensor field dimensions do not match the grid");
    ForceTable t;
    t.grid = grid;
    t.q = q;
    t.params = p;
    t.tensor = tensor;
    t.mode = (tensor.is_homogeneous() && !force_factored) ? TableMode::Homogeneous : TableMode::Factored;

    const std::size_t n = grid.cells();
    OffsetKernel ks{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    OffsetKernel kl{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    const GaussRule& rule = gauss_legendre(q);
    const double hx = grid.dx(), hy = grid.dy();
    const double abs_tol = 1e-18 * force_bound(p);
    const double reach = p.cutoff / p.eta;

    for (std::size_t c = 0; c < n; ++c) {
        const std::size_t pc = t.partner(c);
        if (pc < c)
            continue;
        if (pc == c)
            continue; // self-paired offsets integrate an odd function over a symmetric set
        const int di = static_cast<int>(c / grid.ny), dj = static_cast<int>(c % grid.ny);
        const double cx = wrap_periodic(di * hx), cy = wrap_periodic(dj * hy);
        if (detail::box_distance(cx, cy, hx, hy) >= reach)
            continue;
        const std::array<double, 4> v = detail::cell_pair_average(cx, cy, hx, hy, p, rule, abs_tol);
        ks.x[c] = v[0];
        ks.y[c] = v[1];
        kl.x[c] = v[2];
        kl.y[c] = v[3];
        ks.x[pc] = -v[0];
        ks.y[pc] = -v[1];
        kl.x[pc] = -v[2];
        kl.y[pc] = -v[3];
    }

    if (t.mode == TableMode::Homogeneous) {
        const Vec2 s = tensor.s(0, 0), l = tensor.l(0, 0);
        t.force = {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
        for (std::size_t c = 0; c < n; ++c) {
            const std::size_t pc = t.partner(c);
            if (pc < c || pc == c)
                continue;
            const double as = s.x * ks.x[c] + s.y * ks.y[c];
            const double al = l.x * kl.x[c] + l.y * kl.y[c];
            const double fx = as * s.x + al * l.x, fy = as * s.y + al * l.y;
            t.force.x[c] = fx;
            t.force.y[c] = fy;
            t.force.x[pc] = -fx;
            t.force.y[pc] = -fy;
        }
    } else {
        t.ks = std::move(ks);
        t.kl = std::move(kl);
    }
    return t;
}

inline void check_table_grid(const DensityField& rho, const ForceTable& table) {
    if (!(rho.grid == table.grid))
        throw PreconditionError("density grid does not match force table grid");
    if (rho.values.size() != rho.grid.cells())
        throw PreconditionError("density size does not match grid");
}

/// Reference O(N^2) double sum u_ij = dx dy sum_kl rho_kl Fbar(i-k, j-l).
inline VelocityField velocity_field_direct(const DensityField& rho, const ForceTable& table) {
    check_table_grid(rho, table);
    const Grid2D& g = table.grid;
    VelocityField u(g);
    const double area = g.dx() * g.dy();
    for (int i = 0; i < g.nx; ++i)
        for (int j = 0; j < g.ny; ++j) {
            double ax = 0, ay = 0, bx = 0, by = 0;
            for (int k = 0; k < g.nx; ++k)
                for (int l = 0; l < g.ny; ++l) {
                    const double r = rho(k, l);
                    if (r == 0.0)
                        continue;
                    const std::size_t o = g.index(g.wrap_i(i - k), g.wrap_j(j - l));
                    if (table.mode == TableMode::Homogeneous) {
                        ax += r * table.force.x[o];
                        ay += r * table.force.y[o];
                    } else {
                        ax += r * table.ks.x[o];
                        ay += r * table.ks.y[o];
                        bx += r * table.kl.x[o];
                        by += r * table.kl.y[o];
                    }
                }
            const std::size_t c = g.index(i, j);
            if (table.mode == TableMode::Homogeneous) {
                u.ux[c] = area * ax;
                u.uy[c] = area * ay;
            } else {
                const Vec2 s = table.tensor.s(i, j), l = table.tensor.l(i, j);
                const double as = s.x * ax + s.y * ay, al = l.x * bx + l.y * by;
                u.ux[c] = area * (as * s.x + al * l.x);
                u.uy[c] = area * (as * s.y + al * l.y);
            }
        }
    return u;
}

namespace detail {

inline std::mutex& fftw_plan_mutex() {
    static std::mutex mu;
    return mu;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <class T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
    T* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
    if (!p)
        throw std::bad_alloc();
    return FftwBuffer<T>(p);
}

} // namespace detail

/// Spectral evaluation of the velocity field by periodic convolution of the
/// offset kernels. Holds FFT workspaces; use one engine per thread.
class ConvolutionEngine {
  public:
    explicit ConvolutionEngine(const ForceTable& table) : table_(&table), grid_(table.grid) {
        const int nx = grid_.nx, ny = grid_.ny;
        nc_ = static_cast<std::size_t>(nx) * (ny / 2 + 1);
        real_ = detail::fftw_buffer<double>(grid_.cells());
        spec_ = detail::fftw_buffer<fftw_complex>(nc_);
        work_ = detail::fftw_buffer<fftw_complex>(nc_);
        {
            std::lock_guard<std::mutex> lock(detail::fftw_plan_mutex());
            forward_ = fftw_plan_dft_r2c_2d(nx, ny, real_.get(), spec_.get(), FFTW_ESTIMATE);
            backward_ = fftw_plan_dft_c2r_2d(nx, ny, work_.get(), real_.get(), FFTW_ESTIMATE);
        }
        if (!forward_ || !backward_)
            throw Error("FFT plan creation failed");
        if (table.mode == TableMode::Homogeneous) {
            kernels_.push_back(transform(table.force.x));
            kernels_.push_back(transform(table.force.y));
        } else {
            kernels_.push_back(transform(table.ks.x));
            kernels_.push_back(transform(table.ks.y));
            kernels_.push_back(transform(table.kl.x));
            kernels_.push_back(transform(table.kl.y));
        }
    }

    ConvolutionEngine(const ConvolutionEngine&) = delete;
    ConvolutionEngine& operator=(const ConvolutionEngine&) = delete;

    ~ConvolutionEngine() {
        std::lock_guard<std::mutex> lock(detail::fftw_plan_mutex());
        if (forward_)
            fftw_destroy_plan(forward_);
        if (backward_)
            fftw_destroy_plan(backward_);
    }

    const ForceTable& table() const { return *table_; }

    VelocityField velocity(const DensityField& rho) {
        check_table_grid(rho, *table_);
        const std::size_t n = grid_.cells();
        std::copy(rho.values.begin(), rho.values.end(), real_.get());
        fftw_execute_dft_r2c(forward_, real_.get(), spec_.get());
        const double scale = grid_.dx() * grid_.dy() / static_cast<double>(n);
        std::vector<std::vector<double>> conv(kernels_.size(), std::vector<double>(n));
        for (std::size_t k = 0; k < kernels_.size(); ++k) {
            const std::vector<std::complex<double>>& kh = kernels_[k];
            for (std::size_t c = 0; c < nc_; ++c) {
                const std::complex<double> v = std::complex<double>(spec_[c][0], spec_[c][1]) * kh[c];
                work_[c][0] = v.real();
                work_[c][1] = v.imag();
            }
            fftw_execute_dft_c2r(backward_, work_.get(), real_.get());
            for (std::size_t c = 0; c < n; ++c)
                conv[k][c] = scale * real_[c];
        }
        VelocityField u(grid_);
        if (table_->mode == TableMode::Homogeneous) {
            u.ux = std::move(conv[0]);
            u.uy = std::move(conv[1]);
        } else {
            for (int i = 0; i < grid_.nx; ++i)
                for (int j = 0; j < grid_.ny; ++j) {
                    const std::size_t c = grid_.index(i, j);
                    const Vec2 s = table_->tensor.s(i, j), l = table_->tensor.l(i, j);
                    const double as = s.x * conv[0][c] + s.y * conv[1][c];
                    const double al = l.x * conv[2][c] + l.y * conv[3][c];
                    u.ux[c] = as * s.x + al * l.x;
                    u.uy[c] = as * s.y + al * l.y;
                }
        }
        return u;
    }

  private:
    std::vector<std::complex<double>> transform(const std::vector<double>& k) {
        std::copy(k.begin(), k.end(), real_.get());
        fftw_execute_dft_r2c(forward_, real_.get(), spec_.get());
        std::vector<std::complex<double>> out(nc_);
        for (std::size_t c = 0; c < nc_; ++c)
            out[c] = {spec_[c][0], spec_[c][1]};
        return out;
    }

    const ForceTable* table_;
    Grid2D grid_;
    std::size_t nc_ = 0;
    detail::FftwBuffer<double> real_;
    detail::FftwBuffer<fftw_complex> spec_;
    detail::FftwBuffer<fftw_complex> work_;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
    std::vector<std::vector<std::complex<double>>> kernels_;
};

/// Fast-path velocity field; builds a temporary engine.
inline VelocityField velocity_field(const DensityField& rho, const ForceTable& table) {
    ConvolutionEngine engine(table);
    return engine.velocity(rho);
}

// Binary cache: magic, key fields, then the kernel arrays as raw row-major doubles.

inline constexpr char kTableMagic[8] = {'A', 'N', 'I', 'S', 'O', 'F', 'T', '1'};

namespace detail {

struct TableHeader {
    char magic[8];
    std::int32_t nx, ny, q, mode;
    double params[8];
    std::uint64_t tensor_hash;
    std::uint64_t components;
};

inline TableHeader make_header(const Grid2D& g, const TensorField& tensor, const ForceParams& p, int q,
                               TableMode mode) {
    TableHeader h{};
    std::memcpy(h.magic, kTableMagic, sizeof h.magic);
    h.nx = g.nx;
    h.ny = g.ny;
    h.q = q;
    h.mode = static_cast<std::int32_t>(mode);
    const double vals[8] = {p.alpha, p.beta, p.gamma, p.e_A, p.e_R, p.chi, p.cutoff, p.eta};
    std::memcpy(h.params, vals, sizeof vals);
    h.tensor_hash = tensor.hash();
    h.components = mode == TableMode::Homogeneous ? 2 : 4;
    return h;
}

} // namespace detail

inline void save_force_table(const std::string& path, const ForceTable& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write force table cache: " + path);
    const detail::TableHeader h = detail::make_header(t.grid, t.tensor, t.params, t.q, t.mode);
    out.write(reinterpret_cast<const char*>(&h), sizeof h);
    auto put = [&out](const std::vector<double>& v) {
        out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    };
    if (t.mode == TableMode::Homogeneous) {
        put(t.force.x);
        put(t.force.y);
    } else {
        put(t.ks.x);
        put(t.ks.y);
        put(t.kl.x);
        put(t.kl.y);
    }
    if (!out)
        throw IoError("failed writing force table cache: " + path);
}

/// Loads a cached table if its key matches (grid, params, q, tensor hash); otherwise nullopt.
inline std::optional<ForceTable> load_force_table(const std::string& path, const Grid2D& grid,
                                                  const TensorField& tensor, const ForceParams& p, int q) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        return std::nullopt;
    detail::TableHeader h{};
    if (!in.read(reinterpret_cast<char*>(&h), sizeof h))
        throw IoError(path + ": truncated force table header");
    if (std::memcmp(h.magic, kTableMagic, sizeof h.magic) != 0)
        throw IoError(path + ": not a force table cache");
    const TableMode mode = static_cast<TableMode>(h.mode);
    const detail::TableHeader want = detail::make_header(grid, tensor, p, q, mode);
    if (h.nx != want.nx || h.ny != want.ny || h.q != want.q || h.tensor_hash != want.tensor_hash ||
        std::memcmp(h.params, want.params, sizeof h.params) != 0 || h.components != want.components)
        return std::nullopt;
    ForceTable t;
    t.grid = grid;
    t.mode = mode;
    t.q = q;
    t.params = p;
    t.tensor = tensor;
    const std::size_t n = grid.cells();
    auto get = [&](std::vector<double>& v) {
        v.resize(n);
        if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double))))
            throw IoError(path + ": truncated force table data");
    };
    if (mode == TableMode::Homogeneous) {
        get(t.force.x);
        get(t.force.y);
    } else {
        get(t.ks.x);
        get(t.ks.y);
        get(t.kl.x);
        get(t.kl.y);
    }
    return t;
}

} // namespace aniso
