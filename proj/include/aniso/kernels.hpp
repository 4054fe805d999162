#pragma once

#include "aniso/errors.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace aniso {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
inline Vec2 operator*(double c, Vec2 a) { return {c * a.x, c * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

/// Signed minimum-image representative of a coordinate difference on the unit period.
inline double wrap_periodic(double d) { return d - std::nearbyint(d); }
inline Vec2 wrap_periodic(Vec2 d) { return {wrap_periodic(d.x), wrap_periodic(d.y)}; }

/// Force-law constants. `eta` rescales the offset, F(eta*d).
struct ForceParams {
    double alpha = 270.0;
    double beta = 0.1;
    double gamma = 10.5;
    double e_A = 95.0;
    double e_R = 100.0;
    double chi = 0.2;
    double cutoff = 0.5;
    double eta = 1.0;

    void validate() const {
        if (!(alpha >= 0 && beta >= 0 && gamma >= 0 && e_A >= 0 && e_R >= 0))
            throw PreconditionError("force constants alpha, beta, gamma, e_A, e_R must be nonnegative");
        if (!(chi >= 0 && chi <= 1))
            throw PreconditionError("chi must lie in [0,1]");
        if (!(cutoff > 0) || !std::isfinite(cutoff))
            throw PreconditionError("cutoff must be positive");
        if (!(eta > 0) || !std::isfinite(eta))
            throw PreconditionError("eta must be positive");
    }

    bool operator==(const ForceParams&) const = default;
};

namespace detail {

inline void check_tau(double tau) {
    if (!(tau >= 0))
        throw PreconditionError("force coefficient argument must be nonnegative");
}

/// f_s and f_l at tau < cutoff with shared exponentials; no argument checks.
inline void coeffs_unchecked(double tau, const ForceParams& p, double& fs, double& fl) {
    if (tau >= p.cutoff) {
        fs = 0.0;
        fl = 0.0;
        return;
    }
    const double fr = (p.alpha * tau * tau + p.beta) * std::exp(-p.e_R * tau);
    const double fa = -p.gamma * tau * std::exp(-p.e_A * tau);
    fs = fr + p.chi * fa;
    fl = fr + fa;
}

inline Vec2 force_unchecked(Vec2 d, Vec2 s, Vec2 l, const ForceParams& p) {
    const Vec2 e = p.eta * d;
    const double r = std::sqrt(e.x * e.x + e.y * e.y);
    if (r >= p.cutoff)
        return {};
    double fs, fl;
    coeffs_unchecked(r, p, fs, fl);
    const double as = fs * dot(s, e);
    const double al = fl * dot(l, e);
    return {as * s.x + al * l.x, as * s.y + al * l.y};
}

} // namespace detail

inline double repulsion_coeff(double tau, const ForceParams& p) {
    detail::check_tau(tau);
    if (tau >= p.cutoff)
        return 0.0;
    return (p.alpha * tau * tau + p.beta) * std::exp(-p.e_R * tau);
}

inline double attraction_coeff(double tau, const ForceParams& p) {
    detail::check_tau(tau);
    if (tau >= p.cutoff)
        return 0.0;
    return -p.gamma * tau * std::exp(-p.e_A * tau);
}

inline double coeff_s(double tau, const ForceParams& p) {
    return repulsion_coeff(tau, p) + p.chi * attraction_coeff(tau, p);
}

inline double coeff_l(double tau, const ForceParams& p) {
    return repulsion_coeff(tau, p) + attraction_coeff(tau, p);
}

inline constexpr double kUnitTolerance = 1e-12;

/// Rejects direction pairs that are not orthonormal.
inline void check_frame(Vec2 s, Vec2 l) {
    if (std::abs(norm(s) - 1.0) > kUnitTolerance || std::abs(norm(l) - 1.0) > kUnitTolerance)
        throw PreconditionError("direction vectors s and l must be unit vectors");
    if (std::abs(dot(s, l)) > kUnitTolerance)
        throw PreconditionError("direction vectors s and l must be orthogonal");
}

/// f_s(|d|)(s.d)s + f_l(|d|)(l.d)l evaluated at eta*d.
inline Vec2 total_force(Vec2 d, Vec2 s, Vec2 l, const ForceParams& p) {
    check_frame(s, l);
    return detail::force_unchecked(d, s, l, p);
}

/// Clockwise rotation of s.
inline Vec2 normal_of(Vec2 s) { return {s.y, -s.x}; }

/// Per-cell orthonormal frame (s, l) on an nx-by-ny grid; cell (i,j) is stored at i*ny + j.
class TensorField {
  public:
    TensorField() = default;

    TensorField(int nx, int ny, std::vector<Vec2> s) : nx_(nx), ny_(ny), s_(std::move(s)) {
        if (nx <= 0 || ny <= 0)
            throw PreconditionError("tensor field dimensions must be positive");
        if (s_.size() != static_cast<std::size_t>(nx) * ny)
            throw PreconditionError("tensor field size does not match its dimensions");
        l_.resize(s_.size());
        for (std::size_t c = 0; c < s_.size(); ++c) {
            const double n = norm(s_[c]);
            if (!(n > 0) || !std::isfinite(n))
                throw PreconditionError("zero or non-finite direction vector in tensor field at cell " +
                                        std::to_string(c / ny) + " " + std::to_string(c % ny));
            s_[c] = (1.0 / n) * s_[c];
            l_[c] = normal_of(s_[c]);
        }
    }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    Vec2 s(int i, int j) const { return s_[static_cast<std::size_t>(i) * ny_ + j]; }
    Vec2 l(int i, int j) const { return l_[static_cast<std::size_t>(i) * ny_ + j]; }
    const std::vector<Vec2>& s_values() const { return s_; }

    bool is_homogeneous() const {
        for (const Vec2& v : s_)
            if (v.x != s_.front().x || v.y != s_.front().y)
                return false;
        return true;
    }

    /// FNV-1a over dimensions and the normalized s components.
    std::uint64_t hash() const {
        std::uint64_t h = 1469598103934665603ULL;
        auto mix = [&h](const void* data, std::size_t n) {
            const auto* b = static_cast<const unsigned char*>(data);
            for (std::size_t k = 0; k < n; ++k) {
                h ^= b[k];
                h *= 1099511628211ULL;
            }
        };
        mix(&nx_, sizeof nx_);
        mix(&ny_, sizeof ny_);
        for (const Vec2& v : s_) {
            mix(&v.x, sizeof v.x);
            mix(&v.y, sizeof v.y);
        }
        return h;
    }

  private:
    int nx_ = 0;
    int ny_ = 0;
    std::vector<Vec2> s_;
    std::vector<Vec2> l_;
};

inline TensorField build_homogeneous_tensor(Vec2 s, int nx, int ny) {
    if (!(norm(s) > 0))
        throw PreconditionError("homogeneous tensor direction must be nonzero");
    return TensorField(nx, ny, std::vector<Vec2>(static_cast<std::size_t>(nx) * ny, s));
}

/// Reads "nx ny" then nx*ny lines "i j s_x s_y". Every cell must appear exactly once.
inline TensorField load_tensor_field(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open tensor field file: " + path);
    std::string line;
    int nx = 0, ny = 0;
    long lineno = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                return true;
        }
        return false;
    };
    if (!next_line())
        throw IoError(path + ": empty tensor field file");
    {
        std::istringstream hs(line);
        std::string extra;
        if (!(hs >> nx >> ny) || (hs >> extra) || nx <= 0 || ny <= 0)
            throw IoError(path + ":" + std::to_string(lineno) + ": malformed header, expected \"nx ny\"");
    }
    const std::size_t cells = static_cast<std::size_t>(nx) * ny;
    std::vector<Vec2> s(cells);
    std::vector<char> seen(cells, 0);
    std::size_t count = 0;
    while (next_line()) {
        std::istringstream ls(line);
        long i, j;
        double sx, sy;
        std::string extra;
        if (!(ls >> i >> j >> sx >> sy) || (ls >> extra))
            throw IoError(path + ":" + std::to_string(lineno) + ": malformed row, expected \"i j s_x s_y\"");
        if (i < 0 || i >= nx || j < 0 || j >= ny)
            throw IoError(path + ":" + std::to_string(lineno) + ": cell index out of range");
        const std::size_t c = static_cast<std::size_t>(i) * ny + j;
        if (seen[c])
            throw IoError(path + ":" + std::to_string(lineno) + ": duplicate cell");
        if (!(std::hypot(sx, sy) > 0) || !std::isfinite(sx) || !std::isfinite(sy))
            throw IoError(path + ":" + std::to_string(lineno) + ": zero or non-finite direction vector");
        seen[c] = 1;
        s[c] = {sx, sy};
        ++count;
    }
    if (count != cells)
        throw IoError(path + ": expected " + std::to_string(cells) + " rows, found " + std::to_string(count));
    return TensorField(nx, ny, std::move(s));
}

/// Loads a tensor field and checks its dimensions against the grid.
inline TensorField load_tensor_field(const std::string& path, int nx, int ny) {
    TensorField t = load_tensor_field(path);
    if (t.nx() != nx || t.ny() != ny)
        throw IoError(path + ": tensor field is " + std::to_string(t.nx()) + "x" + std::to_string(t.ny()) +
                      ", grid is " + std::to_string(nx) + "x" + std::to_string(ny));
    return t;
}

inline void save_tensor_field(const std::string& path, const TensorField& t) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write tensor field file: " + path);
    out.precision(17);
    out << t.nx() << ' ' << t.ny() << '\n';
    for (int i = 0; i < t.nx(); ++i)
        for (int j = 0; j < t.ny(); ++j) {
            const Vec2 v = t.s(i, j);
            out << i << ' ' << j << ' ' << v.x << ' ' << v.y << '\n';
        }
    if (!out)
        throw IoError("failed writing tensor field file: " + path);
}

} // namespace aniso
