#pragma once

#include "aniso/errors.hpp"
#include "aniso/grid.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace aniso {

/// Mean of each column i over j.
inline std::vector<double> column_profile(const DensityField& rho) {
    const Grid2D& g = rho.grid;
    std::vector<double> p(g.nx, 0.0);
    for (int i = 0; i < g.nx; ++i) {
        for (int j = 0; j < g.ny; ++j)
            p[i] += rho(i, j);
        p[i] /= g.ny;
    }
    return p;
}

/// max_i (max_j rho - min_j rho).
inline double max_column_variation(const DensityField& rho) {
    const Grid2D& g = rho.grid;
    double v = 0.0;
    for (int i = 0; i < g.nx; ++i) {
        double lo = rho(i, 0), hi = rho(i, 0);
        for (int j = 1; j < g.ny; ++j) {
            lo = std::min(lo, rho(i, j));
            hi = std::max(hi, rho(i, j));
        }
        v = std::max(v, hi - lo);
    }
    return v;
}

/// A run of occupied columns [first, first + width) on the periodic column circle.
struct Stripe {
    int first = 0;
    int width = 0;
    double center = 0.0; ///< mass-weighted column index in [0, nx)
    double mass = 0.0;
};

struct StripeReport {
    std::vector<Stripe> stripes;
    std::vector<char> occupied;
    bool full_support = false; ///< every column occupied; no stripe structure

    /// Connected column-support components; full support is one component.
    int components() const { return full_support ? 1 : static_cast<int>(stripes.size()); }
};

/// Columns with profile > rel_threshold * max profile, grouped into periodic runs.
inline StripeReport find_stripes(const std::vector<double>& profile, double rel_threshold) {
    const int n = static_cast<int>(profile.size());
    if (n == 0)
        throw PreconditionError("empty column profile");
    StripeReport rep;
    const double mx = *std::max_element(profile.begin(), profile.end());
    rep.occupied.assign(n, 0);
    if (!(mx > 0))
        return rep;
    int count = 0;
    for (int i = 0; i < n; ++i)
        if (profile[i] > rel_threshold * mx) {
            rep.occupied[i] = 1;
            ++count;
        }
    if (count == n) {
        rep.full_support = true;
        return rep;
    }
    int start = 0;
    while (rep.occupied[start] || !rep.occupied[(start + 1) % n])
        start = (start + 1) % n;
    // start is empty and start+1 begins a run
    for (int k = 1; k <= n; ++k) {
        const int i = (start + k) % n;
        if (!rep.occupied[i])
            continue;
        const int prev = (i - 1 + n) % n;
        if (!rep.occupied[prev])
            rep.stripes.push_back(Stripe{i, 0, 0.0, 0.0});
        Stripe& s = rep.stripes.back();
        const double idx = s.first + s.width; // unwrapped index
        s.center += idx * profile[i];
        s.mass += profile[i];
        ++s.width;
    }
    for (Stripe& s : rep.stripes) {
        s.center /= s.mass;
        s.center = std::fmod(s.center, static_cast<double>(n));
    }
    std::sort(rep.stripes.begin(), rep.stripes.end(),
              [](const Stripe& a, const Stripe& b) { return a.center < b.center; });
    return rep;
}

inline StripeReport find_stripes(const DensityField& rho, double rel_threshold) {
    return find_stripes(column_profile(rho), rel_threshold);
}

/// Periodic gaps between consecutive stripe centers, in cells.
inline std::vector<double> stripe_spacings(const StripeReport& rep, int nx) {
    std::vector<double> d;
    const std::size_t k = rep.stripes.size();
    for (std::size_t a = 0; a < k; ++a) {
        double gap = rep.stripes[(a + 1) % k].center - rep.stripes[a].center;
        if (gap <= 0)
            gap += nx;
        d.push_back(gap);
    }
    return d;
}

/// Periodic distance in cells from column i to the nearest occupied column of `occ`.
inline int column_distance(int i, const std::vector<char>& occ) {
    const int n = static_cast<int>(occ.size());
    for (int r = 0; r <= n / 2; ++r)
        if (occ[(i + r) % n] || occ[((i - r) % n + n) % n])
            return r;
    return n;
}

/// Symmetric Hausdorff distance in cells between two sets of occupied columns.
inline int column_set_distance(const std::vector<char>& a, const std::vector<char>& b) {
    if (a.size() != b.size())
        throw PreconditionError("column sets must have the same length");
    int d = 0;
    for (int i = 0; i < static_cast<int>(a.size()); ++i) {
        if (a[i])
            d = std::max(d, column_distance(i, b));
        if (b[i])
            d = std::max(d, column_distance(i, a));
    }
    return d;
}

} // namespace aniso
