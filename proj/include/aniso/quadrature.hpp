#pragma once

#include "aniso/errors.hpp"

#include <boost/math/special_functions/legendre.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <vector>

namespace aniso {

/// Gauss-Legendre nodes and weights on [-1, 1], nodes ascending.
struct GaussRule {
    std::vector<double> x;
    std::vector<double> w;
};

inline GaussRule make_gauss_legendre(int q) {
    if (q < 1)
        throw PreconditionError("quadrature order must be at least 1");
    GaussRule r;
    const std::vector<double> zeros = boost::math::legendre_p_zeros<double>(q);
    for (double z : zeros) {
        const double dp = boost::math::legendre_p_prime<double>(q, z);
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        r.x.push_back(z);
        r.w.push_back(w);
        if (z != 0.0) {
            r.x.push_back(-z);
            r.w.push_back(w);
        }
    }
    std::vector<std::size_t> idx(r.x.size());
    for (std::size_t k = 0; k < idx.size(); ++k)
        idx[k] = k;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return r.x[a] < r.x[b]; });
    GaussRule sorted;
    for (std::size_t k : idx) {
        sorted.x.push_back(r.x[k]);
        sorted.w.push_back(r.w[k]);
    }
    return sorted;
}

/// Cached rule; safe for concurrent callers.
inline const GaussRule& gauss_legendre(int q) {
    static std::mutex mu;
    static std::map<int, GaussRule> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(q);
    if (it == cache.end())
        it = cache.emplace(q, make_gauss_legendre(q)).first;
    return it->second;
}

namespace detail {

template <std::size_t K, class F>
std::array<double, K> tensor_rule(F& f, const GaussRule& g, double x0, double x1, double y0, double y1) {
    std::array<double, K> acc{};
    const double cx = 0.5 * (x0 + x1), hx = 0.5 * (x1 - x0);
    const double cy = 0.5 * (y0 + y1), hy = 0.5 * (y1 - y0);
    for (std::size_t a = 0; a < g.x.size(); ++a) {
        const double x = cx + hx * g.x[a];
        for (std::size_t b = 0; b < g.x.size(); ++b) {
            const double y = cy + hy * g.x[b];
            const std::array<double, K> v = f(x, y);
            const double w = g.w[a] * g.w[b];
            for (std::size_t k = 0; k < K; ++k)
                acc[k] += w * v[k];
        }
    }
    for (std::size_t k = 0; k < K; ++k)
        acc[k] *= hx * hy;
    return acc;
}

template <std::size_t K, class F>
std::array<double, K> adaptive_rect_rec(F& f, const GaussRule& g, double x0, double x1, double y0, double y1,
                                        const std::array<double, K>& coarse, double abs_tol, double rel_tol,
                                        int depth) {
    const double xm = 0.5 * (x0 + x1), ym = 0.5 * (y0 + y1);
    const std::array<std::array<double, 4>, 4> boxes{{{x0, xm, y0, ym}, {xm, x1, y0, ym}, {x0, xm, ym, y1}, {xm, x1, ym, y1}}};
    std::array<std::array<double, K>, 4> parts;
    std::array<double, K> fine{};
    for (int c = 0; c < 4; ++c) {
        parts[c] = tensor_rule<K>(f, g, boxes[c][0], boxes[c][1], boxes[c][2], boxes[c][3]);
        for (std::size_t k = 0; k < K; ++k)
            fine[k] += parts[c][k];
    }
    double err = 0.0, mag = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        err = std::max(err, std::abs(fine[k] - coarse[k]));
        mag = std::max(mag, std::abs(fine[k]));
    }
    if (err <= std::max(abs_tol, rel_tol * mag) || depth <= 0)
        return fine;
    std::array<double, K> out{};
    for (int c = 0; c < 4; ++c) {
        const std::array<double, K> v = adaptive_rect_rec<K>(f, g, boxes[c][0], boxes[c][1], boxes[c][2],
                                                             boxes[c][3], parts[c], 0.5 * abs_tol, rel_tol, depth - 1);
        for (std::size_t k = 0; k < K; ++k)
            out[k] += v[k];
    }
    return out;
}

} // namespace detail

/// Adaptive composite tensor Gauss rule for a K-component integrand over a rectangle.
/// A panel is accepted when its four children change the result by less than
/// max(abs_tol * 2^-depth, rel_tol * |value|).
template <std::size_t K, class F>
std::array<double, K> integrate_rect(F&& f, const GaussRule& g, double x0, double x1, double y0, double y1,
                                     double abs_tol, double rel_tol, int max_depth = 30) {
    const std::array<double, K> coarse = detail::tensor_rule<K>(f, g, x0, x1, y0, y1);
    return detail::adaptive_rect_rec<K>(f, g, x0, x1, y0, y1, coarse, abs_tol, rel_tol, max_depth);
}

} // namespace aniso
