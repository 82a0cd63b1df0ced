#pragma once

// Shared helpers for the unit tests and the acceptance binary: random
// finitely supported elements and brute-force reference implementations
// that share no code with the optimized kernels.

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "nctorus/torus.hpp"

namespace nctorus::oracle {

inline TorusElement random_element(const SkewMatrix& theta, std::int64_t radius, std::mt19937_64& rng,
                                   double density = 0.6) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::bernoulli_distribution keep(density);
    TorusElement a(theta);
    for (const auto& k : window_sum(radius, theta.dim()))
        if (keep(rng)) a.add(k, Complex(u(rng), u(rng)));
    if (a.empty()) a.add(LatticePoint(theta.dim()), Complex(u(rng), u(rng)));
    return a;
}

inline double l1_distance(const TorusElement& a, const TorusElement& b) { return l1_bound(a - b); }

/// k.Theta l straight from the matrix entries, no reduction.
inline double naive_form(const LatticePoint& k, const LatticePoint& l, const SkewMatrix& theta) {
    double s = 0.0;
    for (std::size_t i = 0; i < theta.dim(); ++i)
        for (std::size_t j = 0; j < theta.dim(); ++j)
            s += static_cast<double>(k[i]) * theta(i, j) * static_cast<double>(l[j]);
    return s;
}

/// Double loop over all pairs, accumulating into a plain map.
inline TorusElement naive_star(const TorusElement& a, const TorusElement& b) {
    TorusElement out(a.theta());
    for (const auto& [r, x] : a.coeffs())
        for (const auto& [s, y] : b.coeffs())
            out.add(r + s, x * y * std::polar(1.0, -std::numbers::pi * naive_form(r, s, a.theta())));
    return out;
}

inline LatticePoint pt(std::initializer_list<std::int64_t> v) {
    return LatticePoint(std::span<const std::int64_t>(v.begin(), v.size()));
}

} // namespace nctorus::oracle
