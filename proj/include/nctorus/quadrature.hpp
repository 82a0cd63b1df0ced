#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace nctorus {

/// Outcome of a resolution-doubling quadrature run.
struct QuadratureResult {
    std::complex<double> value;
    double relative_change = 0.0; ///< between the last two resolutions
    std::size_t points_per_axis = 0;
};

/// Tensor trapezoid rule on [-half_width, half_width]^dim with n intervals per axis.
/// Intended for integrands that decay like Gaussians, where the rule converges
/// geometrically once the box contains the mass.
inline std::complex<double> trapezoid_box(const std::function<std::complex<double>(std::span<const double>)>& f,
                                          std::size_t dim, double half_width, std::size_t n) {
    if (dim == 0 || n == 0) throw DomainError("trapezoid_box needs dim >= 1 and n >= 1");
    const double h = 2.0 * half_width / static_cast<double>(n);
    std::vector<std::size_t> idx(dim, 0);
    std::vector<double> x(dim);
    std::complex<double> sum{};
    while (true) {
        double w = 1.0;
        for (std::size_t d = 0; d < dim; ++d) {
            x[d] = -half_width + h * static_cast<double>(idx[d]);
            if (idx[d] == 0 || idx[d] == n) w *= 0.5;
        }
        sum += w * f(x);
        std::size_t d = dim;
        while (d-- > 0) {
            if (++idx[d] <= n) break;
            idx[d] = 0;
        }
        if (d == static_cast<std::size_t>(-1)) break;
    }
    return sum * std::pow(h, static_cast<double>(dim));
}

/// Doubles the resolution until two consecutive estimates agree to `target`
/// relative; throws NumericsError if 1e-8 is not reached within `max_points`.
inline QuadratureResult integrate_gaussian_like(const std::function<std::complex<double>(std::span<const double>)>& f,
                                                std::size_t dim, double half_width, double target = 1e-13,
                                                std::size_t start_points = 16, std::size_t max_points = 1024) {
    QuadratureResult out;
    std::size_t n = start_points;
    std::complex<double> prev = trapezoid_box(f, dim, half_width, n);
    double change = INFINITY;
    while (n < max_points) {
        n *= 2;
        const std::complex<double> next = trapezoid_box(f, dim, half_width, n);
        const double scale = std::max(std::abs(next), 1e-300);
        change = std::abs(next - prev) / scale;
        prev = next;
        if (change <= target) break;
    }
    out.value = prev;
    out.relative_change = change;
    out.points_per_axis = n;
    if (!(change <= 1e-8))
        throw NumericsError("quadrature did not converge: relative change " + std::to_string(change) + " at " +
                            std::to_string(n) + " points per axis");
    return out;
}

} // namespace nctorus
