#pragma once

// Small numerical kernels shared by the rest of the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/erf.hpp>

namespace wbary::numeric {

inline constexpr double inf = std::numeric_limits<double>::infinity();

// Fixed-order pairwise summation. The result depends only on the input order,
// never on scheduling, which keeps parallel reductions reproducible.
inline double pairwise_sum(std::span<const double> xs)
{
    constexpr std::size_t block = 8;
    if (xs.size() <= block) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

inline double pairwise_mean(std::span<const double> xs)
{
    return xs.empty() ? 0.0 : pairwise_sum(xs) / static_cast<double>(xs.size());
}

// Midpoints of a uniform partition of (0,1) into n cells.
inline std::vector<double> midpoint_grid(std::size_t n)
{
    std::vector<double> g(n);
    const double w = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) g[k] = (static_cast<double>(k) + 0.5) * w;
    return g;
}

inline bool is_midpoint_grid(std::span<const double> alphas)
{
    const std::size_t n = alphas.size();
    if (n == 0) return false;
    const double w = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k)
        if (std::abs(alphas[k] - (static_cast<double>(k) + 0.5) * w) > 1e-15) return false;
    return true;
}

// 16-node Gauss-Legendre rule on [a, b].
template <class F>
double gauss_legendre16(F&& f, double a, double b)
{
    return boost::math::quadrature::gauss<double, 16>::integrate(f, a, b);
}

// Composite midpoint rule on (a, b) with n cells; never evaluates the endpoints.
template <class F>
double midpoint_rule(F&& f, double a, double b, std::size_t n)
{
    const double w = (b - a) / static_cast<double>(n);
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = f(a + (static_cast<double>(k) + 0.5) * w);
    return pairwise_sum(v) * w;
}

// Standard normal helpers.
inline double normal_pdf(double x)
{
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

inline double normal_quantile(double alpha)
{
    if (alpha <= 0.0) return -inf;
    if (alpha >= 1.0) return inf;
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * alpha);
}

// Mills ratio (1 - Phi(x)) / phi(x) for x >= 0, stable for large x.
inline double normal_mills_ratio(double x)
{
    if (x < 25.0) return normal_cdf(-x) / normal_pdf(x);
    // Asymptotic series; at x >= 25 the truncation error is below 1e-16 relative.
    const double x2 = x * x;
    return (1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2)) / x;
}

// Smallest index k with xs[k] >= v in a sorted range (lower_bound as index).
inline std::size_t lower_index(std::span<const double> xs, double v)
{
    return static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), v) - xs.begin());
}

}  // namespace wbary::numeric
