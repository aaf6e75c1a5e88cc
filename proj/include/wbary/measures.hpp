#pragma once

// One-dimensional probability measures represented through their quantile
// functions, and the quadratic Wasserstein distance between them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "wbary/distributions.hpp"
#include "wbary/errors.hpp"
#include "wbary/numeric.hpp"
#include "wbary/order_stats.hpp"

namespace wbary {

// Equal-weight atoms X*_(1) <= ... <= X*_(p).
class EmpiricalMeasure {
public:
    // Sorts its input; ties are allowed.
    explicit EmpiricalMeasure(std::vector<double> samples) : atoms_(std::move(samples))
    {
        check_finite();
        std::sort(atoms_.begin(), atoms_.end());
    }

    // Takes atoms that must already be non-decreasing.
    static EmpiricalMeasure from_sorted(std::vector<double> atoms)
    {
        if (!std::is_sorted(atoms.begin(), atoms.end()))
            throw InvariantError("empirical measure atoms must be non-decreasing");
        return EmpiricalMeasure(std::move(atoms), sorted_tag{});
    }

    std::span<const double> atoms() const { return atoms_; }
    std::size_t size() const { return atoms_.size(); }

    // Step quantile: X*_(j) on ((j-1)/p, j/p].
    double quantile(double alpha) const
    {
        const double p = static_cast<double>(atoms_.size());
        auto j = static_cast<std::size_t>(std::ceil(alpha * p));
        j = std::clamp<std::size_t>(j, 1, atoms_.size());
        return atoms_[j - 1];
    }

    double mean() const { return numeric::pairwise_mean(atoms_); }

private:
    struct sorted_tag {};
    EmpiricalMeasure(std::vector<double> atoms, sorted_tag) : atoms_(std::move(atoms)) { check_finite(); }

    void check_finite() const
    {
        if (atoms_.empty()) throw DomainError("empirical measure needs at least one atom");
        for (double x : atoms_)
            if (!std::isfinite(x)) throw DomainError("empirical measure atoms must be finite");
    }

    std::vector<double> atoms_;
};

// Piecewise-constant quantile: values[k] on (breaks[k-1], breaks[k]] with
// breaks[-1] = 0 and breaks[m-1] = 1 implied.
struct StepQuantile {
    std::vector<double> breaks;
    std::vector<double> values;
};

// Quantile known at grid points, linearly interpolated in between and
// extended constantly beyond the outermost points.
struct GridQuantile {
    std::vector<double> alphas;
    std::vector<double> values;
};

struct AnalyticQuantile {
    AnalyticDistribution dist;
};

class QuantileFunction {
public:
    using Representation = std::variant<StepQuantile, GridQuantile, AnalyticQuantile>;

    static QuantileFunction step(std::vector<double> breaks, std::vector<double> values)
    {
        return QuantileFunction(StepQuantile{std::move(breaks), std::move(values)});
    }
    static QuantileFunction grid(std::vector<double> alphas, std::vector<double> values)
    {
        return QuantileFunction(GridQuantile{std::move(alphas), std::move(values)});
    }
    static QuantileFunction analytic(AnalyticDistribution dist) { return QuantileFunction(AnalyticQuantile{std::move(dist)}); }

    explicit QuantileFunction(Representation rep) : rep_(std::move(rep)) { validate(); }

    const Representation& representation() const { return rep_; }
    bool is_step() const { return std::holds_alternative<StepQuantile>(rep_); }
    bool is_grid() const { return std::holds_alternative<GridQuantile>(rep_); }
    bool is_analytic() const { return std::holds_alternative<AnalyticQuantile>(rep_); }
    const StepQuantile& as_step() const { return std::get<StepQuantile>(rep_); }
    const GridQuantile& as_grid() const { return std::get<GridQuantile>(rep_); }
    const AnalyticQuantile& as_analytic() const { return std::get<AnalyticQuantile>(rep_); }

    // Support interval implied by the representation.
    std::pair<double, double> support() const
    {
        return std::visit(
            [](const auto& r) -> std::pair<double, double> {
                using T = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<T, AnalyticQuantile>) return r.dist.support();
                else return {r.values.front(), r.values.back()};
            },
            rep_);
    }

    double operator()(double alpha) const
    {
        return std::visit(
            [alpha](const auto& r) -> double {
                using T = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<T, StepQuantile>) {
                    return r.values[numeric::lower_index(r.breaks, alpha)];
                } else if constexpr (std::is_same_v<T, GridQuantile>) {
                    if (alpha <= r.alphas.front()) return r.values.front();
                    if (alpha >= r.alphas.back()) return r.values.back();
                    const std::size_t i = numeric::lower_index(r.alphas, alpha);
                    const double w = (alpha - r.alphas[i - 1]) / (r.alphas[i] - r.alphas[i - 1]);
                    return r.values[i - 1] + w * (r.values[i] - r.values[i - 1]);
                } else {
                    return r.dist.quantile(alpha);
                }
            },
            rep_);
    }

private:
    void validate() const
    {
        if (const auto* s = std::get_if<StepQuantile>(&rep_)) {
            if (s->values.empty()) throw DomainError("step quantile needs at least one piece");
            if (s->breaks.size() + 1 != s->values.size())
                throw InvariantError("step quantile needs exactly one more value than breakpoints");
            for (std::size_t k = 0; k < s->breaks.size(); ++k) {
                if (!(s->breaks[k] > 0.0 && s->breaks[k] < 1.0))
                    throw InvariantError("step breakpoints must lie strictly inside (0,1)");
                if (k > 0 && !(s->breaks[k] > s->breaks[k - 1]))
                    throw InvariantError("step breakpoints must be strictly increasing");
            }
            check_values(s->values);
        } else if (const auto* g = std::get_if<GridQuantile>(&rep_)) {
            if (g->alphas.empty() || g->alphas.size() != g->values.size())
                throw InvariantError("grid quantile needs matching non-empty alpha and value arrays");
            for (std::size_t k = 0; k < g->alphas.size(); ++k) {
                if (!(g->alphas[k] > 0.0 && g->alphas[k] < 1.0))
                    throw InvariantError("grid alphas must lie strictly inside (0,1)");
                if (k > 0 && !(g->alphas[k] > g->alphas[k - 1]))
                    throw InvariantError("grid alphas must be strictly increasing");
            }
            check_values(g->values);
        }
    }

    static void check_values(const std::vector<double>& v)
    {
        for (std::size_t k = 0; k < v.size(); ++k) {
            if (!std::isfinite(v[k])) throw InvariantError("quantile values must be finite");
            if (k > 0 && v[k] < v[k - 1])
                throw InvariantError("quantile values must be non-decreasing (index " + std::to_string(k) + ")");
        }
    }

    Representation rep_;
};

inline QuantileFunction empirical_to_quantile(const EmpiricalMeasure& m)
{
    const std::size_t p = m.size();
    std::vector<double> breaks(p - 1);
    for (std::size_t j = 1; j < p; ++j) breaks[j - 1] = static_cast<double>(j) / static_cast<double>(p);
    return QuantileFunction::step(std::move(breaks), {m.atoms().begin(), m.atoms().end()});
}

struct W2Options {
    // Midpoint cells used whenever a Grid or analytic input forces quadrature.
    std::size_t grid_size = 4096;
    // Gauss-Legendre panels per step piece against an analytic quantile.
    std::size_t panels_per_piece = 1;
};

enum class W2Method { exact_step, piecewise_gauss, midpoint };

inline const char* to_string(W2Method m)
{
    switch (m) {
    case W2Method::exact_step: return "exact-step";
    case W2Method::piecewise_gauss: return "quadrature";
    case W2Method::midpoint: return "quadrature";
    }
    return "?";
}

struct W2Result {
    double value = 0.0;
    W2Method method = W2Method::exact_step;
};

namespace detail {

// Exact integral of the squared difference of two step functions over the
// merged partition.
inline double w2_step_step(const StepQuantile& a, const StepQuantile& b)
{
    std::vector<double> terms;
    terms.reserve(a.breaks.size() + b.breaks.size() + 1);
    std::size_t i = 0, j = 0;
    double left = 0.0;
    while (true) {
        const double ra = i < a.breaks.size() ? a.breaks[i] : 1.0;
        const double rb = j < b.breaks.size() ? b.breaks[j] : 1.0;
        const double right = std::min(ra, rb);
        const double d = a.values[i] - b.values[j];
        terms.push_back((right - left) * d * d);
        if (right >= 1.0) break;
        if (ra == right) ++i;
        if (rb == right) ++j;
        left = right;
    }
    return numeric::pairwise_sum(terms);
}

// Integral of g over (a, b], refined geometrically toward an endpoint where
// the integrand may be singular (unbounded quantile at 0 or 1).
template <class G>
double integrate_piece(G&& g, double a, double b, bool singular_left, bool singular_right,
                       std::size_t panels)
{
    constexpr int levels = 40;
    if (!singular_left && !singular_right) {
        const double w = (b - a) / static_cast<double>(panels);
        double acc = 0.0;
        for (std::size_t k = 0; k < panels; ++k)
            acc += numeric::gauss_legendre16(g, a + static_cast<double>(k) * w, a + static_cast<double>(k + 1) * w);
        return acc;
    }
    const double mid = singular_left && singular_right ? 0.5 * (a + b) : (singular_left ? b : a);
    double acc = 0.0;
    if (singular_left) {
        // panels [a + s/2^(k+1), a + s/2^k]; the remainder below a + s/2^levels is dropped
        const double s = mid - a;
        for (int k = 0; k < levels; ++k)
            acc += numeric::gauss_legendre16(g, a + std::ldexp(s, -(k + 1)), a + std::ldexp(s, -k));
    }
    if (singular_right) {
        const double s = b - mid;
        for (int k = 0; k < levels; ++k)
            acc += numeric::gauss_legendre16(g, b - std::ldexp(s, -k), b - std::ldexp(s, -(k + 1)));
    }
    return acc;
}

inline double w2_step_analytic(const StepQuantile& s, const AnalyticDistribution& d, std::size_t panels)
{
    const auto [lo, hi] = d.support();
    const std::size_t m = s.values.size();
    std::vector<double> terms(m);
    for (std::size_t k = 0; k < m; ++k) {
        const double a = k == 0 ? 0.0 : s.breaks[k - 1];
        const double b = k + 1 == m ? 1.0 : s.breaks[k];
        const double v = s.values[k];
        auto g = [&](double alpha) {
            const double e = v - d.quantile(alpha);
            return e * e;
        };
        terms[k] = integrate_piece(g, a, b, k == 0 && !std::isfinite(lo), k + 1 == m && !std::isfinite(hi), panels);
    }
    return numeric::pairwise_sum(terms);
}

}  // namespace detail

// Quadratic Wasserstein distance between arbitrary callables by the composite
// midpoint rule on (0,1).
template <class F, class G>
double wasserstein2_squared_midpoint(F&& fa, G&& fb, std::size_t cells)
{
    return numeric::midpoint_rule(
        [&](double alpha) {
            const double d = fa(alpha) - fb(alpha);
            return d * d;
        },
        0.0, 1.0, cells);
}

inline W2Result wasserstein2_squared_detailed(const QuantileFunction& a, const QuantileFunction& b,
                                              const W2Options& opt = {})
{
    if (a.is_step() && b.is_step()) return {detail::w2_step_step(a.as_step(), b.as_step()), W2Method::exact_step};
    if (a.is_step() && b.is_analytic())
        return {detail::w2_step_analytic(a.as_step(), b.as_analytic().dist, opt.panels_per_piece),
                W2Method::piecewise_gauss};
    if (a.is_analytic() && b.is_step())
        return {detail::w2_step_analytic(b.as_step(), a.as_analytic().dist, opt.panels_per_piece),
                W2Method::piecewise_gauss};

    // A grid stored on the midpoints of a uniform partition is integrated on its own nodes.
    const GridQuantile* node_source = nullptr;
    if (a.is_grid() && numeric::is_midpoint_grid(a.as_grid().alphas)) node_source = &a.as_grid();
    else if (b.is_grid() && numeric::is_midpoint_grid(b.as_grid().alphas)) node_source = &b.as_grid();
    if (node_source) {
        const auto& alphas = node_source->alphas;
        std::vector<double> terms(alphas.size());
        for (std::size_t k = 0; k < alphas.size(); ++k) {
            const double d = a(alphas[k]) - b(alphas[k]);
            terms[k] = d * d;
        }
        return {numeric::pairwise_sum(terms) / static_cast<double>(alphas.size()), W2Method::midpoint};
    }
    return {wasserstein2_squared_midpoint(a, b, opt.grid_size), W2Method::midpoint};
}

inline double wasserstein2_squared(const QuantileFunction& a, const QuantileFunction& b, const W2Options& opt = {})
{
    return wasserstein2_squared_detailed(a, b, opt).value;
}

inline double wasserstein2_squared(const EmpiricalMeasure& a, const EmpiricalMeasure& b)
{
    return wasserstein2_squared(empirical_to_quantile(a), empirical_to_quantile(b));
}

// E[d_W^2(mu_p, nu_0)] for the empirical measure mu_p of p iid draws from
// dist, split into the order-statistic variance part and the bias part.
struct ExpectedEmpiricalW2 {
    double variance_part = 0.0;  // (1/p) sum_j Var(Y*_j)
    double bias_part = 0.0;      // sum_j int_{(j-1)/p}^{j/p} (E[Y*_j] - F0^-(a))^2 da
    double total() const { return variance_part + bias_part; }
};

inline ExpectedEmpiricalW2 expected_w2_decomposition(const AnalyticDistribution& dist, const OrderStatMoments& mom)
{
    const std::size_t p = mom.p;
    const double pp = static_cast<double>(p);
    ExpectedEmpiricalW2 out;
    out.variance_part = mom.variance_sum() / pp;

    std::vector<double> terms(p);
    if (const auto* u = std::get_if<Uniform>(&dist.kind())) {
        // F0^- is affine: integrate the quadratic exactly.
        const double w = u->hi - u->lo, base = u->lo + dist.shift();
        for (std::size_t j = 1; j <= p; ++j) {
            const double a = static_cast<double>(j - 1) / pp, b = static_cast<double>(j) / pp;
            const double c = (mom.mean[j - 1] - base) / w;  // in units of the support width
            terms[j - 1] = w * w * (std::pow(b - c, 3) - std::pow(a - c, 3)) / 3.0;
        }
    } else {
        StepQuantile s;
        s.values = mom.mean;
        for (std::size_t j = 1; j < p; ++j) s.breaks.push_back(static_cast<double>(j) / pp);
        out.bias_part = detail::w2_step_analytic(s, dist, 2);
        return out;
    }
    out.bias_part = numeric::pairwise_sum(terms);
    return out;
}

inline double expected_w2_empirical_to_target(const AnalyticDistribution& dist, std::size_t p,
                                              const OrderStatOptions& opt = {})
{
    if (p == 0) throw DomainError("expected_w2_empirical_to_target: p must be >= 1");
    if (const auto* u = std::get_if<Uniform>(&dist.kind())) {
        const double w = u->hi - u->lo;
        return w * w / (6.0 * static_cast<double>(p));
    }
    if (dist.is<UserTable>() || dist.is<Gaussian>() || dist.is<OneSidedExponential>())
        return expected_w2_decomposition(dist, order_stat_moments(dist, p, opt)).total();
    throw UnsupportedDistribution("no order-statistic moments for distribution " + dist.name());
}

}  // namespace wbary
