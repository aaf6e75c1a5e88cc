#pragma once

// Exact risk of the non-smoothed barycenter, rate bounds, and the J2 functional.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "wbary/distributions.hpp"
#include "wbary/errors.hpp"
#include "wbary/measures.hpp"
#include "wbary/numeric.hpp"
#include "wbary/order_stats.hpp"

namespace wbary {

struct RiskFormulaInput {
    std::size_t n = 1;
    std::vector<std::size_t> p;  // one entry when all units share the same size
    double V = 0.0;              // int_0^1 Var(F^-(a)) da
    std::optional<AnalyticDistribution> nu0;
    std::optional<double> expected_j2;  // E[J2(nu)]; defaults to J2(nu0) when needed

    void validate() const
    {
        if (n == 0) throw DomainError("n must be >= 1");
        if (p.empty()) throw DomainError("need at least one sample size");
        for (auto v : p)
            if (v == 0) throw DomainError("sample sizes must be >= 1");
        if (!(V >= 0.0) || !std::isfinite(V)) throw DomainError("V must be finite and >= 0");
        if (expected_j2 && !(*expected_j2 >= 0.0)) throw DomainError("E[J2] must be >= 0");
    }

    // Sizes expanded to one entry per unit.
    std::vector<std::size_t> unit_sizes() const
    {
        if (p.size() == 1) return std::vector<std::size_t>(n, p.front());
        if (p.size() != n) throw DomainError("need one sample size per unit, or a single shared size");
        return p;
    }
};

struct ExactRisk {
    double value = 0.0;
    double variance_term = 0.0;      // V / n
    double order_stat_term = 0.0;    // ((1 - n) / (p n)) sum_j Var(Y*_j)
    double empirical_term = 0.0;     // E[d^2(mu_p, nu0)]
    double variance_sum = 0.0;       // sum_j Var(Y*_j)
    double bias_part = 0.0;          // sum_j int (E[Y*_j] - F0^-)^2
    double alternate = 0.0;          // V/n + (1/(p n)) sum_j Var(Y*_j) + bias_part
    MomentMethod method = MomentMethod::closed_form;
};

inline ExactRisk exact_risk_equal_p(const RiskFormulaInput& in, const OrderStatOptions& opt = {})
{
    in.validate();
    const auto sizes = in.unit_sizes();
    for (auto v : sizes)
        if (v != sizes.front()) throw DomainError("exact risk requires equal sample sizes");
    if (!in.nu0) throw UnsupportedDistribution("exact risk needs the population barycenter nu0");

    const std::size_t p = sizes.front();
    const double nn = static_cast<double>(in.n), pp = static_cast<double>(p);
    const auto mom = order_stat_moments(*in.nu0, p, opt);
    const auto dec = expected_w2_decomposition(*in.nu0, mom);

    ExactRisk r;
    r.method = mom.method;
    r.variance_sum = mom.variance_sum();
    r.variance_term = in.V / nn;
    r.order_stat_term = (1.0 - nn) / (pp * nn) * r.variance_sum;
    r.bias_part = dec.bias_part;
    r.empirical_term = in.nu0->is<Uniform>() ? expected_w2_empirical_to_target(*in.nu0, p) : dec.total();
    r.value = r.variance_term + r.order_stat_term + r.empirical_term;
    r.alternate = r.variance_term + r.variance_sum / (pp * nn) + r.bias_part;
    return r;
}

// Closed-form risk of the known-reference location estimate:
// (sigma0^2 + gamma^2)/(n p) + (gamma^2 / n)(p - 1)/p.
inline double parametric_location_risk(double sigma0_sq, double gamma_sq, std::size_t n, std::size_t p)
{
    if (n == 0 || p == 0) throw DomainError("n and p must be >= 1");
    const double nn = static_cast<double>(n), pp = static_cast<double>(p);
    return (sigma0_sq + gamma_sq) / (nn * pp) + gamma_sq / nn * (pp - 1.0) / pp;
}

struct J2Options {
    double tolerance = 1e-10;       // relative tail size at which the integral is declared converged
    std::size_t stall_doublings = 4;
    std::size_t max_doublings = 64;
};

namespace detail {

template <class F>
double gk_integrate(F f, double a, double b)
{
    if (!(b > a)) return 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-12);
}

}  // namespace detail

// J2(nu0) = int F0 (1 - F0) / f0 dx; +inf when the truncated integrals keep growing.
inline double j2_functional(const AnalyticDistribution& dist, const J2Options& opt = {})
{
    auto g = [&](double x) { return dist.j2_integrand(x); };

    if (const auto* t = std::get_if<UserTable>(&dist.kind())) {
        double total = 0.0;
        for (std::size_t k = 0; k + 1 < t->x.size(); ++k) {
            const double c0 = t->cdf[k], c1 = t->cdf[k + 1];
            if (c1 == c0) {
                if (c0 > 0.0 && c0 < 1.0)
                    throw DomainError("J2: density vanishes inside the support on [" + std::to_string(t->x[k]) +
                                      ", " + std::to_string(t->x[k + 1]) + "]");
                continue;
            }
            const double a = t->x[k] + dist.shift(), b = t->x[k + 1] + dist.shift();
            total += detail::gk_integrate(g, a, b);
        }
        return total;
    }

    const auto [lo, hi] = dist.support();
    if (std::isfinite(lo) && std::isfinite(hi)) return detail::gk_integrate(g, lo, hi);

    // Grow a window [left(T), right(T)] by doubling T and watch the added mass.
    const double scale = std::sqrt(dist.variance());
    const double centre = std::isfinite(lo) ? lo : dist.mean();
    auto left = [&](double T) { return std::isfinite(lo) ? lo : centre - T; };
    auto right = [&](double T) { return std::isfinite(hi) ? hi : centre + T; };

    double T = 4.0 * scale;
    double total = detail::gk_integrate(g, left(T), right(T));
    double prev_tail = numeric::inf;
    std::size_t stalled = 0;
    for (std::size_t k = 0; k < opt.max_doublings; ++k) {
        const double T2 = 2.0 * T;
        const double tail = detail::gk_integrate(g, left(T2), left(T)) + detail::gk_integrate(g, right(T), right(T2));
        total += tail;
        T = T2;
        if (tail <= opt.tolerance * total) return total;
        stalled = tail >= 0.5 * prev_tail ? stalled + 1 : 0;
        if (stalled >= opt.stall_doublings) return numeric::inf;
        prev_tail = tail;
    }
    throw PrecisionError("J2: tail contributions neither converged nor stalled after " +
                         std::to_string(opt.max_doublings) + " doublings");
}

enum class BoundCase { generic_j2, exponential, gaussian, general_p, smoothed };

inline const char* to_string(BoundCase c)
{
    switch (c) {
    case BoundCase::generic_j2: return "generic_J2";
    case BoundCase::exponential: return "exponential";
    case BoundCase::gaussian: return "gaussian";
    case BoundCase::general_p: return "general_p";
    case BoundCase::smoothed: return "smoothed";
    }
    return "?";
}

// Existential constants. A bound that needs a missing one is returned symbolically.
struct BoundConstants {
    std::optional<double> c;      // exponential case
    std::optional<double> c2;     // Gaussian case
    std::optional<double> c_psi;  // smoothing bias constant
    std::vector<double> bandwidths;
};

// value = known_part + constant^power * rate_factor, on the metric named by `metric`.
struct BoundRecord {
    BoundCase bound_case = BoundCase::generic_j2;
    std::string metric = "E[d_W^2]";
    double known_part = 0.0;
    double rate_factor = 0.0;
    std::optional<std::string> constant_name;
    double constant_power = 1.0;
    std::optional<double> constant;
    bool infinite = false;
    std::string expression;

    bool symbolic() const { return constant_name && !constant && !infinite; }

    std::optional<double> value() const
    {
        if (infinite) return numeric::inf;
        if (!constant_name) return known_part;
        if (!constant) return std::nullopt;
        return known_part + std::pow(*constant, constant_power) * rate_factor;
    }
};

namespace detail {

inline double expected_j2_of(const RiskFormulaInput& in)
{
    if (in.expected_j2) return *in.expected_j2;
    if (!in.nu0) throw DomainError("bound needs E[J2(nu)] or nu0");
    return j2_functional(*in.nu0);
}

inline double mean_inv_sqrt(const std::vector<std::size_t>& sizes)
{
    std::vector<double> t(sizes.size());
    for (std::size_t i = 0; i < sizes.size(); ++i) t[i] = 1.0 / std::sqrt(static_cast<double>(sizes[i]));
    return numeric::pairwise_mean(t);
}

inline std::size_t shared_size(const RiskFormulaInput& in)
{
    const auto sizes = in.unit_sizes();
    for (auto v : sizes)
        if (v != sizes.front()) throw DomainError(std::string("this bound requires equal sample sizes"));
    return sizes.front();
}

}  // namespace detail

inline BoundRecord risk_upper_bound(const RiskFormulaInput& in, BoundCase which, const BoundConstants& k = {})
{
    in.validate();
    const double nn = static_cast<double>(in.n);
    BoundRecord r;
    r.bound_case = which;

    switch (which) {
    case BoundCase::generic_j2: {
        if (!in.nu0) throw DomainError("generic_J2 bound needs nu0");
        const double pp = static_cast<double>(detail::shared_size(in));
        const double j2 = j2_functional(*in.nu0);
        r.expression = "V/n + 2/(p+1) * J2(nu0)";
        r.infinite = std::isinf(j2);
        r.known_part = in.V / nn + 2.0 / (pp + 1.0) * j2;
        break;
    }
    case BoundCase::exponential: {
        const double pp = static_cast<double>(detail::shared_size(in));
        r.expression = "V/n + c * (1 + 1/n) * log(p)/p";
        r.known_part = in.V / nn;
        r.rate_factor = (1.0 + 1.0 / nn) * std::log(pp) / pp;
        r.constant_name = "c";
        r.constant = k.c;
        break;
    }
    case BoundCase::gaussian: {
        const std::size_t p = detail::shared_size(in);
        if (p < 3) throw DomainError("the log(log(p))/p rate needs p >= 3");
        const double pp = static_cast<double>(p);
        r.expression = "V/n + c2 * (1/n + 1) * log(log(p))/p";
        r.known_part = in.V / nn;
        r.rate_factor = (1.0 / nn + 1.0) * std::log(std::log(pp)) / pp;
        r.constant_name = "c2";
        r.constant = k.c2;
        break;
    }
    case BoundCase::general_p: {
        const double ej2 = detail::expected_j2_of(in);
        r.metric = "E[d_W]";
        r.expression = "sqrt(V) n^(-1/2) + sqrt(2 E[J2]) * mean(p_i^(-1/2))";
        r.infinite = std::isinf(ej2);
        r.known_part = std::sqrt(in.V / nn) + std::sqrt(2.0 * ej2) * detail::mean_inv_sqrt(in.unit_sizes());
        break;
    }
    case BoundCase::smoothed: {
        const auto sizes = in.unit_sizes();
        if (k.bandwidths.size() != sizes.size() && k.bandwidths.size() != 1)
            throw DomainError("smoothed bound needs one bandwidth per unit, or a single shared bandwidth");
        std::vector<double> h(sizes.size());
        for (std::size_t i = 0; i < h.size(); ++i) {
            h[i] = k.bandwidths.size() == 1 ? k.bandwidths.front() : k.bandwidths[i];
            if (!(h[i] > 0.0)) throw DomainError("bandwidths must be positive");
        }
        const double ej2 = detail::expected_j2_of(in);
        r.metric = "E[d_W]";
        r.expression = "sqrt(V) n^(-1/2) + C_psi^(1/2) * mean(h_i) + sqrt(2 E[J2]) * mean(p_i^(-1/2))";
        r.infinite = std::isinf(ej2);
        r.known_part = std::sqrt(in.V / nn) + std::sqrt(2.0 * ej2) * detail::mean_inv_sqrt(sizes);
        r.rate_factor = numeric::pairwise_mean(h);
        r.constant_name = "C_psi";
        r.constant_power = 0.5;
        r.constant = k.c_psi;
        break;
    }
    }
    return r;
}

inline std::vector<BoundRecord> risk_upper_bounds(const RiskFormulaInput& in, const std::vector<BoundCase>& cases,
                                                  const BoundConstants& k = {})
{
    std::vector<BoundRecord> out;
    out.reserve(cases.size());
    for (auto c : cases) out.push_back(risk_upper_bound(in, c, k));
    return out;
}

}  // namespace wbary
