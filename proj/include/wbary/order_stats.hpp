#pragma once

// Means and variances of the order statistics Y*_1 <= ... <= Y*_p of an iid
// sample of size p drawn from a known distribution.

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "wbary/distributions.hpp"
#include "wbary/errors.hpp"
#include "wbary/numeric.hpp"

namespace wbary {

enum class MomentMethod { closed_form, quadrature };

struct OrderStatMoments {
    std::string distribution;
    std::size_t p = 0;
    std::vector<double> mean;      // E[Y*_j], j = 1..p
    std::vector<double> variance;  // Var(Y*_j)
    MomentMethod method = MomentMethod::closed_form;

    double variance_sum() const { return numeric::pairwise_sum(variance); }
};

struct OrderStatOptions {
    // Midpoint cells on (0,1) for the beta-weighted integrals.
    std::size_t quadrature_points = std::size_t{1} << 16;
};

namespace detail {

// Quadrature nodes on (0,1): midpoint cells in the interior; the outer
// end_cells cells on each side, where an unbounded quantile makes the midpoint
// rule inaccurate, are replaced by 16-point Gauss-Legendre on dyadic panels
// shrinking towards 0 and 1.
inline void order_stat_nodes(std::size_t m, std::size_t end_cells, std::vector<double>& alphas,
                             std::vector<double>& widths)
{
    const double w = 1.0 / static_cast<double>(m);
    const double edge = static_cast<double>(end_cells) * w;
    // The innermost panel ends near 1e-15, where 1 - alpha is still representable.
    const int levels = static_cast<int>(std::ceil(std::log2(edge / 1e-15)));
    const auto& x = boost::math::quadrature::gauss<double, 16>::abscissa();
    const auto& gw = boost::math::quadrature::gauss<double, 16>::weights();
    auto panel = [&](double a, double b) {
        const double c = 0.5 * (a + b), r = 0.5 * (b - a);
        for (std::size_t i = 0; i < x.size(); ++i) {
            alphas.push_back(c - r * x[i]);
            widths.push_back(r * gw[i]);
            alphas.push_back(c + r * x[i]);
            widths.push_back(r * gw[i]);
        }
    };
    for (int k = 0; k < levels; ++k) panel(std::ldexp(edge, -(k + 1)), std::ldexp(edge, -k));
    for (std::size_t k = end_cells; k < m - end_cells; ++k) {
        alphas.push_back((static_cast<double>(k) + 0.5) * w);
        widths.push_back(w);
    }
    for (int k = 0; k < levels; ++k) panel(1.0 - std::ldexp(edge, -k), 1.0 - std::ldexp(edge, -(k + 1)));
}

// E[g(Y*_j)] = int_0^1 g(F^-(a)) Beta(j, p-j+1)(a) da.
inline OrderStatMoments quadrature_moments(const AnalyticDistribution& dist, std::size_t p,
                                           const OrderStatOptions& opt)
{
    std::vector<double> alphas, widths;
    order_stat_nodes(opt.quadrature_points, opt.quadrature_points / 8, alphas, widths);
    const std::size_t m = alphas.size();
    std::vector<double> q(m);
    for (std::size_t k = 0; k < m; ++k) {
        q[k] = dist.quantile(alphas[k]);
        if (!std::isfinite(q[k]))
            throw PrecisionError("order-statistic quadrature hit a non-finite quantile at alpha = " +
                                 std::to_string(alphas[k]));
    }

    OrderStatMoments out{dist.name(), p, std::vector<double>(p), std::vector<double>(p),
                         MomentMethod::quadrature};
    std::vector<double> log_a(m), log_b(m), log_w(m);
    for (std::size_t k = 0; k < m; ++k) {
        log_a[k] = std::log(alphas[k]);
        log_b[k] = std::log1p(-alphas[k]);
        log_w[k] = std::log(widths[k]);
    }
    std::vector<double> buf(m), weights(m);
    const double pp = static_cast<double>(p);
    for (std::size_t j = 1; j <= p; ++j) {
        const double jj = static_cast<double>(j);
        const double log_c = std::lgamma(pp + 1.0) - std::lgamma(jj) - std::lgamma(pp - jj + 1.0);
        for (std::size_t k = 0; k < m; ++k)
            weights[k] = std::exp(log_c + log_w[k] + (jj - 1.0) * log_a[k] + (pp - jj) * log_b[k]);
        const double mass = numeric::pairwise_sum(weights);
        if (std::abs(mass - 1.0) > 1e-6)
            throw PrecisionError("beta weights for j = " + std::to_string(j) + ", p = " + std::to_string(p) +
                                 " integrate to " + std::to_string(mass) + "; increase quadrature_points");
        for (std::size_t k = 0; k < m; ++k) buf[k] = weights[k] * q[k];
        const double mean = numeric::pairwise_sum(buf) / mass;
        for (std::size_t k = 0; k < m; ++k) buf[k] = weights[k] * (q[k] - mean) * (q[k] - mean);
        out.mean[j - 1] = mean;
        out.variance[j - 1] = numeric::pairwise_sum(buf) / mass;
    }
    return out;
}

}  // namespace detail

inline OrderStatMoments order_stat_moments(const AnalyticDistribution& dist, std::size_t p,
                                           const OrderStatOptions& opt = {})
{
    if (p == 0) throw DomainError("order_stat_moments: p must be >= 1");
    const double pp = static_cast<double>(p);
    if (const auto* u = std::get_if<Uniform>(&dist.kind())) {
        OrderStatMoments out{dist.name(), p, std::vector<double>(p), std::vector<double>(p),
                             MomentMethod::closed_form};
        const double w = u->hi - u->lo;
        for (std::size_t j = 1; j <= p; ++j) {
            const double jj = static_cast<double>(j);
            out.mean[j - 1] = dist.shift() + u->lo + w * jj / (pp + 1.0);
            out.variance[j - 1] = w * w * jj * (pp - jj + 1.0) / ((pp + 1.0) * (pp + 1.0) * (pp + 2.0));
        }
        return out;
    }
    if (const auto* e = std::get_if<OneSidedExponential>(&dist.kind())) {
        // Renyi representation: Y*_j = sum_{k<=j} E_k / (p - k + 1) with iid standard exponentials.
        OrderStatMoments out{dist.name(), p, std::vector<double>(p), std::vector<double>(p),
                             MomentMethod::closed_form};
        double m = 0.0, v = 0.0;
        for (std::size_t k = 1; k <= p; ++k) {
            const double d = pp - static_cast<double>(k) + 1.0;
            m += 1.0 / d;
            v += 1.0 / (d * d);
            out.mean[k - 1] = dist.shift() + m / e->rate;
            out.variance[k - 1] = v / (e->rate * e->rate);
        }
        return out;
    }
    return detail::quadrature_moments(dist, p, opt);
}

// Read-mostly memo of moment tables keyed by (distribution description, p).
// Concurrent readers share a lock; population is idempotent.
class OrderStatCache {
public:
    std::shared_ptr<const OrderStatMoments> get(const AnalyticDistribution& dist, std::size_t p,
                                                const std::string& key, const OrderStatOptions& opt = {})
    {
        const auto k = std::make_pair(key, p);
        {
            std::shared_lock lock(mutex_);
            if (auto it = table_.find(k); it != table_.end()) return it->second;
        }
        auto fresh = std::make_shared<const OrderStatMoments>(order_stat_moments(dist, p, opt));
        std::unique_lock lock(mutex_);
        auto [it, inserted] = table_.emplace(k, fresh);
        return it->second;
    }

private:
    std::shared_mutex mutex_;
    std::map<std::pair<std::string, std::size_t>, std::shared_ptr<const OrderStatMoments>> table_;
};

}  // namespace wbary
