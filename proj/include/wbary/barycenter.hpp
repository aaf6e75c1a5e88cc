#pragma once

// Estimators of the population Wasserstein barycenter from grouped samples.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "wbary/distributions.hpp"
#include "wbary/errors.hpp"
#include "wbary/measures.hpp"
#include "wbary/numeric.hpp"
#include "wbary/smoothing.hpp"

namespace wbary {

// n units; unit i holds p_i >= 1 real observations. Ragged sizes are allowed.
class GroupedDataset {
public:
    using Support = std::pair<double, double>;

    explicit GroupedDataset(std::vector<std::vector<double>> units, std::optional<Support> support = std::nullopt)
        : units_(std::move(units)), support_(support)
    {
        if (units_.empty()) throw DomainError("dataset needs at least one unit");
        if (support_ && !(support_->first < support_->second)) throw DomainError("declared support must be an interval");
        for (std::size_t i = 0; i < units_.size(); ++i) {
            if (units_[i].empty()) throw DomainError("unit " + std::to_string(i) + " has no observations");
            for (double x : units_[i]) {
                if (!std::isfinite(x)) throw DomainError("unit " + std::to_string(i) + " has a non-finite observation");
                if (support_ && (x < support_->first || x > support_->second))
                    throw DomainError("unit " + std::to_string(i) + " has an observation outside the declared support");
            }
        }
    }

    std::size_t size() const { return units_.size(); }
    std::span<const double> unit(std::size_t i) const { return units_[i]; }
    const std::vector<std::vector<double>>& units() const { return units_; }
    const std::optional<Support>& support() const { return support_; }

    std::vector<std::size_t> sizes() const
    {
        std::vector<std::size_t> p(units_.size());
        for (std::size_t i = 0; i < units_.size(); ++i) p[i] = units_[i].size();
        return p;
    }

    bool equal_sizes() const
    {
        return std::all_of(units_.begin(), units_.end(), [&](const auto& u) { return u.size() == units_.front().size(); });
    }

private:
    std::vector<std::vector<double>> units_;
    std::optional<Support> support_;
};

struct NonSmoothedKind {};
struct SmoothedKind {
    std::vector<double> bandwidths;
    KernelMode mode = KernelMode::boundary;
};
struct ParametricLocationKind {
    std::string reference;
    double shift = 0.0;  // estimated location offset a-hat
};

using EstimatorKind = std::variant<NonSmoothedKind, SmoothedKind, ParametricLocationKind>;

struct Provenance {
    std::size_t n = 0;
    std::vector<std::size_t> p;
    std::optional<std::uint64_t> seed;
};

struct BarycenterEstimate {
    QuantileFunction quantile;
    EstimatorKind kind;
    Provenance provenance;
    // Present for the non-smoothed estimator when all units have the same size.
    std::optional<EmpiricalMeasure> atoms;

    std::string kind_name() const
    {
        if (std::holds_alternative<NonSmoothedKind>(kind)) return "nonsmoothed";
        if (std::holds_alternative<SmoothedKind>(kind)) return "smoothed";
        return "parametric";
    }
};

namespace detail {

// Mean over units of values[i], summed in a fixed pairwise order.
inline double unit_mean(std::vector<double>& scratch)
{
    return numeric::pairwise_mean(scratch);
}

}  // namespace detail

// Quantile of the barycenter = pointwise mean of the unit step quantiles.
inline BarycenterEstimate nonsmoothed_barycenter(const GroupedDataset& d)
{
    const std::size_t n = d.size();
    std::vector<std::vector<double>> sorted(n);
    for (std::size_t i = 0; i < n; ++i) {
        sorted[i].assign(d.unit(i).begin(), d.unit(i).end());
        std::sort(sorted[i].begin(), sorted[i].end());
    }
    Provenance prov{n, d.sizes(), std::nullopt};
    std::vector<double> scratch(n);

    if (d.equal_sizes()) {
        const std::size_t p = sorted.front().size();
        std::vector<double> avg(p);
        for (std::size_t j = 0; j < p; ++j) {
            for (std::size_t i = 0; i < n; ++i) scratch[i] = sorted[i][j];
            avg[j] = detail::unit_mean(scratch);
        }
        auto atoms = EmpiricalMeasure::from_sorted(std::move(avg));
        auto q = empirical_to_quantile(atoms);
        return {std::move(q), NonSmoothedKind{}, std::move(prov), std::move(atoms)};
    }

    // Merge the partitions {j / p_i}; on each merged piece every unit is constant.
    std::vector<double> breaks;
    for (const auto& u : sorted) {
        const double p = static_cast<double>(u.size());
        for (std::size_t j = 1; j < u.size(); ++j) breaks.push_back(static_cast<double>(j) / p);
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    std::vector<double> values(breaks.size() + 1);
    for (std::size_t k = 0; k <= breaks.size(); ++k) {
        const double left = k == 0 ? 0.0 : breaks[k - 1];
        const double right = k == breaks.size() ? 1.0 : breaks[k];
        const double mid = 0.5 * (left + right);
        for (std::size_t i = 0; i < n; ++i) {
            const auto p = sorted[i].size();
            const auto j = std::min(p - 1, static_cast<std::size_t>(mid * static_cast<double>(p)));
            scratch[i] = sorted[i][j];
        }
        values[k] = detail::unit_mean(scratch);
    }
    return {QuantileFunction::step(std::move(breaks), std::move(values)), NonSmoothedKind{}, std::move(prov),
            std::nullopt};
}

// Per-unit bandwidths: an explicit list, one fixed value, or a selection rule.
using BandwidthSpec = std::variant<std::vector<double>, double, BandwidthRule>;

struct SmoothingOptions {
    KernelMode mode = KernelMode::boundary;
    BandwidthSpec bandwidth = BandwidthRule{Silverman{}};
    QuantileCacheOptions cache{};
    std::shared_ptr<const BaseKernel> kernel = BoundaryKernelMeasure::default_kernel();
};

inline std::vector<double> resolve_bandwidths(const GroupedDataset& d, const BandwidthSpec& spec)
{
    std::vector<double> h(d.size());
    if (const auto* list = std::get_if<std::vector<double>>(&spec)) {
        if (list->size() != d.size()) throw DomainError("need one bandwidth per unit");
        h = *list;
    } else if (const auto* fixed = std::get_if<double>(&spec)) {
        std::fill(h.begin(), h.end(), *fixed);
    } else {
        const auto& rule = std::get<BandwidthRule>(spec);
        for (std::size_t i = 0; i < d.size(); ++i) h[i] = select_bandwidth(d.unit(i), rule);
    }
    for (double v : h)
        if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("bandwidths must be positive");
    return h;
}

// Quantile of the barycenter = mean of the unit mixture quantiles on a shared midpoint grid.
inline BarycenterEstimate smoothed_barycenter(const GroupedDataset& d, const SmoothingOptions& opt = {})
{
    if (opt.mode == KernelMode::boundary) {
        if (!d.support() || d.support()->first != 0.0 || d.support()->second != 1.0)
            throw DomainError("boundary-corrected smoothing requires the dataset support to be declared as [0,1]");
    }
    const auto h = resolve_bandwidths(d, opt.bandwidth);
    const std::size_t n = d.size();
    const std::size_t g = opt.cache.grid_size;

    std::vector<std::vector<double>> unit_q(n);
    for (std::size_t i = 0; i < n; ++i) {
        SmoothedMeasure m({d.unit(i).begin(), d.unit(i).end()}, h[i], opt.mode, opt.kernel);
        unit_q[i] = m.quantile_grid(opt.cache).values;
    }
    std::vector<double> scratch(n), values(g);
    for (std::size_t k = 0; k < g; ++k) {
        for (std::size_t i = 0; i < n; ++i) scratch[i] = unit_q[i][k];
        values[k] = detail::unit_mean(scratch);
        if (k > 0) values[k] = std::max(values[k], values[k - 1]);
    }
    return {QuantileFunction::grid(numeric::midpoint_grid(g), std::move(values)), SmoothedKind{h, opt.mode},
            Provenance{n, d.sizes(), std::nullopt}, std::nullopt};
}

// Known reference law shifted by a-hat = (1/n) sum_i mean(unit i) - m0.
inline BarycenterEstimate parametric_location_estimate(const GroupedDataset& d, const AnalyticDistribution& reference)
{
    std::vector<double> means(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) means[i] = numeric::pairwise_mean(d.unit(i));
    const double shift = numeric::pairwise_mean(means) - reference.mean();
    return {QuantileFunction::analytic(reference.shifted(shift)), ParametricLocationKind{reference.name(), shift},
            Provenance{d.size(), d.sizes(), std::nullopt}, std::nullopt};
}

}  // namespace wbary
