#pragma once

// Random-measure models, seeded dataset generation, and the Monte Carlo risk harness.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "wbary/barycenter.hpp"
#include "wbary/distributions.hpp"
#include "wbary/errors.hpp"
#include "wbary/measures.hpp"
#include "wbary/numeric.hpp"

namespace wbary {

// ---- random numbers -------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Sub-seed for one replication of one grid cell.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t n_index, std::uint64_t p_index,
                                 std::uint64_t replication)
{
    std::uint64_t s = splitmix64(master);
    s = splitmix64(s ^ n_index);
    s = splitmix64(s ^ p_index);
    return splitmix64(s ^ replication);
}

// mt19937_64 with our own mapping to (0,1), so draws do not depend on the
// standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on the open interval (0,1).
    double open01() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * open01(); }

private:
    std::mt19937_64 engine_;
};

// ---- models ---------------------------------------------------------------

struct UniformLaw {
    double lo = 0.0;
    double hi = 0.0;
    double mean() const { return 0.5 * (lo + hi); }
    double variance() const { return (hi - lo) * (hi - lo) / 12.0; }
    double draw(Rng& rng) const { return lo == hi ? lo : rng.uniform(lo, hi); }
};

// Unit i has density a_i^-1 f0((x - b_i)/a_i), optionally truncated to an
// interval and renormalized there.
struct LocationScaleGaussian {
    UniformLaw a{0.8, 1.2};
    UniformLaw b{-2.0, 2.0};
    double mean = 0.0;
    double sd = 1.0;
    std::optional<std::pair<double, double>> truncation;
};

// Unit i is the base law shifted by b_i.
struct LocationShiftOfBase {
    AnalyticDistribution base;
    UniformLaw b;
};

// Every unit is the base law.
struct Deterministic {
    AnalyticDistribution base;
};

struct UnitParameters {
    double a = 1.0;
    double b = 0.0;
    // Base-cdf window covered by the truncation interval, when truncated.
    double mass_lo = 0.0;
    double mass_hi = 1.0;
};

class MeasureModel {
public:
    using Kind = std::variant<LocationScaleGaussian, LocationShiftOfBase, Deterministic>;

    MeasureModel(std::string id, Kind kind) : id_(std::move(id)), kind_(std::move(kind)) { validate(); }

    const std::string& id() const { return id_; }
    const Kind& kind() const { return kind_; }

    // Population barycenter. For the truncated location-scale model this is the
    // untruncated Gaussian barycenter, an approximation of the truncated one.
    AnalyticDistribution nu0() const
    {
        if (const auto* m = std::get_if<LocationScaleGaussian>(&kind_))
            return AnalyticDistribution::gaussian(m->b.mean() + m->a.mean() * m->mean, m->a.mean() * m->sd);
        if (const auto* m = std::get_if<LocationShiftOfBase>(&kind_)) return m->base.shifted(m->b.mean());
        return std::get<Deterministic>(kind_).base;
    }

    // Known reference law for the parametric location estimate.
    AnalyticDistribution reference() const
    {
        if (const auto* m = std::get_if<LocationScaleGaussian>(&kind_)) return AnalyticDistribution::gaussian(m->mean, m->sd);
        if (const auto* m = std::get_if<LocationShiftOfBase>(&kind_)) return m->base;
        return std::get<Deterministic>(kind_).base;
    }

    // V = int_0^1 Var(F^-(a)) da for the untruncated model.
    double quantile_variance() const
    {
        if (const auto* m = std::get_if<LocationScaleGaussian>(&kind_))
            return m->b.variance() + m->a.variance() * (m->mean * m->mean + m->sd * m->sd);
        if (const auto* m = std::get_if<LocationShiftOfBase>(&kind_)) return m->b.variance();
        return 0.0;
    }

    // Declared support of every unit measure, when bounded.
    std::optional<std::pair<double, double>> support() const
    {
        if (const auto* m = std::get_if<LocationScaleGaussian>(&kind_)) return m->truncation;
        auto bounded = [](const AnalyticDistribution& d, double lo_shift, double hi_shift)
            -> std::optional<std::pair<double, double>> {
            const auto [lo, hi] = d.support();
            if (!std::isfinite(lo) || !std::isfinite(hi)) return std::nullopt;
            return std::pair{lo + lo_shift, hi + hi_shift};
        };
        if (const auto* m = std::get_if<LocationShiftOfBase>(&kind_)) return bounded(m->base, m->b.lo, m->b.hi);
        return bounded(std::get<Deterministic>(kind_).base, 0.0, 0.0);
    }

    UnitParameters draw_unit(Rng& rng) const
    {
        if (const auto* m = std::get_if<LocationScaleGaussian>(&kind_)) {
            UnitParameters u;
            u.a = m->a.draw(rng);
            u.b = m->b.draw(rng);
            if (m->truncation) std::tie(u.mass_lo, u.mass_hi) = truncated_mass(*m, u);
            return u;
        }
        if (const auto* m = std::get_if<LocationShiftOfBase>(&kind_)) return {1.0, m->b.draw(rng)};
        return {};
    }

    // Inverse-cdf draw from the unit measure with parameters u.
    double sample(const UnitParameters& u, Rng& rng) const
    {
        const double v = rng.open01();
        if (const auto* m = std::get_if<LocationScaleGaussian>(&kind_)) {
            const double w = m->truncation ? u.mass_lo + v * (u.mass_hi - u.mass_lo) : v;
            return u.b + u.a * (m->mean + m->sd * numeric::normal_quantile(w));
        }
        if (const auto* m = std::get_if<LocationShiftOfBase>(&kind_)) return u.b + m->base.quantile(v);
        return std::get<Deterministic>(kind_).base.quantile(v);
    }

    // Exact quantile function of the unit measure with parameters u (as returned
    // by draw_unit), on a midpoint grid when no closed form is available.
    QuantileFunction unit_quantile(const UnitParameters& u, std::size_t grid_size = 4096) const
    {
        if (const auto* m = std::get_if<LocationScaleGaussian>(&kind_)) {
            if (!m->truncation)
                return QuantileFunction::analytic(
                    AnalyticDistribution::gaussian(u.b + u.a * m->mean, u.a * m->sd));
            const double lo = u.mass_lo, hi = u.mass_hi;
            auto alphas = numeric::midpoint_grid(grid_size);
            std::vector<double> values(grid_size);
            for (std::size_t k = 0; k < grid_size; ++k)
                values[k] = u.b + u.a * (m->mean + m->sd * numeric::normal_quantile(lo + alphas[k] * (hi - lo)));
            return QuantileFunction::grid(std::move(alphas), std::move(values));
        }
        if (const auto* m = std::get_if<LocationShiftOfBase>(&kind_))
            return QuantileFunction::analytic(m->base.shifted(u.b));
        return QuantileFunction::analytic(std::get<Deterministic>(kind_).base);
    }

private:
    // Base-cdf interval [F(lo), F(hi)] covered by the truncation window for unit u.
    static std::pair<double, double> truncated_mass(const LocationScaleGaussian& m, const UnitParameters& u)
    {
        const auto [lo, hi] = *m.truncation;
        const double zl = ((lo - u.b) / u.a - m.mean) / m.sd;
        const double zh = ((hi - u.b) / u.a - m.mean) / m.sd;
        const double fl = numeric::normal_cdf(zl), fh = numeric::normal_cdf(zh);
        if (!(fh > fl))
            throw ModelError("truncation window [" + std::to_string(lo) + ", " + std::to_string(hi) +
                             "] holds no mass for a unit with a = " + std::to_string(u.a) +
                             ", b = " + std::to_string(u.b));
        return {fl, fh};
    }

    void validate() const
    {
        auto check_law = [](const UniformLaw& l, const char* what) {
            if (!(l.lo <= l.hi) || !std::isfinite(l.lo) || !std::isfinite(l.hi))
                throw ModelError(std::string(what) + " law needs finite lo <= hi");
        };
        if (const auto* m = std::get_if<LocationScaleGaussian>(&kind_)) {
            check_law(m->a, "scale");
            check_law(m->b, "location");
            if (!(m->a.lo > 0.0)) throw ModelError("scale law must be supported on (0, inf)");
            if (!(m->sd > 0.0)) throw ModelError("base sd must be positive");
            if (m->truncation && !(m->truncation->first < m->truncation->second))
                throw ModelError("truncation window must be a non-empty interval");
        } else if (const auto* m = std::get_if<LocationShiftOfBase>(&kind_)) {
            check_law(m->b, "location");
        }
    }

    std::string id_;
    Kind kind_;
};

// Models addressable by name from the command line:
//   figure2                  a ~ U[0.8,1.2], b ~ U[-2,2], N(0,1) truncated to [-7,7]
//   figure2-untruncated      the same without truncation
//   deterministic-uniform    every unit is U(0,1)
//   uniform-shift:<d>        U(0,1) shifted by b ~ U[-d,d]
//   gaussian-shift:<d>       N(0,1) shifted by b ~ U[-d,d]
//   exponential-shift:<d>    Exp(1) shifted by b ~ U[-d,d]
inline MeasureModel model_from_id(const std::string& id)
{
    if (id == "figure2") {
        LocationScaleGaussian m;
        m.truncation = std::pair{-7.0, 7.0};
        return {id, m};
    }
    if (id == "figure2-untruncated") return {id, LocationScaleGaussian{}};
    if (id == "deterministic-uniform") return {id, Deterministic{AnalyticDistribution::uniform(0.0, 1.0)}};

    const auto colon = id.find(':');
    if (colon != std::string::npos) {
        const std::string head = id.substr(0, colon), arg = id.substr(colon + 1);
        double d = 0.0;
        try {
            std::size_t used = 0;
            d = std::stod(arg, &used);
            if (used != arg.size()) throw std::invalid_argument(arg);
        } catch (const std::exception&) {
            throw DomainError("model '" + id + "': '" + arg + "' is not a number");
        }
        if (!(d >= 0.0) || !std::isfinite(d)) throw DomainError("model '" + id + "': shift half-width must be >= 0");
        const UniformLaw b{-d, d};
        if (head == "uniform-shift") return {id, LocationShiftOfBase{AnalyticDistribution::uniform(0.0, 1.0), b}};
        if (head == "gaussian-shift") return {id, LocationShiftOfBase{AnalyticDistribution::gaussian(0.0, 1.0), b}};
        if (head == "exponential-shift") return {id, LocationShiftOfBase{AnalyticDistribution::exponential(1.0), b}};
    }
    throw DomainError("unknown model '" + id +
                      "' (expected figure2, figure2-untruncated, deterministic-uniform, "
                      "uniform-shift:<d>, gaussian-shift:<d>, exponential-shift:<d>)");
}

inline GroupedDataset draw_dataset(const MeasureModel& model, const std::vector<std::size_t>& sizes,
                                   std::uint64_t seed)
{
    if (sizes.empty()) throw DomainError("need at least one unit");
    Rng rng(seed);
    std::vector<std::vector<double>> units(sizes.size());
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (sizes[i] == 0) throw DomainError("unit sizes must be >= 1");
        const auto u = model.draw_unit(rng);
        units[i].resize(sizes[i]);
        for (auto& x : units[i]) x = model.sample(u, rng);
    }
    return GroupedDataset(std::move(units), model.support());
}

inline GroupedDataset draw_dataset(const MeasureModel& model, std::size_t n, std::size_t p, std::uint64_t seed)
{
    return draw_dataset(model, std::vector<std::size_t>(n, p), seed);
}

// Barycenter of n exact unit measures (no sampling noise), on a midpoint grid.
inline QuantileFunction population_barycenter_surrogate(const MeasureModel& model, std::size_t n, std::uint64_t seed,
                                                       std::size_t grid_size = 4096)
{
    Rng rng(seed);
    const auto alphas = numeric::midpoint_grid(grid_size);
    std::vector<std::vector<double>> q(n, std::vector<double>(grid_size));
    for (std::size_t i = 0; i < n; ++i) {
        const auto f = model.unit_quantile(model.draw_unit(rng), grid_size);
        for (std::size_t k = 0; k < grid_size; ++k) q[i][k] = f(alphas[k]);
    }
    std::vector<double> col(n), values(grid_size);
    for (std::size_t k = 0; k < grid_size; ++k) {
        for (std::size_t i = 0; i < n; ++i) col[i] = q[i][k];
        values[k] = numeric::pairwise_mean(col);
    }
    return QuantileFunction::grid(alphas, std::move(values));
}

// ---- Monte Carlo harness -------------------------------------------------

enum class EstimatorKindId { nonsmoothed, smoothed, parametric };

inline const char* to_string(EstimatorKindId k)
{
    switch (k) {
    case EstimatorKindId::nonsmoothed: return "nonsmoothed";
    case EstimatorKindId::smoothed: return "smoothed";
    case EstimatorKindId::parametric: return "parametric";
    }
    return "?";
}

struct EstimatorConfig {
    EstimatorKindId kind = EstimatorKindId::nonsmoothed;
    SmoothingOptions smoothing{};
    // Gaussian kernel without boundary correction on unbounded models.
    bool allow_plain_kernel = false;
};

struct HarnessOptions {
    std::size_t threads = 0;  // 0: hardware concurrency
    W2Options w2{};
};

struct RiskReport {
    std::string model;
    std::string estimator;
    std::size_t n = 0;
    std::vector<std::size_t> p;
    std::size_t M = 0;
    double risk = 0.0;
    double se = 0.0;
    std::uint64_t seed = 0;
    std::size_t grid_size = 0;
    double wall_seconds = 0.0;

    std::string p_label() const
    {
        const bool equal = std::all_of(p.begin(), p.end(), [&](auto v) { return v == p.front(); });
        if (equal) return std::to_string(p.front());
        std::string s;
        for (std::size_t i = 0; i < p.size(); ++i) s += (i ? ";" : "") + std::to_string(p[i]);
        return s;
    }
};

namespace detail {

inline void check_compatible(const MeasureModel& model, const EstimatorConfig& e)
{
    if (e.kind != EstimatorKindId::smoothed) return;
    if (e.smoothing.mode == KernelMode::boundary) {
        const auto s = model.support();
        if (!s || s->first != 0.0 || s->second != 1.0)
            throw DomainError("model '" + model.id() +
                              "' is not supported on [0,1]; boundary-corrected smoothing is unavailable "
                              "(use the plain Gaussian kernel)");
    } else if (!e.allow_plain_kernel) {
        throw DomainError("plain-kernel smoothing must be enabled explicitly");
    }
}

inline double fit_and_score(const MeasureModel& model, const EstimatorConfig& e, const GroupedDataset& d,
                            const QuantileFunction& truth, const W2Options& w2)
{
    switch (e.kind) {
    case EstimatorKindId::nonsmoothed: return wasserstein2_squared(nonsmoothed_barycenter(d).quantile, truth, w2);
    case EstimatorKindId::smoothed: return wasserstein2_squared(smoothed_barycenter(d, e.smoothing).quantile, truth, w2);
    case EstimatorKindId::parametric:
        return wasserstein2_squared(parametric_location_estimate(d, model.reference()).quantile, truth, w2);
    }
    return 0.0;
}

// Runs body(r) for r in [0, count) on `threads` workers. The first exception
// by replication index is rethrown.
template <class Body>
void parallel_for(std::size_t count, std::size_t threads, Body body)
{
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, std::max<std::size_t>(count, 1));
    std::vector<std::exception_ptr> errors(count);
    auto worker = [&](std::size_t t) {
        for (std::size_t r = t; r < count; r += threads) {
            try {
                body(r);
            } catch (...) {
                errors[r] = std::current_exception();
            }
        }
    };
    if (threads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker, t);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline std::pair<double, double> mean_and_se(const std::vector<double>& xs)
{
    const double m = numeric::pairwise_mean(xs);
    if (xs.size() < 2) return {m, 0.0};
    std::vector<double> sq(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) sq[i] = (xs[i] - m) * (xs[i] - m);
    const double var = numeric::pairwise_sum(sq) / static_cast<double>(xs.size() - 1);
    return {m, std::sqrt(var / static_cast<double>(xs.size()))};
}

// All estimators are scored on the same M datasets of one grid cell.
inline std::vector<RiskReport> run_cell(const MeasureModel& model, const std::vector<EstimatorConfig>& estimators,
                                        const std::vector<std::size_t>& sizes, std::size_t M, std::uint64_t seed,
                                        std::size_t n_index, std::size_t p_index, const HarnessOptions& opt)
{
    if (M == 0) throw DomainError("need at least one replication");
    for (const auto& e : estimators) check_compatible(model, e);
    const auto start = std::chrono::steady_clock::now();
    const QuantileFunction truth = QuantileFunction::analytic(model.nu0());

    std::vector<std::vector<double>> losses(estimators.size(), std::vector<double>(M));
    parallel_for(M, opt.threads, [&](std::size_t r) {
        const auto d = draw_dataset(model, sizes, derive_seed(seed, n_index, p_index, r));
        for (std::size_t k = 0; k < estimators.size(); ++k)
            losses[k][r] = fit_and_score(model, estimators[k], d, truth, opt.w2);
    });
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::vector<RiskReport> out;
    for (std::size_t k = 0; k < estimators.size(); ++k) {
        const auto [m, se] = mean_and_se(losses[k]);
        const std::size_t grid = estimators[k].kind == EstimatorKindId::smoothed ? estimators[k].smoothing.cache.grid_size
                                                                                 : opt.w2.grid_size;
        out.push_back({model.id(), to_string(estimators[k].kind), sizes.size(), sizes, M, m, se, seed, grid, wall});
    }
    return out;
}

}  // namespace detail

inline RiskReport monte_carlo_risk(const MeasureModel& model, const EstimatorConfig& estimator,
                                   const std::vector<std::size_t>& sizes, std::size_t M, std::uint64_t seed,
                                   const HarnessOptions& opt = {})
{
    return detail::run_cell(model, {estimator}, sizes, M, seed, 0, 0, opt).front();
}

inline RiskReport monte_carlo_risk(const MeasureModel& model, const EstimatorConfig& estimator, std::size_t n,
                                   std::size_t p, std::size_t M, std::uint64_t seed, const HarnessOptions& opt = {})
{
    return monte_carlo_risk(model, estimator, std::vector<std::size_t>(n, p), M, seed, opt);
}

struct LogRatioCell {
    std::size_t n = 0;
    std::size_t p = 0;
    double risk_nonsmoothed = 0.0;
    double risk_smoothed = 0.0;
    double log_ratio = 0.0;  // log(risk_nonsmoothed / risk_smoothed)
};

struct RiskGrid {
    std::vector<std::size_t> n_values;
    std::vector<std::size_t> p_values;
    std::vector<RiskReport> reports;  // n-major, then p, then estimator
    std::vector<LogRatioCell> log_ratio;

    const RiskReport& at(std::size_t n_index, std::size_t p_index, std::size_t estimator_index,
                         std::size_t estimators) const
    {
        return reports[(n_index * p_values.size() + p_index) * estimators + estimator_index];
    }
};

inline RiskGrid risk_grid(const MeasureModel& model, const std::vector<EstimatorConfig>& estimators,
                          const std::vector<std::size_t>& n_values, const std::vector<std::size_t>& p_values,
                          std::size_t M, std::uint64_t seed, const HarnessOptions& opt = {})
{
    if (n_values.empty() || p_values.empty() || estimators.empty()) throw DomainError("risk grid needs non-empty axes");
    RiskGrid g{n_values, p_values, {}, {}};
    std::optional<std::size_t> ns, sm;
    for (std::size_t k = 0; k < estimators.size(); ++k) {
        if (estimators[k].kind == EstimatorKindId::nonsmoothed && !ns) ns = k;
        if (estimators[k].kind == EstimatorKindId::smoothed && !sm) sm = k;
    }
    for (std::size_t i = 0; i < n_values.size(); ++i) {
        for (std::size_t j = 0; j < p_values.size(); ++j) {
            auto cell = detail::run_cell(model, estimators, std::vector<std::size_t>(n_values[i], p_values[j]), M,
                                         seed, i, j, opt);
            if (ns && sm) {
                const double a = cell[*ns].risk, b = cell[*sm].risk;
                g.log_ratio.push_back({n_values[i], p_values[j], a, b, std::log(a / b)});
            }
            for (auto& r : cell) g.reports.push_back(std::move(r));
        }
    }
    return g;
}

}  // namespace wbary
