#pragma once

// Kernel smoothing of one sample group: the boundary-corrected kernel measure
// on [0,1], equal-weight mixtures of kernels centred at the samples, and
// bandwidth selection.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "wbary/errors.hpp"
#include "wbary/measures.hpp"
#include "wbary/numeric.hpp"

namespace wbary {

// psi(x) <= constant * x^(-exponent) for all sufficiently large x.
struct TailBound {
    double constant = 1.0;
    double exponent = 5.0;
};

// Positive, smooth, symmetric density psi with unit second moment, and its cdf Psi.
class BaseKernel {
public:
    static BaseKernel gaussian()
    {
        BaseKernel k;
        k.name_ = "gaussian";
        k.gaussian_ = true;
        k.density_ = numeric::normal_pdf;
        k.cdf_ = numeric::normal_cdf;
        return k;
    }

    // Wraps a user density. It is rescaled to unit second moment; symmetry and,
    // when declared, the polynomial tail bound are checked on a grid.
    static BaseKernel user(std::function<double(double)> density, std::function<double(double)> cdf,
                           std::optional<TailBound> tail = std::nullopt, std::string name = "user")
    {
        if (!density || !cdf) throw DomainError("user kernel needs both a density and a cdf");
        BaseKernel k;
        k.name_ = std::move(name);
        const double m2 = second_moment_of(density);
        if (!(m2 > 0.0) || !std::isfinite(m2)) throw DomainError("user kernel must have a finite second moment");
        const double s = std::sqrt(m2);
        if (std::abs(m2 - 1.0) > 1e-12) {
            k.density_ = [density, s](double x) { return s * density(s * x); };
            k.cdf_ = [cdf, s](double x) { return cdf(s * x); };
            if (tail) tail->constant *= std::pow(s, 1.0 - tail->exponent);
        } else {
            k.density_ = std::move(density);
            k.cdf_ = std::move(cdf);
        }
        k.tail_ = tail;
        k.validate();
        return k;
    }

    double density(double x) const { return density_(x); }
    double cdf(double x) const { return cdf_(x); }
    const std::string& name() const { return name_; }
    bool is_gaussian() const { return gaussian_; }
    const std::optional<TailBound>& tail() const { return tail_; }

    double second_moment() const { return second_moment_of(density_); }

private:
    BaseKernel() = default;

    static double second_moment_of(const std::function<double(double)>& psi)
    {
        boost::math::quadrature::exp_sinh<double> integrator;
        // Symmetric density: twice the half-line integral. A divergent moment shows up as a large error estimate.
        double error = 0.0;
        const double half = integrator.integrate([&](double x) { return x * x * psi(x); }, 1e-10, &error);
        if (!std::isfinite(half) || error > 1e-6 * std::abs(half)) return std::numeric_limits<double>::infinity();
        return 2.0 * half;
    }

    void validate() const
    {
        for (int i = 0; i <= 400; ++i) {
            const double x = 0.05 * i;
            const double a = density_(x), b = density_(-x);
            if (!(a > 0.0) && x < 10.0) throw InvariantError(name_ + " kernel must be positive");
            if (std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(a)))
                throw InvariantError(name_ + " kernel must be symmetric");
        }
        if (std::abs(second_moment() - 1.0) > 1e-6) throw InvariantError(name_ + " kernel second moment must be 1");
        if (tail_) {
            if (tail_->exponent < 5.0) throw InvariantError("kernel tail exponent must be at least 5");
            for (int i = 0; i <= 60; ++i) {
                const double x = 10.0 * std::pow(10.0, i / 20.0);
                if (density_(x) > tail_->constant * std::pow(x, -tail_->exponent) * (1.0 + 1e-9))
                    throw InvariantError(name_ + " kernel violates its declared tail bound at x = " + std::to_string(x));
            }
        }
    }

    std::string name_;
    bool gaussian_ = false;
    std::function<double(double)> density_;
    std::function<double(double)> cdf_;
    std::optional<TailBound> tail_;
};

inline constexpr double quantile_tolerance = 1e-12;

namespace detail {

// Root of cdf(x) = alpha on [lo, hi] by Newton steps safeguarded with bisection.
template <class Cdf, class Pdf>
double invert_cdf(Cdf&& cdf, Pdf&& pdf, double alpha, double lo, double hi, double x0)
{
    double x = std::clamp(x0, lo, hi);
    for (int it = 0; it < 200; ++it) {
        const double f = cdf(x) - alpha;
        if (f == 0.0) return x;
        if (f < 0.0) lo = x;
        else hi = x;
        const double d = pdf(x);
        double next = d > 0.0 ? x - f / d : 0.5 * (lo + hi);
        if (std::abs(next - x) < 0.25 * quantile_tolerance && next >= lo && next <= hi) return next;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        // The last step is Newton whenever possible so that steep cdfs still round-trip in alpha.
        if (hi - lo <= quantile_tolerance) return next;
        x = next;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

// The measure mu_h^y on [0,1]: kernel mass that would fall outside [0,1] is
// returned through the b1, b2 terms plus a uniform component 4 b1 b2.
class BoundaryKernelMeasure {
public:
    BoundaryKernelMeasure(double center, double bandwidth, std::shared_ptr<const BaseKernel> kernel = default_kernel())
        : y_(center), h_(bandwidth), kernel_(std::move(kernel))
    {
        if (!(y_ >= 0.0 && y_ <= 1.0)) throw DomainError("boundary kernel centre must lie in [0,1]");
        if (!(h_ > 0.0) || !std::isfinite(h_)) throw DomainError("bandwidth must be positive");
        b1_ = kernel_->cdf(-(1.0 - y_) / h_);  // 1 - Psi((1-y)/h) by symmetry
        b2_ = kernel_->cdf(-y_ / h_);
        cdf_at_center_ = (1.0 + 2.0 * b1_) * (0.5 - b2_) + 4.0 * b1_ * b2_ * y_;
    }

    static std::shared_ptr<const BaseKernel> default_kernel()
    {
        static const auto k = std::make_shared<const BaseKernel>(BaseKernel::gaussian());
        return k;
    }

    double center() const { return y_; }
    double bandwidth() const { return h_; }
    double b1() const { return b1_; }
    double b2() const { return b2_; }
    const BaseKernel& kernel() const { return *kernel_; }

    double density(double x) const
    {
        if (x < 0.0 || x > 1.0) return 0.0;
        const double u = x - y_;
        const double k = kernel_->density(u / h_) / h_;
        double f = k + 4.0 * b1_ * b2_;
        if (u > 0.0) f += 2.0 * b2_ * k;
        else if (u < 0.0) f += 2.0 * b1_ * k;
        return f;
    }

    double cdf(double x) const
    {
        if (!(x >= 0.0 && x <= 1.0)) throw DomainError("boundary kernel cdf is defined on [0,1] only");
        if (x == 0.0) return 0.0;
        if (x == 1.0) return 1.0;
        const double c = 4.0 * b1_ * b2_;
        if (x <= y_) return (1.0 + 2.0 * b1_) * (kernel_->cdf((x - y_) / h_) - b2_) + c * x;
        return cdf_at_center_ + (1.0 + 2.0 * b2_) * (kernel_->cdf((x - y_) / h_) - 0.5) + c * (x - y_);
    }

    double quantile(double alpha) const
    {
        if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("quantile level must lie in (0,1)");
        return detail::invert_cdf([this](double x) { return cdf(x); }, [this](double x) { return density(x); },
                                  alpha, 0.0, 1.0, std::clamp(y_ + h_ * numeric::normal_quantile(alpha), 0.0, 1.0));
    }

private:
    double y_;
    double h_;
    std::shared_ptr<const BaseKernel> kernel_;
    double b1_ = 0.0;
    double b2_ = 0.0;
    double cdf_at_center_ = 0.0;
};

enum class KernelMode {
    boundary,  // boundary-corrected kernels on [0,1]
    plain,     // ordinary kernel density on the real line
};

struct QuantileCacheOptions {
    std::size_t grid_size = 4096;
    // Plain Gaussian mixtures are tabulated on an x-grid of spacing h / bins_per_bandwidth.
    std::size_t bins_per_bandwidth = 32;
    std::size_t max_table_size = std::size_t{1} << 16;
};

// Equal-weight mixture (1/p) sum_j K_h(. , X_j) of kernels centred at the samples.
class SmoothedMeasure {
public:
    SmoothedMeasure(std::vector<double> samples, double bandwidth, KernelMode mode,
                    std::shared_ptr<const BaseKernel> kernel = BoundaryKernelMeasure::default_kernel())
        : samples_(std::move(samples)), h_(bandwidth), mode_(mode), kernel_(std::move(kernel))
    {
        if (samples_.empty()) throw DomainError("smoothing needs at least one sample");
        if (!(h_ > 0.0) || !std::isfinite(h_)) throw DomainError("bandwidth must be positive");
        for (double x : samples_) {
            if (!std::isfinite(x)) throw DomainError("samples must be finite");
            if (mode_ == KernelMode::boundary && !(x >= 0.0 && x <= 1.0))
                throw DomainError("boundary-corrected smoothing requires every sample in [0,1]");
        }
        std::sort(samples_.begin(), samples_.end());
        if (mode_ == KernelMode::boundary) {
            components_.reserve(samples_.size());
            for (double x : samples_) components_.emplace_back(x, h_, kernel_);
        }
    }

    std::span<const double> samples() const { return samples_; }
    double bandwidth() const { return h_; }
    KernelMode mode() const { return mode_; }

    std::pair<double, double> support() const
    {
        if (mode_ == KernelMode::boundary) return {0.0, 1.0};
        return {-numeric::inf, numeric::inf};
    }

    double cdf(double x) const
    {
        if (mode_ == KernelMode::boundary) {
            if (x <= 0.0) return 0.0;
            if (x >= 1.0) return 1.0;
            double s = 0.0;
            for (const auto& c : components_) s += c.cdf(x);
            return s / static_cast<double>(components_.size());
        }
        auto [first, last] = window(x);
        double s = static_cast<double>(first);  // components far to the left contribute 1
        for (std::size_t j = first; j < last; ++j) s += kernel_->cdf((x - samples_[j]) / h_);
        return s / static_cast<double>(samples_.size());
    }

    double density(double x) const
    {
        if (mode_ == KernelMode::boundary) {
            double s = 0.0;
            for (const auto& c : components_) s += c.density(x);
            return s / static_cast<double>(components_.size());
        }
        auto [first, last] = window(x);
        double s = 0.0;
        for (std::size_t j = first; j < last; ++j) s += kernel_->density((x - samples_[j]) / h_);
        return s / (static_cast<double>(samples_.size()) * h_);
    }

    // Exact quantile by safeguarded root finding on the mixture cdf.
    double quantile(double alpha) const
    {
        if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("quantile level must lie in (0,1)");
        auto [lo, hi] = bracket();
        return detail::invert_cdf([this](double x) { return cdf(x); }, [this](double x) { return density(x); },
                                  alpha, lo, hi, samples_[std::min(samples_.size() - 1, static_cast<std::size_t>(alpha * static_cast<double>(samples_.size())))]);
    }

    // Quantiles on the midpoint grid of (0,1), computed once. Plain Gaussian
    // mixtures use a binned tabulation of the cdf; other kernels invert exactly.
    GridQuantile quantile_grid(const QuantileCacheOptions& opt = {}) const
    {
        GridQuantile g{numeric::midpoint_grid(opt.grid_size), std::vector<double>(opt.grid_size)};
        if (mode_ == KernelMode::plain && kernel_->is_gaussian()) {
            binned_quantiles(g.alphas, g.values, opt);
        } else {
            auto [lo, hi] = bracket();
            for (std::size_t k = 0; k < g.alphas.size(); ++k) {
                const double start = k == 0 ? lo : g.values[k - 1];
                g.values[k] = detail::invert_cdf([this](double x) { return cdf(x); },
                                                 [this](double x) { return density(x); }, g.alphas[k], start, hi,
                                                 start);
                if (k > 0) g.values[k] = std::max(g.values[k], g.values[k - 1]);
            }
        }
        return g;
    }

private:
    // Kernel tails beyond 38 bandwidths are below double resolution for the Gaussian.
    static constexpr double gaussian_reach = 38.0;

    std::pair<std::size_t, std::size_t> window(double x) const
    {
        if (!kernel_->is_gaussian()) return {0, samples_.size()};
        const auto first = numeric::lower_index(samples_, x - gaussian_reach * h_);
        const auto last = numeric::lower_index(samples_, x + gaussian_reach * h_);
        return {first, last};
    }

    std::pair<double, double> bracket() const
    {
        if (mode_ == KernelMode::boundary) return {0.0, 1.0};
        if (kernel_->is_gaussian())
            return {samples_.front() - gaussian_reach * h_, samples_.back() + gaussian_reach * h_};
        // Heavier user kernels: widen until the bracket holds the requested mass.
        double lo = samples_.front() - 10.0 * h_, hi = samples_.back() + 10.0 * h_;
        for (int i = 0; i < 60 && (cdf(lo) > 1e-15 || cdf(hi) < 1.0 - 1e-15); ++i) {
            lo -= (hi - lo);
            hi += (hi - lo);
        }
        return {lo, hi};
    }

    void binned_quantiles(std::span<const double> alphas, std::span<double> out, const QuantileCacheOptions& opt) const
    {
        constexpr double reach = 8.0;
        const double lo = samples_.front() - reach * h_;
        const double hi = samples_.back() + reach * h_;
        double dx = h_ / static_cast<double>(opt.bins_per_bandwidth);
        auto table = static_cast<std::size_t>(std::ceil((hi - lo) / dx)) + 1;
        if (table > opt.max_table_size) {
            table = opt.max_table_size;
            dx = (hi - lo) / static_cast<double>(table - 1);
        }
        // Linear binning of the unit sample masses onto the table nodes.
        std::vector<double> w(table, 0.0);
        const double mass = 1.0 / static_cast<double>(samples_.size());
        for (double x : samples_) {
            const double t = (x - lo) / dx;
            auto m = static_cast<std::size_t>(t);
            if (m >= table - 1) m = table - 2;
            const double f = t - static_cast<double>(m);
            w[m] += mass * (1.0 - f);
            w[m + 1] += mass * f;
        }
        const auto reach_bins = static_cast<std::ptrdiff_t>(std::ceil(reach * h_ / dx));
        std::vector<double> kern(static_cast<std::size_t>(2 * reach_bins + 1));
        for (std::ptrdiff_t d = -reach_bins; d <= reach_bins; ++d)
            kern[static_cast<std::size_t>(d + reach_bins)] = numeric::normal_cdf(static_cast<double>(d) * dx / h_);

        std::vector<double> prefix(table + 1, 0.0);
        for (std::size_t m = 0; m < table; ++m) prefix[m + 1] = prefix[m] + w[m];

        std::vector<double> cdf(table);
        const auto n = static_cast<std::ptrdiff_t>(table);
        for (std::ptrdiff_t k = 0; k < n; ++k) {
            const std::ptrdiff_t m0 = std::max<std::ptrdiff_t>(0, k - reach_bins);
            const std::ptrdiff_t m1 = std::min<std::ptrdiff_t>(n - 1, k + reach_bins);
            double s = prefix[static_cast<std::size_t>(m0)];
            for (std::ptrdiff_t m = m0; m <= m1; ++m)
                s += w[static_cast<std::size_t>(m)] * kern[static_cast<std::size_t>(k - m + reach_bins)];
            cdf[static_cast<std::size_t>(k)] = s;
        }
        for (std::size_t k = 1; k < table; ++k) cdf[k] = std::max(cdf[k], cdf[k - 1]);

        std::size_t k = 0;
        for (std::size_t i = 0; i < alphas.size(); ++i) {
            const double a = alphas[i];
            while (k + 1 < table && cdf[k + 1] < a) ++k;
            if (k + 1 >= table) {
                out[i] = hi;
            } else if (a <= cdf[k]) {
                out[i] = lo + static_cast<double>(k) * dx;
            } else {
                const double f = (a - cdf[k]) / (cdf[k + 1] - cdf[k]);
                out[i] = lo + (static_cast<double>(k) + f) * dx;
            }
            if (i > 0) out[i] = std::max(out[i], out[i - 1]);
        }
    }

    std::vector<double> samples_;
    double h_;
    KernelMode mode_;
    std::shared_ptr<const BaseKernel> kernel_;
    std::vector<BoundaryKernelMeasure> components_;
};

inline SmoothedMeasure smoothed_unit_measure(std::vector<double> samples, double h)
{
    return SmoothedMeasure(std::move(samples), h, KernelMode::boundary);
}

// ---------------------------------------------------------------------------
// Bandwidth selection

struct Silverman {};

// Least-squares (unbiased) cross-validation with a Gaussian kernel, minimised
// over a log-spaced candidate grid. Pairwise distances are binned as in
// classical implementations, which makes each score evaluation O(bins).
struct CrossValidation {
    std::size_t candidates = 40;
    std::size_t bins = 1000;
    double lower_factor = 0.05;  // grid spans [lower, upper] * 1.144 * sd * p^(-1/5)
    double upper_factor = 1.5;
};

using BandwidthRule = std::variant<Silverman, CrossValidation>;

namespace detail {

inline double sample_sd(std::span<const double> x)
{
    const double m = numeric::pairwise_mean(x);
    std::vector<double> d(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = (x[i] - m) * (x[i] - m);
    return std::sqrt(numeric::pairwise_sum(d) / static_cast<double>(x.size() - 1));
}

inline void require_spread(std::span<const double> x)
{
    if (x.size() < 2) throw DomainError("bandwidth selection needs at least two samples");
    const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
    if (*mn == *mx)
        throw DegenerateSample("all samples are identical; no bandwidth exists, use the non-smoothed estimator");
}

}  // namespace detail

// 0.9 * min(sd, IQR / 1.34) * p^(-1/5), IQR taken from the empirical step quantile.
inline double silverman_bandwidth(std::span<const double> samples)
{
    detail::require_spread(samples);
    const EmpiricalMeasure m(std::vector<double>(samples.begin(), samples.end()));
    const double sd = detail::sample_sd(samples);
    const double iqr = m.quantile(0.75) - m.quantile(0.25);
    double scale = std::min(sd, iqr / 1.34);
    if (!(scale > 0.0)) scale = sd;
    return 0.9 * scale * std::pow(static_cast<double>(samples.size()), -0.2);
}

// Binned squared pairwise distances, shared by all candidate evaluations.
class PairDistanceHistogram {
public:
    PairDistanceHistogram(std::span<const double> samples, std::size_t bins) : p_(samples.size()), counts_(bins, 0.0)
    {
        detail::require_spread(samples);
        std::vector<double> x(samples.begin(), samples.end());
        std::sort(x.begin(), x.end());
        width_ = (x.back() - x.front()) / static_cast<double>(bins);
        for (std::size_t i = 0; i < x.size(); ++i)
            for (std::size_t j = i + 1; j < x.size(); ++j) {
                auto b = static_cast<std::size_t>((x[j] - x[i]) / width_);
                counts_[std::min(b, bins - 1)] += 1.0;
            }
    }

    // LSCV(h) = int fhat^2 - (2/p) sum_i fhat_{-i}(X_i) for the Gaussian kernel.
    double lscv(double h) const
    {
        const double p = static_cast<double>(p_);
        const double sqrt_pi = std::sqrt(std::numbers::pi);
        double s4 = 0.0, s2 = 0.0;
        for (std::size_t b = 0; b < counts_.size(); ++b) {
            if (counts_[b] == 0.0) continue;
            const double u = (static_cast<double>(b) + 0.5) * width_ / h;
            const double e = std::exp(-0.25 * u * u);
            s4 += counts_[b] * e;
            s2 += counts_[b] * e * e;
        }
        const double integral_sq = 1.0 / (2.0 * sqrt_pi * p * h) + s4 / (sqrt_pi * p * p * h);
        const double loo = 4.0 * s2 / (std::sqrt(2.0 * std::numbers::pi) * p * (p - 1.0) * h);
        return integral_sq - loo;
    }

private:
    std::size_t p_;
    std::vector<double> counts_;
    double width_ = 0.0;
};

inline std::vector<double> cv_candidates(std::span<const double> samples, const CrossValidation& cv)
{
    detail::require_spread(samples);
    const double ref = 1.144 * detail::sample_sd(samples) * std::pow(static_cast<double>(samples.size()), -0.2);
    std::vector<double> grid(cv.candidates);
    const double a = std::log(cv.lower_factor * ref), b = std::log(cv.upper_factor * ref);
    for (std::size_t k = 0; k < cv.candidates; ++k)
        grid[k] = std::exp(cv.candidates == 1 ? b : a + (b - a) * static_cast<double>(k) / static_cast<double>(cv.candidates - 1));
    return grid;
}

inline double cv_bandwidth(std::span<const double> samples, const CrossValidation& cv = {})
{
    const auto grid = cv_candidates(samples, cv);
    const PairDistanceHistogram hist(samples, cv.bins);
    double best = grid.front(), best_score = std::numeric_limits<double>::infinity();
    for (double h : grid) {
        const double s = hist.lscv(h);
        if (s < best_score) {
            best_score = s;
            best = h;
        }
    }
    return best;
}

inline double select_bandwidth(std::span<const double> samples, const BandwidthRule& rule)
{
    if (std::holds_alternative<Silverman>(rule)) return silverman_bandwidth(samples);
    return cv_bandwidth(samples, std::get<CrossValidation>(rule));
}

}  // namespace wbary
