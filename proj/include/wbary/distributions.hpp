#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "wbary/errors.hpp"
#include "wbary/numeric.hpp"

namespace wbary {

struct Uniform {
    double lo = 0.0;
    double hi = 1.0;
};

struct Gaussian {
    double mean = 0.0;
    double sd = 1.0;
};

// Density rate * exp(-rate * x) on [0, inf).
struct OneSidedExponential {
    double rate = 1.0;
};

// Tabulated cdf, linearly interpolated between knots (piecewise-uniform density).
struct UserTable {
    std::vector<double> x;
    std::vector<double> cdf;
};

// A known absolutely continuous law on the real line with finite variance.
// Every kind may carry an additional location shift.
class AnalyticDistribution {
public:
    using Kind = std::variant<Uniform, Gaussian, OneSidedExponential, UserTable>;

    static AnalyticDistribution uniform(double lo, double hi) { return AnalyticDistribution(Uniform{lo, hi}); }
    static AnalyticDistribution gaussian(double mean, double sd) { return AnalyticDistribution(Gaussian{mean, sd}); }
    static AnalyticDistribution exponential(double rate) { return AnalyticDistribution(OneSidedExponential{rate}); }
    static AnalyticDistribution user_table(std::vector<double> x, std::vector<double> cdf)
    {
        return AnalyticDistribution(UserTable{std::move(x), std::move(cdf)});
    }

    explicit AnalyticDistribution(Kind kind, double shift = 0.0) : kind_(std::move(kind)), shift_(shift)
    {
        validate();
    }

    const Kind& kind() const { return kind_; }
    double shift() const { return shift_; }

    template <class T>
    bool is() const
    {
        return std::holds_alternative<T>(kind_);
    }

    AnalyticDistribution shifted(double c) const { return AnalyticDistribution(kind_, shift_ + c); }

    std::string name() const
    {
        std::string base = std::visit(
            [](const auto& k) -> std::string {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, Uniform>) return "uniform";
                else if constexpr (std::is_same_v<T, Gaussian>) return "gaussian";
                else if constexpr (std::is_same_v<T, OneSidedExponential>) return "exponential";
                else return "table";
            },
            kind_);
        return base;
    }

    // Closed support interval (may be infinite on either side).
    std::pair<double, double> support() const
    {
        auto s = std::visit(
            [](const auto& k) -> std::pair<double, double> {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, Uniform>) return {k.lo, k.hi};
                else if constexpr (std::is_same_v<T, Gaussian>) return {-numeric::inf, numeric::inf};
                else if constexpr (std::is_same_v<T, OneSidedExponential>) return {0.0, numeric::inf};
                else return {k.x.front(), k.x.back()};
            },
            kind_);
        return {s.first + shift_, s.second + shift_};
    }

    double cdf(double x) const
    {
        const double t = x - shift_;
        return std::visit(
            [t](const auto& k) -> double {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, Uniform>) {
                    return std::clamp((t - k.lo) / (k.hi - k.lo), 0.0, 1.0);
                } else if constexpr (std::is_same_v<T, Gaussian>) {
                    return numeric::normal_cdf((t - k.mean) / k.sd);
                } else if constexpr (std::is_same_v<T, OneSidedExponential>) {
                    return t <= 0.0 ? 0.0 : -std::expm1(-k.rate * t);
                } else {
                    if (t <= k.x.front()) return 0.0;
                    if (t >= k.x.back()) return 1.0;
                    const std::size_t i = numeric::lower_index(k.x, t);
                    const double w = (t - k.x[i - 1]) / (k.x[i] - k.x[i - 1]);
                    return k.cdf[i - 1] + w * (k.cdf[i] - k.cdf[i - 1]);
                }
            },
            kind_);
    }

    double pdf(double x) const
    {
        const double t = x - shift_;
        return std::visit(
            [t](const auto& k) -> double {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, Uniform>) {
                    return (t < k.lo || t > k.hi) ? 0.0 : 1.0 / (k.hi - k.lo);
                } else if constexpr (std::is_same_v<T, Gaussian>) {
                    return numeric::normal_pdf((t - k.mean) / k.sd) / k.sd;
                } else if constexpr (std::is_same_v<T, OneSidedExponential>) {
                    return t < 0.0 ? 0.0 : k.rate * std::exp(-k.rate * t);
                } else {
                    if (t < k.x.front() || t > k.x.back()) return 0.0;
                    std::size_t i = std::max<std::size_t>(numeric::lower_index(k.x, t), 1);
                    return (k.cdf[i] - k.cdf[i - 1]) / (k.x[i] - k.x[i - 1]);
                }
            },
            kind_);
    }

    // Generalized inverse inf{x : F(x) >= alpha}; alpha in (0,1), endpoints give the support bounds.
    double quantile(double alpha) const
    {
        const double q = std::visit(
            [alpha](const auto& k) -> double {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, Uniform>) {
                    return k.lo + alpha * (k.hi - k.lo);
                } else if constexpr (std::is_same_v<T, Gaussian>) {
                    return k.mean + k.sd * numeric::normal_quantile(alpha);
                } else if constexpr (std::is_same_v<T, OneSidedExponential>) {
                    if (alpha >= 1.0) return numeric::inf;
                    return -std::log1p(-alpha) / k.rate;
                } else {
                    if (alpha <= 0.0) return k.x.front();
                    if (alpha >= 1.0) return k.x.back();
                    const std::size_t i = numeric::lower_index(k.cdf, alpha);
                    if (i == 0) return k.x.front();
                    const double dc = k.cdf[i] - k.cdf[i - 1];
                    const double w = dc > 0.0 ? (alpha - k.cdf[i - 1]) / dc : 1.0;
                    return k.x[i - 1] + w * (k.x[i] - k.x[i - 1]);
                }
            },
            kind_);
        return q + shift_;
    }

    double mean() const
    {
        return shift_ + std::visit(
                            [](const auto& k) -> double {
                                using T = std::decay_t<decltype(k)>;
                                if constexpr (std::is_same_v<T, Uniform>) return 0.5 * (k.lo + k.hi);
                                else if constexpr (std::is_same_v<T, Gaussian>) return k.mean;
                                else if constexpr (std::is_same_v<T, OneSidedExponential>) return 1.0 / k.rate;
                                else {
                                    double m = 0.0;
                                    for (std::size_t i = 1; i < k.x.size(); ++i)
                                        m += (k.cdf[i] - k.cdf[i - 1]) * 0.5 * (k.x[i - 1] + k.x[i]);
                                    return m;
                                }
                            },
                            kind_);
    }

    double variance() const
    {
        return std::visit(
            [](const auto& k) -> double {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, Uniform>) {
                    const double w = k.hi - k.lo;
                    return w * w / 12.0;
                } else if constexpr (std::is_same_v<T, Gaussian>) {
                    return k.sd * k.sd;
                } else if constexpr (std::is_same_v<T, OneSidedExponential>) {
                    return 1.0 / (k.rate * k.rate);
                } else {
                    double m = 0.0, m2 = 0.0;
                    for (std::size_t i = 1; i < k.x.size(); ++i) {
                        const double mass = k.cdf[i] - k.cdf[i - 1];
                        const double a = k.x[i - 1], b = k.x[i];
                        m += mass * 0.5 * (a + b);
                        m2 += mass * (a * a + a * b + b * b) / 3.0;
                    }
                    return m2 - m * m;
                }
            },
            kind_);
    }

    // F(x)(1 - F(x)) / f(x), evaluated without underflow in the tails.
    // Returns +inf where the density vanishes strictly inside the support.
    double j2_integrand(double x) const
    {
        const double t = x - shift_;
        return std::visit(
            [t, this, x](const auto& k) -> double {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, Uniform>) {
                    const double u = std::clamp((t - k.lo) / (k.hi - k.lo), 0.0, 1.0);
                    return u * (1.0 - u) * (k.hi - k.lo);
                } else if constexpr (std::is_same_v<T, Gaussian>) {
                    const double z = std::abs((t - k.mean) / k.sd);
                    return numeric::normal_cdf(z) * numeric::normal_mills_ratio(z) * k.sd;
                } else if constexpr (std::is_same_v<T, OneSidedExponential>) {
                    return t <= 0.0 ? 0.0 : -std::expm1(-k.rate * t) / k.rate;
                } else {
                    const double F = cdf(x);
                    const double num = F * (1.0 - F);
                    if (num <= 0.0) return 0.0;
                    const double f = pdf(x);
                    return f > 0.0 ? num / f : numeric::inf;
                }
            },
            kind_);
    }

private:
    void validate() const
    {
        if (!std::isfinite(shift_)) throw DomainError("distribution shift must be finite");
        std::visit(
            [](const auto& k) {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, Uniform>) {
                    if (!(k.lo < k.hi) || !std::isfinite(k.lo) || !std::isfinite(k.hi))
                        throw DomainError("uniform requires finite lo < hi");
                } else if constexpr (std::is_same_v<T, Gaussian>) {
                    if (!(k.sd > 0.0) || !std::isfinite(k.mean) || !std::isfinite(k.sd))
                        throw DomainError("gaussian requires finite mean and sd > 0");
                } else if constexpr (std::is_same_v<T, OneSidedExponential>) {
                    if (!(k.rate > 0.0) || !std::isfinite(k.rate))
                        throw DomainError("exponential requires rate > 0");
                } else {
                    if (k.x.size() < 2 || k.x.size() != k.cdf.size())
                        throw DomainError("cdf table needs at least two (x, F) knots");
                    for (std::size_t i = 0; i < k.x.size(); ++i) {
                        if (!std::isfinite(k.x[i]) || !std::isfinite(k.cdf[i]))
                            throw InvariantError("cdf table entries must be finite");
                        if (i > 0 && !(k.x[i] > k.x[i - 1]))
                            throw InvariantError("cdf table x must be strictly increasing");
                        if (i > 0 && k.cdf[i] < k.cdf[i - 1])
                            throw InvariantError("cdf table values must be non-decreasing");
                    }
                    if (k.cdf.front() != 0.0 || k.cdf.back() != 1.0)
                        throw InvariantError("cdf table must start at 0 and end at 1");
                }
            },
            kind_);
    }

    Kind kind_;
    double shift_ = 0.0;
};

}  // namespace wbary
