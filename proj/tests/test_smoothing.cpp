#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "wbary/measures.hpp"
#include "wbary/smoothing.hpp"

using namespace wbary;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double Psi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Density written out term by term, independent of BoundaryKernelMeasure::density.
double eq_density(double x, double y, double h)
{
    const double b1 = 1.0 - Psi((1.0 - y) / h), b2 = Psi(-y / h);
    const double k = std::exp(-0.5 * ((x - y) / h) * ((x - y) / h)) / (h * std::sqrt(2.0 * M_PI));
    return k + 2.0 * b2 * k * (x - y > 0.0) + 2.0 * b1 * k * (x - y < 0.0) + 4.0 * b1 * b2;
}

double quad_cdf(double x, double y, double h)
{
    auto f = [&](double t) { return eq_density(t, y, h); };
    if (x <= y) return oracle::simpson(f, 0.0, x, 1e-14);
    return oracle::simpson(f, 0.0, y, 1e-14) + oracle::simpson(f, y, x, 1e-14);
}

// d_W^2 between a smoothed unit and its empirical measure, with the smoothed
// quantile held constant on each cell of a fine midpoint grid.
double smoothed_vs_empirical(const SmoothedMeasure& m, std::size_t cells)
{
    QuantileCacheOptions o;
    o.grid_size = cells;
    std::vector<double> x(m.samples().begin(), m.samples().end());
    return oracle::cells_vs_step(m.quantile_grid(o).values, x);
}

double smoothing_error_bound(double h) { return 3.0 * h * h + 4.0 * Psi(-1.0 / std::sqrt(h)); }

}  // namespace

TEST_CASE("gaussian base kernel")
{
    const auto k = BaseKernel::gaussian();
    CHECK(k.is_gaussian());
    CHECK_THAT(k.second_moment(), WithinAbs(1.0, 1e-10));
    for (double x : {0.0, 0.3, 1.7, 5.0}) CHECK(k.density(x) == k.density(-x));
}

TEST_CASE("user kernels are rescaled and validated")
{
    // Logistic density has variance pi^2/3; after rescaling it must have unit second moment.
    auto logistic_pdf = [](double x) {
        const double e = std::exp(-std::abs(x));
        return e / ((1.0 + e) * (1.0 + e));
    };
    auto logistic_cdf = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    const auto k = BaseKernel::user(logistic_pdf, logistic_cdf, TailBound{1.0e6, 6.0}, "logistic");
    CHECK_THAT(k.second_moment(), WithinAbs(1.0, 1e-8));
    const double s = M_PI / std::sqrt(3.0);
    CHECK_THAT(k.cdf(1.0), WithinAbs(logistic_cdf(s), 1e-15));

    auto skewed = [](double x) { return x > 0 ? std::exp(-x) * 0.5 : std::exp(2 * x); };
    CHECK_THROWS_AS(BaseKernel::user(skewed, logistic_cdf), InvariantError);
    CHECK_THROWS_AS(BaseKernel::user(logistic_pdf, logistic_cdf, TailBound{1.0, 4.0}), InvariantError);
    auto cauchy = [](double x) { return 1.0 / (M_PI * (1.0 + x * x)); };
    CHECK_THROWS_AS(BaseKernel::user(cauchy, logistic_cdf), DomainError);
}

TEST_CASE("boundary constants")
{
    std::mt19937_64 g(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        const BoundaryKernelMeasure m(u(g), 0.25 * u(g) + 1e-4);
        CHECK(m.b1() >= 0.0);
        CHECK(m.b1() <= 0.5);
        CHECK(m.b2() >= 0.0);
        CHECK(m.b2() <= 0.5);
    }
    const BoundaryKernelMeasure edge(0.0, 0.1);
    CHECK(edge.b2() == 0.5);
}

TEST_CASE("boundary kernel density integrates to one")
{
    std::mt19937_64 g(22);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        const double y = u(g), h = 0.25 * (1.0 - u(g));
        const BoundaryKernelMeasure m(y, h);
        auto f = [&](double x) { return m.density(x); };
        const double mass = oracle::simpson(f, 0.0, y, 1e-13) + oracle::simpson(f, y, 1.0, 1e-13);
        CHECK_THAT(mass, WithinAbs(1.0, 1e-10));
        CHECK_THAT(m.density(0.37), WithinAbs(eq_density(0.37, y, h), 1e-13));
    }
}

TEST_CASE("boundary kernel cdf closed form")
{
    const BoundaryKernelMeasure m(0.5, 0.1);
    CHECK(m.cdf(0.0) == 0.0);
    CHECK(m.cdf(1.0) == 1.0);
    CHECK_THAT(m.cdf(0.3), WithinAbs(quad_cdf(0.3, 0.5, 0.1), 1e-9));
    CHECK_THROWS_AS(m.cdf(-0.1), DomainError);
    CHECK_THROWS_AS(m.cdf(1.5), DomainError);

    const BoundaryKernelMeasure narrow(0.5, 0.05);
    for (double x : {0.3, 0.45, 0.5, 0.62})
        CHECK_THAT(narrow.cdf(x), WithinAbs(Psi((x - 0.5) / 0.05), 1e-12));

    std::mt19937_64 g(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        const double y = u(g), h = 0.25 * (1.0 - u(g)), x = u(g);
        CHECK_THAT(BoundaryKernelMeasure(y, h).cdf(x), WithinAbs(quad_cdf(x, y, h), 1e-9));
    }
}

TEST_CASE("boundary kernel cdf is strictly increasing")
{
    const BoundaryKernelMeasure m(0.4, 0.1);
    double prev = 0.0;
    for (int i = 1; i <= 1000; ++i) {
        const double c = m.cdf(i / 1000.0);
        CHECK(c > prev);
        prev = c;
    }
}

TEST_CASE("boundary kernel quantile")
{
    std::mt19937_64 g(24);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        const BoundaryKernelMeasure m(u(g), 0.25 * (1.0 - u(g)));
        const double a = u(g);
        CHECK_THAT(m.cdf(m.quantile(a)), WithinAbs(a, 1e-10));
    }
    CHECK_THAT(BoundaryKernelMeasure(0.5, 0.05).quantile(0.5), WithinAbs(0.5, 1e-6));

    const double ref = oracle::bisect([](double x) { return quad_cdf(x, 0.1, 0.1) - 0.5; }, 0.0, 1.0, 60);
    CHECK_THAT(BoundaryKernelMeasure(0.1, 0.1).quantile(0.5), WithinAbs(ref, 1e-9));
    CHECK_THROWS_AS(BoundaryKernelMeasure(0.1, 0.1).quantile(0.0), DomainError);
}

TEST_CASE("smoothed unit measure")
{
    const auto single = smoothed_unit_measure({0.3}, 0.07);
    const BoundaryKernelMeasure k(0.3, 0.07);
    for (double x : {0.0, 0.1, 0.3, 0.5, 0.99}) CHECK_THAT(single.cdf(x), WithinAbs(k.cdf(x), 1e-15));
    for (double a : {0.1, 0.5, 0.9}) CHECK_THAT(single.quantile(a), WithinAbs(k.quantile(a), 1e-11));

    const auto pair = smoothed_unit_measure({0.2, 0.8}, 0.05);
    CHECK_THAT(pair.cdf(0.5), WithinAbs(0.5, 1e-6));

    CHECK_THROWS_AS(smoothed_unit_measure({0.2, 1.2}, 0.05), DomainError);
    CHECK_THROWS_AS(smoothed_unit_measure({0.2}, 0.0), DomainError);

    std::mt19937_64 g(25);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(30);
    for (auto& v : x) v = u(g);
    const auto m = smoothed_unit_measure(x, 0.08);
    double prev = 0.0;
    for (int i = 0; i <= 500; ++i) {
        const double c = m.cdf(i / 500.0);
        CHECK(c >= prev);
        prev = c;
    }
    for (int i = 1; i < 100; ++i) CHECK_THAT(m.cdf(m.quantile(i / 100.0)), WithinAbs(i / 100.0, 1e-10));
}

TEST_CASE("cached quantile grid matches exact inversion")
{
    std::mt19937_64 g(26);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(25);
    for (auto& v : x) v = u(g);
    const auto m = smoothed_unit_measure(x, 0.05);
    QuantileCacheOptions o;
    o.grid_size = 256;
    const auto grid = m.quantile_grid(o);
    for (std::size_t k = 0; k < grid.alphas.size(); ++k) CHECK_THAT(grid.values[k], WithinAbs(m.quantile(grid.alphas[k]), 1e-11));

    // Plain Gaussian mixtures use a binned table; the error stays far below sampling noise.
    std::normal_distribution<double> z(0.0, 1.0);
    for (auto& v : x) v = z(g);
    const SmoothedMeasure plain(x, 0.3, KernelMode::plain);
    const auto pg = plain.quantile_grid();
    double worst = 0.0;
    for (std::size_t k = 0; k < pg.alphas.size(); k += 7) worst = std::max(worst, std::abs(pg.values[k] - plain.quantile(pg.alphas[k])));
    CHECK(worst < 1e-3);
    for (int i = 1; i < 50; ++i) CHECK_THAT(plain.cdf(plain.quantile(i / 50.0)), WithinAbs(i / 50.0, 1e-10));
}

TEST_CASE("smoothing error bound for the boundary-corrected kernel")
{
    std::mt19937_64 g(27);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> size(1, 50);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> x(size(g));
        for (auto& v : x) v = u(g);
        for (double h : {0.25, 0.1, 0.05, 0.01}) {
            const double d = smoothed_vs_empirical(smoothed_unit_measure(x, h), 4096);
            CHECK(d <= smoothing_error_bound(h) + 1e-9);
        }
    }
}

TEST_CASE("smoothing bias is of order h^2")
{
    // Coupling each kernel with its own atom bounds d_W^2 by the mean second moment about the atoms.
    std::mt19937_64 g(28);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 5; ++t) {
        std::vector<double> x(20);
        for (auto& v : x) v = u(g);
        for (double h : {0.05, 0.02, 0.01, 0.005}) {
            double coupling = 0.0;
            for (double y : x) {
                auto f = [&](double z) { return (z - y) * (z - y) * eq_density(z, y, h); };
                const double a = std::max(0.0, y - 12.0 * h), b = std::min(1.0, y + 12.0 * h);
                coupling += oracle::simpson(f, 0.0, a, 1e-15) + oracle::simpson(f, a, y, 1e-15) +
                            oracle::simpson(f, y, b, 1e-15) + oracle::simpson(f, b, 1.0, 1e-15);
            }
            coupling /= static_cast<double>(x.size());
            const double d = smoothed_vs_empirical(smoothed_unit_measure(x, h), 16384);
            CHECK(d <= coupling + 1e-9);
            CHECK(d / (h * h) < 3.0);
            CHECK(coupling / (h * h) < 1.0 + 1e-9);
        }
    }
}

TEST_CASE("Silverman bandwidth")
{
    CHECK_THAT(silverman_bandwidth(std::vector<double>{0.0, 1.0}),
               WithinAbs(0.9 * std::min(std::sqrt(0.5), 1.0 / 1.34) * std::pow(2.0, -0.2), 1e-15));

    std::mt19937_64 g(29);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> x(100);
    for (auto& v : x) v = z(g);
    double m = 0.0;
    for (double v : x) m += v;
    m /= 100.0;
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    const double sd = std::sqrt(ss / 99.0);
    auto s = x;
    std::sort(s.begin(), s.end());
    const double iqr = s[74] - s[24];  // ceil(0.75 * 100) and ceil(0.25 * 100), 1-based
    CHECK_THAT(silverman_bandwidth(x), WithinRel(0.9 * std::min(sd, iqr / 1.34) * std::pow(100.0, -0.2), 1e-13));

    CHECK_THROWS_AS(silverman_bandwidth(std::vector<double>{2.0, 2.0, 2.0}), DegenerateSample);
    CHECK_THROWS_AS(silverman_bandwidth(std::vector<double>{2.0}), DomainError);
}

TEST_CASE("cross-validated bandwidth")
{
    std::mt19937_64 g(30);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(60);
    for (auto& v : x) v = u(g);

    const CrossValidation cv;
    const auto grid = cv_candidates(x, cv);
    const PairDistanceHistogram hist(x, cv.bins);
    const double h = cv_bandwidth(x, cv);
    REQUIRE(std::find(grid.begin(), grid.end(), h) != grid.end());
    for (double c : grid) CHECK(hist.lscv(h) <= hist.lscv(c));

    // Binned score against the exact pairwise LSCV criterion.
    auto exact = [&](double hh) {
        const double p = x.size();
        double s4 = 0.0, s2 = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            for (std::size_t j = 0; j < x.size(); ++j) {
                const double d = (x[i] - x[j]) / hh;
                s4 += std::exp(-0.25 * d * d) / (2.0 * std::sqrt(M_PI));
                if (i != j) s2 += std::exp(-0.5 * d * d) / std::sqrt(2.0 * M_PI);
            }
        return s4 / (p * p * hh) - 2.0 * s2 / (p * (p - 1.0) * hh);
    };
    for (double c : {grid[10], grid[20], grid[30]}) CHECK_THAT(hist.lscv(c), WithinRel(exact(c), 1e-3));

    CHECK_THROWS_AS(cv_bandwidth(std::vector<double>{1.0, 1.0}), DegenerateSample);
    CHECK(select_bandwidth(x, BandwidthRule{Silverman{}}) == silverman_bandwidth(x));
    CHECK(select_bandwidth(x, BandwidthRule{CrossValidation{}}) == h);
}
