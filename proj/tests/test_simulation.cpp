#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "wbary/simulation.hpp"
#include "wbary/theory.hpp"

using namespace wbary;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

EstimatorConfig nonsmoothed() { return {}; }

EstimatorConfig smoothed_boundary(BandwidthSpec h)
{
    EstimatorConfig e;
    e.kind = EstimatorKindId::smoothed;
    e.smoothing.bandwidth = std::move(h);
    return e;
}

EstimatorConfig parametric()
{
    EstimatorConfig e;
    e.kind = EstimatorKindId::parametric;
    return e;
}

HarnessOptions threads(std::size_t t)
{
    HarnessOptions o;
    o.threads = t;
    return o;
}

}  // namespace

TEST_CASE("seed derivation")
{
    CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);  // reference value of the splitmix64 finalizer
    std::set<std::uint64_t> seen;
    for (std::uint64_t n = 0; n < 10; ++n)
        for (std::uint64_t p = 0; p < 10; ++p)
            for (std::uint64_t r = 0; r < 100; ++r) seen.insert(derive_seed(7, n, p, r));
    CHECK(seen.size() == 10000);
    CHECK(derive_seed(7, 1, 2, 3) == derive_seed(7, 1, 2, 3));
    CHECK(derive_seed(7, 1, 2, 3) != derive_seed(8, 1, 2, 3));

    Rng a(5), b(5);
    for (int i = 0; i < 1000; ++i) {
        const double x = a.open01();
        CHECK(x == b.open01());
        CHECK(x > 0.0);
        CHECK(x < 1.0);
    }
}

TEST_CASE("model catalogue")
{
    const auto f = model_from_id("figure2");
    CHECK(f.support() == std::optional<std::pair<double, double>>{{-7.0, 7.0}});
    CHECK(f.nu0().is<Gaussian>());
    CHECK(f.nu0().mean() == 0.0);
    CHECK_THAT(f.nu0().variance(), WithinAbs(1.0, 1e-15));
    // Var(b) + Var(a) E[Z^2] with b ~ U[-2,2], a ~ U[0.8,1.2]
    CHECK_THAT(f.quantile_variance(), WithinAbs(16.0 / 12.0 + 0.16 / 12.0, 1e-15));
    CHECK_FALSE(model_from_id("figure2-untruncated").support());

    const auto u = model_from_id("uniform-shift:0.3");
    CHECK_THAT(u.quantile_variance(), WithinAbs(0.03, 1e-15));
    CHECK(u.support() == std::optional<std::pair<double, double>>{{-0.3, 1.3}});
    CHECK(model_from_id("deterministic-uniform").support() == std::optional<std::pair<double, double>>{{0.0, 1.0}});
    CHECK_FALSE(model_from_id("gaussian-shift:1").support());
    CHECK(model_from_id("exponential-shift:0.5").nu0().is<OneSidedExponential>());

    CHECK_THROWS_AS(model_from_id("cauchy"), DomainError);
    CHECK_THROWS_AS(model_from_id("uniform-shift:abc"), DomainError);
    CHECK_THROWS_AS(model_from_id("uniform-shift:-1"), DomainError);
    CHECK_THROWS_AS(MeasureModel("bad", LocationScaleGaussian{{0.0, 1.0}, {0.0, 0.0}, 0.0, 1.0, std::nullopt}), ModelError);
}

TEST_CASE("datasets are reproducible")
{
    const auto m = model_from_id("deterministic-uniform");
    const auto a = draw_dataset(m, {3, 3}, 11);
    const auto b = draw_dataset(m, {3, 3}, 11);
    CHECK(a.units() == b.units());
    CHECK(a.units() != draw_dataset(m, {3, 3}, 12).units());
    CHECK(a.support() == std::optional<std::pair<double, double>>{{0.0, 1.0}});

    const auto r = draw_dataset(model_from_id("figure2"), {4, 1, 9}, 3);
    CHECK(r.sizes() == std::vector<std::size_t>{4, 1, 9});
    CHECK_THROWS_AS(draw_dataset(m, {3, 0}, 1), DomainError);
}

TEST_CASE("a zero-width shift law gives identical unit laws")
{
    const auto d = draw_dataset(model_from_id("uniform-shift:0"), 50, 200, 13);
    // every unit is U(0,1): the pooled empirical cdf is close to the identity
    std::vector<double> pooled;
    for (const auto& u : d.units()) {
        for (double x : u) {
            CHECK(x > 0.0);
            CHECK(x < 1.0);
        }
        pooled.insert(pooled.end(), u.begin(), u.end());
    }
    std::sort(pooled.begin(), pooled.end());
    double ks = 0.0;
    for (std::size_t k = 0; k < pooled.size(); ++k)
        ks = std::max(ks, std::abs(pooled[k] - (k + 0.5) / pooled.size()));
    CHECK(ks < 1.63 / std::sqrt(double(pooled.size())));  // 1% Kolmogorov level
}

TEST_CASE("unit means follow the location law")
{
    const auto d = draw_dataset(model_from_id("figure2"), 100, 100, 17);
    std::vector<double> means;
    for (const auto& u : d.units()) {
        for (double x : u) {
            CHECK(x >= -7.0);
            CHECK(x <= 7.0);
        }
        means.push_back(oracle::mean_se(u).mean);
    }
    std::sort(means.begin(), means.end());
    // Unit mean = b_i + O(1/sqrt(p)); compare with the U(-2,2) cdf.
    double ks = 0.0;
    for (std::size_t k = 0; k < means.size(); ++k) {
        const double F = std::clamp((means[k] + 2.0) / 4.0, 0.0, 1.0);
        ks = std::max({ks, std::abs(F - double(k) / 100.0), std::abs(F - double(k + 1) / 100.0)});
    }
    CHECK(ks < 0.2);
    CHECK(means.front() > -2.5);
    CHECK(means.back() < 2.5);
}

TEST_CASE("empty truncation windows are reported")
{
    LocationScaleGaussian far;
    far.truncation = std::pair{100.0, 101.0};
    const MeasureModel m("far", far);
    Rng rng(1);
    CHECK_THROWS_AS(m.draw_unit(rng), ModelError);
}

TEST_CASE("Monte Carlo risk for the deterministic uniform model")
{
    const auto r = monte_carlo_risk(model_from_id("deterministic-uniform"), nonsmoothed(), 10, 10, 50000, 21);
    CHECK(std::abs(r.risk - 1.0 / 330.0) < 4.0 * r.se);
    CHECK(r.M == 50000);
    CHECK(r.model == "deterministic-uniform");
    CHECK(r.estimator == "nonsmoothed");
    CHECK(r.p_label() == "10");
}

TEST_CASE("Monte Carlo risk for a shifted uniform model")
{
    const double delta = 0.3;
    const std::size_t n = 8, p = 12;
    const double expected = delta * delta / 3.0 / n + (1.0 / 6.0) * (1.0 / (n * (p + 1.0)) + 1.0 / (p * (p + 1.0)));
    const auto model = model_from_id("uniform-shift:0.3");
    const auto r = monte_carlo_risk(model, nonsmoothed(), n, p, 20000, 22);
    CHECK(std::abs(r.risk - expected) < 4.0 * r.se);

    RiskFormulaInput in;
    in.n = n;
    in.p = {p};
    in.V = model.quantile_variance();
    in.nu0 = AnalyticDistribution::uniform(0.0, 1.0);
    CHECK_THAT(exact_risk_equal_p(in).value, WithinRel(expected, 1e-14));
}

TEST_CASE("Monte Carlo risk of the parametric location estimate")
{
    // gaussian-shift:1: sigma0^2 = 1, gamma^2 = Var(U[-1,1]) = 1/3
    const std::size_t n = 6, p = 5;
    const auto r = monte_carlo_risk(model_from_id("gaussian-shift:1"), parametric(), n, p, 20000, 23);
    CHECK(std::abs(r.risk - parametric_location_risk(1.0, 1.0 / 3.0, n, p)) < 4.0 * r.se);
}

TEST_CASE("reports are bit-identical across runs and thread counts")
{
    const auto model = model_from_id("figure2");
    const auto a = monte_carlo_risk(model, nonsmoothed(), 7, 9, 64, 99, threads(1));
    const auto b = monte_carlo_risk(model, nonsmoothed(), 7, 9, 64, 99, threads(4));
    const auto c = monte_carlo_risk(model, nonsmoothed(), 7, 9, 64, 99, threads(3));
    CHECK(a.risk == b.risk);
    CHECK(a.se == b.se);
    CHECK(a.risk == c.risk);

    const auto u = model_from_id("deterministic-uniform");
    const auto s1 = monte_carlo_risk(u, smoothed_boundary(BandwidthRule{CrossValidation{}}), 4, 12, 16, 5, threads(1));
    const auto s2 = monte_carlo_risk(u, smoothed_boundary(BandwidthRule{CrossValidation{}}), 4, 12, 16, 5, threads(5));
    CHECK(s1.risk == s2.risk);
}

TEST_CASE("standard error scales like M^(-1/2)")
{
    // The SE of a single cell is itself noisy (losses are heavy tailed), so the ratio is averaged over seeds.
    const auto model = model_from_id("figure2");
    double ratio = 0.0;
    for (std::uint64_t s = 100; s < 108; ++s) {
        const auto small = monte_carlo_risk(model, nonsmoothed(), 10, 20, 400, s);
        const auto large = monte_carlo_risk(model, nonsmoothed(), 10, 20, 1600, s);
        ratio += small.se / large.se / 8.0;
    }
    CHECK_THAT(ratio, WithinAbs(2.0, 0.4));
}

TEST_CASE("estimator and model compatibility")
{
    const auto g = model_from_id("figure2");
    CHECK_THROWS_AS(monte_carlo_risk(g, smoothed_boundary(0.1), 2, 5, 4, 1), DomainError);
    auto plain = smoothed_boundary(0.3);
    plain.smoothing.mode = KernelMode::plain;
    CHECK_THROWS_AS(monte_carlo_risk(g, plain, 2, 5, 4, 1), DomainError);
    plain.allow_plain_kernel = true;
    CHECK(monte_carlo_risk(g, plain, 2, 5, 4, 1).risk > 0.0);
    CHECK_THROWS_AS(monte_carlo_risk(g, nonsmoothed(), 2, 5, 0, 1), DomainError);
}

TEST_CASE("errors inside replications surface deterministically")
{
    try {
        detail::parallel_for(20, 4, [](std::size_t r) {
            if (r == 7 || r == 13) throw ModelError("replication " + std::to_string(r));
        });
        FAIL("no exception");
    } catch (const ModelError& e) {
        CHECK(std::string(e.what()).find("replication 7") != std::string::npos);
    }
}

TEST_CASE("finite-n barycenter of exact unit measures approaches nu0")
{
    const auto model = model_from_id("figure2-untruncated");
    const auto truth = QuantileFunction::analytic(model.nu0());
    auto median_distance = [&](std::size_t n) {
        std::vector<double> d;
        for (std::uint64_t s = 0; s < 20; ++s) d.push_back(wasserstein2_squared(population_barycenter_surrogate(model, n, s), truth));
        std::sort(d.begin(), d.end());
        return 0.5 * (d[9] + d[10]);
    };
    const double d10 = median_distance(10), d40 = median_distance(40), d160 = median_distance(160);
    CHECK(d40 < d10);
    CHECK(d160 < d40);
    // leading behaviour V/n with V = 4/3 + 0.16/12
    CHECK(d160 < 5.0 * model.quantile_variance() / 160.0);
}

TEST_CASE("risk is stable under refinement of the quantile grid")
{
    const auto u = model_from_id("deterministic-uniform");
    auto coarse = smoothed_boundary(BandwidthRule{Silverman{}});
    auto fine = coarse;
    fine.smoothing.cache.grid_size = 8192;
    HarnessOptions o_fine;
    o_fine.w2.grid_size = 8192;
    const auto a = monte_carlo_risk(u, coarse, 5, 20, 40, 41);
    const auto b = monte_carlo_risk(u, fine, 5, 20, 40, 41, o_fine);
    CHECK(std::abs(a.risk - b.risk) < 0.01 * b.risk);

    // non-smoothed risk is computed exactly per piece; the grid setting must not matter
    const auto f = model_from_id("figure2");
    const auto c = monte_carlo_risk(f, nonsmoothed(), 5, 20, 40, 41);
    const auto d = monte_carlo_risk(f, nonsmoothed(), 5, 20, 40, 41, o_fine);
    CHECK(c.risk == d.risk);
}

TEST_CASE("risk grid over the location-scale model")
{
    const auto model = model_from_id("figure2");
    const std::vector<std::size_t> ns{10, 40, 160}, ps{10, 50, 100};
    const auto g = risk_grid(model, {nonsmoothed()}, ns, ps, 100, 61);
    REQUIRE(g.reports.size() == 9);
    CHECK(g.log_ratio.empty());
    for (std::size_t j = 0; j < ps.size(); ++j)
        for (std::size_t i = 1; i < ns.size(); ++i) CHECK(g.at(i, j, 0, 1).risk < g.at(i - 1, j, 0, 1).risk);

    // log-risk against log-n at p = 100
    const std::vector<std::size_t> ns2{50, 100, 200};
    const auto h = risk_grid(model, {nonsmoothed()}, ns2, {100}, 100, 62);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double x = std::log(double(ns2[i])), y = std::log(h.at(i, 0, 0, 1).risk);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double slope = (3 * sxy - sx * sy) / (3 * sxx - sx * sx);
    CHECK(slope > -1.2);
    CHECK(slope < -0.8);

    CHECK_THROWS_AS(risk_grid(model, {nonsmoothed()}, {}, {10}, 5, 1), DomainError);
}

TEST_CASE("risk grid pairs the two estimators on shared datasets")
{
    const auto u = model_from_id("deterministic-uniform");
    const auto g = risk_grid(u, {nonsmoothed(), smoothed_boundary(0.05)}, {5}, {10, 20}, 30, 71);
    REQUIRE(g.log_ratio.size() == 2);
    for (std::size_t j = 0; j < 2; ++j) {
        const auto& cell = g.log_ratio[j];
        CHECK(cell.risk_nonsmoothed == g.at(0, j, 0, 2).risk);
        CHECK(cell.risk_smoothed == g.at(0, j, 1, 2).risk);
        CHECK_THAT(cell.log_ratio, WithinAbs(std::log(cell.risk_nonsmoothed / cell.risk_smoothed), 1e-15));
    }
    // the non-smoothed column matches a stand-alone run with the same cell seed
    const auto alone = risk_grid(u, {nonsmoothed()}, {5}, {10, 20}, 30, 71);
    CHECK(alone.at(0, 1, 0, 1).risk == g.at(0, 1, 0, 2).risk);
}
