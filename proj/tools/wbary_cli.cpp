// wbary: command-line front end for the barycenter library.
//
// Exit codes: 0 success, 2 input error, 3 numerical failure.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wbary/wbary.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_input = 2;
constexpr int exit_numeric = 3;

using wbary::io::format_double;

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(item);
    return out;
}

double parse_real(const std::string& s, const std::string& what)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw wbary::DomainError(what + ": '" + s + "' is not a finite real number");
}

std::vector<std::size_t> parse_sizes(const std::string& s, const std::string& what)
{
    std::vector<std::size_t> out;
    for (const auto& item : split(s, ',')) {
        const double v = parse_real(item, what);
        if (v < 1.0 || v != std::floor(v)) throw wbary::DomainError(what + ": '" + item + "' is not a positive integer");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw wbary::DomainError(what + ": empty list");
    return out;
}

// uniform[:lo,hi] | gaussian[:mean,sd] | exponential[:rate]
wbary::AnalyticDistribution parse_distribution(const std::string& s)
{
    const auto colon = s.find(':');
    const std::string name = s.substr(0, colon);
    std::vector<double> args;
    if (colon != std::string::npos)
        for (const auto& a : split(s.substr(colon + 1), ',')) args.push_back(parse_real(a, "distribution parameter"));
    auto want = [&](std::size_t k) {
        if (!args.empty() && args.size() != k)
            throw wbary::DomainError("distribution '" + s + "' takes " + std::to_string(k) + " parameter(s)");
    };
    if (name == "uniform") {
        want(2);
        return args.empty() ? wbary::AnalyticDistribution::uniform(0.0, 1.0)
                            : wbary::AnalyticDistribution::uniform(args[0], args[1]);
    }
    if (name == "gaussian") {
        want(2);
        return args.empty() ? wbary::AnalyticDistribution::gaussian(0.0, 1.0)
                            : wbary::AnalyticDistribution::gaussian(args[0], args[1]);
    }
    if (name == "exponential") {
        want(1);
        return wbary::AnalyticDistribution::exponential(args.empty() ? 1.0 : args[0]);
    }
    throw wbary::UnsupportedDistribution("unsupported distribution '" + s +
                                         "' (expected uniform, gaussian or exponential)");
}

wbary::BandwidthSpec parse_bandwidth(const std::string& s)
{
    if (s == "silverman") return wbary::BandwidthRule{wbary::Silverman{}};
    if (s == "cv") return wbary::BandwidthRule{wbary::CrossValidation{}};
    if (s.rfind("fixed:", 0) == 0) {
        const double h = parse_real(s.substr(6), "bandwidth");
        if (!(h > 0.0)) throw wbary::DomainError("fixed bandwidth must be positive");
        return h;
    }
    throw wbary::DomainError("bandwidth must be silverman, cv or fixed:<h>, got '" + s + "'");
}

wbary::EstimatorKindId parse_estimator(const std::string& s)
{
    if (s == "nonsmoothed") return wbary::EstimatorKindId::nonsmoothed;
    if (s == "smoothed") return wbary::EstimatorKindId::smoothed;
    if (s == "parametric") return wbary::EstimatorKindId::parametric;
    throw wbary::DomainError("estimator must be nonsmoothed, smoothed or parametric, got '" + s + "'");
}

wbary::KernelMode parse_kernel(const std::string& s)
{
    if (s == "boundary-gaussian") return wbary::KernelMode::boundary;
    if (s == "gaussian") return wbary::KernelMode::plain;
    throw wbary::DomainError("kernel must be boundary-gaussian or gaussian, got '" + s + "'");
}

void require_finite(double v, const std::string& what)
{
    if (!std::isfinite(v)) throw wbary::PrecisionError(what + " is not finite");
}

// Writes to the named file, or to stdout when the name is empty.
template <class Body>
void emit(const std::string& path, Body body)
{
    if (path.empty()) {
        body(std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw wbary::DomainError("cannot open '" + path + "' for writing");
    body(out);
    out.close();
    if (!out) throw wbary::DomainError("failed writing '" + path + "'");
}

struct Options {
    // distance
    std::string file_a, file_b;
    // barycenter / simulate
    std::string dataset;
    std::string estimator = "nonsmoothed";
    std::string kernel = "boundary-gaussian";
    std::string bandwidth = "cv";
    std::string reference;
    std::size_t grid_size = 4096;
    std::string out;
    // risk-exact
    std::string distribution = "uniform";
    std::size_t n = 1;
    std::string p;
    double V = 0.0;
    std::optional<double> c, c2, c_psi;
    std::string h;
    // simulate
    std::string model;
    std::string n_list;
    std::size_t M = 100;
    std::optional<std::uint64_t> seed;
    std::string format = "csv";
    bool grid = false;
    bool ratio = false;
    std::size_t threads = 0;
};

int cmd_distance(const Options& o)
{
    const auto a = wbary::io::read_quantile_file(o.file_a);
    const auto b = wbary::io::read_quantile_file(o.file_b);
    wbary::W2Options w;
    w.grid_size = o.grid_size;
    const auto r = wbary::wasserstein2_squared_detailed(a, b, w);
    require_finite(r.value, "distance");
    std::cout << "d_W2 " << format_double(r.value) << "\n";
    std::cout << "method " << wbary::to_string(r.method) << "\n";
    return exit_ok;
}

int cmd_barycenter(const Options& o, const CLI::App& sub)
{
    const auto kind = parse_estimator(o.estimator);
    if (kind != wbary::EstimatorKindId::smoothed && (sub.count("--kernel") || sub.count("--bandwidth")))
        throw wbary::DomainError("--kernel and --bandwidth apply only to the smoothed estimator");
    if (kind != wbary::EstimatorKindId::parametric && sub.count("--reference"))
        throw wbary::DomainError("--reference applies only to the parametric estimator");

    auto units = wbary::io::read_dataset(o.dataset);
    std::optional<wbary::BarycenterEstimate> est;
    switch (kind) {
    case wbary::EstimatorKindId::nonsmoothed:
        est = wbary::nonsmoothed_barycenter(wbary::GroupedDataset(std::move(units)));
        break;
    case wbary::EstimatorKindId::smoothed: {
        wbary::SmoothingOptions s;
        s.mode = parse_kernel(o.kernel);
        s.bandwidth = parse_bandwidth(o.bandwidth);
        s.cache.grid_size = o.grid_size;
        std::optional<wbary::GroupedDataset::Support> support;
        if (s.mode == wbary::KernelMode::boundary) support = wbary::GroupedDataset::Support{0.0, 1.0};
        est = wbary::smoothed_barycenter(wbary::GroupedDataset(std::move(units), support), s);
        break;
    }
    case wbary::EstimatorKindId::parametric:
        if (o.reference.empty()) throw wbary::DomainError("the parametric estimator needs --reference");
        est = wbary::parametric_location_estimate(wbary::GroupedDataset(std::move(units)),
                                                  parse_distribution(o.reference));
        break;
    }

    emit(o.out, [&](std::ostream& out) { wbary::io::write_barycenter(out, *est, o.grid_size); });
    // Re-read the written quantile; construction rejects non-monotone values.
    if (!o.out.empty()) wbary::io::read_quantile_file(o.out);
    return exit_ok;
}

int cmd_risk_exact(const Options& o)
{
    const auto dist = parse_distribution(o.distribution);
    wbary::RiskFormulaInput in;
    in.n = o.n;
    in.p = parse_sizes(o.p, "--p");
    in.V = o.V;
    in.nu0 = dist;
    in.validate();
    const auto sizes = in.unit_sizes();
    const bool equal = std::all_of(sizes.begin(), sizes.end(), [&](auto v) { return v == sizes.front(); });

    if (equal) {
        const auto r = wbary::exact_risk_equal_p(in);
        require_finite(r.value, "exact risk");
        std::cout << "exact_risk " << format_double(r.value) << "\n";
        std::cout << "moments " << (r.method == wbary::MomentMethod::closed_form ? "closed_form" : "quadrature") << "\n";
        std::cout << "variance_term " << format_double(r.variance_term) << "\n";
        std::cout << "order_stat_term " << format_double(r.order_stat_term) << "\n";
        std::cout << "empirical_term " << format_double(r.empirical_term) << "\n";
    } else {
        std::cout << "exact_risk unavailable (unequal sample sizes)\n";
    }

    std::vector<wbary::BoundCase> cases;
    if (equal) cases.push_back(wbary::BoundCase::generic_j2);
    if (equal && dist.is<wbary::OneSidedExponential>()) cases.push_back(wbary::BoundCase::exponential);
    if (equal && dist.is<wbary::Gaussian>() && sizes.front() >= 3) cases.push_back(wbary::BoundCase::gaussian);
    cases.push_back(wbary::BoundCase::general_p);
    wbary::BoundConstants k;
    k.c = o.c;
    k.c2 = o.c2;
    k.c_psi = o.c_psi;
    if (!o.h.empty()) {
        for (const auto& item : split(o.h, ',')) k.bandwidths.push_back(parse_real(item, "--bandwidths"));
        cases.push_back(wbary::BoundCase::smoothed);
    }
    for (const auto& b : wbary::risk_upper_bounds(in, cases, k)) {
        std::cout << "bound " << wbary::to_string(b.bound_case) << " " << b.metric << " ";
        if (b.infinite) {
            std::cout << "inf status=infinite";
        } else if (b.symbolic()) {
            std::cout << format_double(b.known_part) << " + " << *b.constant_name
                      << (b.constant_power == 1.0 ? "" : "^(1/2)") << " * " << format_double(b.rate_factor)
                      << " status=symbolic";
        } else {
            std::cout << format_double(*b.value()) << " status=" << (b.constant_name ? "numeric" : "exact");
        }
        std::cout << " form=\"" << b.expression << "\"\n";
    }
    return exit_ok;
}

int cmd_simulate(const Options& o, const CLI::App& sub)
{
    if (!o.seed) throw wbary::DomainError("--seed is required");
    if (o.format != "csv" && o.format != "json") throw wbary::DomainError("--format must be csv or json");
    if (o.ratio && sub.count("--estimator"))
        throw wbary::DomainError("--ratio runs both nonsmoothed and smoothed estimators; drop --estimator");
    const auto model = wbary::model_from_id(o.model);

    std::vector<wbary::EstimatorConfig> estimators;
    auto config = [&](wbary::EstimatorKindId kind) {
        wbary::EstimatorConfig e;
        e.kind = kind;
        e.smoothing.mode = parse_kernel(o.kernel);
        e.smoothing.bandwidth = parse_bandwidth(o.bandwidth);
        e.smoothing.cache.grid_size = o.grid_size;
        e.allow_plain_kernel = e.smoothing.mode == wbary::KernelMode::plain;
        return e;
    };
    if (o.ratio) {
        estimators = {config(wbary::EstimatorKindId::nonsmoothed), config(wbary::EstimatorKindId::smoothed)};
    } else {
        const auto kind = parse_estimator(o.estimator);
        if (kind != wbary::EstimatorKindId::smoothed && (sub.count("--kernel") || sub.count("--bandwidth")))
            throw wbary::DomainError("--kernel and --bandwidth apply only to the smoothed estimator");
        estimators = {config(kind)};
    }

    wbary::HarnessOptions h;
    h.threads = o.threads;
    h.w2.grid_size = o.grid_size;

    const auto n_values = parse_sizes(o.n_list, "--n");
    const auto p_values = parse_sizes(o.p, "--p");
    wbary::RiskGrid g;
    if (o.grid || o.ratio) {
        g = wbary::risk_grid(model, estimators, n_values, p_values, o.M, *o.seed, h);
    } else {
        if (n_values.size() != 1) throw wbary::DomainError("--n takes a single value without --grid");
        std::vector<std::size_t> sizes = p_values;
        if (sizes.size() == 1) sizes.assign(n_values.front(), p_values.front());
        if (sizes.size() != n_values.front())
            throw wbary::DomainError("--p must be one size or one size per unit (" + std::to_string(n_values.front()) +
                                     ")");
        g.n_values = n_values;
        g.p_values = {sizes.front()};
        g.reports.push_back(wbary::monte_carlo_risk(model, estimators.front(), sizes, o.M, *o.seed, h));
    }
    for (const auto& r : g.reports) require_finite(r.risk, "risk");

    emit(o.out, [&](std::ostream& out) {
        if (o.format == "json") {
            out << wbary::io::reports_to_json(g.reports, g.log_ratio).dump(2) << "\n";
        } else if (o.ratio) {
            wbary::io::write_log_ratio_csv(out, model.id(), o.M, *o.seed, g.log_ratio);
        } else {
            wbary::io::write_reports_csv(out, g.reports);
        }
    });
    if (!o.out.empty()) {
        for (const auto& r : g.reports)
            std::cout << r.estimator << " n=" << r.n << " p=" << r.p_label() << " risk=" << format_double(r.risk)
                      << " se=" << format_double(r.se) << "\n";
    }
    double wall = 0.0;
    for (std::size_t k = 0; k < g.reports.size(); k += estimators.size()) wall += g.reports[k].wall_seconds;
    std::cerr << "simulate: " << g.reports.size() << " report(s), M=" << o.M << ", " << wall << " s\n";
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Wasserstein barycenters of grouped one-dimensional samples"};
    app.require_subcommand(1);
    Options o;

    auto* distance = app.add_subcommand("distance", "Squared 2-Wasserstein distance between two measures");
    distance->add_option("a", o.file_a, "First sample or quantile file")->required();
    distance->add_option("b", o.file_b, "Second sample or quantile file")->required();
    distance->add_option("--grid-size", o.grid_size, "Midpoint cells for quadrature")->check(CLI::PositiveNumber);

    auto* bary = app.add_subcommand("barycenter", "Estimate the barycenter of a dataset");
    bary->add_option("dataset", o.dataset, "Dataset file, one unit per line")->required();
    bary->add_option("--estimator", o.estimator, "nonsmoothed | smoothed | parametric");
    bary->add_option("--kernel", o.kernel, "boundary-gaussian | gaussian");
    bary->add_option("--bandwidth", o.bandwidth, "silverman | cv | fixed:<h>");
    bary->add_option("--reference", o.reference, "Reference law for the parametric estimator");
    bary->add_option("--grid-size", o.grid_size, "Quantile grid size")->check(CLI::PositiveNumber);
    bary->add_option("--out", o.out, "Output file (default stdout)");

    auto* risk = app.add_subcommand("risk-exact", "Exact risk and upper bounds for the non-smoothed barycenter");
    risk->add_option("--distribution", o.distribution, "uniform[:lo,hi] | gaussian[:mean,sd] | exponential[:rate]");
    risk->add_option("--n", o.n, "Number of units")->required()->check(CLI::PositiveNumber);
    risk->add_option("--p", o.p, "Sample size, or one size per unit")->required();
    risk->add_option("--V", o.V, "Integrated quantile variance")->check(CLI::NonNegativeNumber);
    risk->add_option("--c", o.c, "Constant of the exponential rate");
    risk->add_option("--c2", o.c2, "Constant of the Gaussian rate");
    risk->add_option("--c-psi", o.c_psi, "Kernel smoothing constant");
    risk->add_option("--bandwidths", o.h, "Bandwidth, or one per unit, for the smoothed bound");

    auto* sim = app.add_subcommand("simulate", "Monte Carlo risk of an estimator");
    sim->add_option("--model", o.model, "Model id, e.g. figure2 or uniform-shift:0.3")->required();
    sim->add_option("--estimator", o.estimator, "nonsmoothed | smoothed | parametric");
    sim->add_option("--kernel", o.kernel, "boundary-gaussian | gaussian");
    sim->add_option("--bandwidth", o.bandwidth, "silverman | cv | fixed:<h>");
    sim->add_option("--grid-size", o.grid_size, "Quantile grid size")->check(CLI::PositiveNumber);
    sim->add_option("--n", o.n_list, "Number of units (comma list with --grid)")->required();
    sim->add_option("--p", o.p, "Sample size, one per unit, or comma list with --grid")->required();
    sim->add_option("--M", o.M, "Replications")->check(CLI::PositiveNumber);
    sim->add_option("--seed", o.seed, "Master seed")->required();
    sim->add_option("--out", o.out, "Output file (default stdout)");
    sim->add_option("--format", o.format, "csv | json");
    sim->add_flag("--grid", o.grid, "Sweep every (n, p) pair of the two lists");
    sim->add_flag("--ratio", o.ratio, "Compare nonsmoothed and smoothed on shared datasets");
    sim->add_option("--threads", o.threads, "Worker threads (0: all cores)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_input;
    }

    try {
        if (distance->parsed()) return cmd_distance(o);
        if (bary->parsed()) return cmd_barycenter(o, *bary);
        if (risk->parsed()) return cmd_risk_exact(o);
        if (sim->parsed()) return cmd_simulate(o, *sim);
    } catch (const wbary::PrecisionError& e) {
        std::cerr << "wbary: numerical failure: " << e.what() << "\n";
        return exit_numeric;
    } catch (const wbary::Error& e) {
        std::cerr << "wbary: " << e.what() << "\n";
        return exit_input;
    } catch (const std::exception& e) {
        std::cerr << "wbary: " << e.what() << "\n";
        return exit_numeric;
    }
    return exit_input;
}
