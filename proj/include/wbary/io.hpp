#pragma once

// Text formats: datasets, quantile files, barycenter output, and risk tables.
//
// Data files hold whitespace- or comma-separated reals, one row per line.
// '#' starts a comment; a comment of the form "# key: value" is a directive.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "wbary/barycenter.hpp"
#include "wbary/errors.hpp"
#include "wbary/measures.hpp"
#include "wbary/numeric.hpp"
#include "wbary/simulation.hpp"

namespace wbary::io {

inline constexpr const char* report_schema = "wbary.risk-report/1";

// 17 significant digits: every double round-trips exactly.
inline std::string format_double(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

struct TextTable {
    std::map<std::string, std::string> directives;
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> lines;  // source line of each row
};

namespace detail {

inline std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

inline TextTable read_table(std::istream& in, const std::string& source)
{
    TextTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view body = line;
        if (const auto hash = body.find('#'); hash != std::string_view::npos) {
            const auto comment = detail::trim(body.substr(hash + 1));
            if (const auto colon = comment.find(':'); colon != std::string_view::npos) {
                const auto key = detail::trim(comment.substr(0, colon));
                if (!key.empty() && key.find(' ') == std::string_view::npos)
                    t.directives.emplace(std::string(key), std::string(detail::trim(comment.substr(colon + 1))));
            }
            body = body.substr(0, hash);
        }
        std::vector<double> row;
        std::size_t pos = 0;
        while (pos < body.size()) {
            while (pos < body.size() && (body[pos] == ' ' || body[pos] == '\t' || body[pos] == ',' || body[pos] == '\r'))
                ++pos;
            if (pos >= body.size()) break;
            auto end = pos;
            while (end < body.size() && body[end] != ' ' && body[end] != '\t' && body[end] != ',' && body[end] != '\r')
                ++end;
            const auto token = body.substr(pos, end - pos);
            // from_chars rejects an explicit plus sign
            const auto digits = token.size() > 1 && token[0] == '+' && token[1] != '-' ? token.substr(1) : token;
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
            if (ec != std::errc() || ptr != digits.data() + digits.size())
                throw ParseError(source, lineno, "'" + std::string(token) + "' is not a real number");
            if (!std::isfinite(v)) throw ParseError(source, lineno, "non-finite value '" + std::string(token) + "'");
            row.push_back(v);
            pos = end;
        }
        if (!row.empty()) {
            t.rows.push_back(std::move(row));
            t.lines.push_back(lineno);
        }
    }
    return t;
}

inline TextTable read_table_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "cannot open file");
    return read_table(in, path);
}

// One unit per row; ragged rows allowed.
inline std::vector<std::vector<double>> read_dataset(const std::string& path)
{
    auto t = read_table_file(path);
    if (t.rows.empty()) throw ParseError(path, 0, "dataset has no units");
    return std::move(t.rows);
}

// A measure given either as raw samples (default, all numbers pooled), as
// "# format: step" rows (right end of piece, value), or as "# format: grid"
// rows (alpha, value).
inline QuantileFunction read_quantile_file(const std::string& path)
{
    const auto t = read_table_file(path);
    const auto it = t.directives.find("format");
    const std::string format = it == t.directives.end() ? "atoms" : it->second;
    if (format == "atoms") {
        std::vector<double> xs;
        for (const auto& r : t.rows) xs.insert(xs.end(), r.begin(), r.end());
        if (xs.empty()) throw ParseError(path, 0, "no samples");
        return empirical_to_quantile(EmpiricalMeasure(std::move(xs)));
    }
    if (format != "step" && format != "grid") throw ParseError(path, 0, "unknown format '" + format + "'");
    std::vector<double> alphas, values;
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
        if (t.rows[k].size() != 2) throw ParseError(path, t.lines[k], "expected two columns (alpha, value)");
        alphas.push_back(t.rows[k][0]);
        values.push_back(t.rows[k][1]);
    }
    if (values.empty()) throw ParseError(path, 0, "no rows");
    try {
        if (format == "grid") return QuantileFunction::grid(std::move(alphas), std::move(values));
        if (alphas.back() != 1.0) throw ParseError(path, t.lines.back(), "last step piece must end at alpha = 1");
        alphas.pop_back();
        return QuantileFunction::step(std::move(alphas), std::move(values));
    } catch (const InvariantError& e) {
        throw InvariantError(path + ": " + e.what());
    }
}

// Atoms for equal-size non-smoothed estimates, step pieces for ragged ones,
// and an (alpha, value) grid otherwise.
inline void write_barycenter(std::ostream& out, const BarycenterEstimate& est, std::size_t grid_size = 4096)
{
    out << "# wbary barycenter\n";
    out << "# estimator: " << est.kind_name() << "\n";
    out << "# n: " << est.provenance.n << "\n";
    if (const auto* s = std::get_if<SmoothedKind>(&est.kind)) {
        out << "# kernel: " << (s->mode == KernelMode::boundary ? "boundary-gaussian" : "gaussian") << "\n";
        out << "# bandwidths:";
        for (double h : s->bandwidths) out << ' ' << format_double(h);
        out << "\n";
    }
    if (const auto* pl = std::get_if<ParametricLocationKind>(&est.kind)) {
        out << "# reference: " << pl->reference << "\n";
        out << "# shift: " << format_double(pl->shift) << "\n";
    }
    const auto& q = est.quantile;
    if (est.atoms) {
        out << "# format: atoms\n";
        for (double x : est.atoms->atoms()) out << format_double(x) << "\n";
    } else if (q.is_step()) {
        out << "# format: step\n";
        const auto& s = q.as_step();
        for (std::size_t k = 0; k < s.values.size(); ++k)
            out << format_double(k < s.breaks.size() ? s.breaks[k] : 1.0) << ' ' << format_double(s.values[k]) << "\n";
    } else {
        out << "# format: grid\n";
        if (q.is_grid()) {
            const auto& g = q.as_grid();
            for (std::size_t k = 0; k < g.alphas.size(); ++k)
                out << format_double(g.alphas[k]) << ' ' << format_double(g.values[k]) << "\n";
        } else {
            for (double a : numeric::midpoint_grid(grid_size)) out << format_double(a) << ' ' << format_double(q(a)) << "\n";
        }
    }
}

inline void write_reports_csv(std::ostream& out, const std::vector<RiskReport>& reports)
{
    out << "model,estimator,n,p,M,risk,se,seed\n";
    for (const auto& r : reports)
        out << r.model << ',' << r.estimator << ',' << r.n << ',' << r.p_label() << ',' << r.M << ','
            << format_double(r.risk) << ',' << format_double(r.se) << ',' << r.seed << "\n";
}

inline void write_log_ratio_csv(std::ostream& out, const std::string& model, std::size_t M, std::uint64_t seed,
                                const std::vector<LogRatioCell>& cells)
{
    out << "model,n,p,M,risk_nonsmoothed,risk_smoothed,log_ratio,seed\n";
    for (const auto& c : cells)
        out << model << ',' << c.n << ',' << c.p << ',' << M << ',' << format_double(c.risk_nonsmoothed) << ','
            << format_double(c.risk_smoothed) << ',' << format_double(c.log_ratio) << ',' << seed << "\n";
}

// Numbers are written in shortest round-trip form, which recovers each double exactly.
inline nlohmann::json reports_to_json(const std::vector<RiskReport>& reports, const std::vector<LogRatioCell>& cells = {})
{
    nlohmann::json doc;
    doc["schema"] = report_schema;
    doc["reports"] = nlohmann::json::array();
    for (const auto& r : reports) {
        doc["reports"].push_back({{"model", r.model},
                                  {"estimator", r.estimator},
                                  {"n", r.n},
                                  {"p", r.p},
                                  {"M", r.M},
                                  {"risk", r.risk},
                                  {"se", r.se},
                                  {"seed", r.seed},
                                  {"grid_size", r.grid_size}});
    }
    if (!cells.empty()) {
        doc["log_ratio"] = nlohmann::json::array();
        for (const auto& c : cells)
            doc["log_ratio"].push_back({{"n", c.n},
                                        {"p", c.p},
                                        {"risk_nonsmoothed", c.risk_nonsmoothed},
                                        {"risk_smoothed", c.risk_smoothed},
                                        {"log_ratio", c.log_ratio}});
    }
    return doc;
}

}  // namespace wbary::io
