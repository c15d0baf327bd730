/**
 * @file bench.hpp
 * @brief Terminal-time sweeps of the steering schemes and their tabular
 *        output (CSV, Markdown, JSON, log-log data).
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "plate_nc/core.hpp"
#include "plate_nc/expr.hpp"
#include "plate_nc/fdm.hpp"
#include "plate_nc/fem.hpp"

namespace plate_nc::bench {

enum class SchemeKind { fdm, fem };

inline std::string to_string(SchemeKind s) { return s == SchemeKind::fdm ? "fdm" : "fem"; }

inline SchemeKind scheme_from_string(const std::string& s) {
    if (s == "fdm") return SchemeKind::fdm;
    if (s == "fem") return SchemeKind::fem;
    throw ConfigError("unknown scheme '" + s + "' (expected fdm or fem)");
}

/// Initial data (v0, w0). `test-problem` is v0 = 0, w0 = (3/2) sin 2x sin 2y;
/// anything else is "<v0 expr>;<w0 expr>".
struct InitialData {
    std::string spec = "test-problem";
    expr::Fn v0;
    expr::Fn w0;

    static InitialData test_problem() {
        return {"test-problem", [](double, double) { return 0.0; },
                [](double x, double y) { return 1.5 * std::sin(2.0 * x) * std::sin(2.0 * y); }};
    }

    static InitialData parse(const std::string& spec) {
        if (spec == "test-problem") return test_problem();
        const auto sep = spec.find(';');
        if (sep == std::string::npos)
            throw ConfigError("initial data must be 'test-problem' or '<v0 expr>;<w0 expr>'");
        return {spec, expr::parse(spec.substr(0, sep)), expr::parse(spec.substr(sep + 1))};
    }
};

struct SweepConfig {
    SchemeKind scheme = SchemeKind::fdm;
    int n = 32;
    double rho = 2.5;
    double side = M_PI;
    double dt = 0.2;
    std::vector<double> t_list;
    InitialData init = InitialData::test_problem();
    std::string mesh_path;          ///< optional FEM mesh file
    fdm::NormKind fdm_norm = fdm::NormKind::euclidean;
    unsigned jobs = 1;

    /// T values must be positive and consecutive entries must differ by an
    /// exact factor of two (either direction), each a multiple of dt with
    /// at least two steps.
    void validate() const {
        if (t_list.empty()) throw ConfigError("T-list is empty");
        if (!(rho > 0.0) || rho == 2.0) throw ConfigError("rho must be positive and different from 2");
        if (!(side > 0.0)) throw ConfigError("side must be positive");
        if (!(dt > 0.0)) throw ConfigError("dt must be positive");
        if (n < 2) throw ConfigError("n must be at least 2");
        for (double T : t_list) {
            if (!(T > 0.0)) throw ConfigError("T-list entries must be positive");
            const double m = T / dt;
            if (std::abs(m - std::round(m)) > 1e-9 * std::max(1.0, m) || std::round(m) < 2)
                throw ConfigError("T = " + std::to_string(T) + " is not a multiple of dt with >= 2 steps");
        }
        if (t_list.size() > 1) {
            const double q = t_list[1] / t_list[0];
            if (!(std::abs(q - 2.0) < 1e-12 || std::abs(q - 0.5) < 1e-12))
                throw ConfigError("consecutive T values must differ by a factor of 2");
            for (std::size_t k = 1; k < t_list.size(); ++k)
                if (std::abs(t_list[k] / t_list[k - 1] - q) > 1e-12)
                    throw ConfigError("T-list must be sorted with a constant ratio of 2");
        }
    }

    nlohmann::json to_json() const {
        return {{"scheme", to_string(scheme)}, {"n", n},       {"rho", rho},
                {"side", side},                {"dt", dt},     {"t_list", t_list},
                {"init", init.spec},           {"mesh", mesh_path},
                {"fdm_norm", fdm_norm == fdm::NormKind::euclidean ? "euclidean" : "weighted"}};
    }
};

struct SweepRow {
    double T = 0.0;
    double energy = 0.0;
    std::optional<double> energy_rate;
    double unorm = 0.0;
    std::optional<double> unorm_rate;

    bool operator==(const SweepRow&) const = default;
};

struct SweepTable {
    std::vector<SweepRow> rows;
    bool operator==(const SweepTable&) const = default;
};

/// Fills in rates between consecutive rows where both values are positive.
inline void fill_rates(SweepTable& table) {
    for (std::size_t k = 1; k < table.rows.size(); ++k) {
        auto& prev = table.rows[k - 1];
        auto& row = table.rows[k];
        if (prev.energy > 0.0 && row.energy > 0.0)
            row.energy_rate = rate_sequence({prev.energy, row.energy}).front();
        if (prev.unorm > 0.0 && row.unorm > 0.0)
            row.unorm_rate = rate_sequence({prev.unorm, row.unorm}).front();
    }
}

inline std::shared_ptr<const fem::FemSpace> make_fem_space(const SweepConfig& cfg) {
    if (cfg.mesh_path.empty())
        return std::make_shared<const fem::FemSpace>(fem::build_structured_mesh(cfg.n, cfg.side));
    std::ifstream in(cfg.mesh_path);
    if (!in) throw ConfigError("cannot open mesh file '" + cfg.mesh_path + "'");
    return std::make_shared<const fem::FemSpace>(fem::read_mesh(in));
}

/// One steering run per T. Rows keep the T-list order whatever the
/// completion order of concurrent runs.
inline SweepTable run_sweep(const SweepConfig& cfg) {
    cfg.validate();
    std::shared_ptr<const fem::FemSpace> space;
    if (cfg.scheme == SchemeKind::fem) space = make_fem_space(cfg);

    auto one = [&cfg, &space](double T) -> SweepRow {
        PlateParams p{cfg.rho, cfg.side, T, static_cast<int>(std::llround(T / cfg.dt)), cfg.n};
        try {
            NullControlRun run = cfg.scheme == SchemeKind::fdm
                                     ? fdm::run_fdm_null_control(p, cfg.init.v0, cfg.init.w0, cfg.fdm_norm)
                                     : fem::run_fem_null_control(p, cfg.init.v0, cfg.init.w0, space);
            return {T, run.report.terminal_energy, std::nullopt, run.report.control_norm, std::nullopt};
        } catch (const SolverError& e) {
            std::ostringstream msg;
            msg << "T = " << T << ": " << e.what();
            throw SolverError(msg.str());
        }
    };

    SweepTable table;
    table.rows.resize(cfg.t_list.size());
    const std::size_t jobs = std::max<unsigned>(1, cfg.jobs);
    for (std::size_t start = 0; start < cfg.t_list.size(); start += jobs) {
        const std::size_t stop = std::min(cfg.t_list.size(), start + jobs);
        std::vector<std::future<SweepRow>> pending;
        for (std::size_t k = start; k < stop; ++k)
            pending.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, one,
                                         cfg.t_list[k]));
        for (std::size_t k = start; k < stop; ++k) table.rows[k] = pending[k - start].get();
    }
    fill_rates(table);
    return table;
}

/// Least-squares slope of log(value) against log(T).
inline double fit_loglog_slope(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 2) throw std::invalid_argument("fit_loglog_slope: need at least two points");
    double sx = 0.0, sy = 0.0;
    for (const auto& [t, v] : points) {
        if (!(t > 0.0) || !(v > 0.0)) throw std::invalid_argument("fit_loglog_slope: coordinates must be positive");
        sx += std::log(t);
        sy += std::log(v);
    }
    const double n = static_cast<double>(points.size());
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [t, v] : points) {
        const double dx = std::log(t) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(v) - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("fit_loglog_slope: all T values coincide");
    return sxy / sxx;
}

enum class Format { csv, markdown, json };

inline Format format_from_string(const std::string& s) {
    if (s == "csv") return Format::csv;
    if (s == "md" || s == "markdown") return Format::markdown;
    if (s == "json") return Format::json;
    throw ConfigError("unknown output format '" + s + "' (expected csv, md or json)");
}

inline std::string sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4E", x);
    return buf;
}

inline std::string fixed3(const std::optional<double>& x) {
    if (!x) return {};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", *x);
    return buf;
}

inline std::string opt_sci(const std::optional<double>& x) { return x ? sci(*x) : std::string{}; }

inline nlohmann::json table_to_json(const SweepTable& table, const nlohmann::json& config = nullptr) {
    nlohmann::json rows = nlohmann::json::array();
    auto opt = [](const std::optional<double>& x) -> nlohmann::json {
        return x ? nlohmann::json(*x) : nlohmann::json(nullptr);
    };
    for (const auto& r : table.rows)
        rows.push_back({{"T", r.T},
                        {"energy", r.energy},
                        {"energy_rate", opt(r.energy_rate)},
                        {"unorm", r.unorm},
                        {"unorm_rate", opt(r.unorm_rate)}});
    return {{"config", config}, {"rows", rows}};
}

inline SweepTable table_from_json(const nlohmann::json& j) {
    SweepTable table;
    auto opt = [](const nlohmann::json& x) -> std::optional<double> {
        if (x.is_null()) return std::nullopt;
        return x.get<double>();
    };
    for (const auto& r : j.at("rows"))
        table.rows.push_back({r.at("T").get<double>(), r.at("energy").get<double>(), opt(r.at("energy_rate")),
                              r.at("unorm").get<double>(), opt(r.at("unorm_rate"))});
    return table;
}

inline std::string emit_table(const SweepTable& table, Format format,
                              const nlohmann::json& config = nullptr) {
    std::ostringstream out;
    switch (format) {
    case Format::csv:
        out << "T,energy,energy_rate,unorm,unorm_rate\n";
        for (const auto& r : table.rows)
            out << sci(r.T) << ',' << sci(r.energy) << ',' << opt_sci(r.energy_rate) << ',' << sci(r.unorm)
                << ',' << opt_sci(r.unorm_rate) << '\n';
        break;
    case Format::markdown:
        out << "| T | ||v(T)||^2 + ||w(T)||^2 | rate | ||u|| | rate |\n";
        out << "|---|---|---|---|---|\n";
        for (const auto& r : table.rows) {
            auto rate = [](const std::optional<double>& x) { return x ? fixed3(x) : std::string("--"); };
            out << "| " << sci(r.T) << " | " << sci(r.energy) << " | " << rate(r.energy_rate) << " | "
                << sci(r.unorm) << " | " << rate(r.unorm_rate) << " |\n";
        }
        break;
    case Format::json:
        out << table_to_json(table, config).dump(2) << '\n';
        break;
    }
    return out.str();
}

/// Gnuplot-ready columns: T, energy, control norm, T^{-3/2}.
inline std::string emit_loglog_data(const SweepTable& table) {
    std::ostringstream out;
    out << "# T energy unorm reference_T^-1.5\n";
    for (const auto& r : table.rows)
        out << sci(r.T) << ' ' << sci(r.energy) << ' ' << sci(r.unorm) << ' ' << sci(std::pow(r.T, -1.5)) << '\n';
    return out.str();
}

}  // namespace plate_nc::bench
