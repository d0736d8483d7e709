#pragma once

// Strict JSON run configuration for the command-line front end.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "chiralflow/disorder.hpp"
#include "chiralflow/error.hpp"
#include "chiralflow/grid.hpp"
#include "chiralflow/model.hpp"

namespace chiralflow::cli {

using json = nlohmann::ordered_json;

inline const std::vector<std::string>& experiments() {
    static const std::vector<std::string> names{"sample", "evolve-single", "ensemble", "analytic",
                                                "fig2b",  "gap",           "beamsplitter"};
    return names;
}

struct RunConfig {
    std::string experiment;
    std::uint64_t seed = 0;
    std::string output_dir = ".";
    unsigned threads = 0;
    std::string format = "csv";

    PhysParams params;
    CorrelationModel model = GaussianCorr{7.5e-3, 1.0};
    GaussianPacket packet;
    /// fig2b: one ensemble per width.
    std::vector<double> sigmas;

    std::size_t grid_n = 2048;
    std::optional<double> grid_length;
    std::optional<double> grid_x_min;

    double t_max = 0.0;
    std::size_t steps = 0;
    std::vector<double> times;

    std::size_t realizations = 500;
    std::size_t bootstrap = 200;
    std::vector<std::size_t> snapshots;

    double gap_delta = 1.0;
    std::vector<double> phis;
    std::optional<double> beamsplitter_time;

    /// Grid of the run for packet width sigma.
    Grid grid_for(double sigma) const {
        const double length = grid_length.value_or(default_length(sigma));
        const double x_min = grid_x_min.value_or(packet.x0 - 0.5 * length);
        return Grid::periodic(x_min, length, grid_n);
    }

    double default_length(double sigma) const {
        // Packet tails fall below 1e-12 of the peak beyond 10.6 sigma.
        const double need = 22.0 * sigma;
        if (const auto* ring = std::get_if<PeriodicGaussianCorr>(&model))
            return ring->L * std::max(1.0, std::ceil(need / ring->L));
        const double ell = std::holds_alternative<GaussianCorr>(model) ? std::get<GaussianCorr>(model).ell : 1.0;
        return std::max(need, 40.0 * ell);
    }
};

namespace detail {

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

inline std::string suggestion(std::string_view key, const std::vector<std::string>& allowed) {
    std::string best;
    std::size_t best_d = 3;
    for (const auto& k : allowed) {
        const std::size_t d = edit_distance(key, k);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best.empty() ? std::string() : " (did you mean '" + best + "'?)";
}

inline std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

inline void check_keys(const json& obj, const std::string& path, const std::vector<std::string>& allowed) {
    if (!obj.is_object())
        throw ValidationError((path.empty() ? std::string("config") : path) + ": expected an object");
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ValidationError("unknown key '" + join(path, key) + "'" + suggestion(key, allowed));
    }
}

inline std::optional<double> number(const json& obj, const std::string& path, const std::string& key) {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj.at(key);
    if (!v.is_number()) throw ValidationError(join(path, key) + ": expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ValidationError(join(path, key) + ": must be finite");
    return x;
}

inline double positive(const json& obj, const std::string& path, const std::string& key, double fallback) {
    const auto v = number(obj, path, key);
    if (v && !(*v > 0.0))
        throw ValidationError(join(path, key) + ": must be > 0 (got " + chiralflow::detail::fmt17(*v) + ")");
    return v.value_or(fallback);
}

inline double nonnegative(const json& obj, const std::string& path, const std::string& key, double fallback) {
    const auto v = number(obj, path, key);
    if (v && !(*v >= 0.0))
        throw ValidationError(join(path, key) + ": must be >= 0 (got " + chiralflow::detail::fmt17(*v) + ")");
    return v.value_or(fallback);
}

inline std::optional<std::uint64_t> count(const json& obj, const std::string& path, const std::string& key) {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
        throw ValidationError(join(path, key) + ": expected a non-negative integer");
    return v.get<std::uint64_t>();
}

inline std::optional<std::string> text(const json& obj, const std::string& path, const std::string& key) {
    if (!obj.contains(key)) return std::nullopt;
    if (!obj.at(key).is_string()) throw ValidationError(join(path, key) + ": expected a string");
    return obj.at(key).get<std::string>();
}

inline std::vector<double> number_list(const json& obj, const std::string& path, const std::string& key) {
    const json& v = obj.at(key);
    if (!v.is_array()) throw ValidationError(join(path, key) + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number())
            throw ValidationError(join(path, key) + "[" + std::to_string(i) + "]: expected a number");
        out.push_back(v[i].get<double>());
    }
    return out;
}

inline const json& section(const json& root, const std::string& key) {
    static const json empty = json::object();
    return root.contains(key) ? root.at(key) : empty;
}

}  // namespace detail

struct Overrides {
    std::optional<std::string> experiment;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output_dir;
    std::optional<unsigned> threads;
    std::optional<std::string> format;
};

/// Parses and validates a configuration document. Defaults: hbar = v =
/// ell = 1, 500 realizations, n = 2048; fig2b uses the ring model with
/// L = 17, C0 = 7.5e-3 and widths {1, 2, 10/3}.
inline RunConfig parse_config(std::string_view document, const Overrides& over = {}) {
    using namespace detail;
    json root;
    try {
        root = document.empty() ? json::object() : json::parse(document);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(root, "", {"experiment", "seed", "output_dir", "threads", "format", "physics", "disorder", "packet",
                          "grid", "time", "ensemble", "fig2b", "gap", "beamsplitter"});
    RunConfig cfg;

    cfg.experiment = over.experiment.value_or(text(root, "", "experiment").value_or(""));
    if (const auto e = text(root, "", "experiment"); e && over.experiment && *e != *over.experiment)
        throw ValidationError("experiment: config names '" + *e + "' but the command line asks for '" +
                              *over.experiment + "'");
    if (std::find(experiments().begin(), experiments().end(), cfg.experiment) == experiments().end())
        throw ValidationError("experiment: unknown experiment '" + cfg.experiment + "'" +
                              suggestion(cfg.experiment, experiments()));
    const bool fig2b = cfg.experiment == "fig2b";

    cfg.seed = over.seed.value_or(count(root, "", "seed").value_or(0));
    cfg.output_dir = over.output_dir.value_or(text(root, "", "output_dir").value_or("."));
    cfg.threads = over.threads.value_or(static_cast<unsigned>(count(root, "", "threads").value_or(0)));
    cfg.format = over.format.value_or(text(root, "", "format").value_or("csv"));
    if (cfg.format != "csv" && cfg.format != "json")
        throw ValidationError("format: expected 'csv' or 'json', got '" + cfg.format + "'");

    const json& phys = section(root, "physics");
    check_keys(phys, "physics", {"hbar", "v"});
    cfg.params.hbar = positive(phys, "physics", "hbar", 1.0);
    cfg.params.v = positive(phys, "physics", "v", 1.0);

    const json& dis = section(root, "disorder");
    check_keys(dis, "disorder", {"type", "C0", "ell", "L"});
    const std::string type = text(dis, "disorder", "type").value_or(fig2b ? "periodic" : "gaussian");
    const double C0 = nonnegative(dis, "disorder", "C0", 7.5e-3);
    const double ell = positive(dis, "disorder", "ell", 1.0);
    if (type == "gaussian") {
        if (dis.contains("L")) throw ValidationError("disorder.L: only valid for type 'periodic'");
        cfg.model = GaussianCorr{C0, ell};
    } else if (type == "delta") {
        if (dis.contains("L") || dis.contains("ell"))
            throw ValidationError("disorder: type 'delta' takes only C0");
        cfg.model = DeltaCorr{C0};
    } else if (type == "periodic") {
        cfg.model = PeriodicGaussianCorr{C0, ell, positive(dis, "disorder", "L", 17.0 * ell)};
    } else {
        throw ValidationError("disorder.type: unknown type '" + type + "'" +
                              suggestion(type, {"gaussian", "delta", "periodic"}));
    }
    if (fig2b && type != "periodic") throw ValidationError("disorder.type: fig2b runs on the periodic model");
    try {
        validate(cfg.model);
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("disorder: ") + e.what());
    }

    const json& pk = section(root, "packet");
    check_keys(pk, "packet", {"sigma", "x0", "p0"});
    cfg.packet.sigma = positive(pk, "packet", "sigma", 1.0);
    cfg.packet.x0 = number(pk, "packet", "x0").value_or(0.0);
    cfg.packet.p0 = number(pk, "packet", "p0").value_or(0.0);

    const json& fg = section(root, "fig2b");
    check_keys(fg, "fig2b", {"sigmas"});
    if (!fig2b && !fg.empty()) throw ValidationError("fig2b: section only valid for the fig2b experiment");
    if (fig2b) {
        if (pk.contains("sigma")) throw ValidationError("packet.sigma: fig2b takes its widths from fig2b.sigmas");
        cfg.sigmas = fg.contains("sigmas") ? number_list(fg, "fig2b", "sigmas")
                                           : std::vector<double>{1.0, 2.0, 10.0 / 3.0};
        if (cfg.sigmas.empty()) throw ValidationError("fig2b.sigmas: must not be empty");
        for (std::size_t i = 0; i < cfg.sigmas.size(); ++i)
            if (!(cfg.sigmas[i] > 0.0))
                throw ValidationError("fig2b.sigmas[" + std::to_string(i) + "]: must be > 0");
    } else {
        cfg.sigmas = {cfg.packet.sigma};
    }

    const json& gr = section(root, "grid");
    check_keys(gr, "grid", {"n", "length", "x_min"});
    cfg.grid_n = count(gr, "grid", "n").value_or(2048);
    if (cfg.grid_n < 8) throw ValidationError("grid.n: must be >= 8");
    if (gr.contains("length")) cfg.grid_length = positive(gr, "grid", "length", 1.0);
    cfg.grid_x_min = number(gr, "grid", "x_min");

    const json& tm = section(root, "time");
    check_keys(tm, "time", {"t_max", "steps", "times"});
    const double ring_time = std::holds_alternative<PeriodicGaussianCorr>(cfg.model)
                                 ? 2.0 * std::get<PeriodicGaussianCorr>(cfg.model).L / cfg.params.v
                                 : 20.0 / cfg.params.v;
    if (tm.contains("times")) {
        if (tm.contains("t_max") || tm.contains("steps"))
            throw ValidationError("time: give either 'times' or 't_max'/'steps'");
        cfg.times = number_list(tm, "time", "times");
        if (cfg.times.empty()) throw ValidationError("time.times: must not be empty");
        for (std::size_t i = 0; i < cfg.times.size(); ++i) {
            if (!(cfg.times[i] >= 0.0))
                throw ValidationError("time.times[" + std::to_string(i) + "]: must be >= 0");
            if (i > 0 && !(cfg.times[i] > cfg.times[i - 1]))
                throw ValidationError("time.times[" + std::to_string(i) + "]: must be strictly increasing");
        }
        cfg.t_max = cfg.times.back();
        cfg.steps = cfg.times.size() - 1;
    } else {
        cfg.t_max = nonnegative(tm, "time", "t_max", ring_time);
        // Snapshot spacing v dt = ell / 10 unless set explicitly.
        cfg.steps = count(tm, "time", "steps").value_or(
            std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.t_max * cfg.params.v * 10.0))));
        if (cfg.steps == 0) throw ValidationError("time.steps: must be >= 1");
        for (std::size_t k = 0; k <= cfg.steps; ++k)
            cfg.times.push_back(cfg.t_max * static_cast<double>(k) / static_cast<double>(cfg.steps));
    }

    const json& en = section(root, "ensemble");
    check_keys(en, "ensemble", {"realizations", "bootstrap", "snapshots"});
    cfg.realizations = count(en, "ensemble", "realizations").value_or(500);
    if (cfg.realizations < 2) throw ValidationError("ensemble.realizations: must be >= 2");
    cfg.bootstrap = count(en, "ensemble", "bootstrap").value_or(200);
    if (cfg.bootstrap < 2) throw ValidationError("ensemble.bootstrap: must be >= 2");
    if (en.contains("snapshots")) {
        const auto list = number_list(en, "ensemble", "snapshots");
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (!(list[i] >= 0.0) || list[i] != std::floor(list[i]) ||
                static_cast<std::size_t>(list[i]) >= cfg.times.size())
                throw ValidationError("ensemble.snapshots[" + std::to_string(i) + "]: must index the time list");
            cfg.snapshots.push_back(static_cast<std::size_t>(list[i]));
        }
    }

    const json& gp = section(root, "gap");
    check_keys(gp, "gap", {"Delta"});
    cfg.gap_delta = nonnegative(gp, "gap", "Delta", cfg.params.v * 1.0);

    const json& bs = section(root, "beamsplitter");
    check_keys(bs, "beamsplitter", {"phis", "t"});
    if (bs.contains("phis")) {
        cfg.phis = number_list(bs, "beamsplitter", "phis");
    } else {
        for (int k = 0; k <= 8; ++k) cfg.phis.push_back(std::numbers::pi * k / 8.0);
    }
    if (bs.contains("t")) cfg.beamsplitter_time = nonnegative(bs, "beamsplitter", "t", 0.0);

    for (double s : cfg.sigmas) {
        GaussianPacket p = cfg.packet;
        p.sigma = s;
        try {
            const Grid g = cfg.grid_for(s);
            (void)make_gaussian_wavefunction(p, g, cfg.params);
        } catch (const ValidationError& e) {
            throw ValidationError(std::string("grid: ") + e.what());
        }
    }
    return cfg;
}

inline RunConfig parse_config_file(const std::string& path, const Overrides& over = {}) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), over);
}

inline json model_json(const CorrelationModel& model) {
    return std::visit(overloaded{
                          [](const GaussianCorr& m) { return json{{"type", "gaussian"}, {"C0", m.C0}, {"ell", m.ell}}; },
                          [](const DeltaCorr& m) { return json{{"type", "delta"}, {"C0", m.C0}}; },
                          [](const PeriodicGaussianCorr& m) {
                              return json{{"type", "periodic"}, {"C0", m.C0}, {"ell", m.ell}, {"L", m.L}};
                          },
                      },
                      model);
}

/// Fully resolved configuration, accepted back by parse_config.
inline json to_json(const RunConfig& cfg) {
    json j;
    j["experiment"] = cfg.experiment;
    j["seed"] = cfg.seed;
    j["output_dir"] = cfg.output_dir;
    j["threads"] = cfg.threads;
    j["format"] = cfg.format;
    j["physics"] = {{"hbar", cfg.params.hbar}, {"v", cfg.params.v}};
    j["disorder"] = model_json(cfg.model);
    j["packet"] = {{"x0", cfg.packet.x0}, {"p0", cfg.packet.p0}};
    if (cfg.experiment == "fig2b")
        j["fig2b"] = {{"sigmas", cfg.sigmas}};
    else
        j["packet"]["sigma"] = cfg.packet.sigma;
    j["grid"] = {{"n", cfg.grid_n}};
    if (cfg.grid_length) j["grid"]["length"] = *cfg.grid_length;
    if (cfg.grid_x_min) j["grid"]["x_min"] = *cfg.grid_x_min;
    j["time"] = {{"times", cfg.times}};
    j["ensemble"] = {{"realizations", cfg.realizations}, {"bootstrap", cfg.bootstrap}, {"snapshots", cfg.snapshots}};
    j["gap"] = {{"Delta", cfg.gap_delta}};
    j["beamsplitter"] = {{"phis", cfg.phis}};
    if (cfg.beamsplitter_time) j["beamsplitter"]["t"] = *cfg.beamsplitter_time;
    return j;
}

}  // namespace chiralflow::cli
