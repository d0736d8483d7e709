#pragma once

// Experiment orchestration and deterministic report emission.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "chiralflow/analytic.hpp"
#include "chiralflow/cli/config.hpp"
#include "chiralflow/detail/format.hpp"
#include "chiralflow/device.hpp"
#include "chiralflow/disorder.hpp"
#include "chiralflow/ensemble.hpp"
#include "chiralflow/model.hpp"
#include "chiralflow/propagate.hpp"

#ifndef CHIRALFLOW_VERSION
#define CHIRALFLOW_VERSION "0.0.0-unknown"
#endif

namespace chiralflow::cli {

inline std::string version() { return CHIRALFLOW_VERSION; }

struct Check {
    std::string name;
    double value = 0.0;
    double target = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

inline Check check_within(std::string name, double value, double target, double tolerance) {
    return {std::move(name), value, target, tolerance, std::abs(value - target) <= tolerance};
}

inline Check check_above(std::string name, double value, double bound) {
    return {std::move(name), value, bound, 0.0, value > bound};
}

inline json checks_json(const std::vector<Check>& checks) {
    json arr = json::array();
    for (const auto& c : checks)
        arr.push_back({{"name", c.name},
                       {"value", c.value},
                       {"target", c.target},
                       {"tolerance", c.tolerance},
                       {"pass", c.pass}});
    return arr;
}

inline bool all_pass(const std::vector<Check>& checks) {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

/// Smallest tolerance a standard-error check is allowed to reach; below it
/// the ensemble is exact up to rounding.
inline constexpr double kRoundoffFloor = 1e-10;

struct Fig2bCase {
    double sigma = 1.0;
    EnsembleStats stats;
    std::vector<double> r_eq5;
    std::vector<Check> checks;
};

struct Fig2bResult {
    std::vector<Fig2bCase> cases;
    bool pass() const {
        return std::all_of(cases.begin(), cases.end(), [](const Fig2bCase& c) { return all_pass(c.checks); });
    }
};

inline std::size_t nearest_index(const std::vector<double>& times, double t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < times.size(); ++k)
        if (std::abs(times[k] - t) < std::abs(times[best] - t)) best = k;
    return best;
}

inline EnsembleConfig ensemble_config(const RunConfig& cfg, double sigma) {
    EnsembleConfig ec;
    ec.model = cfg.model;
    ec.packet = cfg.packet;
    ec.packet.sigma = sigma;
    ec.grid = cfg.grid_for(sigma);
    ec.params = cfg.params;
    ec.n_realizations = cfg.realizations;
    ec.master_seed = cfg.seed;
    ec.times = cfg.times;
    ec.snapshot_indices = cfg.snapshots;
    ec.threads = cfg.threads;
    ec.bootstrap_resamples = cfg.bootstrap;
    return ec;
}

/// Purity plateau, revival and curve checks for one ring ensemble. The
/// plateau is read at vt = L/2, where the ring influence peaks.
inline std::vector<Check> fig2b_checks(const EnsembleStats& st, double L, double v) {
    std::vector<Check> checks;
    const auto& t = st.times;
    const std::size_t cycle_end = nearest_index(t, L / v);
    const std::size_t mid = nearest_index(t, 0.5 * L / v);
    const double plateau = st.r_plateau;
    const double sigma = st.config.packet.sigma;
    const double ell = std::get<PeriodicGaussianCorr>(st.config.model).ell;
    const double saturation = std::sqrt(ell * ell + 4.0 * sigma * sigma);
    // The plateau is only reached when half a cycle covers the saturation
    // distance twice over; otherwise the revival preempts it and the cycle
    // minimum must stay above it.
    if (0.5 * L >= 2.0 * saturation) {
        checks.push_back(check_within("plateau_mc", st.r_mc[mid], plateau,
                                      std::max(3.0 * st.r_mc_se[mid], kRoundoffFloor)));
    } else {
        double min_mc = 1.0, min_eq3 = 1.0;
        for (std::size_t k = 0; k <= cycle_end; ++k) {
            min_mc = std::min(min_mc, st.r_mc[k]);
            min_eq3 = std::min(min_eq3, st.r_analytic[k]);
        }
        checks.push_back(check_above("cycle_min_mc_above_plateau", min_mc, plateau));
        checks.push_back(check_above("cycle_min_eq3_above_plateau", min_eq3, plateau));
    }
    for (int n = 1; n <= 2; ++n) {
        const double tn = n * L / v;
        if (tn > t.back() * (1.0 + 1e-12)) break;
        const std::size_t k = nearest_index(t, tn);
        if (std::abs(t[k] - tn) > 1e-9 * tn) continue;
        checks.push_back(check_within("revival_" + std::to_string(n), st.r_mc[k], 1.0,
                                      std::max(3.0 * st.r_mc_se[k], kRoundoffFloor)));
    }
    double worst = 0.0, worst_tol = 0.0;
    bool curve_ok = true;
    for (std::size_t k = 0; k < t.size(); ++k) {
        const double dev = std::abs(st.r_mc[k] - st.r_analytic[k]);
        const double tol = std::max(3.0 * st.r_mc_se[k], 0.005);
        if (dev > tol) curve_ok = false;
        if (dev - tol > worst - worst_tol || k == 0) {
            worst = dev;
            worst_tol = tol;
        }
    }
    checks.push_back({"curve_mc_vs_eq3", worst, 0.0, worst_tol, curve_ok});
    double worst_p = 0.0;
    bool mom_ok = true;
    for (std::size_t k = 0; k < t.size(); ++k) {
        const double dev = std::abs(st.var_p_mc[k] - st.var_p_analytic[k]);
        const double tol = std::max(3.0 * st.var_p_mc_se[k], kRoundoffFloor);
        if (dev > tol) mom_ok = false;
        worst_p = std::max(worst_p, dev / tol);
    }
    checks.push_back({"momentum_variance_mc_vs_analytic_se_ratio", worst_p, 0.0, 1.0, mom_ok});
    return checks;
}

inline Fig2bResult run_fig2b(const RunConfig& cfg) {
    chiralflow::detail::require(cfg.experiment == "fig2b", "run_fig2b: experiment must be fig2b");
    const auto& ring = std::get<PeriodicGaussianCorr>(cfg.model);
    Fig2bResult res;
    for (double sigma : cfg.sigmas) {
        Fig2bCase c;
        c.sigma = sigma;
        c.stats = run_ensemble(ensemble_config(cfg, sigma));
        c.r_eq5 = purity_evolution(sigma, ring.C0, ring.ell, cfg.params.v, cfg.params.hbar, cfg.times).r_analytic;
        c.checks = fig2b_checks(c.stats, ring.L, cfg.params.v);
        res.cases.push_back(std::move(c));
    }
    return res;
}

class OutputDir {
public:
    explicit OutputDir(const std::string& dir) : dir_(dir) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec || !std::filesystem::is_directory(dir_))
            throw ValidationError("cannot create output directory '" + dir + "'");
    }

    /// Opens a file for binary writing (LF line endings on every platform).
    std::ofstream open(const std::string& name) {
        const auto path = dir_ / name;
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        if (!os) throw ValidationError("cannot write '" + path.string() + "'");
        written_.push_back(name);
        return os;
    }

    const std::vector<std::string>& written() const { return written_; }

private:
    std::filesystem::path dir_;
    std::vector<std::string> written_;
};

inline json summary_header(const RunConfig& cfg) {
    json j;
    j["experiment"] = cfg.experiment;
    j["version"] = version();
    j["config"] = to_json(cfg);
    return j;
}

inline void write_json(std::ostream& os, const json& j) { os << j.dump(2) << '\n'; }

/// Table of named columns, written as CSV or as a JSON object of arrays.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void write(std::ostream& os, const std::string& format) const {
        if (format == "json") {
            json j = json::object();
            for (std::size_t c = 0; c < columns.size(); ++c) {
                json col = json::array();
                for (const auto& r : rows) col.push_back(std::isfinite(r[c]) ? json(r[c]) : json(nullptr));
                j[columns[c]] = col;
            }
            write_json(os, j);
            return;
        }
        for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c];
        os << '\n';
        for (const auto& r : rows) {
            for (std::size_t c = 0; c < r.size(); ++c) os << (c ? "," : "") << chiralflow::detail::fmt17(r[c]);
            os << '\n';
        }
    }
};

inline Table ensemble_table(const EnsembleStats& st) {
    Table t{{"t", "r_mc", "r_mc_se", "r_analytic", "r_plateau", "var_p_mc", "var_p_analytic", "mean_x_mc"}, {}};
    for (std::size_t k = 0; k < st.times.size(); ++k)
        t.rows.push_back({st.times[k], st.r_mc[k], st.r_mc_se[k], st.r_analytic[k], st.r_plateau, st.var_p_mc[k],
                          st.var_p_analytic[k], st.mean_x_mc[k]});
    return t;
}

/// Writes the ensemble table (CSV or JSON), any density-matrix snapshots
/// and a summary. Identical inputs give byte-identical files.
inline std::vector<std::string> emit_report(const EnsembleStats& st, const std::string& format,
                                            const std::string& dir, const json& summary = json::object()) {
    OutputDir out(dir);
    {
        auto os = out.open(format == "json" ? "ensemble.json" : "ensemble.csv");
        ensemble_table(st).write(os, format);
    }
    for (std::size_t s = 0; s < st.avg_rho_snapshots.size(); ++s) {
        auto os = out.open("rho_snapshot_" + std::to_string(s) + ".txt");
        write_density_matrix(os, st.avg_rho_snapshots[s].mean, st.avg_rho_snapshots[s].t);
    }
    if (!summary.empty()) {
        auto os = out.open("summary.json");
        write_json(os, summary);
    }
    return out.written();
}

/// Runs one experiment and writes its artifacts; returns the process exit
/// code (0 iff every enabled check passes).
inline int run_experiment(const RunConfig& cfg, std::ostream& log) {
    OutputDir out(cfg.output_dir);
    json summary = summary_header(cfg);
    std::vector<Check> checks;
    const std::string ext = cfg.format == "json" ? ".json" : ".csv";

    if (cfg.experiment == "fig2b") {
        const Fig2bResult res = run_fig2b(cfg);
        json cases = json::array();
        for (std::size_t i = 0; i < res.cases.size(); ++i) {
            const auto& c = res.cases[i];
            Table t{{"t", "r_mc", "r_mc_se", "r_eq3", "r_eq5"}, {}};
            for (std::size_t k = 0; k < c.stats.times.size(); ++k)
                t.rows.push_back({c.stats.times[k], c.stats.r_mc[k], c.stats.r_mc_se[k], c.stats.r_analytic[k],
                                  c.r_eq5[k]});
            const std::string name = "fig2b_case" + std::to_string(i + 1) + ext;
            auto os = out.open(name);
            t.write(os, cfg.format);
            cases.push_back({{"sigma", c.sigma},
                             {"file", name},
                             {"grid_length", c.stats.config.grid.length()},
                             {"r_plateau_eq5", c.stats.r_plateau},
                             {"checks", checks_json(c.checks)},
                             {"pass", all_pass(c.checks)}});
            for (const auto& ck : c.checks) {
                log << "case " << (i + 1) << " sigma=" << chiralflow::detail::fmt17(c.sigma) << ' ' << ck.name
                    << (ck.pass ? " PASS" : " FAIL") << '\n';
            }
        }
        summary["cases"] = cases;
        summary["pass"] = res.pass();
        auto os = out.open("fig2b_summary.json");
        write_json(os, summary);
        if (!res.pass()) log << "fig2b: acceptance thresholds failed\n";
        return res.pass() ? 0 : 1;
    }

    if (cfg.experiment == "sample") {
        const Grid grid = cfg.grid_for(cfg.packet.sigma);
        const auto real = sample_realization(cfg.model, grid, cfg.seed);
        if (cfg.format == "json") {
            Table t{{"x", "V", "Phi"}, {}};
            for (std::size_t i = 0; i < grid.size(); ++i)
                t.rows.push_back({grid.x(i), real.potential[static_cast<Eigen::Index>(i)],
                                  real.antiderivative[static_cast<Eigen::Index>(i)]});
            auto os = out.open("realization.json");
            t.write(os, "json");
        } else {
            auto os = out.open("realization.csv");
            write_realization_csv(os, real);
        }
    } else if (cfg.experiment == "evolve-single") {
        const Grid grid = cfg.grid_for(cfg.packet.sigma);
        const auto real = sample_realization(cfg.model, grid, cfg.seed);
        const WaveFunction psi0 = make_gaussian_wavefunction(cfg.packet, grid, cfg.params);
        Table t{{"t", "norm", "mean_x", "var_x", "mean_p", "var_p"}, {}};
        double worst = 0.0;
        for (double time : cfg.times) {
            const WaveFunction psi = evolve_wavefunction(psi0, real, cfg.params, time);
            const Moments m = moments(psi, cfg.params, cfg.packet.x0 + cfg.params.v * time);
            worst = std::max(worst, std::abs(psi.norm() - 1.0));
            t.rows.push_back({time, psi.norm(), m.mean_x, m.var_x, m.mean_p, m.var_p});
        }
        checks.push_back(check_within("norm_preserved", worst, 0.0, 1e-10));
        auto os = out.open("evolve_single" + ext);
        t.write(os, cfg.format);
    } else if (cfg.experiment == "ensemble") {
        const EnsembleStats st = run_ensemble(ensemble_config(cfg, cfg.packet.sigma));
        if (!st.avg_rho_snapshots.empty()) {
            const auto rep =
                compare_with_analytic(st, sampled_influence(cfg.model, st.config.grid, cfg.params));
            double worst = 0.0;
            for (double r : rep.max_se_ratio) worst = std::max(worst, r);
            checks.push_back({"snapshots_within_5se", worst, 0.0, rep.threshold_se, rep.elementwise_pass});
            summary["insufficient_statistics"] = rep.insufficient_statistics;
        }
        double worst_r = 0.0;
        bool r_ok = true;
        for (std::size_t k = 0; k < st.times.size(); ++k) {
            const double tol = std::max(5.0 * st.r_mc_se[k], kRoundoffFloor);
            const double dev = std::abs(st.r_mc[k] - st.r_analytic[k]);
            worst_r = std::max(worst_r, dev / tol);
            if (dev > tol) r_ok = false;
        }
        checks.push_back({"purity_within_5se", worst_r, 0.0, 1.0, r_ok});
        for (const auto& f : emit_report(st, cfg.format, cfg.output_dir)) summary["outputs"].push_back(f);
    } else if (cfg.experiment == "analytic") {
        const Grid grid = cfg.grid_for(cfg.packet.sigma);
        const DensityMatrix rho0 = density_from_wavefunction(make_gaussian_wavefunction(cfg.packet, grid, cfg.params));
        const AnalyticPurity eq3(rho0, sampled_influence(cfg.model, grid, cfg.params));
        Table t{{"t", "r_eq3", "r_eq5", "var_p_analytic"}, {}};
        std::vector<double> r5(cfg.times.size(), std::numeric_limits<double>::quiet_NaN());
        if (const auto* g = std::get_if<GaussianCorr>(&cfg.model))
            r5 = purity_evolution(cfg.packet.sigma, g->C0, g->ell, cfg.params.v, cfg.params.hbar, cfg.times).r_analytic;
        if (const auto* g = std::get_if<PeriodicGaussianCorr>(&cfg.model))
            r5 = purity_evolution(cfg.packet.sigma, g->C0, g->ell, cfg.params.v, cfg.params.hbar, cfg.times).r_analytic;
        std::vector<double> vp(cfg.times.size(), std::numeric_limits<double>::quiet_NaN());
        if (!std::holds_alternative<DeltaCorr>(cfg.model))
            vp = momentum_variance_evolution(moments(rho0, cfg.params).var_p, effective_model(cfg.model, grid),
                                             cfg.params, cfg.times);
        for (std::size_t k = 0; k < cfg.times.size(); ++k) t.rows.push_back({cfg.times[k], eq3(cfg.times[k]), r5[k], vp[k]});
        auto os = out.open("analytic" + ext);
        t.write(os, cfg.format);
    } else if (cfg.experiment == "gap") {
        const double C0 = strength(cfg.model);
        const GapCheck g = gap_condition(cfg.packet.sigma, C0, cfg.params.v, cfg.params.hbar, cfg.gap_delta);
        Table t{{"sigma", "C0", "v", "hbar", "Delta", "lhs", "rhs", "margin", "satisfied"}, {}};
        t.rows.push_back({cfg.packet.sigma, C0, cfg.params.v, cfg.params.hbar, cfg.gap_delta, g.lhs, g.rhs, g.margin,
                          g.satisfied ? 1.0 : 0.0});
        summary["gap"] = {{"lhs", g.lhs}, {"rhs", g.rhs}, {"margin", g.margin}, {"satisfied", g.satisfied}};
        auto os = out.open("gap" + ext);
        t.write(os, cfg.format);
    } else if (cfg.experiment == "beamsplitter") {
        const Grid grid = cfg.grid_for(cfg.packet.sigma);
        double t_bs = cfg.t_max;
        if (const auto* ring = std::get_if<PeriodicGaussianCorr>(&cfg.model)) t_bs = 0.5 * ring->L / cfg.params.v;
        t_bs = cfg.beamsplitter_time.value_or(t_bs);
        const WaveFunction psi0 = make_gaussian_wavefunction(cfg.packet, grid, cfg.params);
        std::vector<WaveFunction> states(cfg.realizations, psi0);
        chiralflow::detail::parallel_for(cfg.realizations, chiralflow::detail::resolve_threads(cfg.threads),
                                         [&](std::size_t e) {
                                             const auto real =
                                                 sample_realization(cfg.model, grid, derive_seed(cfg.seed, e));
                                             states[e] = evolve_wavefunction(psi0, real, cfg.params, t_bs);
                                         });
        const Eigen::MatrixXcd overlaps = overlap_matrix(states);
        Table t{{"phi", "p_plus_mc", "p_plus_mc_se", "p_plus_averaged", "r_pairs"}, {}};
        bool ok = true;
        double worst = 0.0;
        for (double phi : cfg.phis) {
            const PairAverage pa = beam_splitter_pair_average(overlaps, phi, cfg.bootstrap);
            const double tol = std::max(3.0 * pa.p_plus_se, kRoundoffFloor);
            const double dev = std::abs(pa.p_plus - pa.p_plus_averaged);
            if (dev > tol) ok = false;
            worst = std::max(worst, dev / tol);
            t.rows.push_back({phi, pa.p_plus, pa.p_plus_se, pa.p_plus_averaged, pa.r_pairs});
        }
        checks.push_back({"pair_average_within_3se", worst, 0.0, 1.0, ok});
        summary["t"] = t_bs;
        auto os = out.open("beamsplitter" + ext);
        t.write(os, cfg.format);
    }

    summary["checks"] = checks_json(checks);
    summary["pass"] = all_pass(checks);
    if (!summary.contains("outputs")) summary["outputs"] = out.written();
    auto os = out.open("summary.json");
    write_json(os, summary);
    for (const auto& c : checks)
        if (!c.pass) log << cfg.experiment << ": check '" << c.name << "' failed\n";
    return all_pass(checks) ? 0 : 1;
}

}  // namespace chiralflow::cli
