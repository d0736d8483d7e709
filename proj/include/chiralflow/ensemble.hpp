#pragma once

// Monte Carlo ensemble over disorder realizations: exact per-realization
// propagation, purity of the averaged state via the pairwise overlap
// identity, averaged moments, optional full density-matrix snapshots, and
// bootstrap standard errors.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "chiralflow/analytic.hpp"
#include "chiralflow/detail/format.hpp"
#include "chiralflow/disorder.hpp"
#include "chiralflow/error.hpp"
#include "chiralflow/grid.hpp"
#include "chiralflow/model.hpp"
#include "chiralflow/propagate.hpp"
#include "chiralflow/spectral.hpp"

namespace chiralflow {

inline constexpr std::size_t kMaxSnapshotGrid = 4096;

struct EnsembleConfig {
    CorrelationModel model = PeriodicGaussianCorr{7.5e-3, 1.0, 17.0};
    GaussianPacket packet;
    Grid grid = Grid::periodic(-17.0, 34.0, 2048);
    PhysParams params;
    std::size_t n_realizations = 500;
    std::uint64_t master_seed = 0;
    std::vector<double> times{0.0};
    /// Indices into `times` at which the full averaged density matrix is kept.
    std::vector<std::size_t> snapshot_indices;
    /// Worker threads; 0 selects the hardware concurrency.
    unsigned threads = 0;
    std::size_t bootstrap_resamples = 200;
    std::uint64_t bootstrap_seed = 0x5EEDB007ULL;
    /// Rows with |psi|^2 below this fraction of the peak are left out of
    /// the overlaps.
    double support_cutoff = 1e-14;

    void validate() const {
        chiralflow::validate(model);
        packet.validate();
        params.validate();
        require_periodic(grid, "EnsembleConfig");
        detail::require(n_realizations >= 2, "EnsembleConfig: n_realizations must be >= 2");
        detail::require(bootstrap_resamples >= 2, "EnsembleConfig: bootstrap_resamples must be >= 2");
        detail::require(!times.empty(), "EnsembleConfig: times must not be empty");
        for (double t : times) detail::require(std::isfinite(t) && t >= 0.0, "EnsembleConfig: times must be >= 0");
        for (std::size_t k : snapshot_indices)
            detail::require(k < times.size(), "EnsembleConfig: snapshot index out of range");
        if (!snapshot_indices.empty() && grid.size() > kMaxSnapshotGrid)
            throw ValidationError("EnsembleConfig: density-matrix snapshots need n <= " +
                                  std::to_string(kMaxSnapshotGrid) + " (O(n^2) memory per snapshot)");
        detail::require(support_cutoff >= 0.0 && support_cutoff < 1e-6,
                        "EnsembleConfig: support_cutoff must lie in [0, 1e-6)");
    }
};

struct DensitySnapshot {
    double t = 0.0;
    DensityMatrix mean;
    /// Elementwise standard error of the complex mean, sqrt(E|z - <z>|^2 / M).
    Eigen::MatrixXd se;
};

struct EnsembleStats {
    EnsembleConfig config;
    std::vector<double> times;
    std::vector<double> r_mc, r_mc_se;
    std::vector<double> r_analytic;
    double r_plateau = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> var_p_mc, var_p_mc_se, var_p_analytic;
    std::vector<double> mean_x_mc, mean_x_mc_se;
    std::vector<double> var_x_mc, var_x_mc_se;
    std::vector<DensitySnapshot> avg_rho_snapshots;
    /// Largest |dx sum |psi|^2 - 1| over all propagated realizations.
    double max_norm_error = 0.0;
};

namespace detail {

inline unsigned resolve_threads(unsigned requested) {
    if (requested != 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1U : hw;
}

/// Runs body(k) for k in [0, count) on `threads` workers. Each index is
/// processed by exactly one worker; results must be written to slots owned
/// by k, so the outcome does not depend on scheduling.
template <class F>
void parallel_for(std::size_t count, unsigned threads, F&& body) {
    threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (threads == 1) {
        for (std::size_t k = 0; k < count; ++k) body(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::mutex failure_mutex;
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t k = next.fetch_add(1);
                if (k >= count || failed.load()) return;
                try {
                    body(k);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    failed.store(true);
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

/// Resample count vectors: column b holds how often each realization is
/// drawn in bootstrap replicate b.
inline Eigen::MatrixXd bootstrap_counts(std::size_t m, std::size_t resamples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, m - 1);
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(resamples));
    for (std::size_t b = 0; b < resamples; ++b)
        for (std::size_t i = 0; i < m; ++i) counts(static_cast<Eigen::Index>(pick(rng)), static_cast<Eigen::Index>(b)) += 1.0;
    return counts;
}

inline double sample_sd(const Eigen::VectorXd& x) {
    const double mean = x.mean();
    return std::sqrt((x.array() - mean).square().sum() / static_cast<double>(x.size() - 1));
}

inline double plateau_for(const CorrelationModel& model, double sigma, const PhysParams& p) {
    return std::visit(overloaded{
                          [&](const GaussianCorr& m) { return purity_plateau(sigma, m.C0, m.ell, p.v, p.hbar); },
                          [&](const PeriodicGaussianCorr& m) {
                              return purity_plateau(sigma, m.C0, m.ell, p.v, p.hbar);
                          },
                          [&](const DeltaCorr& m) {
                              return 1.0 - 4.0 * sigma * m.C0 / (kSqrtPi * p.v * p.v * p.hbar * p.hbar);
                          },
                      },
                      model);
}

}  // namespace detail

/// Influence of the statistics actually synthesized on `grid`.
inline DisorderInfluence sampled_influence(const CorrelationModel& model, const Grid& grid, const PhysParams& params) {
    return DisorderInfluence(effective_model(model, grid), params);
}

/// Overlap matrix O(a, b) = <psi_a|psi_b> of pure states on one grid.
inline Eigen::MatrixXcd overlap_matrix(const std::vector<WaveFunction>& states) {
    detail::require(!states.empty(), "overlap_matrix: no states");
    const auto n = static_cast<Eigen::Index>(states.front().grid.size());
    Eigen::MatrixXcd a(n, static_cast<Eigen::Index>(states.size()));
    for (std::size_t s = 0; s < states.size(); ++s) {
        require_same_grid(states.front().grid, states[s].grid, "overlap_matrix");
        a.col(static_cast<Eigen::Index>(s)) = states[s].amp;
    }
    return states.front().grid.dx() * (a.adjoint() * a);
}

/// Purity of the equal mixture of pure states with overlap matrix O.
inline double mixture_purity(const Eigen::MatrixXcd& overlaps) {
    const double m = static_cast<double>(overlaps.rows());
    return overlaps.cwiseAbs2().sum() / (m * m);
}

inline EnsembleStats run_ensemble(const EnsembleConfig& cfg) {
    cfg.validate();
    const Grid& grid = cfg.grid;
    const PhysParams& params = cfg.params;
    const std::size_t n = grid.size();
    const auto ni = static_cast<Eigen::Index>(n);
    const std::size_t M = cfg.n_realizations;
    const auto Mi = static_cast<Eigen::Index>(M);
    const auto B = static_cast<Eigen::Index>(cfg.bootstrap_resamples);
    const double dx = grid.dx();
    const unsigned threads = detail::resolve_threads(cfg.threads);

    const WaveFunction psi0 = make_gaussian_wavefunction(cfg.packet, grid, params);
    std::vector<std::optional<DisorderRealization>> sampled(M);
    detail::parallel_for(M, threads, [&](std::size_t e) {
        sampled[e] = sample_realization(cfg.model, grid, derive_seed(cfg.master_seed, e));
        if (!sampled[e]->potential.allFinite())
            throw NumericalError("run_ensemble: non-finite potential in realization " + std::to_string(e));
    });
    std::vector<DisorderRealization> reals;
    reals.reserve(M);
    for (auto& r : sampled) reals.push_back(std::move(*r));
    sampled.clear();
    const Eigen::MatrixXd counts = detail::bootstrap_counts(M, cfg.bootstrap_resamples, cfg.bootstrap_seed);
    const double invM2 = 1.0 / (static_cast<double>(M) * static_cast<double>(M));

    EnsembleStats st;
    st.config = cfg;
    st.times = cfg.times;
    const std::size_t T = cfg.times.size();
    st.r_mc.assign(T, 0.0);
    st.r_mc_se.assign(T, 0.0);
    st.var_p_mc.assign(T, 0.0);
    st.var_p_mc_se.assign(T, 0.0);
    st.mean_x_mc.assign(T, 0.0);
    st.mean_x_mc_se.assign(T, 0.0);
    st.var_x_mc.assign(T, 0.0);
    st.var_x_mc_se.assign(T, 0.0);
    std::vector<double> norm_err(T, 0.0);

    std::vector<std::optional<DensitySnapshot>> snaps(T);
    std::vector<bool> want_snapshot(T, false);
    for (std::size_t k : cfg.snapshot_indices) want_snapshot[k] = true;

    Eigen::VectorXd momenta(ni);
    for (std::size_t m = 0; m < n; ++m) momenta[static_cast<Eigen::Index>(m)] = params.hbar * grid.wavenumber(m);

    detail::parallel_for(T, threads, [&](std::size_t k) {
        const double t = cfg.times[k];
        const double s = params.v * t;
        const double center = cfg.packet.x0 + s;
        const Eigen::VectorXcd shifted = spectral::shift(psi0.amp, grid, s);
        const Eigen::VectorXd pop0 = shifted.cwiseAbs2();
        const double peak = pop0.maxCoeff();
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < ni; ++i)
            if (pop0[i] >= cfg.support_cutoff * peak) rows.push_back(i);
        const auto R = static_cast<Eigen::Index>(rows.size());
        const Eigen::VectorXd y = detail::window_positions(grid, center);

        Eigen::MatrixXcd a(R, Mi);
        Eigen::MatrixXcd full;
        if (want_snapshot[k]) full.resize(ni, Mi);
        Eigen::VectorXd mx(Mi), mx2(Mi), mp(Mi), mp2(Mi);
        Eigen::VectorXcd psi(ni), spec(ni);
        const double phase_scale = -1.0 / (params.hbar * params.v);
        double worst_norm = 0.0;
        for (Eigen::Index e = 0; e < Mi; ++e) {
            const DisorderRealization& real = reals[static_cast<std::size_t>(e)];
            const Eigen::VectorXd drop = real.antiderivative - real.antiderivative_shifted(s);
            for (Eigen::Index i = 0; i < ni; ++i) psi[i] = shifted[i] * std::polar(1.0, phase_scale * drop[i]);
            if (!psi.allFinite())
                throw NumericalError("run_ensemble: non-finite amplitude in realization " + std::to_string(e));
            for (Eigen::Index r = 0; r < R; ++r) a(r, e) = psi[rows[static_cast<std::size_t>(r)]];
            if (want_snapshot[k]) full.col(e) = psi;

            const Eigen::VectorXd pop = psi.cwiseAbs2();
            const double mass = pop.sum();
            worst_norm = std::max(worst_norm, std::abs(dx * mass - 1.0));
            mx[e] = y.dot(pop) / mass;
            mx2[e] = y.cwiseProduct(y).dot(pop) / mass;
            spectral::forward(psi.data(), spec.data(), n);
            const Eigen::VectorXd pk = spec.cwiseAbs2();
            const double pmass = pk.sum();
            mp[e] = momenta.dot(pk) / pmass;
            mp2[e] = momenta.cwiseProduct(momenta).dot(pk) / pmass;
        }
        norm_err[k] = worst_norm;

        Eigen::MatrixXcd gram = Eigen::MatrixXcd::Zero(Mi, Mi);
        gram.selfadjointView<Eigen::Lower>().rankUpdate(a.adjoint(), dx);
        Eigen::MatrixXd kern = gram.selfadjointView<Eigen::Lower>().toDenseMatrix().cwiseAbs2();
        st.r_mc[k] = kern.sum() * invM2;
        const Eigen::MatrixXd kc = kern * counts;
        Eigen::VectorXd rb(B), vpb(B), mxb(B), vxb(B);
        for (Eigen::Index b = 0; b < B; ++b) {
            const auto c = counts.col(b);
            rb[b] = c.dot(kc.col(b)) * invM2;
            const double inv = 1.0 / static_cast<double>(M);
            const double p1 = c.dot(mp) * inv, p2 = c.dot(mp2) * inv;
            const double x1 = c.dot(mx) * inv, x2 = c.dot(mx2) * inv;
            vpb[b] = p2 - p1 * p1;
            mxb[b] = x1;
            vxb[b] = x2 - x1 * x1;
        }
        st.r_mc_se[k] = detail::sample_sd(rb);
        st.var_p_mc[k] = mp2.mean() - mp.mean() * mp.mean();
        st.var_p_mc_se[k] = detail::sample_sd(vpb);
        st.mean_x_mc[k] = mx.mean();
        st.mean_x_mc_se[k] = detail::sample_sd(mxb);
        st.var_x_mc[k] = mx2.mean() - mx.mean() * mx.mean();
        st.var_x_mc_se[k] = detail::sample_sd(vxb);

        if (want_snapshot[k]) {
            const double inv = 1.0 / static_cast<double>(M);
            DensitySnapshot snap{t, DensityMatrix{grid, inv * (full * full.adjoint())}, {}};
            const Eigen::MatrixXd mag = full.cwiseAbs2();
            const Eigen::MatrixXd second = inv * (mag * mag.transpose());
            const Eigen::ArrayXXd var = (second.array() - snap.mean.rho.cwiseAbs2().array()).max(0.0) * inv;
            snap.se = var.sqrt().matrix();
            require_valid(snap.mean);
            snaps[k] = std::move(snap);
        }
    });

    st.max_norm_error = *std::max_element(norm_err.begin(), norm_err.end());
    for (auto& s : snaps)
        if (s) st.avg_rho_snapshots.push_back(std::move(*s));

    const DensityMatrix rho0 = density_from_wavefunction(psi0);
    const AnalyticPurity analytic(rho0, sampled_influence(cfg.model, grid, params));
    st.r_analytic.resize(T);
    detail::parallel_for(T, threads, [&](std::size_t k) { st.r_analytic[k] = analytic(cfg.times[k]); });
    st.r_plateau = detail::plateau_for(cfg.model, cfg.packet.sigma, params);
    const double var_p0 = moments(psi0, params).var_p;
    if (std::holds_alternative<DeltaCorr>(cfg.model))
        st.var_p_analytic.assign(T, std::numeric_limits<double>::quiet_NaN());
    else
        st.var_p_analytic = momentum_variance_evolution(var_p0, effective_model(cfg.model, grid), params, cfg.times);
    return st;
}

struct ComparisonReport {
    /// Per snapshot: max |rho_mc - rho_analytic| and max |.|/SE.
    std::vector<double> snapshot_times;
    std::vector<double> max_abs_deviation;
    std::vector<double> max_se_ratio;
    /// Per time: r_mc - r_analytic and its ratio to r_mc_se.
    std::vector<double> purity_gap;
    std::vector<double> purity_gap_se_ratio;
    double threshold_se = 5.0;
    bool elementwise_pass = true;
    bool purity_pass = true;
    bool insufficient_statistics = false;
    bool pass() const { return elementwise_pass && purity_pass && !insufficient_statistics; }
};

inline constexpr std::size_t kMinReliableRealizations = 30;

/// Elementwise and purity comparison of an ensemble against the averaged
/// closed-form state. Elements whose standard error vanishes (populations,
/// or C0 = 0) are held to `floor` instead.
inline ComparisonReport compare_with_analytic(const EnsembleStats& stats, const DisorderInfluence& influence,
                                              double threshold_se = 5.0, double floor = 1e-12) {
    const EnsembleConfig& cfg = stats.config;
    if (!(influence.params() == cfg.params))
        throw MismatchError("compare_with_analytic: physical parameters differ from the ensemble");
    if (!(influence.model() == effective_model(cfg.model, cfg.grid)) && !(influence.model() == cfg.model))
        throw MismatchError("compare_with_analytic: correlation model differs from the ensemble");
    ComparisonReport rep;
    rep.threshold_se = threshold_se;
    const DensityMatrix rho0 = density_from_wavefunction(make_gaussian_wavefunction(cfg.packet, cfg.grid, cfg.params));
    for (const auto& snap : stats.avg_rho_snapshots) {
        const DensityMatrix ref = averaged_density_matrix(rho0, influence, snap.t);
        const Eigen::ArrayXXd dev = (snap.mean.rho - ref.rho).cwiseAbs().array();
        const Eigen::ArrayXXd ratio = dev / (snap.se.array() + floor / threshold_se);
        rep.snapshot_times.push_back(snap.t);
        rep.max_abs_deviation.push_back(dev.maxCoeff());
        rep.max_se_ratio.push_back(ratio.maxCoeff());
        if (rep.max_se_ratio.back() > threshold_se) rep.elementwise_pass = false;
    }
    const AnalyticPurity analytic(rho0, influence);
    double signal = 0.0, worst_se = 0.0;
    for (std::size_t k = 0; k < stats.times.size(); ++k) {
        const double r_ref = analytic(stats.times[k]);
        const double gap = stats.r_mc[k] - r_ref;
        const double denom = stats.r_mc_se[k] + floor / threshold_se;
        rep.purity_gap.push_back(gap);
        rep.purity_gap_se_ratio.push_back(std::abs(gap) / denom);
        if (std::abs(gap) > threshold_se * denom) rep.purity_pass = false;
        signal = std::max(signal, 1.0 - r_ref);
        worst_se = std::max(worst_se, stats.r_mc_se[k]);
    }
    rep.insufficient_statistics =
        cfg.n_realizations < kMinReliableRealizations || (signal > 0.0 && worst_se >= 0.5 * signal);
    return rep;
}

struct ErgodicPoint {
    double separation = 0.0;
    std::size_t windows = 0;
    double mean_sq_overlap = 1.0;
    double se = 0.0;
    /// sum_jk w_j w_k exp(-F_{d/v}(y_j - y_k)) for the realization's statistics.
    double predicted = 1.0;
    /// Same with the saturated cone F_inf of the line model.
    double plateau = 1.0;
};

struct ErgodicOptions {
    /// Distance between window starts; defaults to d + 8 sigma + 2 ell.
    std::optional<double> pitch;
    std::size_t max_windows = 0;  // 0: as many as fit
};

inline double correlation_length(const CorrelationModel& model) {
    return std::visit(overloaded{
                          [](const GaussianCorr& m) { return m.ell; },
                          [](const PeriodicGaussianCorr& m) { return m.ell; },
                          [](const DeltaCorr&) { return 0.0; },
                      },
                      model);
}

/// lim_{t -> inf} F_t(x) of the line model.
inline double influence_saturated(const CorrelationModel& model, const PhysParams& p, double x) {
    return std::visit(overloaded{
                          [&](const GaussianCorr& m) {
                              return kSqrtPi * m.C0 * m.ell * m.ell / (p.hbar * p.hbar * p.v * p.v) *
                                     (fbar(x / m.ell) - fbar(0.0));
                          },
                          [&](const PeriodicGaussianCorr& m) {
                              return kSqrtPi * m.C0 * m.ell * m.ell / (p.hbar * p.hbar * p.v * p.v) *
                                     (fbar(x / m.ell) - fbar(0.0));
                          },
                          [&](const DeltaCorr& m) { return m.C0 * std::abs(x) / (p.v * p.v * p.hbar * p.hbar); },
                      },
                      model);
}

/// Compares a packet with itself after it has drifted a further distance d
/// through one realization. Windows along the ring play the role of
/// independent realizations; the mean squared overlap is set against the
/// ensemble coherence factor.
inline std::vector<ErgodicPoint> ergodic_check(const DisorderRealization& real, const GaussianPacket& packet,
                                               const PhysParams& params, const std::vector<double>& separations,
                                               const ErgodicOptions& opts = {}) {
    packet.validate();
    params.validate();
    if (!real.model) throw ValidationError("ergodic_check: realization carries no correlation model");
    const CorrelationModel& model = *real.model;
    const Grid& grid = real.grid;
    const double ell = correlation_length(model);
    const double dx = grid.dx();
    const auto half_width = static_cast<long>(std::ceil(6.0 * packet.sigma / dx));
    const std::size_t npts = static_cast<std::size_t>(2 * half_width + 1);
    std::vector<double> w(npts), yv(npts);
    double wsum = 0.0;
    for (long j = -half_width; j <= half_width; ++j) {
        const double yy = dx * static_cast<double>(j);
        const auto jj = static_cast<std::size_t>(j + half_width);
        yv[jj] = yy;
        w[jj] = std::exp(-yy * yy / (2.0 * packet.sigma * packet.sigma));
        wsum += w[jj];
    }
    for (auto& v : w) v /= wsum;
    const DisorderInfluence influence = sampled_influence(model, grid, params);

    std::vector<ErgodicPoint> out;
    for (double d : separations) {
        detail::require(std::isfinite(d) && d >= 0.0, "ergodic_check: separations must be >= 0");
        if (d > 0.0 && d < 3.0 * ell)
            throw ValidationError("ergodic_check: separation " + detail::fmt17(d) +
                                  " is below 3 ell; the disorder memory is not yet lost");
        ErgodicPoint pt;
        pt.separation = d;
        const double pitch = opts.pitch.value_or(d + 8.0 * packet.sigma + 2.0 * std::max(ell, dx));
        detail::require(pitch > 0.0, "ergodic_check: window pitch must be > 0");
        const auto windows = static_cast<std::size_t>(std::floor(grid.length() / pitch));
        detail::require(windows >= 2, "ergodic_check: ring too short for two windows at separation " +
                                          detail::fmt17(d));
        pt.windows = opts.max_windows ? std::min(windows, opts.max_windows) : windows;
        if (d == 0.0) {
            out.push_back(pt);
            continue;
        }
        const Eigen::VectorXd ahead = real.antiderivative_shifted(-d);  // Phi(x_i + d)
        const double scale = -1.0 / (params.hbar * params.v);
        const auto nl = static_cast<long>(grid.size());
        Eigen::VectorXd sq(static_cast<Eigen::Index>(pt.windows));
        for (std::size_t win = 0; win < pt.windows; ++win) {
            const long start = static_cast<long>(std::llround(pitch * static_cast<double>(win) / dx)) + half_width;
            cplx o = 0.0;
            for (std::size_t j = 0; j < npts; ++j) {
                const long idx = ((start + static_cast<long>(j) - half_width) % nl + nl) % nl;
                o += w[j] * std::polar(1.0, scale * (ahead[idx] - real.antiderivative[idx]));
            }
            sq[static_cast<Eigen::Index>(win)] = std::norm(o);
        }
        pt.mean_sq_overlap = sq.mean();
        pt.se = detail::sample_sd(sq) / std::sqrt(static_cast<double>(sq.size()));
        double pred = 0.0, plat = 0.0;
        for (std::size_t j = 0; j < npts; ++j)
            for (std::size_t l = 0; l < npts; ++l) {
                const double sep = yv[j] - yv[l];
                pred += w[j] * w[l] * std::exp(-influence.value(d / params.v, sep));
                plat += w[j] * w[l] * std::exp(-influence_saturated(model, params, sep));
            }
        pt.predicted = pred;
        pt.plateau = plat;
        out.push_back(pt);
    }
    return out;
}

inline void write_ensemble_csv(std::ostream& os, const EnsembleStats& st) {
    using detail::fmt17;
    os << "t,r_mc,r_mc_se,r_analytic,r_plateau,var_p_mc,var_p_analytic,mean_x_mc\n";
    for (std::size_t k = 0; k < st.times.size(); ++k)
        os << fmt17(st.times[k]) << ',' << fmt17(st.r_mc[k]) << ',' << fmt17(st.r_mc_se[k]) << ','
           << fmt17(st.r_analytic[k]) << ',' << fmt17(st.r_plateau) << ',' << fmt17(st.var_p_mc[k]) << ','
           << fmt17(st.var_p_analytic[k]) << ',' << fmt17(st.mean_x_mc[k]) << '\n';
}

/// Text dump: a header line `n t`, then one line per row holding the
/// row-major pairs `re,im` separated by commas.
inline void write_density_matrix(std::ostream& os, const DensityMatrix& dm, double t) {
    using detail::fmt17;
    const Eigen::Index n = dm.rho.rows();
    os << n << ' ' << fmt17(t) << '\n';
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j) os << ',';
            os << fmt17(dm.rho(i, j).real()) << ',' << fmt17(dm.rho(i, j).imag());
        }
        os << '\n';
    }
}

}  // namespace chiralflow
