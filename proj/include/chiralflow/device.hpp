#pragma once

// Device-level consequences of dephasing: balanced beam-splitter
// interference with imperfectly matched inputs, and the bulk-gap condition.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "chiralflow/detail/format.hpp"
#include "chiralflow/error.hpp"
#include "chiralflow/grid.hpp"

namespace chiralflow {

struct OutputProbabilities {
    double p_plus = 0.5;
    double p_minus = 0.5;
};

/// prob_pm = (1 pm Im[<psi|psi'> e^{i phi}]) / 2.
inline OutputProbabilities beam_splitter_probs(std::complex<double> overlap, double phi) {
    if (!(std::abs(overlap) <= 1.0 + 1e-12))
        throw ValidationError("beam_splitter_probs: |overlap| = " + detail::fmt17(std::abs(overlap)) + " exceeds 1");
    const double im = (overlap * std::polar(1.0, phi)).imag();
    const double p_plus = 0.5 * (1.0 + im);
    return {p_plus, 1.0 - p_plus};
}

/// Disorder-averaged output probabilities with visibility (r + 1)/2.
inline OutputProbabilities beam_splitter_averaged(double r, double phi) {
    if (!(r > 0.0 && r <= 1.0 + 1e-12))
        throw ValidationError("beam_splitter_averaged: purity r = " + detail::fmt17(r) + " outside (0, 1]");
    const double p_plus = 0.5 * (1.0 + 0.5 * (r + 1.0) * std::sin(phi));
    return {p_plus, 1.0 - p_plus};
}

struct PairAverage {
    double phi = 0.0;
    /// Mean of p_plus over ordered pairs of distinct realizations.
    double p_plus = 0.5;
    double p_plus_se = 0.0;
    /// Mean |<psi_a|psi_b>|^2 over the same pairs.
    double r_pairs = 1.0;
    double p_plus_averaged = 0.5;
};

/// Realization-pair average of beam_splitter_probs on an overlap matrix of
/// independently disordered copies. Each pair's global phase is taken as
/// the interferometer's phase reference, so the overlap enters by modulus.
/// The standard error is a bootstrap over realizations.
inline PairAverage beam_splitter_pair_average(const Eigen::MatrixXcd& overlaps, double phi,
                                              std::size_t resamples = 200, std::uint64_t seed = 0x5EEDB007ULL) {
    const Eigen::Index m = overlaps.rows();
    detail::require(m >= 2 && overlaps.cols() == m, "beam_splitter_pair_average: need a square matrix of size >= 2");
    detail::require(resamples >= 2, "beam_splitter_pair_average: resamples must be >= 2");
    Eigen::MatrixXd p(m, m), sq(m, m);
    for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index i = 0; i < m; ++i) {
            const double mod = std::min(1.0, std::abs(overlaps(i, j)));
            p(i, j) = i == j ? 0.0 : beam_splitter_probs(mod, phi).p_plus;
            sq(i, j) = i == j ? 0.0 : mod * mod;
        }
    const double pairs = static_cast<double>(m) * static_cast<double>(m - 1);
    PairAverage out;
    out.phi = phi;
    out.p_plus = p.sum() / pairs;
    out.r_pairs = sq.sum() / pairs;
    out.p_plus_averaged = beam_splitter_averaged(out.r_pairs, phi).p_plus;

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, m - 1);
    Eigen::VectorXd stats(static_cast<Eigen::Index>(resamples));
    Eigen::VectorXd c(m);
    for (std::size_t b = 0; b < resamples; ++b) {
        c.setZero();
        for (Eigen::Index i = 0; i < m; ++i) c[pick(rng)] += 1.0;
        const double weight = c.sum() * c.sum() - c.squaredNorm();
        stats[static_cast<Eigen::Index>(b)] = c.dot(p * c) / weight;
    }
    const double mean = stats.mean();
    out.p_plus_se = std::sqrt((stats.array() - mean).square().sum() / static_cast<double>(resamples - 1));
    return out;
}

struct GapCheck {
    double lhs = 0.0;     // hbar^2/4 sigma^2 + 2 C0/v^2
    double rhs = 0.0;     // Delta^2/v^2
    bool satisfied = false;
    double margin = 0.0;  // rhs / lhs
};

/// Broadened momentum variance of a packet centered at the gap center
/// against the gap window.
inline GapCheck gap_condition(double sigma, double C0, double v, double hbar, double Delta) {
    detail::require(std::isfinite(sigma) && sigma > 0.0, "gap_condition: sigma must be > 0");
    detail::require(C0 >= 0.0 && !std::isnan(C0), "gap_condition: C0 must be >= 0");
    detail::require(std::isfinite(v) && v > 0.0, "gap_condition: v must be > 0");
    detail::require(std::isfinite(hbar) && hbar > 0.0, "gap_condition: hbar must be > 0");
    detail::require(std::isfinite(Delta) && Delta >= 0.0, "gap_condition: Delta must be >= 0");
    GapCheck g;
    g.lhs = hbar * hbar / (4.0 * sigma * sigma) + 2.0 * C0 / (v * v);
    g.rhs = Delta * Delta / (v * v);
    g.satisfied = g.lhs < g.rhs;
    g.margin = g.rhs / g.lhs;
    return g;
}

}  // namespace chiralflow
