#pragma once

// Disorder statistics and Gaussian random potentials with prescribed
// two-point correlations, synthesized mode by mode on a periodic grid.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "chiralflow/detail/format.hpp"
#include "chiralflow/error.hpp"
#include "chiralflow/grid.hpp"
#include "chiralflow/spectral.hpp"

namespace chiralflow {

/// C(x) = C0 exp[-(x/ell)^2]
struct GaussianCorr {
    double C0 = 0.0;
    double ell = 1.0;
    friend bool operator==(const GaussianCorr&, const GaussianCorr&) = default;
};

/// C(x) = C0 delta(x)
struct DeltaCorr {
    double C0 = 0.0;
    friend bool operator==(const DeltaCorr&, const DeltaCorr&) = default;
};

/// C(x) = C0 sum_n exp[-((x + nL)/ell)^2], a ring of circumference L.
struct PeriodicGaussianCorr {
    double C0 = 0.0;
    double ell = 1.0;
    double L = 17.0;
    friend bool operator==(const PeriodicGaussianCorr&, const PeriodicGaussianCorr&) = default;
};

using CorrelationModel = std::variant<GaussianCorr, DeltaCorr, PeriodicGaussianCorr>;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

inline void validate(const CorrelationModel& model) {
    std::visit(overloaded{
                   [](const GaussianCorr& m) {
                       detail::require(std::isfinite(m.C0) && m.C0 >= 0.0, "GaussianCorr: C0 must be >= 0");
                       detail::require(std::isfinite(m.ell) && m.ell > 0.0, "GaussianCorr: ell must be > 0");
                   },
                   [](const DeltaCorr& m) {
                       detail::require(std::isfinite(m.C0) && m.C0 >= 0.0, "DeltaCorr: C0 must be >= 0");
                   },
                   [](const PeriodicGaussianCorr& m) {
                       detail::require(std::isfinite(m.C0) && m.C0 >= 0.0,
                                       "PeriodicGaussianCorr: C0 must be >= 0");
                       detail::require(std::isfinite(m.ell) && m.ell > 0.0,
                                       "PeriodicGaussianCorr: ell must be > 0");
                       detail::require(std::isfinite(m.L) && m.L > 4.0 * m.ell,
                                       "PeriodicGaussianCorr: L must exceed 4 ell");
                   },
               },
               model);
}

inline double strength(const CorrelationModel& model) {
    return std::visit([](const auto& m) { return m.C0; }, model);
}

inline std::string model_name(const CorrelationModel& model) {
    return std::visit(overloaded{
                          [](const GaussianCorr&) { return std::string("gaussian"); },
                          [](const DeltaCorr&) { return std::string("delta"); },
                          [](const PeriodicGaussianCorr&) { return std::string("periodic_gaussian"); },
                      },
                      model);
}

inline double correlation(const CorrelationModel& model, double x) {
    validate(model);
    return std::visit(
        overloaded{
            [x](const GaussianCorr& m) { return m.C0 * std::exp(-(x / m.ell) * (x / m.ell)); },
            [](const DeltaCorr&) -> double {
                throw ValidationError("correlation: delta correlations have no pointwise value");
            },
            [x](const PeriodicGaussianCorr& m) {
                double r = std::fmod(x, m.L);
                if (r >= 0.5 * m.L) r -= m.L;
                if (r < -0.5 * m.L) r += m.L;
                const int images = static_cast<int>(std::ceil(6.0 * m.ell / m.L)) + 1;
                double sum = 0.0;
                for (int n = -images; n <= images; ++n) {
                    const double y = (r + n * m.L) / m.ell;
                    sum += std::exp(-y * y);
                }
                return m.C0 * sum;
            },
        },
        model);
}

/// G(q) = (1/2 pi hbar) int dx e^{-iqx/hbar} C(x) for the continuous models.
inline double momentum_transfer(const CorrelationModel& model, double q, double hbar = 1.0) {
    validate(model);
    return std::visit(
        overloaded{
            [=](const GaussianCorr& m) {
                const double z = q * m.ell / hbar;
                return m.C0 * m.ell / (2.0 * std::sqrt(std::numbers::pi) * hbar) * std::exp(-0.25 * z * z);
            },
            [=](const DeltaCorr& m) { return m.C0 / (2.0 * std::numbers::pi * hbar); },
            [](const PeriodicGaussianCorr&) -> double {
                throw ValidationError(
                    "momentum_transfer: periodic correlations have a discrete spectrum, use "
                    "momentum_transfer_weights");
            },
        },
        model);
}

struct SpectralWeight {
    double q;
    double g;
};

/// Discrete momentum transfer of the ring model, q_n = 2 pi hbar n / L with
/// weights g_n summing to C(0). Modes below rel_cutoff * g_0 are dropped.
inline std::vector<SpectralWeight> momentum_transfer_weights(const PeriodicGaussianCorr& m,
                                                             double hbar = 1.0,
                                                             double rel_cutoff = 1e-20) {
    validate(CorrelationModel{m});
    const double pi = std::numbers::pi;
    const double g0 = m.C0 * m.ell * std::sqrt(pi) / m.L;
    const long nmax =
        static_cast<long>(std::ceil(std::sqrt(-std::log(rel_cutoff)) * m.L / (pi * m.ell))) + 1;
    std::vector<SpectralWeight> out;
    out.reserve(static_cast<std::size_t>(2 * nmax + 1));
    for (long n = -nmax; n <= nmax; ++n) {
        const double z = pi * static_cast<double>(n) * m.ell / m.L;
        out.push_back({2.0 * pi * hbar * static_cast<double>(n) / m.L, g0 * std::exp(-z * z)});
    }
    return out;
}

/// Model actually synthesized on `grid`: non-periodic Gaussian correlations
/// become one period of the ring model with L equal to the grid length.
inline CorrelationModel effective_model(const CorrelationModel& model, const Grid& grid) {
    if (const auto* g = std::get_if<GaussianCorr>(&model))
        return PeriodicGaussianCorr{g->C0, g->ell, grid.length()};
    return model;
}

namespace detail {

inline long ring_ratio(const PeriodicGaussianCorr& m, const Grid& grid) {
    const double ratio = grid.length() / m.L;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * ratio)
        throw ValidationError("sample_realization: grid length " + std::to_string(grid.length()) +
                              " is not a multiple of the ring circumference " + std::to_string(m.L));
    return static_cast<long>(rounded);
}

}  // namespace detail

/// Variance E|a_m|^2 of the amplitude of grid mode m, V(x) = sum_m a_m
/// e^{i k_m (x - x_min)}. The Nyquist amplitude is real and collects both
/// aliases.
inline Eigen::VectorXd mode_variances(const CorrelationModel& model, const Grid& grid) {
    validate(model);
    require_periodic(grid, "mode_variances");
    const std::size_t n = grid.size();
    Eigen::VectorXd var = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    const CorrelationModel eff = effective_model(model, grid);
    if (const auto* d = std::get_if<DeltaCorr>(&eff)) {
        var.setConstant(d->C0 / grid.length());
        return var;
    }
    if (std::holds_alternative<GaussianCorr>(model))
        detail::require(grid.length() > 8.0 * std::get<GaussianCorr>(model).ell,
                        "sample_realization: grid length must exceed 8 ell for Gaussian correlations");
    const auto& ring = std::get<PeriodicGaussianCorr>(eff);
    const long ratio = detail::ring_ratio(ring, grid);
    const double pi = std::numbers::pi;
    const double g0 = ring.C0 * ring.ell * std::sqrt(pi) / ring.L;
    for (std::size_t m = 0; m < n; ++m) {
        const long idx = grid.mode_index(m);
        if (idx % ratio != 0) continue;
        const double z = pi * static_cast<double>(idx / ratio) * ring.ell / ring.L;
        const double g = g0 * std::exp(-z * z);
        var[static_cast<Eigen::Index>(m)] = grid.has_nyquist(m) ? 2.0 * g : g;
    }
    return var;
}

/// Covariance at every grid lag implied by the mode variances, without
/// sampling: sum_m var_m cos(k_m * lag * dx).
inline Eigen::VectorXd population_covariance(const CorrelationModel& model, const Grid& grid) {
    const Eigen::VectorXd var = mode_variances(model, grid);
    const Eigen::VectorXcd cov = Eigen::VectorXcd(var.cast<cplx>());
    const Eigen::VectorXcd out = spectral::inverse(cov) * static_cast<double>(grid.size());
    return out.real();
}

/// splitmix64 finalizer: a bijection on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Counter-based sub-seed of realization `index`; distinct indices give
/// distinct sub-seeds for a fixed master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return mix64(master + (index + 1) * 0x9E3779B97F4A7C15ULL);
}

/// One sampled potential on a periodic grid, with its exact antiderivative.
struct DisorderRealization {
    Grid grid;
    Eigen::VectorXd potential;       // V(x_i)
    Eigen::VectorXd antiderivative;  // Phi(x_i) = int_{x_min}^{x_i} V
    std::uint64_t seed = 0;
    std::optional<CorrelationModel> model;
    Eigen::VectorXcd modes;  // a_m, FFT order

    double mean_mode() const { return modes[0].real(); }

    /// Band-limited interpolant of V.
    double potential_at(double x) const {
        const double u = x - grid.x_min();
        double sum = mean_mode();
        const std::size_t n = grid.size();
        for (std::size_t m = 1; m < n; ++m) {
            if (grid.mode_index(m) < 0 && !grid.has_nyquist(m)) continue;
            const double k = grid.wavenumber(m);
            if (grid.has_nyquist(m))
                sum += modes[static_cast<Eigen::Index>(m)].real() * std::cos(k * u);
            else
                sum += 2.0 * (modes[static_cast<Eigen::Index>(m)] * std::polar(1.0, k * u)).real();
        }
        return sum;
    }

    /// int_{x_min}^{x} V for any real x; the zero mode contributes a linear
    /// term, so windings around the ring are accounted for automatically.
    double antiderivative_at(double x) const {
        const double u = x - grid.x_min();
        double sum = mean_mode() * u;
        const std::size_t n = grid.size();
        for (std::size_t m = 1; m < n; ++m) {
            if (grid.mode_index(m) < 0 && !grid.has_nyquist(m)) continue;
            const double k = grid.wavenumber(m);
            const cplx a = modes[static_cast<Eigen::Index>(m)];
            if (grid.has_nyquist(m))
                sum += a.real() * std::sin(k * u) / k;
            else
                sum += 2.0 * (a / cplx(0.0, k) * (std::polar(1.0, k * u) - 1.0)).real();
        }
        return sum;
    }

    /// Phi(x_i - s) at every grid point.
    Eigen::VectorXd antiderivative_shifted(double s) const {
        const std::size_t n = grid.size();
        const auto ni = static_cast<Eigen::Index>(n);
        Eigen::VectorXcd p(ni);
        double offset = 0.0;
        double nyquist = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            const auto mi = static_cast<Eigen::Index>(m);
            if (m == 0 || grid.has_nyquist(m)) {
                p[mi] = 0.0;
                if (grid.has_nyquist(m)) nyquist = modes[mi].real() / grid.wavenumber(m);
                continue;
            }
            const double k = grid.wavenumber(m);
            const cplx pm = modes[mi] / cplx(0.0, k);
            offset -= pm.real();
            p[mi] = pm * std::polar(1.0, -k * s);
        }
        const Eigen::VectorXcd periodic = spectral::inverse(p) * static_cast<double>(n);
        const double nyq_phase = s == 0.0 ? 0.0 : std::sin(std::numbers::pi * s / grid.dx());
        Eigen::VectorXd out(ni);
        for (std::size_t i = 0; i < n; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            const double sign = (i % 2 == 0) ? 1.0 : -1.0;
            out[ii] = mean_mode() * (grid.dx() * static_cast<double>(i) - s) + periodic[ii].real() +
                      offset + nyquist * sign * nyq_phase;
        }
        return out;
    }

    /// Builds a realization from samples of V on a periodic grid.
    static DisorderRealization from_potential(const Grid& grid, Eigen::VectorXd potential,
                                              std::uint64_t seed = 0,
                                              std::optional<CorrelationModel> model = std::nullopt) {
        require_periodic(grid, "DisorderRealization::from_potential");
        detail::require(static_cast<std::size_t>(potential.size()) == grid.size(),
                        "DisorderRealization::from_potential: sample count does not match grid");
        DisorderRealization r{grid, std::move(potential), {}, seed, std::move(model), {}};
        r.modes = spectral::forward(Eigen::VectorXcd(r.potential.cast<cplx>())) /
                  static_cast<double>(grid.size());
        if (grid.size() % 2 == 0) {
            const auto nyq = static_cast<Eigen::Index>(grid.size() / 2);
            r.modes[nyq] = r.modes[nyq].real();
        }
        r.modes[0] = r.modes[0].real();
        r.antiderivative = r.antiderivative_shifted(0.0);
        return r;
    }
};

namespace detail {

inline DisorderRealization realization_from_modes(const Grid& grid, Eigen::VectorXcd modes,
                                                  std::uint64_t seed, const CorrelationModel& model) {
    const std::size_t n = grid.size();
    const Eigen::VectorXcd field = spectral::inverse(modes) * static_cast<double>(n);
    const double scale = 1.0 + field.cwiseAbs().maxCoeff();
    if (field.imag().cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw NumericalError("sample_realization: synthesized field is not real");
    DisorderRealization r{grid, field.real(), {}, seed, model, std::move(modes)};
    r.antiderivative = r.antiderivative_shifted(0.0);
    return r;
}

}  // namespace detail

/// Samples a mean-zero stationary Gaussian potential. Pure in (model,
/// grid, seed). Gaussian correlations are synthesized as one period of the
/// ring model with L equal to the grid length (exact up to e^{-(L/ell)^2});
/// delta correlations as independent per-cell normals of variance C0/dx.
inline DisorderRealization sample_realization(const CorrelationModel& model, const Grid& grid,
                                              std::uint64_t seed) {
    validate(model);
    require_periodic(grid, "sample_realization");
    const std::size_t n = grid.size();
    const auto ni = static_cast<Eigen::Index>(n);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    if (const auto* d = std::get_if<DeltaCorr>(&model)) {
        const double sd = std::sqrt(d->C0 / grid.dx());
        Eigen::VectorXd v(ni);
        for (Eigen::Index i = 0; i < ni; ++i) v[i] = sd * normal(rng);
        return DisorderRealization::from_potential(grid, std::move(v), seed, model);
    }

    const Eigen::VectorXd var = mode_variances(model, grid);
    Eigen::VectorXcd modes = Eigen::VectorXcd::Zero(ni);
    modes[0] = std::sqrt(var[0]) * normal(rng);
    for (std::size_t m = 1; m < (n + 1) / 2; ++m) {
        const auto mi = static_cast<Eigen::Index>(m);
        const double re = normal(rng);
        const double im = normal(rng);
        const cplx a = std::sqrt(0.5 * var[mi]) * cplx(re, im);
        modes[mi] = a;
        modes[ni - mi] = std::conj(a);
    }
    if (n % 2 == 0) {
        const auto nyq = static_cast<Eigen::Index>(n / 2);
        modes[nyq] = std::sqrt(var[nyq]) * normal(rng);
    }
    return detail::realization_from_modes(grid, std::move(modes), seed, model);
}

struct FieldStats {
    double sample_mean = 0.0;
    double mean_se = 0.0;
    Eigen::VectorXd sample_cov;  // per lag 0..n-1
    Eigen::VectorXd cov_se;
    std::size_t n_samples = 0;
};

/// Ensemble mean and lag covariance, with standard errors taken from the
/// spread across realizations. The mean is known to vanish, so the lag
/// products are unbiased covariance estimators.
inline FieldStats accumulate_stats(std::span<const DisorderRealization> realizations) {
    detail::require(realizations.size() >= 2, "accumulate_stats: need at least 2 realizations");
    const Grid& grid = realizations.front().grid;
    const std::size_t n = grid.size();
    const auto ni = static_cast<Eigen::Index>(n);
    const double count = static_cast<double>(realizations.size());

    Eigen::VectorXd means(static_cast<Eigen::Index>(realizations.size()));
    Eigen::MatrixXd lagprod(ni, static_cast<Eigen::Index>(realizations.size()));
    for (std::size_t r = 0; r < realizations.size(); ++r) {
        const auto& real = realizations[r];
        require_same_grid(real.grid, grid, "accumulate_stats");
        const auto ri = static_cast<Eigen::Index>(r);
        means[ri] = real.potential.mean();
        const Eigen::VectorXcd spec = spectral::forward(Eigen::VectorXcd(real.potential.cast<cplx>()));
        const Eigen::VectorXcd power = spec.cwiseAbs2().cast<cplx>();
        lagprod.col(ri) = spectral::inverse(power).real() / static_cast<double>(n);
    }
    FieldStats s;
    s.n_samples = realizations.size();
    s.sample_mean = means.mean();
    s.mean_se = std::sqrt((means.array() - s.sample_mean).square().sum() / (count - 1.0) / count);
    s.sample_cov = lagprod.rowwise().mean();
    s.cov_se = ((lagprod.colwise() - s.sample_cov).array().square().rowwise().sum() /
                (count - 1.0) / count)
                   .sqrt();
    return s;
}

/// Debug dump: header `x,V,Phi`, one row per grid point.
inline void write_realization_csv(std::ostream& os, const DisorderRealization& r) {
    os << "x,V,Phi\n";
    for (std::size_t i = 0; i < r.grid.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        os << detail::fmt17(r.grid.x(i)) << ',' << detail::fmt17(r.potential[ii]) << ','
           << detail::fmt17(r.antiderivative[ii]) << '\n';
    }
}

}  // namespace chiralflow
