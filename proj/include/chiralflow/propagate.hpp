#pragma once

// Exact evolution of single disorder realizations and direct integration of
// the averaged master equation.

#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chiralflow/analytic.hpp"
#include "chiralflow/disorder.hpp"
#include "chiralflow/error.hpp"
#include "chiralflow/grid.hpp"
#include "chiralflow/model.hpp"
#include "chiralflow/quadrature.hpp"
#include "chiralflow/spectral.hpp"

namespace chiralflow {

struct EvolutionPlan {
    PhysParams params;
    Grid grid = Grid::periodic(-20.0, 40.0, 512);
    std::vector<double> times{0.0};

    void validate() const {
        params.validate();
        require_periodic(grid, "EvolutionPlan");
        detail::require(!times.empty() && times.front() == 0.0, "EvolutionPlan: times must start at 0");
        for (std::size_t i = 1; i < times.size(); ++i)
            detail::require(times[i] > times[i - 1], "EvolutionPlan: times must be strictly increasing");
    }
};

/// exp[-(i/hbar v)(Phi(x) - Phi(x - vt))] at every grid point.
inline Eigen::VectorXcd disorder_phase(const DisorderRealization& real, const PhysParams& params, double t) {
    const Eigen::VectorXd drop = real.antiderivative - real.antiderivative_shifted(params.v * t);
    const double scale = -1.0 / (params.hbar * params.v);
    Eigen::VectorXcd out(drop.size());
    for (Eigen::Index i = 0; i < drop.size(); ++i) out[i] = std::polar(1.0, scale * drop[i]);
    return out;
}

inline WaveFunction evolve_wavefunction(const WaveFunction& psi0, const DisorderRealization& real,
                                        const PhysParams& params, double t) {
    params.validate();
    require_same_grid(psi0.grid, real.grid, "evolve_wavefunction");
    require_periodic(psi0.grid, "evolve_wavefunction");
    WaveFunction out{psi0.grid, spectral::shift(psi0.amp, psi0.grid, params.v * t)};
    out.amp.array() *= disorder_phase(real, params, t).array();
    return out;
}

inline std::vector<WaveFunction> evolve_series(const WaveFunction& psi0, const DisorderRealization& real,
                                               const EvolutionPlan& plan) {
    plan.validate();
    require_same_grid(psi0.grid, plan.grid, "evolve_series");
    std::vector<WaveFunction> out;
    out.reserve(plan.times.size());
    for (double t : plan.times) out.push_back(evolve_wavefunction(psi0, real, plan.params, t));
    return out;
}

inline DensityMatrix evolve_density_matrix_single(const DensityMatrix& rho0, const DisorderRealization& real,
                                                  const PhysParams& params, double t) {
    params.validate();
    require_same_grid(rho0.grid, real.grid, "evolve_density_matrix_single");
    require_periodic(rho0.grid, "evolve_density_matrix_single");
    const Eigen::VectorXcd phase = disorder_phase(real, params, t);
    DensityMatrix out{rho0.grid, spectral::shift_both(rho0.rho, rho0.grid, params.v * t)};
    out.rho = phase.asDiagonal() * out.rho * phase.conjugate().asDiagonal();
    require_valid(out);
    return out;
}

enum class MasterMethod { rk4, exact_antidiagonal };

struct MasterEquationOptions {
    MasterMethod method = MasterMethod::rk4;
    /// Step for rk4; defaults to dx / (4 v).
    std::optional<double> dt;
    InfluenceMode rate_mode = InfluenceMode::closed_form;
    QuadratureOptions quadrature;
    /// Absolute tolerance of the time integral per lag (exact_antidiagonal).
    double time_tol = 1e-12;
};

/// Integrates d/dt rho = -v(d_x + d_x') rho - D_t(x - x') rho. The drift is
/// removed by working in the co-moving frame, where the equation is diagonal
/// in the lag and only the multiplicative kernel is integrated; the result
/// is translated back spectrally at every requested time.
inline std::vector<DensityMatrix> integrate_master_equation(const DensityMatrix& rho0, const CorrelationModel& model,
                                                            const PhysParams& params, std::span<const double> times,
                                                            const MasterEquationOptions& opts = {}) {
    params.validate();
    require_periodic(rho0.grid, "integrate_master_equation");
    require_valid(rho0);
    for (std::size_t i = 0; i < times.size(); ++i) {
        detail::check_time(times[i], "integrate_master_equation");
        if (i > 0) detail::require(times[i] >= times[i - 1], "integrate_master_equation: times must be sorted");
    }
    const Grid& grid = rho0.grid;
    const DisorderInfluence influence(model, params, opts.rate_mode, opts.quadrature);
    const auto n = static_cast<Eigen::Index>(grid.size());
    const Eigen::Index half = n / 2;
    Eigen::VectorXd lag_sep(half + 1);
    for (Eigen::Index l = 0; l <= half; ++l) lag_sep[l] = grid.separation(static_cast<long>(l));

    auto rates = [&](double t) {
        Eigen::VectorXd d(half + 1);
        for (Eigen::Index l = 0; l <= half; ++l) d[l] = influence.rate(t, lag_sep[l]);
        return d;
    };

    // Co-moving coherence factor per lag, y_l(0) = 1.
    Eigen::VectorXd y = Eigen::VectorXd::Ones(half + 1);
    Eigen::VectorXd exponent = Eigen::VectorXd::Zero(half + 1);
    double t_now = 0.0;
    const double dt_max = opts.dt.value_or(grid.dx() / (4.0 * params.v));
    detail::require(dt_max > 0.0, "integrate_master_equation: dt must be > 0");

    std::vector<DensityMatrix> out;
    out.reserve(times.size());
    for (double t_target : times) {
        if (opts.method == MasterMethod::rk4) {
            const double span = t_target - t_now;
            const auto steps = static_cast<long>(std::ceil(span / dt_max - 1e-12));
            const double h = steps > 0 ? span / static_cast<double>(steps) : 0.0;
            for (long s = 0; s < steps; ++s) {
                const double t0 = t_now + h * static_cast<double>(s);
                const Eigen::VectorXd d0 = rates(t0);
                const Eigen::VectorXd dm = rates(t0 + 0.5 * h);
                const Eigen::VectorXd d1 = rates(t0 + h);
                const Eigen::VectorXd k1 = -d0.cwiseProduct(y);
                const Eigen::VectorXd k2 = -dm.cwiseProduct(y + 0.5 * h * k1);
                const Eigen::VectorXd k3 = -dm.cwiseProduct(y + 0.5 * h * k2);
                const Eigen::VectorXd k4 = -d1.cwiseProduct(y + h * k3);
                y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                if (!y.allFinite()) throw NumericalError("integrate_master_equation: non-finite state");
            }
        } else if (t_target > t_now) {
            for (Eigen::Index l = 1; l <= half; ++l) {
                auto f = [&](double t) { return influence.rate(t, lag_sep[l]); };
                const auto r = adaptive_simpson(f, t_now, t_target, opts.time_tol, 4);
                if (!r.converged && r.error > opts.time_tol)
                    throw ConvergenceError("integrate_master_equation: rate integral did not converge", r.error);
                exponent[l] += r.value;
            }
            y = (-exponent.array()).exp().matrix();
        }
        t_now = t_target;
        if (std::abs(y[0] - 1.0) > 1e-6)
            throw NumericalError("integrate_master_equation: trace drift exceeds 1e-6");

        Eigen::VectorXd full(n);
        for (Eigen::Index l = 0; l < n; ++l) full[l] = y[l <= half ? l : n - l];
        DensityMatrix dm{grid, rho0.rho};
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < n; ++i) dm.rho(i, j) *= full[((i - j) % n + n) % n];
        dm.rho = spectral::shift_both(dm.rho, grid, params.v * t_now);
        require_valid(dm);
        out.push_back(std::move(dm));
    }
    return out;
}

struct LineIntegralMoments {
    /// raw[k] = E[I^k] for the dimensionless phase difference
    /// I = (1/hbar v) int_0^{vt} (V(x - u) - V(x' - u)) du; raw[0] = 1.
    std::array<double, 5> raw{1.0, 0.0, 0.0, 0.0, 0.0};
    std::array<double, 5> se{0.0, 0.0, 0.0, 0.0, 0.0};
    /// (-i)^k E[I^k] / k!, the terms of the cumulant-free expansion of the
    /// averaged phase factor.
    std::array<cplx, 5> remainder{};
    std::size_t n_samples = 0;
    Grid grid = Grid::periodic(0.0, 1.0, 8);
};

/// Periodic grid on which line_integral_moments samples the field.
inline Grid line_integral_grid(const CorrelationModel& model, double vt, double separation) {
    return std::visit(overloaded{
                          [&](const GaussianCorr& m) {
                              const double need = 2.0 * (vt + std::abs(separation)) + 16.0 * m.ell;
                              const auto n = std::bit_ceil(static_cast<std::size_t>(std::ceil(8.0 * need / m.ell)));
                              return Grid::periodic(0.0, need, std::max<std::size_t>(n, 64));
                          },
                          [&](const PeriodicGaussianCorr& m) {
                              const auto n = std::bit_ceil(static_cast<std::size_t>(std::ceil(8.0 * m.L / m.ell)));
                              return Grid::periodic(0.0, m.L, std::max<std::size_t>(n, 64));
                          },
                          [&](const DeltaCorr&) -> Grid {
                              throw ValidationError(
                                  "line_integral_moments: delta correlations have no sampling scale");
                          },
                      },
                      model);
}

inline LineIntegralMoments line_integral_moments(const CorrelationModel& model, const PhysParams& params, double t,
                                                 double x, double x_prime, std::size_t n_samples,
                                                 std::uint64_t seed) {
    validate(model);
    params.validate();
    detail::check_time(t, "line_integral_moments");
    detail::require(n_samples >= 1000, "line_integral_moments: n_samples must be >= 1000");
    const double vt = params.v * t;
    LineIntegralMoments out;
    out.n_samples = n_samples;
    out.grid = line_integral_grid(model, vt, x - x_prime);
    if (x != x_prime && t > 0.0) {
        const double c = out.grid.center();
        const double xa = c + 0.5 * (x - x_prime) + 0.5 * vt;
        const double xb = xa - (x - x_prime);
        const double scale = 1.0 / (params.hbar * params.v);
        std::array<double, 5> sum{}, sum2{};
        for (std::size_t s = 0; s < n_samples; ++s) {
            const auto real = sample_realization(model, out.grid, derive_seed(seed, s));
            const double value = scale * (real.antiderivative_at(xa) - real.antiderivative_at(xa - vt) -
                                          real.antiderivative_at(xb) + real.antiderivative_at(xb - vt));
            double pw = 1.0;
            for (std::size_t k = 1; k <= 4; ++k) {
                pw *= value;
                sum[k] += pw;
                sum2[k] += pw * pw;
            }
        }
        const double cnt = static_cast<double>(n_samples);
        for (std::size_t k = 1; k <= 4; ++k) {
            out.raw[k] = sum[k] / cnt;
            const double var = std::max(0.0, (sum2[k] - cnt * out.raw[k] * out.raw[k]) / (cnt - 1.0));
            out.se[k] = std::sqrt(var / cnt);
        }
    }
    const cplx minus_i(0.0, -1.0);
    double fact = 1.0;
    cplx pw = 1.0;
    for (std::size_t k = 0; k <= 4; ++k) {
        if (k > 0) {
            fact *= static_cast<double>(k);
            pw *= minus_i;
        }
        out.remainder[k] = pw * out.raw[k] / fact;
    }
    return out;
}

}  // namespace chiralflow
