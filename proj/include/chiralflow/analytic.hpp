#pragma once

// Closed-form disorder-averaged evolution under H = v p + V(x): disorder
// influence, averaged state, phase-space representations, purity and
// momentum broadening, and the rate kernel of the translation-covariant
// master equation.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chiralflow/disorder.hpp"
#include "chiralflow/error.hpp"
#include "chiralflow/grid.hpp"
#include "chiralflow/model.hpp"
#include "chiralflow/quadrature.hpp"
#include "chiralflow/spectral.hpp"

namespace chiralflow {

inline constexpr double kSqrtPi = 1.7724538509055160273;

/// sin(z)/z with sinc(0) = 1.
inline double sinc(double z) noexcept {
    if (std::abs(z) < 1e-4) {
        const double z2 = z * z;
        return 1.0 - z2 / 6.0 + z2 * z2 / 120.0;
    }
    return std::sin(z) / z;
}

/// fbar(x) - |x|, computed without cancellation.
inline double fbar_tail(double x) noexcept {
    const double a = std::abs(x);
    return std::exp(-a * a) / kSqrtPi - a * std::erfc(a);
}

/// fbar(x) = x erf(x) + exp(-x^2)/sqrt(pi).
inline double fbar(double x) noexcept { return std::abs(x) + fbar_tail(x); }

/// Disorder influence for Gaussian correlations,
///   (sqrt(pi) C0 ell^2 / 2 hbar^2 v^2) {2 fbar(T) + 2 fbar(X) - fbar(X - T) - fbar(X + T) - 2 fbar(0)}
/// with T = vt/ell and X = x/ell. The |.| parts of fbar combine into
/// 2 min(T, |X|), the cone; only the erfc tails are summed numerically.
inline double influence_gaussian(double C0, double ell, double v, double hbar, double t, double x) {
    if (t == 0.0 || x == 0.0) return 0.0;
    const double T = v * t / ell;
    const double X = x / ell;
    const double cone = 2.0 * std::min(std::abs(T), std::abs(X));
    const double tails = 2.0 * fbar_tail(T) + 2.0 * fbar_tail(X) - fbar_tail(X - T) -
                         fbar_tail(X + T) - 2.0 / kSqrtPi;
    return kSqrtPi * C0 * ell * ell / (2.0 * hbar * hbar * v * v) * std::max(0.0, cone + tails);
}

/// delta-correlated limit: (C0 / v^2 hbar^2) min(|vt|, |x|).
inline double influence_delta(double C0, double v, double hbar, double t, double x) {
    return C0 / (v * v * hbar * hbar) * std::min(std::abs(v * t), std::abs(x));
}

/// d/dt of influence_gaussian.
inline double rate_gaussian(double C0, double ell, double v, double hbar, double t, double x) {
    const double T = v * t / ell;
    const double X = x / ell;
    return kSqrtPi * C0 * ell / (2.0 * hbar * hbar * v) *
           (2.0 * std::erf(T) + std::erf(X - T) - std::erf(X + T));
}

inline double rate_delta(double C0, double v, double hbar, double t, double x) {
    return std::abs(x) > std::abs(v * t) ? C0 / (v * hbar * hbar) : 0.0;
}

struct QuadratureOptions {
    double abs_tol = 1e-10;
    /// Upper momentum cutoff; required for delta correlations (flat G).
    std::optional<double> q_max;
};

namespace detail {

inline double gaussian_q_max(double ell, double v, double hbar, double t, const QuadratureOptions& o) {
    if (o.q_max) return *o.q_max;
    // G(q)/G(0) = exp(-(q ell / 2 hbar)^2) < 1e-17 beyond 12.6 hbar/ell.
    const double tail = 2.0 * std::sqrt(17.0 * std::log(10.0)) * hbar / ell;
    return std::max({8.0 * hbar / ell, 40.0 * hbar / (v * t + ell), tail});
}

template <class F>
double integrate_even(F&& f, double q_max, double scale_hint, double tol, const char* who) {
    // Panels resolve the cos(qx) and sinc oscillations before refinement.
    const auto panels =
        static_cast<std::size_t>(std::ceil(q_max * scale_hint / std::numbers::pi)) * 2 + 16;
    const QuadratureResult r = adaptive_simpson(f, 0.0, q_max, 0.5 * tol, panels);
    if (!r.converged && r.error > 0.5 * tol)
        throw ConvergenceError(std::string(who) + ": quadrature did not converge", 2.0 * r.error);
    return 2.0 * r.value;
}

inline void check_time(double t, const char* who) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError(std::string(who) + ": t must be >= 0");
}

}  // namespace detail

/// Discrete-sum influence for the ring model,
///   (t^2/hbar^2) sum_n g_n sinc^2(q_n v t / 2 hbar) (1 - cos(q_n x / hbar)).
inline double influence_discrete(const PeriodicGaussianCorr& m, const PhysParams& p, double t, double x) {
    detail::check_time(t, "influence_discrete");
    double sum = 0.0;
    for (const auto& w : momentum_transfer_weights(m, p.hbar)) {
        if (w.q <= 0.0) continue;
        const double s = sinc(w.q * p.v * t / (2.0 * p.hbar));
        sum += w.g * s * s * (1.0 - std::cos(w.q * x / p.hbar));
    }
    return 2.0 * t * t / (p.hbar * p.hbar) * sum;
}

inline double rate_discrete(const PeriodicGaussianCorr& m, const PhysParams& p, double t, double x) {
    detail::check_time(t, "rate_discrete");
    double sum = 0.0;
    for (const auto& w : momentum_transfer_weights(m, p.hbar)) {
        if (w.q <= 0.0) continue;
        sum += w.g * sinc(w.q * p.v * t / p.hbar) * (1.0 - std::cos(w.q * x / p.hbar));
    }
    return 2.0 * 2.0 * t / (p.hbar * p.hbar) * sum;
}

/// Influence from its integral definition
///   (t^2/hbar^2) int dq G(q) sinc^2(q v t / 2 hbar) (1 - cos(q x / hbar));
/// the ring model uses the discrete sum over its momentum lattice.
inline double influence_quadrature(const CorrelationModel& model, const PhysParams& p, double t, double x,
                                   const QuadratureOptions& opts = {}) {
    validate(model);
    p.validate();
    detail::check_time(t, "influence_quadrature");
    if (const auto* ring = std::get_if<PeriodicGaussianCorr>(&model)) return influence_discrete(*ring, p, t, x);
    if (t == 0.0 || x == 0.0) return 0.0;
    double q_max = 0.0;
    if (const auto* g = std::get_if<GaussianCorr>(&model)) {
        q_max = detail::gaussian_q_max(g->ell, p.v, p.hbar, t, opts);
    } else {
        if (!opts.q_max)
            throw ValidationError("influence_quadrature: delta correlations need an explicit q_max");
        q_max = *opts.q_max;
    }
    const double pref = t * t / (p.hbar * p.hbar);
    auto integrand = [&](double q) {
        const double s = sinc(q * p.v * t / (2.0 * p.hbar));
        return momentum_transfer(model, q, p.hbar) * s * s * (1.0 - std::cos(q * x / p.hbar));
    };
    const double hint = (std::abs(x) + p.v * t) / p.hbar;
    return pref * detail::integrate_even(integrand, q_max, hint, opts.abs_tol / pref, "influence_quadrature");
}

/// Rate D_t(x) = int dq (2 t G(q)/hbar^2) sinc(q v t/hbar) (1 - cos(q x/hbar)),
/// the multiplicative dissipator of the averaged dynamics in position
/// representation; D_t = d/dt F_t.
inline double rate_kernel(const CorrelationModel& model, const PhysParams& p, double t, double x,
                          const QuadratureOptions& opts = {}) {
    validate(model);
    p.validate();
    detail::check_time(t, "rate_kernel");
    if (const auto* ring = std::get_if<PeriodicGaussianCorr>(&model)) return rate_discrete(*ring, p, t, x);
    if (t == 0.0 || x == 0.0) return 0.0;
    double q_max = 0.0;
    if (const auto* g = std::get_if<GaussianCorr>(&model)) {
        q_max = detail::gaussian_q_max(g->ell, p.v, p.hbar, t, opts);
    } else {
        if (!opts.q_max) throw ValidationError("rate_kernel: delta correlations need an explicit q_max");
        q_max = *opts.q_max;
    }
    const double pref = 2.0 * t / (p.hbar * p.hbar);
    auto integrand = [&](double q) {
        return momentum_transfer(model, q, p.hbar) * sinc(q * p.v * t / p.hbar) *
               (1.0 - std::cos(q * x / p.hbar));
    };
    const double hint = (std::abs(x) + p.v * t) / p.hbar;
    return pref * detail::integrate_even(integrand, q_max, hint, opts.abs_tol / pref, "rate_kernel");
}

enum class InfluenceMode { closed_form, quadrature, discrete_sum };

/// Evaluator of F_t(x) and its rate for one correlation model.
class DisorderInfluence {
public:
    DisorderInfluence(CorrelationModel model, PhysParams params, InfluenceMode mode = InfluenceMode::closed_form,
                      QuadratureOptions opts = {})
        : model_(std::move(model)), params_(params), mode_(mode), opts_(opts) {
        validate(model_);
        params_.validate();
        if (mode_ == InfluenceMode::discrete_sum && !std::holds_alternative<PeriodicGaussianCorr>(model_))
            throw ValidationError("DisorderInfluence: discrete_sum mode needs periodic correlations");
    }

    const CorrelationModel& model() const noexcept { return model_; }
    const PhysParams& params() const noexcept { return params_; }
    InfluenceMode mode() const noexcept { return mode_; }

    double value(double t, double x) const {
        detail::check_time(t, "DisorderInfluence::value");
        if (mode_ == InfluenceMode::quadrature) return influence_quadrature(model_, params_, t, x, opts_);
        return std::visit(overloaded{
                              [&](const GaussianCorr& m) {
                                  return influence_gaussian(m.C0, m.ell, params_.v, params_.hbar, t, x);
                              },
                              [&](const DeltaCorr& m) { return influence_delta(m.C0, params_.v, params_.hbar, t, x); },
                              [&](const PeriodicGaussianCorr& m) { return influence_discrete(m, params_, t, x); },
                          },
                          model_);
    }

    double rate(double t, double x) const {
        detail::check_time(t, "DisorderInfluence::rate");
        if (mode_ == InfluenceMode::quadrature) return rate_kernel(model_, params_, t, x, opts_);
        return std::visit(overloaded{
                              [&](const GaussianCorr& m) {
                                  return rate_gaussian(m.C0, m.ell, params_.v, params_.hbar, t, x);
                              },
                              [&](const DeltaCorr& m) { return rate_delta(m.C0, params_.v, params_.hbar, t, x); },
                              [&](const PeriodicGaussianCorr& m) { return rate_discrete(m, params_, t, x); },
                          },
                          model_);
    }

    /// F_t at every grid lag (i - j) mod n, separations taken as minimal images.
    Eigen::VectorXd lag_values(const Grid& grid, double t) const {
        return lag_table(grid, [&](double s) { return value(t, s); });
    }

    Eigen::VectorXd lag_rates(const Grid& grid, double t) const {
        return lag_table(grid, [&](double s) { return rate(t, s); });
    }

private:
    template <class F>
    static Eigen::VectorXd lag_table(const Grid& grid, F&& f) {
        const std::size_t n = grid.size();
        Eigen::VectorXd out(static_cast<Eigen::Index>(n));
        for (std::size_t l = 0; l <= n / 2; ++l) {
            const double val = f(grid.separation(static_cast<long>(l)));
            out[static_cast<Eigen::Index>(l)] = val;
            if (l != 0) out[static_cast<Eigen::Index>((n - l) % n)] = val;
        }
        return out;
    }

    CorrelationModel model_;
    PhysParams params_;
    InfluenceMode mode_;
    QuadratureOptions opts_;
};

namespace detail {

inline Eigen::MatrixXd lag_matrix(const Eigen::VectorXd& lags) {
    const Eigen::Index n = lags.size();
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) out(i, j) = lags[((i - j) % n + n) % n];
    return out;
}

}  // namespace detail

/// <x|rho(t)|x'> = <x - vt|rho0|x' - vt> exp[-F_t(x - x')], translation by
/// vt carried out spectrally.
inline DensityMatrix averaged_density_matrix(const DensityMatrix& rho0, const DisorderInfluence& influence,
                                             double t) {
    detail::check_time(t, "averaged_density_matrix");
    require_periodic(rho0.grid, "averaged_density_matrix");
    const Grid& grid = rho0.grid;
    const double shift = influence.params().v * t;
    DensityMatrix out{grid, spectral::shift_both(rho0.rho, grid, shift)};
    const Eigen::MatrixXd damp = (-detail::lag_matrix(influence.lag_values(grid, t)).array()).exp().matrix();
    out.rho.array() *= damp.array().cast<cplx>();
    require_valid(out);
    return out;
}

/// Purity of the averaged state by grid quadrature without forming it:
/// dx^2 sum_l A_l exp(-2 F_t(s_l)), A_l = sum_i |rho0(i, i - l)|^2. A
/// translation only permutes pairs with equal lag, so A is time independent.
class AnalyticPurity {
public:
    AnalyticPurity(const DensityMatrix& rho0, DisorderInfluence influence)
        : grid_(rho0.grid), influence_(std::move(influence)) {
        const auto n = static_cast<Eigen::Index>(grid_.size());
        lag_weight_ = Eigen::VectorXd::Zero(n);
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < n; ++i) lag_weight_[((i - j) % n + n) % n] += std::norm(rho0.rho(i, j));
    }

    double operator()(double t) const {
        const Eigen::VectorXd f = influence_.lag_values(grid_, t);
        const double dx = grid_.dx();
        return dx * dx * (lag_weight_.array() * (-2.0 * f.array()).exp()).sum();
    }

private:
    Grid grid_;
    DisorderInfluence influence_;
    Eigen::VectorXd lag_weight_;
};

inline double analytic_purity(const DensityMatrix& rho0, const DisorderInfluence& influence, double t) {
    return AnalyticPurity(rho0, influence)(t);
}

using CharacteristicFunction = std::function<cplx(double s, double q)>;

/// chi0(s, q) = exp[-(s/sigma)^2/8 - (q sigma/hbar)^2/2 + i p0 s/hbar - i q x0/hbar].
inline CharacteristicFunction gaussian_characteristic(const GaussianPacket& packet, double hbar = 1.0) {
    packet.validate();
    return [packet, hbar](double s, double q) {
        const double a = s / packet.sigma;
        const double b = q * packet.sigma / hbar;
        return std::polar(std::exp(-a * a / 8.0 - 0.5 * b * b), (packet.p0 * s - q * packet.x0) / hbar);
    };
}

/// chi_t(s, q) = chi0(s, q) exp(-i q v t/hbar) exp(-F_t(s)).
inline cplx characteristic_solution(const CharacteristicFunction& chi0, const DisorderInfluence& influence,
                                    double t, double s, double q) {
    const auto& p = influence.params();
    return chi0(s, q) * std::polar(std::exp(-influence.value(t, s)), -q * p.v * t / p.hbar);
}

/// chi(s, q) = int dx exp(-i q x/hbar) <x + s/2|rho|x - s/2>, sampled at
/// s = 2 m dx.
inline cplx characteristic_from_density(const DensityMatrix& dm, long m, double q, double hbar = 1.0) {
    const auto n = static_cast<long>(dm.grid.size());
    cplx sum = 0.0;
    for (long i = 0; i < n; ++i) {
        const long a = ((i + m) % n + n) % n;
        const long b = ((i - m) % n + n) % n;
        sum += std::polar(1.0, -q * dm.grid.x(static_cast<std::size_t>(i)) / hbar) * dm.rho(a, b);
    }
    return dm.grid.dx() * sum;
}

struct WignerFunction {
    Eigen::VectorXd x;  // grid positions
    Eigen::VectorXd p;  // ascending, spacing pi hbar / (n dx)
    Eigen::MatrixXd W;  // W(i, k) at (x_i, p_k)
    double dp = 0.0;
    /// Largest |Im W| before the real part was taken.
    double imag_residual = 0.0;
};

/// W(x, p) = (1/2 pi hbar) int dx' exp(i p x'/hbar) <x - x'/2|rho|x + x'/2>,
/// with x' = 2 m dx on the grid. Separations are limited to |x'| < L/2 so
/// that pairs wrapped around the ring do not alias onto the antipode; the
/// state is assumed to be localized within half the ring.
inline WignerFunction wigner_function(const DensityMatrix& dm, const PhysParams& params = {}) {
    const Grid& grid = dm.grid;
    const std::size_t n = grid.size();
    const auto ni = static_cast<Eigen::Index>(n);
    const long nl = static_cast<long>(n);
    WignerFunction w;
    w.x.resize(ni);
    w.p.resize(ni);
    w.W.resize(ni, ni);
    w.dp = std::numbers::pi * params.hbar / (static_cast<double>(n) * grid.dx());
    for (Eigen::Index k = 0; k < ni; ++k) w.p[k] = w.dp * static_cast<double>(k - ni / 2);
    Eigen::VectorXcd f(ni), spec(ni);
    const double pref = grid.dx() / (std::numbers::pi * params.hbar);
    for (long i = 0; i < nl; ++i) {
        w.x[i] = grid.x(static_cast<std::size_t>(i));
        for (long m = 0; m < nl; ++m) {
            const long ms = m < nl / 2 ? m : m - nl;
            if (4 * std::abs(ms) >= nl) {
                f[m] = 0.0;
                continue;
            }
            const long a = ((i - ms) % nl + nl) % nl;
            const long b = ((i + ms) % nl + nl) % nl;
            f[m] = dm.rho(a, b);
        }
        spectral::inverse(f.data(), spec.data(), n);
        for (long k = 0; k < nl; ++k) {
            const long kk = ((k - nl / 2) % nl + nl) % nl;
            const cplx val = pref * static_cast<double>(n) * spec[kk];
            w.W(i, k) = val.real();
            w.imag_residual = std::max(w.imag_residual, std::abs(val.imag()));
        }
    }
    return w;
}

struct PuritySeries {
    std::vector<double> times;
    std::vector<double> r_analytic;
    double r_plateau = 1.0;
    /// Set when the predicted loss exceeds 0.2, outside the small-loss regime.
    bool large_loss_warning = false;
};

inline double purity_plateau(double sigma, double C0, double ell, double v, double hbar) {
    const double a = std::sqrt(1.0 + 4.0 * (sigma / ell) * (sigma / ell));
    return 1.0 - 2.0 * ell * ell * C0 / (v * v * hbar * hbar) * (a - 1.0);
}

/// Small-loss purity of a Gaussian packet under Gaussian correlations.
inline PuritySeries purity_evolution(double sigma, double C0, double ell, double v, double hbar,
                                     std::span<const double> times) {
    detail::require(sigma > 0.0 && ell > 0.0 && v > 0.0 && hbar > 0.0 && C0 >= 0.0,
                    "purity_evolution: parameters out of range");
    PuritySeries out;
    out.times.assign(times.begin(), times.end());
    const double w2 = ell * ell + 4.0 * sigma * sigma;
    const double a = std::sqrt(w2) / ell;
    const double pref = 2.0 * ell * ell * C0 / (v * v * hbar * hbar);
    for (double t : times) {
        detail::check_time(t, "purity_evolution");
        const double vt = v * t;
        const double bracket = a * (1.0 - std::exp(-vt * vt / w2)) - (1.0 - std::exp(-(vt / ell) * (vt / ell))) +
                               kSqrtPi * (vt / ell) * (std::erf(vt / ell) - std::erf(vt / std::sqrt(w2)));
        out.r_analytic.push_back(1.0 - pref * bracket);
    }
    out.r_plateau = purity_plateau(sigma, C0, ell, v, hbar);
    out.large_loss_warning = 1.0 - out.r_plateau > 0.2;
    return out;
}

struct PurityLimits {
    double r_narrow;  // sigma << ell
    double r_wide;    // sigma >> ell
};

inline PurityLimits purity_limits(double sigma, double C0, double ell, double v, double hbar) {
    const double pref = 4.0 * C0 / (v * v * hbar * hbar);
    return {1.0 - pref * sigma * sigma, 1.0 - pref * sigma * ell};
}

enum class MomentumMode { closed_form, quadrature };

/// Momentum variance of the averaged state,
///   var_p0 + (4/v^2) int dq G(q) sin^2(q v t / 2 hbar) = var_p0 + (2/v^2)(C(0) - C(vt)).
inline std::vector<double> momentum_variance_evolution(double var_p0, const CorrelationModel& model,
                                                       const PhysParams& p, std::span<const double> times,
                                                       MomentumMode mode = MomentumMode::closed_form,
                                                       const QuadratureOptions& opts = {}) {
    validate(model);
    p.validate();
    if (std::holds_alternative<DeltaCorr>(model))
        throw ValidationError("momentum_variance_evolution: delta correlations broaden momentum without bound");
    std::vector<double> out;
    out.reserve(times.size());
    for (double t : times) {
        detail::check_time(t, "momentum_variance_evolution");
        const double vt = p.v * t;
        if (mode == MomentumMode::closed_form) {
            out.push_back(var_p0 + 2.0 / (p.v * p.v) * (correlation(model, 0.0) - correlation(model, vt)));
            continue;
        }
        double integral = 0.0;
        if (const auto* ring = std::get_if<PeriodicGaussianCorr>(&model)) {
            for (const auto& w : momentum_transfer_weights(*ring, p.hbar)) {
                const double s = std::sin(w.q * vt / (2.0 * p.hbar));
                integral += w.g * s * s;
            }
        } else {
            const auto& g = std::get<GaussianCorr>(model);
            if (t > 0.0) {
                const double q_max = detail::gaussian_q_max(g.ell, p.v, p.hbar, t, opts);
                auto f = [&](double q) {
                    const double s = std::sin(q * vt / (2.0 * p.hbar));
                    return momentum_transfer(model, q, p.hbar) * s * s;
                };
                integral = detail::integrate_even(f, q_max, vt / p.hbar, opts.abs_tol * p.v * p.v / 4.0,
                                                  "momentum_variance_evolution");
            }
        }
        out.push_back(var_p0 + 4.0 / (p.v * p.v) * integral);
    }
    return out;
}

}  // namespace chiralflow
