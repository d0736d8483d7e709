#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>

#include "chiralflow/error.hpp"

namespace chiralflow {

/// Units: hbar = 1 and v = 1 by default, lengths in units of the correlation
/// length, time in ell/v, energy in v*hbar/ell.
struct PhysParams {
    double hbar = 1.0;
    double v = 1.0;

    void validate() const {
        detail::require(std::isfinite(hbar) && hbar > 0.0, "PhysParams: hbar must be > 0");
        detail::require(std::isfinite(v) && v > 0.0, "PhysParams: v must be > 0");
    }

    friend bool operator==(const PhysParams&, const PhysParams&) = default;
};

/// Uniform one-dimensional grid x_i = x_min + i*dx. Transport grids are
/// periodic with circumference n*dx.
class Grid {
public:
    static Grid periodic(double x_min, double length, std::size_t n) {
        detail::require(n >= 8, "Grid: need at least 8 points, got " + std::to_string(n));
        detail::require(std::isfinite(length) && length > 0.0, "Grid: length must be > 0");
        detail::require(std::isfinite(x_min), "Grid: x_min must be finite");
        return Grid(x_min, length / static_cast<double>(n), n, true);
    }

    static Grid open(double x_min, double dx, std::size_t n) {
        detail::require(n >= 8, "Grid: need at least 8 points, got " + std::to_string(n));
        detail::require(std::isfinite(dx) && dx > 0.0, "Grid: dx must be > 0");
        return Grid(x_min, dx, n, false);
    }

    double x_min() const noexcept { return x_min_; }
    double dx() const noexcept { return dx_; }
    std::size_t size() const noexcept { return n_; }
    bool is_periodic() const noexcept { return periodic_; }
    double length() const noexcept { return dx_ * static_cast<double>(n_); }
    std::optional<double> periodic_length() const {
        if (periodic_) return length();
        return std::nullopt;
    }

    double x(std::size_t i) const noexcept { return x_min_ + dx_ * static_cast<double>(i); }
    double center() const noexcept { return x_min_ + 0.5 * length(); }

    /// Signed mode index in FFT order; the Nyquist index maps to -n/2.
    long mode_index(std::size_t m) const noexcept {
        const long nn = static_cast<long>(n_);
        const long mm = static_cast<long>(m);
        return mm < nn / 2 ? mm : mm - nn;
    }

    double wavenumber(std::size_t m) const noexcept {
        return 2.0 * std::numbers::pi * static_cast<double>(mode_index(m)) / length();
    }

    bool has_nyquist(std::size_t m) const noexcept { return n_ % 2 == 0 && m == n_ / 2; }

    /// Maps a separation onto [-length/2, length/2).
    double minimal_image(double s) const noexcept {
        const double len = length();
        double r = std::fmod(s + 0.5 * len, len);
        if (r < 0.0) r += len;
        return r - 0.5 * len;
    }

    /// Separation (i - j)*dx, wrapped to [-length/2, length/2).
    double separation(long lag) const noexcept {
        return minimal_image(dx_ * static_cast<double>(lag));
    }

    friend bool operator==(const Grid& a, const Grid& b) noexcept {
        return a.n_ == b.n_ && a.periodic_ == b.periodic_ && a.x_min_ == b.x_min_ && a.dx_ == b.dx_;
    }

private:
    Grid(double x_min, double dx, std::size_t n, bool periodic)
        : x_min_(x_min), dx_(dx), n_(n), periodic_(periodic) {}

    double x_min_;
    double dx_;
    std::size_t n_;
    bool periodic_;
};

inline void require_periodic(const Grid& grid, const char* who) {
    if (!grid.is_periodic())
        throw ValidationError(std::string(who) + ": grid must be periodic");
}

inline void require_same_grid(const Grid& a, const Grid& b, const char* who) {
    if (!(a == b)) throw MismatchError(std::string(who) + ": grid mismatch");
}

}  // namespace chiralflow
