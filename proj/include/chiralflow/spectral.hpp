#pragma once

// FFT-based operations on periodic grids: exact band-limited translation
// and mode bookkeeping. Forward transforms are unscaled, inverse transforms
// carry the 1/n factor.

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "chiralflow/grid.hpp"

namespace chiralflow {

using cplx = std::complex<double>;

namespace spectral {

inline Eigen::FFT<double>& engine() {
    // Plans are cached per engine, so each thread keeps its own.
    thread_local Eigen::FFT<double> fft(Eigen::FFT<double>::impl_type(),
                                        Eigen::FFT<double>::Unscaled);
    return fft;
}

inline void forward(const cplx* in, cplx* out, std::size_t n) {
    engine().fwd(out, in, static_cast<Eigen::Index>(n));
}

inline void inverse(const cplx* in, cplx* out, std::size_t n) {
    engine().inv(out, in, static_cast<Eigen::Index>(n));
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) out[i] *= scale;
}

inline Eigen::VectorXcd forward(const Eigen::VectorXcd& f) {
    Eigen::VectorXcd out(f.size());
    forward(f.data(), out.data(), static_cast<std::size_t>(f.size()));
    return out;
}

inline Eigen::VectorXcd inverse(const Eigen::VectorXcd& f) {
    Eigen::VectorXcd out(f.size());
    inverse(f.data(), out.data(), static_cast<std::size_t>(f.size()));
    return out;
}

/// Multipliers that translate a sampled function by s: f(x) -> f(x - s).
/// The Nyquist mode is treated as a cosine so real signals stay real.
inline Eigen::VectorXcd shift_multipliers(const Grid& grid, double s) {
    const std::size_t n = grid.size();
    Eigen::VectorXcd mult(static_cast<Eigen::Index>(n));
    for (std::size_t m = 0; m < n; ++m) {
        const double k = grid.wavenumber(m);
        if (grid.has_nyquist(m))
            mult[static_cast<Eigen::Index>(m)] = cplx(std::cos(k * s), 0.0);
        else
            mult[static_cast<Eigen::Index>(m)] = std::polar(1.0, -k * s);
    }
    return mult;
}

inline Eigen::VectorXcd shift(const Eigen::VectorXcd& f, const Grid& grid, double s) {
    Eigen::VectorXcd spec = forward(f);
    spec.array() *= shift_multipliers(grid, s).array();
    return inverse(spec);
}

inline Eigen::VectorXd shift(const Eigen::VectorXd& f, const Grid& grid, double s) {
    const Eigen::VectorXcd shifted = shift(Eigen::VectorXcd(f.cast<cplx>()), grid, s);
    return shifted.real();
}

/// Translates both arguments of a kernel K(x, x') -> K(x - s, x' - s).
inline Eigen::MatrixXcd shift_both(const Eigen::MatrixXcd& kernel, const Grid& grid, double s) {
    const Eigen::Index n = kernel.rows();
    const Eigen::VectorXcd mult = shift_multipliers(grid, s);
    Eigen::MatrixXcd out(n, n);
    Eigen::VectorXcd buf(n), spec(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        buf = kernel.col(j);
        forward(buf.data(), spec.data(), static_cast<std::size_t>(n));
        spec.array() *= mult.array();
        inverse(spec.data(), out.col(j).data(), static_cast<std::size_t>(n));
    }
    Eigen::MatrixXcd t = out.transpose();
    for (Eigen::Index j = 0; j < n; ++j) {
        buf = t.col(j);
        forward(buf.data(), spec.data(), static_cast<std::size_t>(n));
        spec.array() *= mult.array();
        inverse(spec.data(), t.col(j).data(), static_cast<std::size_t>(n));
    }
    return t.transpose();
}

}  // namespace spectral
}  // namespace chiralflow
