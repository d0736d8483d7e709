#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "chiralflow/error.hpp"
#include "chiralflow/grid.hpp"
#include "chiralflow/spectral.hpp"

namespace chiralflow {

/// Minimum-uncertainty packet: position variance sigma^2, momentum
/// variance hbar^2 / (4 sigma^2).
struct GaussianPacket {
    double sigma = 1.0;
    double x0 = 0.0;
    double p0 = 0.0;

    void validate() const {
        detail::require(std::isfinite(sigma) && sigma > 0.0, "GaussianPacket: sigma must be > 0");
        detail::require(std::isfinite(x0) && std::isfinite(p0), "GaussianPacket: x0, p0 must be finite");
    }

    friend bool operator==(const GaussianPacket&, const GaussianPacket&) = default;
};

/// Sampled pure state; amplitudes are densities, dx * sum |psi|^2 = 1.
struct WaveFunction {
    Grid grid;
    Eigen::VectorXcd amp;

    double norm() const { return grid.dx() * amp.squaredNorm(); }
};

/// rho(i, j) ~ <x_i|rho|x_j>; trace is dx * sum rho(i, i).
struct DensityMatrix {
    Grid grid;
    Eigen::MatrixXcd rho;

    cplx trace() const { return grid.dx() * rho.trace(); }
};

struct Moments {
    double mean_x = 0.0;
    double var_x = 0.0;
    double mean_p = 0.0;
    double var_p = 0.0;
};

struct InvariantReport {
    double hermiticity_error = 0.0;  // max |rho_ij - conj(rho_ji)|
    double trace_error = 0.0;        // |dx tr rho - 1|
    std::optional<double> min_eigenvalue;  // of dx * rho, only for n <= 512
};

inline constexpr double kHermiticityTol = 1e-12;
inline constexpr double kTraceTol = 1e-8;
inline constexpr double kPositivityTol = 1e-8;
inline constexpr std::size_t kPositivityMaxN = 512;

inline InvariantReport check_invariants(const DensityMatrix& dm, bool with_spectrum = true) {
    InvariantReport rep;
    rep.hermiticity_error = (dm.rho - dm.rho.adjoint()).cwiseAbs().maxCoeff();
    rep.trace_error = std::abs(dm.trace() - cplx(1.0, 0.0));
    if (with_spectrum && dm.grid.size() <= kPositivityMaxN) {
        const Eigen::MatrixXcd h = 0.5 * dm.grid.dx() * (dm.rho + dm.rho.adjoint());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
        rep.min_eigenvalue = es.eigenvalues().minCoeff();
    }
    return rep;
}

/// Throws NumericalError when rho is not a valid (Hermitian, unit trace,
/// positive where checkable) density matrix.
inline void require_valid(const DensityMatrix& dm, bool with_spectrum = false) {
    if (!dm.rho.allFinite()) throw NumericalError("DensityMatrix: non-finite entries");
    const InvariantReport rep = check_invariants(dm, with_spectrum);
    if (rep.hermiticity_error >= kHermiticityTol || rep.trace_error >= kTraceTol ||
        (rep.min_eigenvalue && *rep.min_eigenvalue < -kPositivityTol)) {
        std::ostringstream os;
        os << "DensityMatrix invariants violated: hermiticity " << rep.hermiticity_error
           << ", trace " << rep.trace_error;
        if (rep.min_eigenvalue) os << ", min eigenvalue " << *rep.min_eigenvalue;
        throw NumericalError(os.str());
    }
}

/// Relative amplitude at a distance of half the grid from the packet
/// center must stay below this.
inline constexpr double kPacketEdgeTol = 1e-12;

inline WaveFunction make_gaussian_wavefunction(const GaussianPacket& packet, const Grid& grid,
                                               const PhysParams& params = {}) {
    packet.validate();
    params.validate();
    const double half = 0.5 * grid.length();
    const double edge = std::exp(-half * half / (4.0 * packet.sigma * packet.sigma));
    if (edge >= kPacketEdgeTol || packet.sigma < grid.dx()) {
        std::ostringstream os;
        os << "make_gaussian_wavefunction: packet (sigma=" << packet.sigma
           << ") does not fit grid of length " << grid.length() << " and dx " << grid.dx()
           << "; relative edge amplitude " << edge << " (need < " << kPacketEdgeTol
           << ", sigma >= dx)";
        throw ValidationError(os.str());
    }
    const std::size_t n = grid.size();
    WaveFunction psi{grid, Eigen::VectorXcd(static_cast<Eigen::Index>(n))};
    for (std::size_t i = 0; i < n; ++i) {
        const double y = grid.is_periodic() ? grid.minimal_image(grid.x(i) - packet.x0)
                                            : grid.x(i) - packet.x0;
        const double envelope = std::exp(-y * y / (4.0 * packet.sigma * packet.sigma));
        psi.amp[static_cast<Eigen::Index>(i)] = std::polar(envelope, packet.p0 * y / params.hbar);
    }
    psi.amp /= std::sqrt(psi.norm());
    return psi;
}

inline void require_normalized(const WaveFunction& psi, const char* who) {
    if (std::abs(psi.norm() - 1.0) > 1e-10)
        throw ValidationError(std::string(who) + ": wave function not normalized");
}

inline DensityMatrix density_from_wavefunction(const WaveFunction& psi) {
    require_normalized(psi, "density_from_wavefunction");
    return DensityMatrix{psi.grid, psi.amp * psi.amp.adjoint()};
}

/// Tr[rho^2] = dx^2 sum_ij |rho_ij|^2.
inline double purity(const DensityMatrix& dm) {
    const double dx = dm.grid.dx();
    return dx * dx * dm.rho.squaredNorm();
}

namespace detail {

/// Positions unwrapped onto a window of one grid length centered at c.
inline Eigen::VectorXd window_positions(const Grid& grid, std::optional<double> center) {
    const std::size_t n = grid.size();
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    const double c = center.value_or(grid.center());
    for (std::size_t i = 0; i < n; ++i)
        y[static_cast<Eigen::Index>(i)] =
            grid.is_periodic() ? c + grid.minimal_image(grid.x(i) - c) : grid.x(i);
    return y;
}

inline void fill_momentum(const Grid& grid, const Eigen::VectorXd& pk, double hbar, Moments& m) {
    const double total = pk.sum();
    double mean = 0.0;
    for (Eigen::Index k = 0; k < pk.size(); ++k)
        mean += hbar * grid.wavenumber(static_cast<std::size_t>(k)) * pk[k];
    mean /= total;
    double var = 0.0;
    for (Eigen::Index k = 0; k < pk.size(); ++k) {
        const double d = hbar * grid.wavenumber(static_cast<std::size_t>(k)) - mean;
        var += d * d * pk[k];
    }
    m.mean_p = mean;
    m.var_p = var / total;
}

inline void fill_position(const Grid& grid, const Eigen::VectorXd& pop,
                          std::optional<double> center, Moments& m) {
    const Eigen::VectorXd y = window_positions(grid, center);
    const double total = pop.sum();
    m.mean_x = y.dot(pop) / total;
    m.var_x = ((y.array() - m.mean_x).square() * pop.array()).sum() / total;
}

}  // namespace detail

/// Position and momentum moments. Positions are read on a window of one
/// grid length centered at `center` (the grid center by default); momentum
/// moments come from the spectral representation.
inline Moments moments(const WaveFunction& psi, const PhysParams& params = {},
                       std::optional<double> center = std::nullopt) {
    Moments m;
    detail::fill_position(psi.grid, psi.amp.cwiseAbs2(), center, m);
    detail::fill_momentum(psi.grid, spectral::forward(psi.amp).cwiseAbs2(), params.hbar, m);
    return m;
}

inline Eigen::VectorXd momentum_distribution(const DensityMatrix& dm) {
    const Eigen::Index n = dm.rho.rows();
    Eigen::MatrixXcd b(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        spectral::forward(dm.rho.col(j).data(), b.col(j).data(), static_cast<std::size_t>(n));
    // F rho F^dagger = F (F rho)^dagger for Hermitian rho.
    const Eigen::MatrixXcd bd = b.adjoint();
    Eigen::VectorXd pk(n);
    Eigen::VectorXcd col(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        spectral::forward(bd.col(j).data(), col.data(), static_cast<std::size_t>(n));
        pk[j] = col[j].real();
    }
    return pk;
}

inline Moments moments(const DensityMatrix& dm, const PhysParams& params = {},
                       std::optional<double> center = std::nullopt) {
    Moments m;
    detail::fill_position(dm.grid, dm.rho.diagonal().real(), center, m);
    detail::fill_momentum(dm.grid, momentum_distribution(dm), params.hbar, m);
    return m;
}

}  // namespace chiralflow
