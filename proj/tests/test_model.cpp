#include "catch_amalgamated.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "chiralflow/analytic.hpp"
#include "chiralflow/model.hpp"

using namespace chiralflow;
using Catch::Matchers::WithinAbs;

namespace {

Grid standard_grid() { return Grid::periodic(-20.0, 40.0, 512); }

// Momentum moments by a direct O(n^2) discrete Fourier sum.
std::pair<double, double> naive_momentum_moments(const WaveFunction& psi) {
    const std::size_t n = psi.grid.size();
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const long idx = k < n / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
        const double p = 2.0 * std::numbers::pi * static_cast<double>(idx) / psi.grid.length();
        std::complex<double> c = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            c += psi.amp[static_cast<Eigen::Index>(j)] * std::polar(1.0, -p * psi.grid.x(j));
        const double w = std::norm(c);
        m0 += w;
        m1 += w * p;
        m2 += w * p * p;
    }
    const double mean = m1 / m0;
    return {mean, m2 / m0 - mean * mean};
}

}  // namespace

TEST_CASE("Gaussian packet is normalized with the requested moments", "[model]") {
    const Grid g = standard_grid();
    const WaveFunction psi = make_gaussian_wavefunction({1.0, 0.0, 0.0}, g);
    CHECK_THAT(psi.norm(), WithinAbs(1.0, 1e-10));
    const Moments m = moments(psi);
    CHECK_THAT(m.mean_x, WithinAbs(0.0, 1e-6));
    CHECK_THAT(m.var_x, WithinAbs(1.0, 1e-6));
    CHECK_THAT(m.mean_p, WithinAbs(0.0, 1e-6));
    CHECK_THAT(m.var_p, WithinAbs(0.25, 1e-6));
}

TEST_CASE("Boosted packet momentum moments agree with a direct Fourier sum", "[model]") {
    const Grid g = standard_grid();
    const WaveFunction psi = make_gaussian_wavefunction({1.0, 0.0, 2.0}, g);
    const auto [mean, var] = naive_momentum_moments(psi);
    CHECK_THAT(mean, WithinAbs(2.0, 1e-6));
    CHECK_THAT(var, WithinAbs(0.25, 1e-6));
    const Moments m = moments(psi);
    CHECK_THAT(m.mean_p, WithinAbs(mean, 1e-10));
    CHECK_THAT(m.var_p, WithinAbs(var, 1e-10));
}

TEST_CASE("Packet moments hold across widths and offsets", "[model][property]") {
    for (double sigma : {0.5, 1.0, 1.5}) {
        for (double x0 : {-3.0, 0.0, 2.5}) {
            const Grid g = Grid::periodic(-20.0, 40.0, 1024);
            const WaveFunction psi = make_gaussian_wavefunction({sigma, x0, -1.0}, g);
            const Moments m = moments(psi, {}, x0);
            CHECK_THAT(m.mean_x, WithinAbs(x0, 1e-6));
            CHECK_THAT(m.var_x, WithinAbs(sigma * sigma, 1e-6));
            CHECK_THAT(m.mean_p, WithinAbs(-1.0, 1e-6));
            CHECK_THAT(m.var_p, WithinAbs(0.25 / (sigma * sigma), 1e-6));
        }
    }
}

TEST_CASE("Packets that do not fit the grid are rejected", "[model]") {
    const Grid g = Grid::periodic(-5.0, 10.0, 256);
    CHECK_THROWS_AS(make_gaussian_wavefunction({1.0, 0.0, 0.0}, g), ValidationError);
    CHECK_THROWS_AS(make_gaussian_wavefunction({-1.0, 0.0, 0.0}, standard_grid()), ValidationError);
    CHECK_THROWS_AS(Grid::periodic(0.0, 1.0, 4), ValidationError);
}

TEST_CASE("Pure-state density matrix", "[model]") {
    const Grid g = standard_grid();
    const WaveFunction psi = make_gaussian_wavefunction({1.0, 0.7, 0.3}, g);
    const DensityMatrix rho = density_from_wavefunction(psi);
    CHECK_THAT(purity(rho), WithinAbs(1.0, 1e-10));
    const auto inv = check_invariants(rho, true);
    CHECK(inv.hermiticity_error < kHermiticityTol);
    CHECK(inv.trace_error < kTraceTol);
    CHECK(*inv.min_eigenvalue > -kPositivityTol);

    WaveFunction phased = psi;
    phased.amp *= std::polar(1.0, 0.83);
    const DensityMatrix rho2 = density_from_wavefunction(phased);
    CHECK((rho2.rho - rho.rho).cwiseAbs().maxCoeff() < 1e-15);

    const auto n = static_cast<Eigen::Index>(g.size());
    for (Eigen::Index i = 1; i < n; i += 37) {
        const Eigen::Index mirror = n - i;  // x -> -x on this grid
        CHECK_THAT(std::abs(rho.rho(i, mirror)),
                   WithinAbs(std::abs(psi.amp[i]) * std::abs(psi.amp[mirror]), 1e-15));
    }
}

TEST_CASE("Equal mixture of orthogonal packets has purity one half", "[model]") {
    const Grid g = standard_grid();
    const auto a = density_from_wavefunction(make_gaussian_wavefunction({1.0, -8.0, 0.0}, g));
    const auto b = density_from_wavefunction(make_gaussian_wavefunction({1.0, 8.0, 0.0}, g));
    const DensityMatrix mix{g, 0.5 * (a.rho + b.rho)};
    CHECK_THAT(purity(mix), WithinAbs(0.5, 1e-6));
    CHECK(purity(mix) <= 1.0 + 1e-8);
}

TEST_CASE("Density-matrix moments of a Gaussian packet", "[model]") {
    const Grid g = standard_grid();
    const auto rho = density_from_wavefunction(make_gaussian_wavefunction({1.0, 0.0, 0.0}, g));
    const Moments m = moments(rho);
    CHECK_THAT(m.mean_x, WithinAbs(0.0, 1e-6));
    CHECK_THAT(m.var_x, WithinAbs(1.0, 1e-6));
    CHECK_THAT(m.mean_p, WithinAbs(0.0, 1e-6));
    CHECK_THAT(m.var_p, WithinAbs(0.25, 1e-6));
}

TEST_CASE("Averaged state drifts at v and saturates its momentum variance", "[model]") {
    const Grid g = standard_grid();
    const auto rho0 = density_from_wavefunction(make_gaussian_wavefunction({1.0, 0.0, 0.0}, g));
    const double C0 = 7.5e-3;
    const DisorderInfluence inf(GaussianCorr{C0, 1.0}, {});
    const DensityMatrix at5 = averaged_density_matrix(rho0, inf, 5.0);
    CHECK_THAT(moments(at5, {}, 5.0).mean_x, WithinAbs(5.0, 1e-6));
    const DensityMatrix late = averaged_density_matrix(rho0, inf, 12.0);
    CHECK_THAT(moments(late, {}, 12.0).var_p, WithinAbs(0.25 + 2.0 * C0, 1e-6));
}

TEST_CASE("Hermiticity violations are detected", "[model]") {
    const Grid g = Grid::periodic(-12.0, 24.0, 64);
    auto rho = density_from_wavefunction(make_gaussian_wavefunction({1.0, 0.0, 0.0}, g));
    rho.rho(3, 5) += cplx(0.0, 1e-6);
    CHECK_THROWS_AS(require_valid(rho), NumericalError);
}
