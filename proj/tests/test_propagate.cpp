#include "catch_amalgamated.hpp"

#include <cmath>
#include <vector>

#include "chiralflow/propagate.hpp"

using namespace chiralflow;
using Catch::Matchers::WithinAbs;

namespace {

const Grid kGrid = Grid::periodic(-20.0, 40.0, 256);

WaveFunction packet(double sigma = 1.0, double x0 = 0.0, double p0 = 0.0, const Grid& g = kGrid) {
    return make_gaussian_wavefunction({sigma, x0, p0}, g);
}

double max_diff(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("Free chiral drift", "[propagate]") {
    const auto none = sample_realization(GaussianCorr{0.0, 1.0}, kGrid, 1);
    const WaveFunction psi0 = packet(1.0, -3.0, 0.7);
    const PhysParams p{1.0, 1.3};
    for (double t : {0.0, 1.0, 2.5, 6.0}) {
        const WaveFunction psi = evolve_wavefunction(psi0, none, p, t);
        const WaveFunction moved = packet(1.0, -3.0 + p.v * t, 0.7);
        CHECK(max_diff(psi.amp, moved.amp) < 1e-10);
        CHECK_THAT(moments(psi).mean_x, WithinAbs(-3.0 + p.v * t, 1e-10));
    }
    // A full circuit returns the state on the grid points.
    const WaveFunction loop = evolve_wavefunction(psi0, none, p, kGrid.length() / p.v);
    CHECK(max_diff(loop.amp, psi0.amp) < 1e-10);
}

TEST_CASE("Constant potential is a global phase", "[propagate]") {
    const double V0 = 0.37;
    const auto flat = DisorderRealization::from_potential(kGrid, Eigen::VectorXd::Constant(256, V0));
    const auto none = sample_realization(GaussianCorr{0.0, 1.0}, kGrid, 1);
    const WaveFunction psi0 = packet();
    const PhysParams p;
    const double t = 3.0;
    const WaveFunction a = evolve_wavefunction(psi0, flat, p, t);
    const WaveFunction b = evolve_wavefunction(psi0, none, p, t);
    const cplx phase = std::polar(1.0, -V0 * t / p.hbar);
    CHECK(max_diff(a.amp, phase * b.amp) < 1e-10);
}

TEST_CASE("Single realization evolution", "[propagate]") {
    const GaussianCorr model{0.05, 1.0};
    const auto real = sample_realization(model, kGrid, 77);
    const WaveFunction psi0 = packet(1.2, -2.0, 0.0);
    const PhysParams p;
    EvolutionPlan plan{p, kGrid, {0.0, 1.0, 4.0, 9.0}};
    const auto series = evolve_series(psi0, real, plan);
    REQUIRE(series.size() == 4);
    CHECK(max_diff(series[0].amp, psi0.amp) < 1e-14);
    for (std::size_t k = 0; k < series.size(); ++k) {
        CHECK_THAT(series[k].norm(), WithinAbs(1.0, 1e-12));
        // Chiral motion keeps the profile rigid: only the phase depends on V.
        const Moments m = moments(series[k]);
        CHECK_THAT(m.mean_x, WithinAbs(-2.0 + plan.times[k], 1e-9));
        CHECK_THAT(m.var_x, WithinAbs(1.44, 1e-9));
    }
    // The phase compares with a direct line integral of the interpolant.
    const double t = 4.0;
    const Eigen::VectorXcd phase = disorder_phase(real, p, t);
    for (Eigen::Index i : {10, 100, 200}) {
        const double x = kGrid.x(static_cast<std::size_t>(i));
        auto f = [&](double u) { return real.potential_at(x - p.v * (t - u)); };
        const double integral = adaptive_simpson(f, 0.0, t, 1e-12, 64).value;
        CHECK(std::abs(phase[i] - std::polar(1.0, -integral / p.hbar)) < 1e-8);
    }

    const DensityMatrix rho0 = density_from_wavefunction(psi0);
    const DensityMatrix rho = evolve_density_matrix_single(rho0, real, p, t);
    CHECK(max_diff(rho.rho, density_from_wavefunction(evolve_wavefunction(psi0, real, p, t)).rho) < 1e-10);
    CHECK_THAT(purity(rho), WithinAbs(1.0, 1e-10));
    const auto invs = check_invariants(rho, true);
    CHECK(invs.trace_error < 1e-12);
    CHECK(*invs.min_eigenvalue > -1e-10);
}

TEST_CASE("Evolution plans are validated", "[propagate]") {
    const auto real = sample_realization(GaussianCorr{0.05, 1.0}, kGrid, 1);
    EvolutionPlan plan{{}, kGrid, {0.5, 1.0}};
    CHECK_THROWS_AS(evolve_series(packet(), real, plan), ValidationError);
    plan.times = {0.0, 2.0, 1.0};
    CHECK_THROWS_AS(evolve_series(packet(), real, plan), ValidationError);
    const auto other = sample_realization(GaussianCorr{0.05, 1.0}, Grid::periodic(-20.0, 40.0, 128), 1);
    CHECK_THROWS_AS(evolve_wavefunction(packet(), other, {}, 1.0), MismatchError);
}

TEST_CASE("Averaged master equation", "[propagate]") {
    const Grid g = Grid::periodic(-16.0, 32.0, 256);
    const DensityMatrix rho0 = density_from_wavefunction(packet(1.0, 0.0, 0.0, g));
    const PhysParams p;
    const std::vector<double> times{0.0, 0.5, 2.0, 5.0};

    SECTION("Gaussian") {
        const GaussianCorr model{0.05, 1.0};
        const DisorderInfluence inf(model, p);
        for (auto method : {MasterMethod::rk4, MasterMethod::exact_antidiagonal}) {
            MasterEquationOptions o;
            o.method = method;
            const auto out = integrate_master_equation(rho0, model, p, times, o);
            REQUIRE(out.size() == times.size());
            for (std::size_t k = 0; k < times.size(); ++k) {
                CHECK(max_diff(out[k].rho, averaged_density_matrix(rho0, inf, times[k]).rho) < 1e-6);
                CHECK_THAT(out[k].trace().real(), WithinAbs(1.0, 1e-10));
            }
        }
    }
    SECTION("Ring with quadrature rates") {
        const PeriodicGaussianCorr model{0.05, 1.0, 16.0};
        const DisorderInfluence inf(model, p);
        MasterEquationOptions o;
        o.method = MasterMethod::exact_antidiagonal;
        o.rate_mode = InfluenceMode::discrete_sum;
        const auto out = integrate_master_equation(rho0, model, p, times, o);
        for (std::size_t k = 0; k < times.size(); ++k)
            CHECK(max_diff(out[k].rho, averaged_density_matrix(rho0, inf, times[k]).rho) < 1e-6);
    }
    SECTION("No disorder") {
        const auto out = integrate_master_equation(rho0, GaussianCorr{0.0, 1.0}, p, times);
        for (std::size_t k = 0; k < times.size(); ++k) {
            const DensityMatrix moved = density_from_wavefunction(packet(1.0, times[k], 0.0, g));
            CHECK(max_diff(out[k].rho, moved.rho) < 1e-10);
            CHECK_THAT(purity(out[k]), WithinAbs(1.0, 1e-10));
        }
    }
}

TEST_CASE("Moments of the phase line integral", "[propagate][slow]") {
    const GaussianCorr model{7.5e-3, 1.0};
    const PhysParams p;
    const double t = 20.0, x = 5.0, xp = 0.0;
    const auto m = line_integral_moments(model, p, t, x, xp, 5000, 2024);
    const double F = influence_gaussian(model.C0, model.ell, p.v, p.hbar, t, x - xp);
    // Gaussian field: odd moments vanish, E[I^2] = 2F and E[I^4] = 3 (2F)^2.
    CHECK(m.raw[0] == 1.0);
    CHECK(std::abs(m.raw[1]) < 4.0 * m.se[1]);
    CHECK(std::abs(m.raw[2] - 2.0 * F) < 4.0 * m.se[2]);
    CHECK(std::abs(m.raw[3]) < 4.0 * m.se[3]);
    CHECK(std::abs(m.raw[4] - 12.0 * F * F) < 4.0 * m.se[4]);
    CHECK(std::abs(m.remainder[2] + m.raw[2] / 2.0) < 1e-15);
    CHECK(m.n_samples == 5000);
    CHECK_THROWS_AS(line_integral_moments(model, p, t, x, xp, 10, 1), ValidationError);
    CHECK_THROWS_AS(line_integral_moments(DeltaCorr{1.0}, p, t, x, xp, 1000, 1), ValidationError);
    const auto zero = line_integral_moments(model, p, t, 3.0, 3.0, 1000, 1);
    CHECK(zero.raw[2] == 0.0);
}
