// Acceptance gate: one PASS/FAIL line per criterion, with indented detail
// lines beneath. Exit code 0 iff every criterion passes.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "chiralflow/chiralflow.hpp"
#include "chiralflow/cli/config.hpp"
#include "chiralflow/cli/runner.hpp"

using namespace chiralflow;

namespace {

struct Outcome {
    bool pass = true;
    std::vector<std::string> details;

    void expect(bool ok, const std::string& what) {
        pass = pass && ok;
        details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
    }
};

std::string num(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

double max_abs(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) { return (a - b).cwiseAbs().maxCoeff(); }

void require_emitted(Outcome& o, const DensityMatrix& dm, const std::string& label) {
    const auto inv = check_invariants(dm, false);
    o.expect(inv.hermiticity_error < kHermiticityTol && inv.trace_error < kTraceTol,
             label + ": hermiticity " + num(inv.hermiticity_error) + ", trace error " + num(inv.trace_error));
}

cli::Overrides named(const std::string& experiment) {
    cli::Overrides o;
    o.experiment = experiment;
    return o;
}

// Shared ring-cycle run, also used for the momentum criterion.
const cli::Fig2bResult& fig2b_result() {
    static const cli::Fig2bResult res = [] {
        const cli::RunConfig cfg = cli::parse_config(R"({"seed": 42})", named("fig2b"));
        return cli::run_fig2b(cfg);
    }();
    return res;
}

Outcome fig2b() {
    Outcome o;
    const auto& res = fig2b_result();
    for (const auto& c : res.cases) {
        const auto& st = c.stats;
        o.details.push_back("sigma = " + num(c.sigma) + ": M = " + std::to_string(st.config.n_realizations) +
                            ", n = " + std::to_string(st.config.grid.size()) + ", grid length " +
                            num(st.config.grid.length()) + ", " + std::to_string(st.times.size()) +
                            " snapshots, closed-form plateau " + num(st.r_plateau));
        for (const auto& ck : c.checks)
            o.expect(ck.pass, "  " + ck.name + ": value " + num(ck.value) + ", target " + num(ck.target) +
                                  ", tolerance " + num(ck.tolerance));
    }
    return o;
}

Outcome exactness() {
    Outcome o;
    EnsembleConfig cfg;
    cfg.model = GaussianCorr{0.02, 1.0};
    cfg.grid = Grid::periodic(-16.0, 32.0, 256);
    cfg.n_realizations = 1000;
    cfg.master_seed = 7;
    cfg.times = {0.0, 1.0, 2.0, 4.0, 8.0};
    cfg.snapshot_indices = {1, 2, 3, 4};
    const EnsembleStats st = run_ensemble(cfg);
    const auto rep = compare_with_analytic(st, sampled_influence(cfg.model, cfg.grid, cfg.params), 5.0);
    for (std::size_t k = 0; k < rep.snapshot_times.size(); ++k)
        o.expect(rep.max_se_ratio[k] <= 5.0, "t = " + num(rep.snapshot_times[k]) + ": max |dev| " +
                                                 num(rep.max_abs_deviation[k]) + ", max |dev|/SE " +
                                                 num(rep.max_se_ratio[k]));
    for (const auto& snap : st.avg_rho_snapshots) require_emitted(o, snap.mean, "snapshot t = " + num(snap.t));
    o.expect(!rep.insufficient_statistics, "statistics sufficient (purity loss resolved)");
    return o;
}

Outcome master_equation() {
    Outcome o;
    const Grid g = Grid::periodic(-32.0, 64.0, 512);
    const DensityMatrix rho0 = density_from_wavefunction(make_gaussian_wavefunction({1.0, 0.0, 0.0}, g));
    const GaussianCorr model{7.5e-3, 1.0};
    const PhysParams p;
    const std::vector<double> times{0.0, 1.0, 2.5, 5.0};
    const DisorderInfluence inf(model, p);
    for (auto method : {MasterMethod::rk4, MasterMethod::exact_antidiagonal}) {
        MasterEquationOptions opts;
        opts.method = method;
        const auto out = integrate_master_equation(rho0, model, p, times, opts);
        const DensityMatrix ref = averaged_density_matrix(rho0, inf, 5.0);
        const double dev = max_abs(out.back().rho, ref.rho);
        o.expect(dev <= 1e-6, std::string(method == MasterMethod::rk4 ? "rk4" : "per-lag quadrature") +
                                  ": max |rho_master - rho_closed| at t = 5: " + num(dev));
        require_emitted(o, out.back(), "master-equation state");
    }
    return o;
}

Outcome influence_identities() {
    Outcome o;
    const PhysParams p;
    const GaussianCorr g{7.5e-3, 1.0};
    double worst = 0.0;
    for (double t : {0.5, 1.0, 2.0, 5.0, 10.0})
        for (double x : {0.25, 1.0, 3.0, 7.0, 15.0})
            worst = std::max(worst, std::abs(influence_gaussian(g.C0, g.ell, p.v, p.hbar, t, x) -
                                             influence_quadrature(g, p, t, x)));
    o.expect(worst <= 1e-8, "closed form vs quadrature on 5x5 (t, x): max |diff| " + num(worst));

    std::mt19937_64 rng(20);
    std::uniform_real_distribution<double> ut(0.2, 12.0), ux(-20.0, 20.0);
    double worst_rate = 0.0;
    for (int i = 0; i < 20; ++i) {
        const double t = ut(rng), x = ux(rng), h = 1e-4;
        const double fd = (influence_gaussian(g.C0, g.ell, p.v, p.hbar, t + h, x) -
                           influence_gaussian(g.C0, g.ell, p.v, p.hbar, t - h, x)) /
                          (2.0 * h);
        worst_rate = std::max(worst_rate, std::abs(fd - rate_kernel(g, p, t, x)));
    }
    o.expect(worst_rate <= 1e-6, "d/dt influence vs rate kernel at 20 random points: max |diff| " + num(worst_rate));

    const PeriodicGaussianCorr ring{7.5e-3, 1.0, 17.0};
    const DisorderInfluence ring_inf(ring, p);
    double worst_ring = 0.0, worst_ring_quad = 0.0;
    for (double x : {0.1, 1.0, 2.5, 4.0, 8.5, 12.0, 16.9}) {
        worst_ring = std::max(worst_ring, std::abs(ring_inf.value(ring.L / p.v, x)));
        worst_ring_quad = std::max(worst_ring_quad, std::abs(influence_quadrature(ring, p, ring.L / p.v, x)));
    }
    o.expect(worst_ring <= 1e-12, "ring influence at vt = L (discrete sum): max |F| " + num(worst_ring));
    o.expect(worst_ring_quad <= 1e-12, "ring influence at vt = L (quadrature): max |F| " + num(worst_ring_quad));

    const DeltaCorr d{0.3};
    const DisorderInfluence delta_inf(d, {1.0, 1.7});
    bool exact = true;
    for (int i = 0; i < 1000; ++i) {
        const double t = ut(rng), x = ux(rng);
        const double cone = d.C0 / (1.7 * 1.7) * std::min(1.7 * t, std::abs(x));
        exact = exact && delta_inf.value(t, x) == cone;
    }
    exact = exact && influence_delta(1, 1, 1, 2, 1) == 1.0 && influence_delta(1, 1, 1, 2, 5) == 2.0;
    o.expect(exact, "delta cone equals C0/(v hbar)^2 min(vt, |x|) exactly at 1000 random points");
    return o;
}

Outcome momentum_broadening() {
    Outcome o;
    const PhysParams p;
    const double C0 = 7.5e-3;
    const std::vector<double> late{200.0};
    const double sat = momentum_variance_evolution(0.25, GaussianCorr{C0, 1.0}, p, late)[0];
    o.expect(std::abs(sat - (0.25 + 2.0 * C0)) <= 1e-8, "saturation " + num(sat) + " vs hbar^2/4sigma^2 + 2C0/v^2 = " +
                                                        num(0.25 + 2.0 * C0));
    for (const auto& c : fig2b_result().cases) {
        const auto& st = c.stats;
        double worst = 0.0;
        for (std::size_t k = 0; k < st.times.size(); ++k)
            worst = std::max(worst, std::abs(st.var_p_mc[k] - st.var_p_analytic[k]) /
                                        std::max(3.0 * st.var_p_mc_se[k], cli::kRoundoffFloor));
        o.expect(worst <= 1.0, "sigma = " + num(c.sigma) + ": max |var_p MC - analytic| / max(3 SE, 1e-10) = " +
                                   num(worst) + " over " + std::to_string(st.times.size()) + " snapshots");
    }
    const GapCheck gap = gap_condition(1.0, C0, 1.0, 1.0, 1.0);
    o.expect(gap.satisfied && std::abs(gap.lhs - 0.265) < 1e-15 && gap.rhs == 1.0,
             "gap condition: lhs " + num(gap.lhs) + ", rhs " + num(gap.rhs) + ", satisfied " +
                 (gap.satisfied ? "yes" : "no"));
    return o;
}

Outcome conservation() {
    Outcome o;
    const Grid g = Grid::periodic(-16.0, 32.0, 256);
    const PhysParams p;
    const GaussianCorr model{0.05, 1.0};
    const DensityMatrix rho0 = density_from_wavefunction(make_gaussian_wavefunction({1.0, -3.0, 0.4}, g));
    const Eigen::VectorXd spec0 = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(g.dx() * rho0.rho).eigenvalues();
    double worst_purity = 0.0, worst_trace = 0.0, worst_spec = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto real = sample_realization(model, g, derive_seed(99, s));
        const DensityMatrix rho = evolve_density_matrix_single(rho0, real, p, 6.0);
        worst_purity = std::max(worst_purity, std::abs(purity(rho) - 1.0));
        worst_trace = std::max(worst_trace, std::abs(rho.trace().real() - 1.0));
        const Eigen::VectorXd spec =
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(g.dx() * rho.rho).eigenvalues();
        worst_spec = std::max(worst_spec, (spec - spec0).cwiseAbs().maxCoeff());
    }
    o.expect(worst_purity <= 1e-10 && worst_trace <= 1e-10 && worst_spec <= 1e-10,
             "single realizations: purity " + num(worst_purity) + ", trace " + num(worst_trace) + ", spectrum " +
                 num(worst_spec));

    EnsembleConfig cfg;
    cfg.model = model;
    cfg.packet = {1.0, -3.0, 0.4};
    cfg.grid = g;
    cfg.n_realizations = 200;
    cfg.master_seed = 3;
    cfg.times = {0.0, 1.0, 3.0, 6.0};
    cfg.snapshot_indices = {0, 3};
    cfg.threads = 1;
    const EnsembleStats a = run_ensemble(cfg);
    bool mc_ok = true;
    double worst_x = 0.0, worst_var = 0.0;
    for (std::size_t k = 0; k < a.times.size(); ++k) {
        const double dx = std::abs(a.mean_x_mc[k] - (-3.0 + a.times[k]));
        const double dv = std::abs(a.var_x_mc[k] - 1.0);
        mc_ok = mc_ok && dx <= std::max(3.0 * a.mean_x_mc_se[k], cli::kRoundoffFloor) &&
                dv <= std::max(3.0 * a.var_x_mc_se[k], cli::kRoundoffFloor);
        worst_x = std::max(worst_x, dx);
        worst_var = std::max(worst_var, dv);
    }
    o.expect(mc_ok, "MC <x> - (x0 + vt): max " + num(worst_x) + "; var_x - sigma^2: max " + num(worst_var));
    const DisorderInfluence inf(effective_model(model, g), p);
    double worst_ax = 0.0, worst_av = 0.0;
    for (double t : cfg.times) {
        const DensityMatrix rho = averaged_density_matrix(rho0, inf, t);
        const Moments m = moments(rho, p, -3.0 + t);
        worst_ax = std::max(worst_ax, std::abs(m.mean_x - (-3.0 + t)));
        worst_av = std::max(worst_av, std::abs(m.var_x - 1.0));
        require_emitted(o, rho, "averaged state t = " + num(t));
    }
    o.expect(worst_ax <= 1e-8 && worst_av <= 1e-8,
             "analytic <x> error " + num(worst_ax) + ", var_x error " + num(worst_av));
    for (const auto& snap : a.avg_rho_snapshots) require_emitted(o, snap.mean, "ensemble snapshot t = " + num(snap.t));

    cfg.threads = 4;
    const EnsembleStats b = run_ensemble(cfg);
    bool same = a.r_mc == b.r_mc && a.r_mc_se == b.r_mc_se && a.var_p_mc == b.var_p_mc &&
                a.mean_x_mc == b.mean_x_mc && a.var_x_mc == b.var_x_mc;
    for (std::size_t s = 0; s < a.avg_rho_snapshots.size(); ++s)
        same = same && a.avg_rho_snapshots[s].mean.rho == b.avg_rho_snapshots[s].mean.rho &&
               a.avg_rho_snapshots[s].se == b.avg_rho_snapshots[s].se;
    o.expect(same, "1 vs 4 threads: bitwise identical statistics and snapshots");
    return o;
}

Outcome device() {
    Outcome o;
    const PeriodicGaussianCorr model{7.5e-3, 1.0, 17.0};
    const Grid g = Grid::periodic(-17.0, 34.0, 1024);
    const WaveFunction psi0 = make_gaussian_wavefunction({1.0, 0.0, 0.0}, g);
    const std::size_t M = 500;
    std::vector<WaveFunction> states(M, psi0);
    detail::parallel_for(M, detail::resolve_threads(0), [&](std::size_t e) {
        states[e] = evolve_wavefunction(psi0, sample_realization(model, g, derive_seed(42, e)), {}, 8.5);
    });
    const Eigen::MatrixXcd overlaps = overlap_matrix(states);
    for (int k = 1; k <= 7; ++k) {
        const double phi = std::numbers::pi * k / 8.0;
        const PairAverage pa = beam_splitter_pair_average(overlaps, phi);
        const double dev = std::abs(pa.p_plus - pa.p_plus_averaged);
        o.expect(dev <= 3.0 * pa.p_plus_se, "phi = " + num(phi) + ": pair average " + num(pa.p_plus) +
                                                 " vs averaged formula " + num(pa.p_plus_averaged) + " (r = " +
                                                 num(pa.r_pairs) + "), |dev| / SE = " + num(dev / pa.p_plus_se));
    }
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0), ph(-20.0, 20.0);
    bool exact = true;
    for (int i = 0; i < 100000; ++i) {
        const auto a = beam_splitter_probs(std::polar(u(rng), ph(rng)), ph(rng));
        const auto b = beam_splitter_averaged(1e-9 + (1.0 - 1e-9) * u(rng), ph(rng));
        exact = exact && a.p_plus + a.p_minus == 1.0 && b.p_plus + b.p_minus == 1.0;
    }
    o.expect(exact, "p_plus + p_minus == 1 exactly at 100000 random inputs");
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"Ring purity cycle (fig2b)", fig2b},
        {"Gaussian-field exactness of the averaged state", exactness},
        {"Master-equation cross-check", master_equation},
        {"Disorder-influence identities", influence_identities},
        {"Momentum broadening and gap condition", momentum_broadening},
        {"Conservation, structure and determinism", conservation},
        {"Beam-splitter formulas", device},
    };
    bool all = true;
    for (const auto& [name, run] : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o.expect(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), secs);
        for (const auto& d : o.details) std::printf("    %s\n", d.c_str());
        std::fflush(stdout);
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
