#pragma once

#include <cmath>
#include <cstddef>

namespace chiralflow {

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;  // accumulated |S2 - S1| / 15 estimate
    std::size_t evaluations = 0;
    bool converged = true;
};

namespace detail {

template <class F>
double simpson_step(F& f, double a, double fa, double b, double fb, double m, double fm,
                    double whole, double tol, int depth, QuadratureResult& res) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    res.evaluations += 2;
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol) {
        res.error += std::abs(delta) / 15.0;
        return left + right + delta / 15.0;
    }
    if (depth <= 0) {
        res.converged = false;
        res.error += std::abs(delta) / 15.0;
        return left + right + delta / 15.0;
    }
    return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1, res) +
           simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1, res);
}

}  // namespace detail

/// Adaptive Simpson with Richardson correction. The interval is first cut
/// into `panels` equal pieces so oscillatory integrands are resolved before
/// the error test is trusted; the absolute tolerance is shared by width.
template <class F>
QuadratureResult adaptive_simpson(F&& f, double a, double b, double abs_tol, std::size_t panels = 1,
                                  int max_depth = 40) {
    QuadratureResult res;
    if (a == b) return res;
    if (panels == 0) panels = 1;
    const double h = (b - a) / static_cast<double>(panels);
    const double panel_tol = abs_tol / static_cast<double>(panels);
    double xa = a;
    double fa = f(xa);
    res.evaluations = 1;
    for (std::size_t p = 0; p < panels; ++p) {
        const double xb = (p + 1 == panels) ? b : a + h * static_cast<double>(p + 1);
        const double xm = 0.5 * (xa + xb);
        const double fb = f(xb);
        const double fm = f(xm);
        res.evaluations += 2;
        const double whole = (xb - xa) / 6.0 * (fa + 4.0 * fm + fb);
        res.value += detail::simpson_step(f, xa, fa, xb, fb, xm, fm, whole, panel_tol, max_depth, res);
        xa = xb;
        fa = fb;
    }
    return res;
}

}  // namespace chiralflow
