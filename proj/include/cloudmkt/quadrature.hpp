#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace cloudmkt {

namespace detail {

template <class F>
double adaptive_simpson(const F &f, double a, double fa, double b, double fb, double m,
                        double fm, double whole, double tol, int depth) {
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

template <class F>
double simpson_panel(const F &f, double a, double b, double tol, int max_depth) {
    double m = 0.5 * (a + b);
    double fa = f(a), fb = f(b), fm = f(m);
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

}  // namespace detail

/// Adaptive-Simpson integral of f over [lo, hi] to absolute tolerance
/// abs_tol. Interior breakpoints become mandatory panel boundaries so that
/// the integrand only needs to be smooth between consecutive breakpoints.
template <class F>
double integrate_adaptive(const F &f, double lo, double hi, std::vector<double> breakpoints,
                          double abs_tol, int max_depth = 48) {
    if (!(hi > lo)) return 0.0;
    std::erase_if(breakpoints, [&](double x) { return !(x > lo) || !(x < hi); });
    breakpoints.push_back(lo);
    breakpoints.push_back(hi);
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());

    double panel_tol = abs_tol / static_cast<double>(breakpoints.size() - 1);
    double total = 0.0;
    for (size_t i = 0; i + 1 < breakpoints.size(); ++i)
        total += detail::simpson_panel(f, breakpoints[i], breakpoints[i + 1], panel_tol, max_depth);
    return total;
}

}  // namespace cloudmkt
