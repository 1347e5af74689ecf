#pragma once

#include "tocs/core.hpp"

#include <cmath>
#include <functional>

namespace tocs {

namespace detail {

template <typename F>
real adaptive_simpson_rec(const F& f, real a, real b, real fa, real fm, real fb, real whole,
                          real tol, int depth) {
    real m = 0.5 * (a + b);
    real lm = 0.5 * (a + m);
    real rm = 0.5 * (m + b);
    real flm = f(lm);
    real frm = f(rm);
    real left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    real right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    real delta = left + right - whole;
    if (depth <= 0) {
        if (std::abs(delta) > 15.0 * tol)
            throw numeric_error("adaptive quadrature failed to reach tolerance on [" +
                                std::to_string(a) + ", " + std::to_string(b) + "]");
        return left + right + delta / 15.0;
    }
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

} // namespace detail

/// Adaptive composite Simpson integration of f over [a, b] to an absolute
/// tolerance.  Throws numeric_error when the recursion depth is exhausted
/// before the tolerance is met.
template <typename F>
real integrate(const F& f, real a, real b, real abs_tol = 1e-8, int max_depth = 48) {
    if (!(b >= a)) throw std::domain_error("integrate: b must be >= a");
    if (a == b) return 0.0;
    real fa = f(a);
    real fb = f(b);
    real m = 0.5 * (a + b);
    real fm = f(m);
    real whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, abs_tol, max_depth);
}

/// (1 - exp(-d * x)) / d, stable near d = 0 via a 4-term series.
inline real expm1_ratio(real d, real x) {
    if (std::abs(d * x) < 1e-6) {
        real dx = d * x;
        return x * (1.0 - dx / 2.0 + dx * dx / 6.0 - dx * dx * dx / 24.0);
    }
    return -std::expm1(-d * x) / d;
}

} // namespace tocs
