#pragma once

// Test-only reference implementations. These deliberately take different
// numerical routes than the library (quadrature instead of erfc kernels,
// exhaustive scans instead of closed forms) so they can serve as independent
// oracles.

#include <cmath>
#include <functional>

namespace oracle {

inline long double normal_density_ld(long double t) {
    const long double inv_sqrt_2pi = 0.398942280401432677939946059934L;
    return expl(-0.5L * t * t) * inv_sqrt_2pi;
}

inline long double adaptive_simpson(long double a, long double b, long double fa, long double fb,
                                    long double fm, long double eps, int depth) {
    const long double m = 0.5L * (a + b);
    const long double lm = 0.5L * (a + m);
    const long double rm = 0.5L * (m + b);
    const long double flm = normal_density_ld(lm);
    const long double frm = normal_density_ld(rm);
    const long double left = (m - a) / 6.0L * (fa + 4.0L * flm + fm);
    const long double right = (b - m) / 6.0L * (fm + 4.0L * frm + fb);
    const long double whole = (b - a) / 6.0L * (fa + 4.0L * fm + fb);
    if (depth <= 0 || fabsl(left + right - whole) <= 15.0L * eps) {
        return left + right + (left + right - whole) / 15.0L;
    }
    return adaptive_simpson(a, m, fa, fm, flm, 0.5L * eps, depth - 1) +
           adaptive_simpson(m, b, fm, fb, frm, 0.5L * eps, depth - 1);
}

// High-precision Phi(z) by integrating the density in long double.
inline double normal_cdf(double z) {
    const long double b = fabsl(static_cast<long double>(z));
    long double integral = 0.0L;
    if (b > 0.0L) {
        integral = adaptive_simpson(0.0L, b, normal_density_ld(0.0L), normal_density_ld(b),
                                    normal_density_ld(0.5L * b), 1e-19L, 48);
    }
    const long double value = z >= 0.0 ? 0.5L + integral : 0.5L - integral;
    return static_cast<double>(value);
}

inline double normal_two_sided_tail(double t) { return 2.0 * (1.0 - normal_cdf(t)); }

// Bisection inverse of a monotone cdf, resolved to ~1e-13 in the argument.
inline double quantile_bisect(const std::function<double(double)>& cdf, double p) {
    double lo = -40.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (cdf(mid) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace oracle
