#pragma once

// C^2 radial plateau profiles built from the quintic smoothstep.

#include <cmath>

namespace scl {

// 6s^5 - 15s^4 + 10s^3, clamped to [0,1].
inline double quintic_smoothstep(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    return s * s * s * (s * (s * 6.0 - 15.0) + 10.0);
}

// 1 on r <= inner, 0 on r >= outer, monotone C^2 in between.
inline double plateau(double r, double inner, double outer) {
    if (r <= inner) return 1.0;
    if (r >= outer) return 0.0;
    return 1.0 - quintic_smoothstep((r - inner) / (outer - inner));
}

// chi(eta) = psi(|eta|) with plateau radius 1/2 and support radius 1.
struct CutoffProfile {
    double operator()(double r) const { return plateau(r, 0.5, 1.0); }

    template <class Vec>
    double at(const Vec& v) const {
        double s = 0.0;
        for (double x : v) s += x * x;
        return (*this)(std::sqrt(s));
    }
};

} // namespace scl
