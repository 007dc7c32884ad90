#pragma once

// Fourier-diagonal evolution under e^{-i(t/h)H(hD)}, spectral grouping,
// spacing scales and quasimode residuals.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <fftw3.h>

#include "scl/errors.hpp"
#include "scl/hamiltonian.hpp"
#include "scl/state.hpp"

namespace scl {

enum class Regime { sub_critical, critical, super_critical };

// tau_h = c h^{-gamma}.
struct TimeScale {
    double c = 1.0;
    double gamma = 1.0;

    double operator()(double h) const {
        if (!(h > 0)) throw ParameterError("time scale: h must be positive");
        return c * std::pow(h, -gamma);
    }
    Regime regime() const {
        if (gamma < 1.0) return Regime::sub_critical;
        if (gamma == 1.0) return Regime::critical;
        return Regime::super_critical;
    }
    // h tau_h stays bounded as h -> 0.
    bool bounded_h_tau() const { return gamma <= 1.0; }
};

inline const char* regime_name(Regime r) {
    switch (r) {
    case Regime::sub_critical: return "sub_critical";
    case Regime::critical: return "critical";
    case Regime::super_critical: return "super_critical";
    }
    return "?";
}

inline Integer to_integer(__int128 v) {
    const bool neg = v < 0;
    unsigned __int128 mag = neg ? static_cast<unsigned __int128>(0) - static_cast<unsigned __int128>(v)
                                : static_cast<unsigned __int128>(v);
    Integer out(static_cast<unsigned long long>(mag >> 64));
    out <<= 64;
    out += Integer(static_cast<unsigned long long>(mag & ~0ULL));
    return neg ? Integer(-out) : out;
}

// FFTW planning is not reentrant.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

template <std::size_t D>
double symbol_at(const HamiltonianModel& h, const FourierState<D>& u, const Mode<D>& k) {
    auto p = u.momentum(k);
    return h.value(p.data());
}

// H(hk) for every entry of u, in entry order.
template <std::size_t D>
std::vector<double> symbol_table(const HamiltonianModel& h, const FourierState<D>& u) {
    if (h.dim() != D) throw ParameterError("Hamiltonian dimension does not match the state");
    std::vector<double> out;
    out.reserve(u.size());
    for (const auto& e : u.entries()) out.push_back(symbol_at(h, u, e.k));
    return out;
}

namespace detail {

// Scale and integer values P(k) with H(hk) = scale P(k), when every |P(k)| < 2^53.
template <std::size_t D>
std::optional<std::pair<Rational, std::vector<double>>> exact_phase_polynomial(const HamiltonianModel& h,
                                                                               const FourierState<D>& u) {
    if (!h.exact_rational() || !u.h_exact()) return std::nullopt;
    for (const auto& e : u.entries())
        for (long long x : e.k)
            if (std::abs(static_cast<double>(x)) > std::min(h.integer_form_safe_radius(), std::ldexp(1.0, 20)))
                return std::nullopt;
    const IntegerForm form = h.integer_form(*u.h_exact());
    std::vector<double> p(u.size());
    const __int128 limit = static_cast<__int128>(1) << 53;
    for (std::size_t n = 0; n < u.size(); ++n) {
        const __int128 q = form.poly(u.entries()[n].k.data());
        if (q >= limit || q <= -limit) return std::nullopt;
        p[n] = static_cast<double>(q);
    }
    return std::make_pair(form.scale, std::move(p));
}

} // namespace detail

// Multiplies mode k by e^{-i t H(hk)/h}.
template <std::size_t D>
FourierState<D> evolve(const FourierState<D>& u, const HamiltonianModel& h, double t) {
    if (t == 0.0) return u;
    std::vector<Complex> v(u.size());
    if (auto exact = detail::exact_phase_polynomial(h, u)) {
        // t H(hk)/h = (t scale/h) P(k) with P(k) an exact integer.
        const double c = t * to_double(exact->first / *u.h_exact());
        for (std::size_t n = 0; n < u.size(); ++n) v[n] = u.entries()[n].value * std::polar(1.0, -c * exact->second[n]);
        return u.with_values(std::move(v));
    }
    const auto hk = symbol_table(h, u);
    for (std::size_t n = 0; n < u.size(); ++n)
        v[n] = u.entries()[n].value * std::polar(1.0, -t * hk[n] / u.h());
    return u.with_values(std::move(v));
}

template <std::size_t D>
struct SpectralGroup {
    double energy = 0.0;
    std::optional<Rational> energy_exact;
    double weight = 0.0;
    FourierState<D> projected;  // normalized
};

template <std::size_t D>
struct SpectralDecomposition {
    std::vector<SpectralGroup<D>> groups;  // increasing energy
};

// Groups the coefficients of u by equal values of H(hk).
template <std::size_t D>
SpectralDecomposition<D> eigenspace_decompose(const FourierState<D>& u, const HamiltonianModel& h,
                                              std::optional<double> tolerance = std::nullopt) {
    const double n2 = u.norm2();
    if (!(n2 > 0)) throw ParameterError("eigenspace_decompose: zero state");
    std::vector<std::vector<ModeCoefficient<D>>> members;
    std::vector<double> energies;
    std::vector<std::optional<Rational>> exact;

    const bool use_exact = !tolerance && h.exact_rational() && u.h_exact();
    if (use_exact) {
        IntegerForm form = h.integer_form(*u.h_exact());
        std::map<__int128, std::vector<ModeCoefficient<D>>> by_value;
        for (const auto& e : u.entries()) by_value[form.poly(e.k.data())].push_back(e);
        for (auto& [key, list] : by_value) {
            Rational e = form.scale * Rational(to_integer(key));
            exact.push_back(e);
            energies.push_back(to_double(e));
            members.push_back(std::move(list));
        }
    } else {
        const double tol = tolerance.value_or(1e-9);
        auto hk = symbol_table(h, u);
        std::vector<std::size_t> order(u.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return hk[a] < hk[b]; });
        double group_start = 0.0;
        for (std::size_t i : order) {
            if (members.empty() || hk[i] - group_start > tol) {
                if (!members.empty() && hk[i] - energies.back() <= 10.0 * tol)
                    throw ToleranceAmbiguity("eigenvalue groups closer than 10x the grouping tolerance");
                group_start = hk[i];
                energies.push_back(hk[i]);
                exact.push_back(std::nullopt);
                members.emplace_back();
            }
            members.back().push_back(u.entries()[i]);
            energies.back() = hk[i];
        }
    }

    SpectralDecomposition<D> out;
    for (std::size_t g = 0; g < members.size(); ++g) {
        SpectralGroup<D> grp;
        grp.energy = energies[g];
        grp.energy_exact = exact[g];
        FourierState<D> s(u.h(), members[g], u.h_exact());
        grp.weight = s.norm2() / n2;
        grp.projected = s.normalized();
        out.groups.push_back(std::move(grp));
    }
    return out;
}

// Momentum window: an axis-aligned open box or an open ball.
template <std::size_t D>
struct MomentumRegion {
    enum class Kind { box, ball } kind = Kind::box;
    Point<D> lo{}, hi{};  // box
    Point<D> centre{};    // ball
    double radius = 0.0;

    static MomentumRegion box(Point<D> lo, Point<D> hi) {
        MomentumRegion r;
        r.kind = Kind::box;
        r.lo = lo;
        r.hi = hi;
        return r;
    }
    static MomentumRegion ball(Point<D> centre, double radius) {
        MomentumRegion r;
        r.kind = Kind::ball;
        r.centre = centre;
        r.radius = radius;
        for (std::size_t i = 0; i < D; ++i) {
            r.lo[i] = centre[i] - radius;
            r.hi[i] = centre[i] + radius;
        }
        return r;
    }
    bool contains(const Point<D>& xi) const {
        if (kind == Kind::box) {
            for (std::size_t i = 0; i < D; ++i)
                if (!(xi[i] > lo[i] && xi[i] < hi[i])) return false;
            return true;
        }
        double s = 0.0;
        for (std::size_t i = 0; i < D; ++i) s += (xi[i] - centre[i]) * (xi[i] - centre[i]);
        return s < radius * radius;
    }
};

struct SpacingResult {
    std::optional<double> tau;      // nullopt = infinite
    std::optional<Rational> gap;    // exact minimal positive gap
    std::size_t points = 0;
    std::size_t distinct_values = 0;
};

// h / (minimal positive gap of H on hZ^d inside the region).
template <std::size_t D>
SpacingResult spacing_scale(const HamiltonianModel& h, const Rational& hq, const MomentumRegion<D>& region,
                            std::size_t point_budget = 100'000'000) {
    if (!h.exact_rational()) throw ExactnessError("spacing_scale needs an exact Hamiltonian");
    if (h.dim() != D) throw ParameterError("spacing_scale: dimension mismatch");
    const double hd = to_double(hq);
    if (!(hd > 0)) throw ParameterError("spacing_scale: h must be positive");
    IntegerForm form = h.integer_form(hq);
    Mode<D> lo, hi;
    double count = 1.0;
    for (std::size_t i = 0; i < D; ++i) {
        lo[i] = static_cast<long long>(std::floor(region.lo[i] / hd)) - 1;
        hi[i] = static_cast<long long>(std::ceil(region.hi[i] / hd)) + 1;
        count *= static_cast<double>(hi[i] - lo[i] + 1);
        double m = std::max(std::abs(static_cast<double>(lo[i])), std::abs(static_cast<double>(hi[i])));
        if (m > h.integer_form_safe_radius()) throw ScaleError("spacing_scale: lattice values overflow");
    }
    if (count > static_cast<double>(point_budget)) throw ScaleError("spacing_scale: region holds too many lattice points");
    std::vector<__int128> values;
    for_each_in_box<D>(lo, hi, [&](const Mode<D>& k) {
        Point<D> xi;
        for (std::size_t i = 0; i < D; ++i) xi[i] = hd * static_cast<double>(k[i]);
        // Exact membership for rational boundaries is not needed: points on the
        // boundary are excluded by the strict floating test, which is exact for dyadic h.
        if (region.contains(xi)) values.push_back(form.poly(k.data()));
    });
    SpacingResult r;
    r.points = values.size();
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    r.distinct_values = values.size();
    if (values.size() < 2) return r;
    __int128 best = values[1] - values[0];
    for (std::size_t i = 2; i < values.size(); ++i) best = std::min(best, values[i] - values[i - 1]);
    Rational gap = form.scale * Rational(to_integer(best));
    if (form.scale < 0) gap = -gap;
    r.gap = gap;
    r.tau = hd / to_double(gap);
    return r;
}

// ||H(hD)u - E u||.
template <std::size_t D>
double quasimode_residual(const FourierState<D>& u, const HamiltonianModel& h, double e) {
    auto hk = symbol_table(h, u);
    double s = 0.0;
    for (std::size_t n = 0; n < u.size(); ++n) s += (hk[n] - e) * (hk[n] - e) * std::norm(u.entries()[n].value);
    return std::sqrt(s);
}

// Duhamel horizon T = target h / residual; infinity for an exact eigenfunction.
inline double stability_horizon(double residual, double h, double target_error) {
    if (residual < 0 || !(h > 0) || !(target_error > 0)) throw ParameterError("stability_horizon: invalid arguments");
    if (residual == 0.0) return std::numeric_limits<double>::infinity();
    return target_error * h / residual;
}

// W(x2) = x2^2 on |x2| <= 1/2, tapered to 0 at |x2| = 1 and periodized.
inline double wunsch_potential(double x2) {
    double y = std::remainder(x2, two_pi);
    return y * y * plateau(std::abs(y), 0.5, 1.0);
}

struct WunschResidual {
    double residual = 0.0;            // ||(P - E)u|| at the fine grid
    double truncation_estimate = 0.0; // change against a grid twice as fine
    double energy = 0.0;              // 1 + h^{2-eps}
};

namespace detail {

// ||(-h^2 d^2 + h^{2-2eps} W - h^{2-eps}) f|| for the x2 profile on `grid` points.
inline double wunsch_x2_residual(const std::vector<Complex>& coef, double h, double eps, std::size_t grid) {
    const std::size_t m = coef.size();
    const long long half = static_cast<long long>(m / 2);
    if (grid < m) throw ParameterError("wunsch residual grid smaller than the mode set");
    std::vector<std::complex<double>> buf(grid, 0.0);
    for (long long k = -half; k < half; ++k)
        buf[static_cast<std::size_t>((k + static_cast<long long>(grid)) % static_cast<long long>(grid))] =
            coef[static_cast<std::size_t>(k + half)];
    auto* data = reinterpret_cast<fftw_complex*>(buf.data());
    fftw_plan back, fwd;
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        back = fftw_plan_dft_1d(static_cast<int>(grid), data, data, FFTW_BACKWARD, FFTW_ESTIMATE);
        fwd = fftw_plan_dft_1d(static_cast<int>(grid), data, data, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    fftw_execute(back);
    for (std::size_t j = 0; j < grid; ++j) buf[j] *= wunsch_potential(two_pi * j / static_cast<double>(grid));
    fftw_execute(fwd);
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(back);
        fftw_destroy_plan(fwd);
    }
    for (auto& v : buf) v /= static_cast<double>(grid);

    const double kin = h * h, pot = std::pow(h, 2.0 - 2.0 * eps), shift = std::pow(h, 2.0 - eps);
    double s = 0.0;
    const long long g = static_cast<long long>(grid);
    for (long long k = -g / 2; k < g / 2; ++k) {
        Complex c = k >= -half && k < half ? coef[static_cast<std::size_t>(k + half)] : Complex(0.0);
        Complex vu = buf[static_cast<std::size_t>((k + g) % g)];
        Complex r = (kin * static_cast<double>(k * k) - shift) * c + pot * vu;
        s += std::norm(r);
    }
    return std::sqrt(s);
}

} // namespace detail

// Residual of (-h^2 Delta + h^{2(1-eps)} V - E) on the Wunsch state, E = 1 + h^{2-eps}.
inline WunschResidual wunsch_residual(const WunschState& w, double h) {
    const double eps = w.meta.eps_exponent;
    const std::size_t m = w.x2_coefficients.size();
    WunschResidual r;
    r.energy = 1.0 + std::pow(h, 2.0 - eps);
    // On mode (n, m): h^2 (n^2 + m^2) - E = h^2 m^2 - h^{2-eps} since h n = 1.
    r.residual = detail::wunsch_x2_residual(w.x2_coefficients, h, eps, 4 * m);
    double finer = detail::wunsch_x2_residual(w.x2_coefficients, h, eps, 8 * m);
    r.truncation_estimate = std::abs(finer - r.residual);
    return r;
}

} // namespace scl
