#pragma once

// Weyl pairings, position densities and their exact time averages.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <set>
#include <vector>

#include <fftw3.h>

#include "scl/errors.hpp"
#include "scl/hamiltonian.hpp"
#include "scl/lattice.hpp"
#include "scl/parallel.hpp"
#include "scl/propagator.hpp"
#include "scl/state.hpp"

namespace scl {

// a(x, xi) = (2pi)^{-d/2} sum_k a_k(xi) e^{ik.x}.
template <std::size_t D>
struct Symbol {
    using Evaluator = std::function<Complex(const double* xi)>;
    struct Term {
        Mode<D> k;
        Evaluator coefficient;
    };
    std::vector<Term> terms;
    double support_radius = std::numeric_limits<double>::infinity();

    std::vector<Mode<D>> modes() const {
        std::vector<Mode<D>> out;
        for (const auto& t : terms) out.push_back(t.k);
        return out;
    }

    // Largest |a_k(xi)| over terms, sampled at the given points.
    double max_coefficient(const std::vector<Point<D>>& samples) const {
        double m = 0.0;
        for (const auto& p : samples)
            for (const auto& t : terms) m = std::max(m, std::abs(t.coefficient(p.data())));
        return m;
    }

    // a_{-k} = conj(a_k) at the sampled points.
    bool is_hermitian(const std::vector<Point<D>>& samples, double tol = 1e-12) const {
        for (const auto& t : terms) {
            const Term* partner = nullptr;
            for (const auto& s : terms)
                if (s.k == -t.k) partner = &s;
            for (const auto& p : samples) {
                Complex a = t.coefficient(p.data());
                Complex b = partner ? partner->coefficient(p.data()) : Complex(0.0);
                if (std::abs(a - std::conj(b)) > tol) return false;
            }
        }
        return true;
    }
};

// Symbol depending on x only, with constant coefficients.
template <std::size_t D>
Symbol<D> position_symbol(const std::vector<std::pair<Mode<D>, Complex>>& coefficients) {
    Symbol<D> a;
    for (const auto& [k, c] : coefficients) a.terms.push_back({k, [c](const double*) { return c; }});
    return a;
}

// Averaging window on [a, b].
struct TimeWindow {
    enum class Kind { indicator, hat };
    double a = 0.0;
    double b = 1.0;
    Kind kind = Kind::indicator;

    TimeWindow() = default;
    TimeWindow(double a_, double b_, Kind k = Kind::indicator) : a(a_), b(b_), kind(k) {
        if (!(b > a)) throw ParameterError("time window must have b > a");
    }

    double length() const { return b - a; }

    // Exact window average of e^{-i omega t}.
    Complex phi(double omega) const {
        const double c = 0.5 * (a + b), l = b - a;
        auto sinc = [](double x) {
            if (std::abs(x) < 1e-4) return 1.0 - x * x / 6.0 + x * x * x * x / 120.0;
            return std::sin(x) / x;
        };
        const double s = kind == Kind::indicator ? sinc(0.5 * omega * l) : std::pow(sinc(0.25 * omega * l), 2);
        return std::polar(s, -omega * c);
    }
};

// Fourier coefficients c_m of a position density, |u|^2 = sum_m c_m e^{imx}.
template <std::size_t D>
struct DensityReport {
    std::vector<Mode<D>> modes;
    std::vector<Complex> coefficients;

    struct Grid {
        std::size_t exponent = 0;   // 2^exponent points per axis
        std::vector<double> values; // row-major, x_i = 2 pi n_i / 2^exponent
        double sup = 0.0;
        double l2 = 0.0;
    };
    std::optional<Grid> grid;

    Complex coefficient(const Mode<D>& m) const {
        for (std::size_t i = 0; i < modes.size(); ++i)
            if (modes[i] == m) return coefficients[i];
        throw ParameterError("density report has no such mode");
    }
};

// Every difference j - k of support modes (the full autocorrelation set), sorted.
template <std::size_t D>
std::vector<Mode<D>> difference_set(const FourierState<D>& u) {
    std::set<Mode<D>> s;
    for (const auto& a : u.entries())
        for (const auto& b : u.entries()) s.insert(a.k - b.k);
    return {s.begin(), s.end()};
}

// Smallest 2^g per axis that resolves every mode in M without aliasing.
template <std::size_t D>
std::size_t nyquist_exponent(const std::vector<Mode<D>>& modes) {
    long long mx = 0;
    for (const auto& m : modes)
        for (long long x : m) mx = std::max(mx, x < 0 ? -x : x);
    std::size_t g = 1;
    while ((1LL << g) <= 2 * mx) ++g;
    return g;
}

// Synthesizes sum_m c_m e^{imx} on a uniform 2^g grid and records sup and L2 norms.
template <std::size_t D>
void synthesize_grid(DensityReport<D>& rep, std::optional<std::size_t> exponent = std::nullopt) {
    const std::size_t g = exponent.value_or(nyquist_exponent(rep.modes));
    const long long n = 1LL << g;
    for (const auto& m : rep.modes)
        for (long long x : m)
            if (2 * std::abs(x) >= n) throw ParameterError("grid does not resolve the mode set");
    std::size_t total = 1;
    for (std::size_t i = 0; i < D; ++i) total *= static_cast<std::size_t>(n);
    std::vector<std::complex<double>> buf(total, 0.0);
    for (std::size_t i = 0; i < rep.modes.size(); ++i) {
        std::size_t off = 0;
        for (std::size_t a = 0; a < D; ++a) off = off * n + static_cast<std::size_t>(((rep.modes[i][a] % n) + n) % n);
        buf[off] += rep.coefficients[i];
    }
    std::array<int, D> dims;
    dims.fill(static_cast<int>(n));
    auto* data = reinterpret_cast<fftw_complex*>(buf.data());
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        plan = fftw_plan_dft(static_cast<int>(D), dims.data(), data, data, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    typename DensityReport<D>::Grid grid;
    grid.exponent = g;
    grid.values.resize(total);
    double sum2 = 0.0;
    for (std::size_t i = 0; i < total; ++i) {
        grid.values[i] = buf[i].real();
        grid.sup = std::max(grid.sup, std::abs(grid.values[i]));
        sum2 += grid.values[i] * grid.values[i];
    }
    grid.l2 = std::sqrt(sum2 * torus_volume<D>() / static_cast<double>(total));
    rep.grid = std::move(grid);
}

// c_m = (2pi)^{-d} sum_j u(j+m) conj(u(j)).
template <std::size_t D>
DensityReport<D> density_modes(const FourierState<D>& u, const std::vector<Mode<D>>& modes) {
    DensityReport<D> rep;
    rep.modes = modes;
    rep.coefficients.assign(modes.size(), Complex(0.0));
    const SupportIndex<D> index(u);
    const double vol = torus_volume<D>();
    parallel_for(modes.size(), [&](std::size_t i) {
        Complex s = 0.0;
        for (const auto& e : u.entries()) {
            long p = index(e.k + modes[i]);
            if (p >= 0) s += u.entries()[static_cast<std::size_t>(p)].value * std::conj(e.value);
        }
        rep.coefficients[i] = s / vol;
    });
    return rep;
}

// Window average over t of the density of e^{-i tau t H(hD)/h} u, in closed form per mode pair.
template <std::size_t D>
DensityReport<D> time_averaged_density(const FourierState<D>& u, const HamiltonianModel& h, double tau,
                                       const TimeWindow& window, const std::vector<Mode<D>>& modes) {
    DensityReport<D> rep;
    rep.modes = modes;
    rep.coefficients.assign(modes.size(), Complex(0.0));
    const SupportIndex<D> index(u);
    const auto hk = symbol_table(h, u);
    const double vol = torus_volume<D>(), scale = tau / u.h();
    parallel_for(modes.size(), [&](std::size_t i) {
        Complex s = 0.0;
        for (std::size_t j = 0; j < u.size(); ++j) {
            const auto& e = u.entries()[j];
            long p = index(e.k + modes[i]);
            if (p < 0) continue;
            const auto q = static_cast<std::size_t>(p);
            const double omega = scale * (hk[q] - hk[j]);
            s += u.entries()[q].value * std::conj(e.value) * window.phi(omega);
        }
        rep.coefficients[i] = s / vol;
    });
    return rep;
}

// (2pi)^{-d/2} sum_{k, m in K} u(k) conj(u(k+m)) a_m(h(2k+m)/2).
template <std::size_t D>
Complex weyl_pair(const FourierState<D>& u, const Symbol<D>& a) {
    const SupportIndex<D> index(u);
    Complex s = 0.0;
    Point<D> mid;
    for (const auto& term : a.terms) {
        for (const auto& e : u.entries()) {
            long p = index(e.k + term.k);
            if (p < 0) continue;
            for (std::size_t i = 0; i < D; ++i)
                mid[i] = u.h() * (static_cast<double>(e.k[i]) + 0.5 * static_cast<double>(term.k[i]));
            s += e.value * std::conj(u.entries()[static_cast<std::size_t>(p)].value) * term.coefficient(mid.data());
        }
    }
    return s * fourier_factor<D>();
}

// Keeps the modes of a lying in Lambda.
template <std::size_t D>
Symbol<D> averaged_symbol(const Symbol<D>& a, const PrimitiveModule& lambda) {
    if (lambda.dim() != D) throw ParameterError("averaged_symbol: dimension mismatch");
    Symbol<D> out;
    out.support_radius = a.support_radius;
    for (const auto& t : a.terms)
        if (lambda.contains_small(t.k)) out.terms.push_back(t);
    return out;
}

// a o phi_s: coefficients a_k(xi) e^{i s k.dH(xi)}.
template <std::size_t D>
Symbol<D> transported_symbol(const Symbol<D>& a, const HamiltonianModel& h, double s) {
    Symbol<D> out;
    out.support_radius = a.support_radius;
    for (const auto& t : a.terms) {
        auto k = t.k;
        auto f = t.coefficient;
        out.terms.push_back({k, [k, f, h, s](const double* xi) {
                                 double g[D];
                                 h.gradient(xi, g);
                                 double kd = 0.0;
                                 for (std::size_t i = 0; i < D; ++i) kd += static_cast<double>(k[i]) * g[i];
                                 return f(xi) * std::polar(1.0, s * kd);
                             }});
    }
    return out;
}

// |<w_h(t), a o phi_s - a>| for the state evolved to time tau t.
template <std::size_t D>
double egorov_defect(const FourierState<D>& u, const HamiltonianModel& h, const Symbol<D>& a, double s, double t,
                     double tau) {
    if (s == 0.0) return 0.0;
    const auto v = evolve(u, h, tau * t);
    Symbol<D> diff;
    for (const auto& term : a.terms) {
        auto k = term.k;
        auto f = term.coefficient;
        diff.terms.push_back({k, [k, f, h, s](const double* xi) {
                                  double g[D];
                                  h.gradient(xi, g);
                                  double kd = 0.0;
                                  for (std::size_t i = 0; i < D; ++i) kd += static_cast<double>(k[i]) * g[i];
                                  // e^{i theta} - 1 = 2i sin(theta/2) e^{i theta/2}, without cancellation.
                                  const double th = s * kd;
                                  return f(xi) * Complex(0.0, 2.0 * std::sin(0.5 * th)) * std::polar(1.0, 0.5 * th);
                              }});
    }
    return std::abs(weyl_pair(v, diff));
}

} // namespace scl
