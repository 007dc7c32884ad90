#pragma once

// Finitely supported Fourier states on the d-torus and the packet families
// built from a compactly supported radial profile.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "scl/errors.hpp"
#include "scl/lattice.hpp"
#include "scl/profiles.hpp"

namespace scl {

using Complex = std::complex<double>;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

template <std::size_t D>
using Mode = std::array<long long, D>;

template <std::size_t D>
using Point = std::array<double, D>;

template <std::size_t D>
Mode<D> operator+(const Mode<D>& a, const Mode<D>& b) {
    Mode<D> c;
    for (std::size_t i = 0; i < D; ++i) c[i] = a[i] + b[i];
    return c;
}

template <std::size_t D>
Mode<D> operator-(const Mode<D>& a, const Mode<D>& b) {
    Mode<D> c;
    for (std::size_t i = 0; i < D; ++i) c[i] = a[i] - b[i];
    return c;
}

template <std::size_t D>
Mode<D> operator-(const Mode<D>& a) {
    Mode<D> c;
    for (std::size_t i = 0; i < D; ++i) c[i] = -a[i];
    return c;
}

// (2pi)^{-d/2}
template <std::size_t D>
double fourier_factor() {
    return std::pow(two_pi, -0.5 * static_cast<double>(D));
}

template <std::size_t D>
double torus_volume() {
    return std::pow(two_pi, static_cast<double>(D));
}

template <std::size_t D>
struct ModeCoefficient {
    Mode<D> k;
    Complex value;
};

// u(x) = (2pi)^{-d/2} sum_k u_k e^{ik.x}; entries sorted lexicographically by k.
template <std::size_t D>
class FourierState {
public:
    FourierState() = default;

    FourierState(double h, std::vector<ModeCoefficient<D>> entries, std::optional<Rational> h_exact = std::nullopt)
        : h_(h), h_exact_(std::move(h_exact)), entries_(std::move(entries)) {
        if (!(h_ > 0)) throw ParameterError("state: h must be positive");
        std::sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) { return a.k < b.k; });
        for (std::size_t i = 1; i < entries_.size(); ++i)
            if (entries_[i].k == entries_[i - 1].k) throw ParameterError("state: duplicate mode");
    }

    double h() const { return h_; }
    const std::optional<Rational>& h_exact() const { return h_exact_; }
    const std::vector<ModeCoefficient<D>>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    double pre_normalization_norm2() const { return pre_norm2_; }
    void set_pre_normalization_norm2(double v) { pre_norm2_ = v; }

    const Complex* find(const Mode<D>& k) const {
        auto it = std::lower_bound(entries_.begin(), entries_.end(), k,
                                   [](const auto& e, const Mode<D>& key) { return e.k < key; });
        if (it == entries_.end() || it->k != k) return nullptr;
        return &it->value;
    }

    Complex coefficient(const Mode<D>& k) const {
        const Complex* c = find(k);
        return c ? *c : Complex(0.0, 0.0);
    }

    double norm2() const {
        double s = 0.0;
        for (const auto& e : entries_) s += std::norm(e.value);
        return s;
    }

    FourierState with_values(std::vector<Complex> values) const {
        FourierState out = *this;
        for (std::size_t i = 0; i < entries_.size(); ++i) out.entries_[i].value = values[i];
        return out;
    }

    FourierState normalized() const {
        double n = std::sqrt(norm2());
        if (!(n > 0)) throw ParameterError("state: cannot normalize the zero state");
        FourierState out = *this;
        for (auto& e : out.entries_) e.value /= n;
        out.pre_norm2_ = n * n;
        return out;
    }

    Point<D> momentum(const Mode<D>& k) const {
        Point<D> p;
        for (std::size_t i = 0; i < D; ++i) p[i] = h_ * static_cast<double>(k[i]);
        return p;
    }

private:
    double h_ = 1.0;
    std::optional<Rational> h_exact_;
    std::vector<ModeCoefficient<D>> entries_;
    double pre_norm2_ = 1.0;
};

// Dense index over the bounding box of a state's support, for O(1) lookups.
template <std::size_t D>
class SupportIndex {
public:
    explicit SupportIndex(const FourierState<D>& u) {
        if (u.size() == 0) return;
        lo_.fill(0);
        hi_.fill(0);
        lo_ = u.entries().front().k;
        hi_ = lo_;
        for (const auto& e : u.entries())
            for (std::size_t i = 0; i < D; ++i) {
                lo_[i] = std::min(lo_[i], e.k[i]);
                hi_[i] = std::max(hi_[i], e.k[i]);
            }
        std::size_t vol = 1;
        for (std::size_t i = 0; i < D; ++i) {
            ext_[i] = static_cast<std::size_t>(hi_[i] - lo_[i] + 1);
            vol *= ext_[i];
        }
        if (vol > (std::size_t(1) << 28)) throw ScaleError("support bounding box too large for dense index");
        slot_.assign(vol, -1);
        for (std::size_t n = 0; n < u.size(); ++n) slot_[offset(u.entries()[n].k)] = static_cast<long>(n);
    }

    // Index of k in the state's entries, or -1.
    long operator()(const Mode<D>& k) const {
        if (slot_.empty()) return -1;
        for (std::size_t i = 0; i < D; ++i)
            if (k[i] < lo_[i] || k[i] > hi_[i]) return -1;
        return slot_[offset(k)];
    }

private:
    std::size_t offset(const Mode<D>& k) const {
        std::size_t o = 0;
        for (std::size_t i = 0; i < D; ++i) o = o * ext_[i] + static_cast<std::size_t>(k[i] - lo_[i]);
        return o;
    }

    Mode<D> lo_{}, hi_{};
    std::array<std::size_t, D> ext_{};
    std::vector<long> slot_;
};

// Radial bump: 1 on |z| <= R0/2, 0 on |z| >= R0, scaled to unit L2 norm on R^d.
struct BumpProfile {
    double radius = 1.0;
    int smoothstep_order = 5;
    double normalization = 1.0;
    std::size_t dim = 1;

    static BumpProfile make(std::size_t d, double r0 = 1.0) {
        if (!(r0 > 0)) throw ParameterError("bump: radius must be positive");
        BumpProfile b;
        b.radius = r0;
        b.dim = d;
        b.normalization = 1.0 / std::sqrt(raw_l2_squared(d, r0));
        return b;
    }

    // Unnormalized psi(r).
    double shape(double r) const { return plateau(r, 0.5 * radius, radius); }

    // Unit-L2 profile value at radius r.
    double operator()(double r) const { return normalization * shape(r); }

    // rho-hat = (2pi)^{d/2} * profile, so that rho has unit L2 norm.
    double rho_hat(double r) const { return std::pow(two_pi, 0.5 * static_cast<double>(dim)) * (*this)(r); }

    // |S^{d-1}| * int_0^R0 psi(r)^2 r^{d-1} dr.
    static double raw_l2_squared(std::size_t d, double r0) {
        const double dd = static_cast<double>(d);
        const double sphere = 2.0 * std::pow(std::numbers::pi, 0.5 * dd) / boost::math::tgamma(0.5 * dd);
        const double inner = std::pow(0.5 * r0, dd) / dd;
        auto f = [&](double r) {
            double p = plateau(r, 0.5 * r0, r0);
            return p * p * std::pow(r, dd - 1.0);
        };
        const double outer = boost::math::quadrature::gauss<double, 30>::integrate(f, 0.5 * r0, r0);
        return sphere * (inner + outer);
    }
};

// Shared parameters of the packet families.
template <std::size_t D>
struct WavePacketSpec {
    Point<D> x0{};
    Point<D> xi0{};
    double c_eps = 1.0;
    double gamma_eps = 0.5;
    double profile_radius = 1.0;
    std::optional<Point<D>> eta0;  // modulation, in <Lambda>
    double c_tau = 1.0;            // tau_h = c_tau h^{-gamma_tau}, used with eta0
    double gamma_tau = 0.5;
    std::size_t mode_budget = 4'000'000;

    double epsilon(double h) const { return c_eps * std::pow(h, gamma_eps); }
    double tau(double h) const { return c_tau * std::pow(h, -gamma_tau); }
};

// Visits every mode of the box lo <= k <= hi in lexicographic order.
template <std::size_t D, class Fn>
void for_each_in_box(const Mode<D>& lo, const Mode<D>& hi, Fn&& fn) {
    for (std::size_t i = 0; i < D; ++i)
        if (hi[i] < lo[i]) return;
    Mode<D> k = lo;
    for (;;) {
        fn(k);
        std::size_t p = D;
        while (p > 0) {
            --p;
            if (++k[p] <= hi[p]) break;
            k[p] = lo[p];
            if (p == 0) return;
        }
    }
}

namespace detail {

template <std::size_t D>
FourierState<D> packet_at(const WavePacketSpec<D>& spec, double h, const Point<D>& center_xi,
                          std::optional<Rational> h_exact) {
    if (!(h > 0)) throw ParameterError("wave_packet: h must be positive");
    if (!(spec.c_eps > 0)) throw ParameterError("wave_packet: c_eps must be positive");
    const double eps = spec.epsilon(h);
    if (eps / h < 2.0) throw ParameterError("wave_packet: eps_h / h must be at least 2");
    const BumpProfile prof = BumpProfile::make(D, spec.profile_radius);
    const double r0 = spec.profile_radius;

    Point<D> c;
    Mode<D> lo, hi;
    double budget = 1.0;
    for (std::size_t i = 0; i < D; ++i) {
        c[i] = center_xi[i] / h;
        lo[i] = static_cast<long long>(std::floor(c[i] - r0 / eps));
        hi[i] = static_cast<long long>(std::ceil(c[i] + r0 / eps));
        budget *= static_cast<double>(hi[i] - lo[i] + 1);
    }
    if (budget > static_cast<double>(spec.mode_budget)) throw ScaleError("wave_packet: support exceeds mode budget");

    const double amp = std::pow(eps, 0.5 * D) * fourier_factor<D>();
    std::vector<ModeCoefficient<D>> out;
    for_each_in_box<D>(lo, hi, [&](const Mode<D>& k) {
        double z2 = 0.0, phase = 0.0;
        for (std::size_t i = 0; i < D; ++i) {
            double dk = static_cast<double>(k[i]) - c[i];
            z2 += eps * eps * dk * dk;
            phase -= dk * spec.x0[i];
        }
        double z = std::sqrt(z2);
        if (z < r0) out.push_back({k, amp * prof.rho_hat(z) * std::polar(1.0, phase)});
    });
    FourierState<D> raw(h, std::move(out), std::move(h_exact));
    return raw.normalized();
}

} // namespace detail

// Poisson-summed packet centred at (x0, xi0) with momentum width h/eps_h.
template <std::size_t D>
FourierState<D> wave_packet(const WavePacketSpec<D>& spec, double h, std::optional<Rational> h_exact = std::nullopt) {
    return detail::packet_at(spec, h, spec.xi0, std::move(h_exact));
}

// Same packet with frequency centre xi0 + eta0 / tau_h.
template <std::size_t D>
FourierState<D> modulated_wave_packet(const WavePacketSpec<D>& spec, double h,
                                      std::optional<Rational> h_exact = std::nullopt) {
    Point<D> centre = spec.xi0;
    if (spec.eta0) {
        const double tau = spec.tau(h);
        for (std::size_t i = 0; i < D; ++i) centre[i] += (*spec.eta0)[i] / tau;
    }
    return detail::packet_at(spec, h, centre, std::move(h_exact));
}

// The given coefficients, normalized.
template <std::size_t D>
FourierState<D> spectral_superposition(double h, std::vector<ModeCoefficient<D>> modes,
                                       std::optional<Rational> h_exact = std::nullopt) {
    if (modes.empty()) throw ParameterError("spectral_superposition: empty mode list");
    return FourierState<D>(h, std::move(modes), std::move(h_exact)).normalized();
}

// Mass of the modes with |hk|^2 > R.
template <std::size_t D>
double oscillation_tail(const FourierState<D>& u, double r) {
    if (!(r > 0)) throw ParameterError("oscillation_tail: R must be positive");
    double s = 0.0;
    for (const auto& e : u.entries()) {
        auto p = u.momentum(e.k);
        double m2 = 0.0;
        for (double x : p) m2 += x * x;
        if (m2 > r) s += std::norm(e.value);
    }
    return s;
}

struct WunschMetadata {
    long long n = 0;              // the x1 mode 1/h
    double eps_exponent = 0.5;
    std::size_t grid = 0;         // x2 samples used for the transform
    double second_moment = 0.0;   // int x2^2 |u|^2 dx2 for the normalized x2 profile
    double pre_normalization_norm2 = 0.0;
};

struct WunschState {
    FourierState<2> state;
    std::vector<Complex> x2_coefficients;  // state coefficient of (n, m) at index m + grid/2
    WunschMetadata meta;
};

// Wunsch profile g(x2) chi(x2) on [-pi, pi).
inline double wunsch_profile(double x2, double h, double eps_exponent) {
    double g = std::exp(-x2 * x2 / (2.0 * std::pow(h, eps_exponent)));
    return g * plateau(std::abs(x2), 0.25, 0.5);
}

// c e^{i x1/h} g_h(x2) chi(x2) as a separable Fourier state.
inline WunschState wunsch_quasimode(double h, double eps_exponent, std::size_t grid = 4096) {
    if (!(eps_exponent > 0 && eps_exponent < 1)) throw ParameterError("wunsch: exponent must lie in (0,1)");
    const double inv = 1.0 / h;
    const long long n = std::llround(inv);
    if (n <= 0 || std::abs(inv - static_cast<double>(n)) > 1e-9 * inv) throw ParameterError("wunsch: 1/h must be an integer");
    if (grid < 16 || (grid & (grid - 1)) != 0) throw ParameterError("wunsch: grid must be a power of two");

    std::vector<double> f(grid);
    const double dx = two_pi / static_cast<double>(grid);
    for (std::size_t j = 0; j < grid; ++j) f[j] = wunsch_profile(-std::numbers::pi + dx * j, h, eps_exponent);

    // x2 coefficients (2pi)^{-1/2} int f e^{-i m x2}, by the trapezoid rule (exact for the band-limited part).
    const long long half = static_cast<long long>(grid / 2);
    std::vector<Complex> coef(grid);
    for (long long m = -half; m < half; ++m) {
        Complex s = 0.0;
        for (std::size_t j = 0; j < grid; ++j) {
            if (f[j] == 0.0) continue;
            double x = -std::numbers::pi + dx * j;
            s += f[j] * std::polar(1.0, -static_cast<double>(m) * x);
        }
        coef[static_cast<std::size_t>(m + half)] = s * dx / std::sqrt(two_pi);
    }
    // The x1 factor e^{i n x1} carries coefficient sqrt(2pi) in this convention.
    std::vector<ModeCoefficient<2>> modes;
    for (long long m = -half; m < half; ++m) {
        Complex c = coef[static_cast<std::size_t>(m + half)] * std::sqrt(two_pi);
        if (c != 0.0) modes.push_back({Mode<2>{n, m}, c});
    }
    WunschState w;
    w.state = FourierState<2>(h, std::move(modes), Rational(1, n)).normalized();
    double norm2 = 0.0, mom = 0.0;
    for (std::size_t j = 0; j < grid; ++j) {
        double x = -std::numbers::pi + dx * j;
        norm2 += f[j] * f[j];
        mom += x * x * f[j] * f[j];
    }
    const double scale = std::sqrt(two_pi / w.state.pre_normalization_norm2());
    for (auto& c : coef) c *= scale;
    w.x2_coefficients = std::move(coef);
    w.meta.n = n;
    w.meta.eps_exponent = eps_exponent;
    w.meta.grid = grid;
    w.meta.second_moment = mom / norm2;
    w.meta.pre_normalization_norm2 = w.state.pre_normalization_norm2();
    return w;
}

} // namespace scl
