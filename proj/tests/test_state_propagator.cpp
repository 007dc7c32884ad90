#include <gtest/gtest.h>

#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "scl/propagator.hpp"
#include "scl/state.hpp"

using namespace scl;

namespace {

WavePacketSpec<1> packet_1d() {
    WavePacketSpec<1> s;
    s.x0 = {0.0};
    s.xi0 = {1.0};
    return s;
}

WavePacketSpec<2> packet_2d() {
    WavePacketSpec<2> s;
    s.x0 = {3.141592653589793, 1.0};
    s.xi0 = {1.0, 0.0};
    return s;
}

Rational dyadic(int j) { return Rational(Integer(1), Integer(1) << j); }

} // namespace

TEST(Bump, UnitL2ByIndependentQuadrature) {
    for (std::size_t d : {1u, 2u, 3u}) {
        auto b = BumpProfile::make(d, 1.0);
        const double sphere = d == 1 ? 2.0 : d == 2 ? two_pi : 4.0 * std::numbers::pi;
        auto f = [&](double r) { return b(r) * b(r) * std::pow(r, static_cast<double>(d) - 1.0); };
        const double inner = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 0.5);
        const double outer = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.5, 1.0);
        EXPECT_NEAR(sphere * (inner + outer), 1.0, 1e-8);
    }
}

TEST(Bump, PlateauShape) {
    auto b = BumpProfile::make(2, 1.0);
    EXPECT_EQ(b.shape(0.0), 1.0);
    EXPECT_EQ(b.shape(0.5), 1.0);
    EXPECT_EQ(b.shape(1.0), 0.0);
    double prev = 1.0;
    for (double r = 0.5; r <= 1.0; r += 0.01) {
        EXPECT_LE(b.shape(r), prev + 1e-15);
        prev = b.shape(r);
    }
}

TEST(WavePacket, SupportArithmeticOneDimension) {
    auto s = packet_1d();
    s.gamma_eps = 0.5;  // eps = h^{1/2} = 1/2 at h = 1/4
    auto u = wave_packet(s, 0.25);
    // Strict support |eps(k - 4)| < 1.
    std::vector<long long> ks;
    for (const auto& e : u.entries()) ks.push_back(e.k[0]);
    EXPECT_EQ(ks, (std::vector<long long>{3, 4, 5}));
}

TEST(WavePacket, PeakValueBeforeNormalization) {
    auto s = packet_2d();
    const double h = 1.0 / 256, eps = std::sqrt(h);
    auto u = wave_packet(s, h);
    const Complex* peak = u.find({256, 0});
    ASSERT_NE(peak, nullptr);
    auto b = BumpProfile::make(2, 1.0);
    const double expected = eps * fourier_factor<2>() * b.rho_hat(0.0) / std::sqrt(u.pre_normalization_norm2());
    EXPECT_NEAR(std::abs(*peak), expected, 1e-14);
}

TEST(WavePacket, NormConvergesAlongLadder) {
    auto s = packet_2d();
    double prev = 1.0;
    for (int j = 6; j <= 10; ++j) {
        auto u = wave_packet(s, std::ldexp(1.0, -j));
        const double err = std::abs(u.pre_normalization_norm2() - 1.0);
        EXPECT_LT(err, prev);
        prev = err;
        EXPECT_NEAR(u.norm2(), 1.0, 1e-13);
    }
    EXPECT_LE(prev, 0.05);
}

TEST(WavePacket, ModulatedCentreAndZeroModulation) {
    auto s = packet_2d();
    const double h = 1.0 / 1024;
    s.eta0 = Point<2>{0.0, 0.0};
    auto a = wave_packet(s, h), b = modulated_wave_packet(s, h);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.entries()[i].value, b.entries()[i].value);

    s.eta0 = Point<2>{0.0, 0.5};
    s.gamma_tau = 0.5;
    auto m = modulated_wave_packet(s, h);
    // The profile has a plateau, so compare the mass centroid with (xi0 + eta0/tau)/h = (1024, 16).
    double c0 = 0.0, c1 = 0.0, mass = 0.0;
    for (const auto& e : m.entries()) {
        const double w = std::norm(e.value);
        c0 += w * static_cast<double>(e.k[0]);
        c1 += w * static_cast<double>(e.k[1]);
        mass += w;
    }
    EXPECT_NEAR(c0 / mass, 1024.0, 0.5);
    EXPECT_NEAR(c1 / mass, 16.0, 0.5);
}

TEST(WavePacket, ScaleAndParameterErrors) {
    auto s = packet_2d();
    s.gamma_eps = 0.99;
    EXPECT_THROW(wave_packet(s, 0.25), ParameterError);
    auto t = packet_2d();
    t.mode_budget = 100;
    EXPECT_THROW(wave_packet(t, 1.0 / 1024), ScaleError);
}

TEST(Superposition, PlaneWaveAndEigenfunctions) {
    auto p = spectral_superposition<2>(0.1, {{{3, 4}, Complex(2.0)}});
    EXPECT_EQ(p.entries()[0].value, Complex(1.0));
    auto h = HamiltonianModel::identity_quadratic(2);
    auto u = spectral_superposition<2>(0.125, {{{1, 0}, Complex(1.0)}, {{0, 1}, Complex(1.0)}}, Rational(1, 8));
    EXPECT_LE(quasimode_residual(u, h, 0.125 * 0.125), 1e-14);
    EXPECT_THROW(spectral_superposition<2>(0.1, {}), ParameterError);
    EXPECT_THROW(FourierState<2>(0.1, {{{1, 0}, 1.0}, {{1, 0}, 2.0}}), ParameterError);
}

TEST(OscillationTail, Examples) {
    auto s = packet_2d();
    const double h = 1.0 / 256, eps = std::sqrt(h);
    auto u = wave_packet(s, h);
    EXPECT_EQ(oscillation_tail(u, std::pow(1.0 + eps, 2) + 1e-9), 0.0);
    auto two = spectral_superposition<2>(0.1, {{{1, 0}, Complex(0.6)}, {{30, 0}, Complex(0.8)}});
    EXPECT_NEAR(oscillation_tail(two, 1.0), 0.64, 1e-15);
    EXPECT_EQ(oscillation_tail(spectral_superposition<2>(0.1, {{{1, 0}, 1.0}}), 1.0), 0.0);
}

TEST(Wunsch, SeparableStructureAndSecondMoment) {
    const double h = 1.0 / 256;
    auto w = wunsch_quasimode(h, 0.5, 4096);
    for (const auto& e : w.state.entries()) EXPECT_EQ(e.k[0], 256);
    EXPECT_NEAR(w.state.norm2(), 1.0, 1e-13);
    // 1-d quadrature of x2^2 |profile|^2 against the stored moment.
    auto g = [&](double x) { return wunsch_profile(x, h, 0.5); };
    auto num = [&](double x) { return x * x * g(x) * g(x); };
    auto den = [&](double x) { return g(x) * g(x); };
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    const double m2 = GK::integrate(num, -1.0, 1.0, 12) / GK::integrate(den, -1.0, 1.0, 12);
    EXPECT_NEAR(w.meta.second_moment, m2, 1e-6);
    EXPECT_THROW(wunsch_quasimode(0.3, 0.5), ParameterError);
}

TEST(Evolve, IdentityPhaseAndGroupLaw) {
    auto h = HamiltonianModel::identity_quadratic(2);
    auto u = wave_packet(packet_2d(), 1.0 / 128, dyadic(7));
    auto same = evolve(u, h, 0.0);
    for (std::size_t i = 0; i < u.size(); ++i) EXPECT_EQ(same.entries()[i].value, u.entries()[i].value);

    auto one = spectral_superposition<2>(0.1, {{{3, 4}, Complex(1.0)}});
    auto v = evolve(one, h, 0.8);
    EXPECT_NEAR(std::abs(v.entries()[0].value - std::polar(1.0, -2.5 * 0.8)), 0.0, 1e-14);

    auto a = evolve(evolve(u, h, 0.3), h, 0.45), b = evolve(u, h, 0.75);
    for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(std::abs(a.entries()[i].value - b.entries()[i].value), 0.0, 1e-13);
    EXPECT_NEAR(b.norm2(), u.norm2(), 1e-13);
}

TEST(Evolve, ExactAndFloatingPhasesAgree) {
    auto h = HamiltonianModel::identity_quadratic(2);
    auto exact = wave_packet(packet_2d(), 1.0 / 64, dyadic(6));
    auto floating = wave_packet(packet_2d(), 1.0 / 64);
    auto a = evolve(exact, h, 12.3), b = evolve(floating, h, 12.3);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(std::abs(a.entries()[i].value - b.entries()[i].value), 0.0, 1e-11);
}

TEST(Eigenspaces, ExamplesAndReconstruction) {
    auto h = HamiltonianModel::identity_quadratic(2);
    auto u = spectral_superposition<2>(0.25, {{{1, 0}, 1.0}, {{0, 1}, Complex(0.0, 1.0)}, {{1, 1}, 2.0}}, Rational(1, 4));
    auto d = eigenspace_decompose(u, h);
    ASSERT_EQ(d.groups.size(), 2u);
    EXPECT_EQ(*d.groups[0].energy_exact, Rational(1, 16));
    EXPECT_EQ(*d.groups[1].energy_exact, Rational(2, 16));
    EXPECT_NEAR(d.groups[0].weight, 2.0 / 6.0, 1e-15);
    EXPECT_NEAR(d.groups[0].weight + d.groups[1].weight, 1.0, 1e-12);
    for (const auto& e : u.entries()) {
        Complex s = 0.0;
        for (const auto& g : d.groups)
            if (const Complex* c = g.projected.find(e.k)) s += std::sqrt(g.weight) * *c;
        EXPECT_NEAR(std::abs(s - e.value), 0.0, 1e-15);
    }
    auto single = eigenspace_decompose(spectral_superposition<2>(0.25, {{{2, 1}, 1.0}}), h);
    ASSERT_EQ(single.groups.size(), 1u);
    EXPECT_EQ(single.groups[0].weight, 1.0);

    auto diag = HamiltonianModel::difference_quadratic({1, -1}, {Rational(1), Rational(1)});
    std::vector<ModeCoefficient<2>> modes;
    for (long long n = -5; n <= 5; ++n) modes.push_back({{n, -n}, Complex(std::exp(-0.1 * n * n))});
    auto dd = eigenspace_decompose(spectral_superposition<2>(0.125, modes, Rational(1, 8)), diag);
    ASSERT_EQ(dd.groups.size(), 1u);
    EXPECT_EQ(*dd.groups[0].energy_exact, 0);
}

TEST(Eigenspaces, FloatingToleranceAmbiguity) {
    auto h = HamiltonianModel::identity_quadratic(1);
    auto u = spectral_superposition<1>(1e-3, {{{1}, 1.0}, {{2}, 1.0}});
    // Energies 1e-6 and 4e-6: tolerance 5e-7 groups separately but 10x tolerance overlaps.
    EXPECT_THROW(eigenspace_decompose(u, h, 5e-7), ToleranceAmbiguity);
    EXPECT_EQ(eigenspace_decompose(u, h, 1e-8).groups.size(), 2u);
}

TEST(Spacing, Examples) {
    auto h = HamiltonianModel::identity_quadratic(1);
    auto r = spacing_scale<1>(h, Rational(1, 10), MomentumRegion<1>::box({-2.0}, {2.0}));
    ASSERT_TRUE(r.tau);
    EXPECT_EQ(*r.gap, Rational(1, 100));
    EXPECT_NEAR(*r.tau, 10.0, 1e-12);

    auto lin = HamiltonianModel::linear({Rational(2)});
    auto l = spacing_scale<1>(lin, Rational(1, 10), MomentumRegion<1>::box({-1.0}, {1.0}));
    EXPECT_EQ(*l.gap, Rational(1, 5));
    EXPECT_NEAR(*l.tau, 0.5, 1e-15);

    auto one = spacing_scale<1>(h, Rational(1, 10), MomentumRegion<1>::box({0.05}, {0.15}));
    EXPECT_FALSE(one.tau.has_value());
}

TEST(Spacing, AgreesWithBruteForceEnumeration) {
    auto h = HamiltonianModel::quadratic({{Rational(1), Rational(0)}, {Rational(0), Rational(2)}});
    const Rational hq(1, 8);
    auto r = spacing_scale<2>(h, hq, MomentumRegion<2>::ball({0.0, 0.0}, 1.0));
    std::vector<Rational> values;
    for (long long a = -8; a <= 8; ++a)
        for (long long b = -8; b <= 8; ++b)
            if (a * a + b * b < 64) values.push_back(hq * hq * (a * a + 2 * b * b));
    std::sort(values.begin(), values.end());
    Rational gap = -1;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] != values[i - 1] && (gap < 0 || values[i] - values[i - 1] < gap)) gap = values[i] - values[i - 1];
    EXPECT_EQ(*r.gap, gap);
}

TEST(Quasimode, DegenerateSlopeAndHorizon) {
    auto h = HamiltonianModel::even_power(2, 4);
    auto s = packet_2d();
    s.xi0 = {0.0, 0.0};
    std::vector<double> lx, ly;
    for (int j = 6; j <= 10; ++j) {
        const double hh = std::ldexp(1.0, -j);
        lx.push_back(std::log(hh / std::sqrt(hh)));
        ly.push_back(std::log(quasimode_residual(wave_packet(s, hh), h, 0.0)));
    }
    const double slope = (ly.back() - ly.front()) / (lx.back() - lx.front());
    EXPECT_GT(slope, 3.7);
    EXPECT_LT(slope, 4.3);
    EXPECT_TRUE(std::isinf(stability_horizon(0.0, 0.1, 0.1)));
    EXPECT_NEAR(stability_horizon(0.01, 0.1, 0.1), 1.0, 1e-15);
}

TEST(Quasimode, HorizonBoundsEvolutionDrift) {
    auto h = HamiltonianModel::identity_quadratic(2);
    auto u = wave_packet(packet_2d(), 1.0 / 64);
    const double e = 1.0, res = quasimode_residual(u, h, e);
    for (int i = 1; i <= 20; ++i) {
        const double t = 0.05 * i;
        auto v = evolve(u, h, t);
        double diff = 0.0;
        const Complex phase = std::polar(1.0, -t * e / u.h());
        for (std::size_t n = 0; n < u.size(); ++n) diff += std::norm(v.entries()[n].value - phase * u.entries()[n].value);
        EXPECT_LE(std::sqrt(diff), t * res / u.h() + 1e-12);
    }
}

TEST(Wunsch, ResidualIsSmallButNotSpectral) {
    const double h = 1.0 / 128;
    auto w = wunsch_quasimode(h, 0.5);
    auto r = wunsch_residual(w, h);
    EXPECT_LT(r.residual, 1e-2);
    EXPECT_LE(r.truncation_estimate, 1e-10);
}

TEST(TimeScaleLaw, RegimeTags) {
    EXPECT_EQ((TimeScale{1.0, 0.5}).regime(), Regime::sub_critical);
    EXPECT_EQ((TimeScale{1.0, 1.0}).regime(), Regime::critical);
    EXPECT_EQ((TimeScale{1.0, 1.5}).regime(), Regime::super_critical);
    EXPECT_NEAR((TimeScale{2.0, 1.0})(0.25), 8.0, 1e-15);
    EXPECT_THROW((TimeScale{1.0, 1.0})(0.0), ParameterError);
}
