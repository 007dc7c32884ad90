#include <gtest/gtest.h>

#include <random>

#include "scl/microlocal.hpp"
#include "scl/wigner.hpp"

using namespace scl;

namespace {

FourierState<2> random_state(std::size_t n, std::uint64_t seed, double h = 1.0 / 64) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> k(-6, 6);
    std::normal_distribution<double> g;
    std::map<Mode<2>, Complex> modes;
    while (modes.size() < n) modes[{64 + k(rng), k(rng)}] = Complex(g(rng), g(rng));
    std::vector<ModeCoefficient<2>> list;
    for (const auto& [m, c] : modes) list.push_back({m, c});
    return spectral_superposition<2>(h, list);
}

struct FrameFixture {
    HamiltonianModel ham = HamiltonianModel::identity_quadratic(2);
    PrimitiveModule lambda = saturate({lattice_vector({0, 1})});
    TwoMicrolocalFrame frame = make_frame(ham, lambda, {Rational(1), Rational(0)}, 0.5);
};

FourierState<2> block_state(int j) {
    const long long n = 1LL << j;
    std::vector<ModeCoefficient<2>> modes;
    for (long long p = -2; p <= 2; ++p)
        for (long long q = -3; q <= 3; ++q)
            modes.push_back({{n + p, q}, std::polar(std::exp(-(p * p + (q - 0.7) * (q - 0.7)) / 4.0), 0.4 * q - 0.3 * p)});
    return spectral_superposition<2>(std::ldexp(1.0, -j), modes, Rational(Integer(1), Integer(1) << j));
}

// 2pi (1 + xi2)(1 + cos x2) as a symbol with modes in span{(0,1)}.
Symbol<2> x2_symbol() {
    Symbol<2> a;
    a.terms.push_back({{0, 0}, [](const double* xi) { return Complex(two_pi * (1.0 + xi[1])); }});
    a.terms.push_back({{0, 1}, [](const double* xi) { return Complex(0.5 * two_pi * (1.0 + xi[1])); }});
    a.terms.push_back({{0, -1}, [](const double* xi) { return Complex(0.5 * two_pi * (1.0 + xi[1])); }});
    return a;
}

} // namespace

TEST(Density, SingleAndTwoModeExamples) {
    auto one = spectral_superposition<2>(0.1, {{{3, 1}, 1.0}});
    auto d = density_modes(one, std::vector<Mode<2>>{{0, 0}, {1, 0}});
    EXPECT_NEAR(d.coefficients[0].real(), 1.0 / torus_volume<2>(), 1e-15);
    EXPECT_EQ(d.coefficients[1], Complex(0.0));
    auto two = spectral_superposition<2>(0.1, {{{3, 1}, 1.0}, {{1, 0}, 1.0}});
    auto e = density_modes(two, std::vector<Mode<2>>{{2, 1}});
    EXPECT_NEAR(std::abs(e.coefficients[0] - 0.5 / torus_volume<2>()), 0.0, 1e-15);
}

TEST(Density, HermitianAndMass) {
    auto u = random_state(20, 4);
    auto modes = difference_set(u);
    auto d = density_modes(u, modes);
    for (std::size_t i = 0; i < modes.size(); ++i)
        EXPECT_NEAR(std::abs(d.coefficient(-modes[i]) - std::conj(d.coefficients[i])), 0.0, 1e-15);
    EXPECT_NEAR(d.coefficient({0, 0}).real() * torus_volume<2>(), u.norm2(), 1e-12);
}

TEST(Density, GridMatchesDirectSynthesis) {
    auto u = random_state(8, 2);
    auto d = density_modes(u, difference_set(u));
    synthesize_grid(d);
    const std::size_t n = std::size_t(1) << d.grid->exponent;
    for (std::size_t idx : {0ul, 7ul, n * 3 + 5, n * n - 1}) {
        const double x1 = two_pi * static_cast<double>(idx / n) / n, x2 = two_pi * static_cast<double>(idx % n) / n;
        Complex s = 0.0;
        for (std::size_t i = 0; i < d.modes.size(); ++i) s += d.coefficients[i] * std::polar(1.0, d.modes[i][0] * x1 + d.modes[i][1] * x2);
        EXPECT_NEAR(d.grid->values[idx], s.real(), 1e-12);
    }
    EXPECT_THROW(synthesize_grid(d, 2), ParameterError);
}

TEST(TimeAverage, OneEigenspaceEqualsInstantaneous) {
    auto h = HamiltonianModel::identity_quadratic(2);
    auto u = spectral_superposition<2>(0.1, {{{3, 4}, 1.0}, {{5, 0}, Complex(0, 1)}, {{0, -5}, 2.0}});
    auto modes = difference_set(u);
    auto a = density_modes(u, modes), b = time_averaged_density(u, h, 1e4, TimeWindow(0, 1), modes);
    for (std::size_t i = 0; i < modes.size(); ++i) EXPECT_NEAR(std::abs(a.coefficients[i] - b.coefficients[i]), 0.0, 1e-12);
}

TEST(TimeAverage, AgreesWithTrapezoidQuadrature) {
    auto h = HamiltonianModel::identity_quadratic(2);
    auto u = random_state(20, 17);
    const double tau = 3.0;
    auto modes = difference_set(u);
    for (auto kind : {TimeWindow::Kind::indicator, TimeWindow::Kind::hat}) {
        const TimeWindow w(0.2, 1.4, kind);
        auto avg = time_averaged_density(u, h, tau, w, modes);
        // Window weight: flat, or a normalized hat peaked at the centre.
        auto weight = [&](double t) {
            if (kind == TimeWindow::Kind::indicator) return 1.0 / w.length();
            const double c = 0.5 * (w.a + w.b), half = 0.5 * w.length();
            return (1.0 - std::abs(t - c) / half) / half;
        };
        double max_omega = 0.0;
        const auto hk = symbol_table(h, u);
        for (double x : hk)
            for (double y : hk) max_omega = std::max(max_omega, tau * std::abs(x - y) / u.h());
        const int steps = static_cast<int>(std::ceil(max_omega * w.length() / 0.01));
        std::vector<Complex> acc(modes.size(), 0.0);
        for (int s = 0; s <= steps; ++s) {
            const double t = w.a + w.length() * s / steps;
            const double wt = (s == 0 || s == steps ? 0.5 : 1.0) * weight(t) * w.length() / steps;
            auto d = density_modes(evolve(u, h, tau * t), modes);
            for (std::size_t i = 0; i < modes.size(); ++i) acc[i] += wt * d.coefficients[i];
        }
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < modes.size(); ++i) {
            num += std::norm(acc[i] - avg.coefficients[i]);
            den += std::norm(avg.coefficients[i]);
        }
        EXPECT_LE(std::sqrt(num / den), 1e-4);
    }
}

TEST(TimeAverage, CrossTermDamping) {
    const TimeWindow w(0, 2);
    for (double omega : {0.5, 3.0, 40.0, -17.0}) EXPECT_LE(std::abs(w.phi(omega)), 2.0 / (std::abs(omega) * w.length()) + 1e-15);
    EXPECT_EQ(w.phi(0.0), Complex(1.0));
    EXPECT_THROW(TimeWindow(1, 1), ParameterError);
}

TEST(WeylPair, PlaneWaveAndPositionSymbols) {
    auto a = position_symbol<2>({{{0, 0}, Complex(two_pi)}, {{1, 0}, Complex(0.3)}});
    auto plane = spectral_superposition<2>(0.1, {{{3, 1}, 1.0}});
    EXPECT_NEAR(std::abs(weyl_pair(plane, a) - Complex(1.0)), 0.0, 1e-15);
    auto u = random_state(15, 8);
    auto b = position_symbol<2>({{{0, 0}, Complex(1.0)}, {{1, -1}, Complex(0.2, 0.5)}, {{0, 2}, Complex(-0.4)}});
    auto dens = density_modes(u, b.modes());
    Complex via = 0.0;
    for (std::size_t i = 0; i < b.terms.size(); ++i) via += b.terms[i].coefficient(nullptr) * std::conj(dens.coefficients[i]);
    EXPECT_NEAR(std::abs(weyl_pair(u, b) - two_pi * via), 0.0, 1e-13);
}

TEST(Symbols, AveragedSymbolFilter) {
    auto a = position_symbol<2>({{{0, 0}, 1.0}, {{1, -1}, 1.0}, {{1, 0}, 1.0}});
    auto kept = averaged_symbol(a, saturate({lattice_vector({1, -1})}));
    EXPECT_EQ(kept.modes(), (std::vector<Mode<2>>{{0, 0}, {1, -1}}));
    EXPECT_EQ(averaged_symbol(a, PrimitiveModule::full(2)).terms.size(), 3u);
    EXPECT_EQ(averaged_symbol(a, PrimitiveModule::zero(2)).modes(), (std::vector<Mode<2>>{{0, 0}}));
    EXPECT_TRUE(x2_symbol().is_hermitian({{1.0, 0.1}, {0.9, -0.2}}));
}

TEST(Egorov, TrivialCases) {
    auto h = HamiltonianModel::identity_quadratic(2);
    auto a = x2_symbol();
    auto one = spectral_superposition<2>(1.0 / 64, {{{64, 3}, 1.0}});
    EXPECT_LE(egorov_defect(one, h, a, 1.0, 1.0, 64.0), 1e-14);
    EXPECT_EQ(egorov_defect(random_state(10, 3), h, a, 0.0, 1.0, 64.0), 0.0);
}

TEST(Egorov, BlockStateDefectDecreases) {
    auto h = HamiltonianModel::identity_quadratic(2);
    auto a = position_symbol<2>({{{0, 0}, Complex(two_pi)}, {{0, 1}, Complex(0.5 * two_pi)}, {{0, -1}, Complex(0.5 * two_pi)}});
    double prev = 1e9;
    for (int j = 6; j <= 10; ++j) {
        const double d = egorov_defect(block_state(j), h, a, 1.0, 1.0, std::ldexp(1.0, j));
        EXPECT_LT(d, prev);
        prev = d;
    }
}

TEST(Split, PartitionAndSupports) {
    FrameFixture f;
    auto a = TwoMicrolocalSymbol<2>::lift(x2_symbol(), f.lambda);
    auto parts = split_symbol(a, CutoffProfile{}, 4.0, 0.5, f.frame, f.ham);
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> x1(0.85, 1.15), x2(-0.2, 0.2), e(-20, 20);
    for (int s = 0; s < 1000; ++s) {
        const double xi[2] = {x1(rng), x2(rng)}, eta[2] = {0.0, e(rng)};
        for (std::size_t t = 0; t < a.terms.size(); ++t) {
            const Complex sum = parts.far.terms[t].coefficient(xi, eta) + parts.spreading.terms[t].coefficient(xi, eta) +
                                parts.concentrating.terms[t].coefficient(xi, eta);
            EXPECT_LE(std::abs(sum - a.terms[t].coefficient(xi, eta)), 1e-14);
        }
    }
    const double xi[2] = {1.0, 0.1}, zero[2] = {0.0, 0.0}, big[2] = {0.0, 4.0};
    EXPECT_EQ(parts.concentrating.terms[0].coefficient(xi, zero), a.terms[0].coefficient(xi, zero));
    EXPECT_EQ(parts.far.terms[0].coefficient(xi, zero), Complex(0.0));
    EXPECT_EQ(parts.concentrating.terms[0].coefficient(xi, big), Complex(0.0));
    EXPECT_THROW(split_symbol(a, CutoffProfile{}, 1.0, 0.5, f.frame, f.ham), ParameterError);
    EXPECT_THROW(split_symbol(a, CutoffProfile{}, 4.0, 1.0, f.frame, f.ham), ParameterError);
}

TEST(TwoScalePair, SumRuleAndReductionToWeyl) {
    FrameFixture f;
    auto u = block_state(7);
    auto a = TwoMicrolocalSymbol<2>::lift(x2_symbol(), f.lambda);
    const double tau = 128.0;
    SplitParameters sp;
    const Complex full = two_scale_pair(u, a, f.frame, f.ham, tau, 0.7);
    const Complex parts = two_scale_pair(u, a, f.frame, f.ham, tau, 0.7, PairPart::far, sp) +
                          two_scale_pair(u, a, f.frame, f.ham, tau, 0.7, PairPart::spreading, sp) +
                          two_scale_pair(u, a, f.frame, f.ham, tau, 0.7, PairPart::concentrating, sp);
    EXPECT_LE(std::abs(full - parts), 1e-12);
    EXPECT_LE(std::abs(full - weyl_pair(evolve(u, f.ham, tau * 0.7), x2_symbol())), 1e-12);
}

TEST(TwoScalePair, ModulatedPacketRecoversDiracMass) {
    FrameFixture f;
    // a(x, xi, eta) = 2pi (1 + cos x2) exp(-|eta|^2/4) with modes in Lambda.
    TwoMicrolocalSymbol<2> a;
    a.lambda = f.lambda;
    auto g = [](const double* eta) { return std::exp(-(eta[0] * eta[0] + eta[1] * eta[1]) / 4.0); };
    a.terms.push_back({{0, 0}, [g](const double*, const double* eta) { return Complex(two_pi * g(eta)); }, nullptr});
    a.terms.push_back({{0, 1}, [g](const double*, const double* eta) { return Complex(0.5 * two_pi * g(eta)); }, nullptr});
    a.terms.push_back({{0, -1}, [g](const double*, const double* eta) { return Complex(0.5 * two_pi * g(eta)); }, nullptr});
    WavePacketSpec<2> s;
    s.x0 = {3.141592653589793, 1.0};
    s.xi0 = {1.0, 0.0};
    s.gamma_eps = 0.5;
    s.eta0 = Point<2>{0.0, 1.0};
    s.gamma_tau = 0.4;  // eps >> h tau and tau << 1/h
    // Limit: (1 + cos 1) exp(-1/4), and max |a| = 2.
    const double limit = (1.0 + std::cos(1.0)) * std::exp(-0.25);
    double prev = 1e9, err = 0.0;
    for (int j = 8; j <= 14; j += 2) {
        const double h = std::ldexp(1.0, -j);
        auto u = modulated_wave_packet(s, h);
        err = std::abs(two_scale_pair(u, a, f.frame, f.ham, s.tau(h), 0.0) - limit);
        EXPECT_LT(err, prev);
        prev = err;
    }
    EXPECT_LE(err, 0.05 * 2.0);
}

TEST(Flows, IdentityGroupLawAndDomain) {
    FrameFixture f;
    auto a = TwoMicrolocalSymbol<2>::lift(x2_symbol(), f.lambda);
    auto same = symbol_flow(a, {Flow::Kind::phi0, 0.0}, f.ham, f.frame);
    const double xi[2] = {1.0, 0.1}, eta[2] = {0.0, 2.0};
    EXPECT_EQ(same.terms[1].coefficient(xi, eta), a.terms[1].coefficient(xi, eta));
    // On I_Lambda the phi0 phase k.dH(sigma) vanishes.
    const double on[2] = {1.05, 0.0};
    auto moved = symbol_flow(a, {Flow::Kind::phi0, 0.8}, f.ham, f.frame);
    EXPECT_NEAR(std::abs(moved.terms[1].coefficient(on, eta) - a.terms[1].coefficient(on, eta)), 0.0, 1e-12);

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> x1(0.9, 1.1), x2(-0.2, 0.2), e(-5, 5);
    auto f1 = symbol_flow(symbol_flow(a, {Flow::Kind::phi1_tilde, 0.3}, f.ham, f.frame), {Flow::Kind::phi1_tilde, 0.5}, f.ham, f.frame);
    auto f2 = symbol_flow(a, {Flow::Kind::phi1_tilde, 0.8}, f.ham, f.frame);
    for (int s = 0; s < 100; ++s) {
        const double p[2] = {x1(rng), x2(rng)}, q[2] = {0.0, e(rng)};
        for (std::size_t t = 0; t < a.terms.size(); ++t)
            EXPECT_LE(std::abs(f1.terms[t].coefficient(p, q) - f2.terms[t].coefficient(p, q)), 1e-12);
    }
    EXPECT_THROW(symbol_flow(a, {Flow::Kind::phi1, 1.0}, f.ham, f.frame), FlowDomainError);
}

TEST(PropagationDefect, TrivialCases) {
    FrameFixture f;
    auto a = TwoMicrolocalSymbol<2>::lift(x2_symbol(), f.lambda);
    EXPECT_EQ(propagation_defect(block_state(7), a, f.frame, f.ham, 128.0, 0.0, 4.0), 0.0);
    auto one = spectral_superposition<2>(1.0 / 128, {{{128, 2}, 1.0}}, Rational(1, 128));
    EXPECT_LE(propagation_defect(one, a, f.frame, f.ham, 128.0, 1.0, 4.0), 1e-13);
}

TEST(PropagationDefect, InverseTauScaling) {
    FrameFixture f;
    auto a = TwoMicrolocalSymbol<2>::lift(x2_symbol(), f.lambda);
    auto u = block_state(9);
    std::vector<double> lx, ly;
    for (double tau : {8.0, 16.0, 32.0, 64.0}) {
        lx.push_back(std::log(1.0 / tau));
        ly.push_back(std::log(propagation_defect(u, a, f.frame, f.ham, tau, 1.0, 4.0)));
    }
    const double slope = (ly.back() - ly.front()) / (lx.back() - lx.front());
    EXPECT_GE(slope, 0.5);
    EXPECT_LE(slope, 2.0);
}

TEST(Uh, SingleModePlancherelAndSupport) {
    FrameFixture f;
    auto one = spectral_superposition<2>(1.0 / 128, {{{128, 3}, Complex(0.6, 0.8)}}, Rational(1, 128));
    auto fam = uh_transform(one, f.frame, f.ham);
    ASSERT_EQ(fam.members.size(), 1u);
    ASSERT_EQ(fam.members[0].modes.size(), 1u);
    EXPECT_NEAR(std::abs(fam.members[0].modes[0].value), 1.0, 1e-15);

    auto u = random_state(30, 21, 1.0 / 64);
    auto g = uh_transform(u, f.frame, f.ham);
    double cut = 0.0;
    for (const auto& e : u.entries()) {
        auto xi = u.momentum(e.k);
        cut += std::norm(f.frame.cutoff(xi.data()) * e.value);
    }
    EXPECT_NEAR(g.total_mass(), cut, 1e-12 * cut);
    for (const auto& m : g.members)
        for (const auto& c : m.modes) EXPECT_TRUE(f.lambda.contains_small(c.k));
    EXPECT_LE(g.max_integrality_error, 1e-9);
}

TEST(ConjugatedCheck, OrderHAtTimeZero) {
    FrameFixture f;
    std::vector<double> d;
    for (int j = 7; j <= 10; ++j) d.push_back(conjugated_evolution_check(block_state(j), x2_symbol(), f.frame, f.ham, 0.0, 4.0).defect);
    for (std::size_t i = 1; i < d.size(); ++i) EXPECT_NEAR(d[i] / d[i - 1], 0.5, 0.05);
    EXPECT_THROW(conjugated_evolution_check(block_state(7), position_symbol<2>({{{1, 0}, 1.0}}), f.frame, f.ham, 0.0, 4.0),
                 ParameterError);
}
