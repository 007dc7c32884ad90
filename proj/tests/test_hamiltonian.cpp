#include <gtest/gtest.h>

#include <random>

#include "scl/hamiltonian.hpp"

using namespace scl;

namespace {

// H = xi1^2 + xi2^2 + xi1 xi2^2, a non-quadratic model with a known Hessian.
HamiltonianModel cubic_model() {
    return HamiltonianModel::custom(
        2, [](const double* x) { return x[0] * x[0] + x[1] * x[1] + x[0] * x[1] * x[1]; },
        [](const double* x, double* g) {
            g[0] = 2 * x[0] + x[1] * x[1];
            g[1] = 2 * x[1] + 2 * x[0] * x[1];
        },
        [](const double* x, double* m) {
            m[0] = 2;
            m[1] = m[2] = 2 * x[1];
            m[3] = 2 + 2 * x[0];
        });
}

std::vector<HamiltonianModel> sample_models() {
    return {HamiltonianModel::identity_quadratic(2),
            HamiltonianModel::quadratic({{Rational(2), Rational(1, 2)}, {Rational(1, 2), Rational(3)}}),
            HamiltonianModel::even_power(2, 4),
            HamiltonianModel::linear({Rational(1), Rational(-2)}),
            HamiltonianModel::difference_quadratic({1, -1}, {Rational(1), Rational(2)}),
            cubic_model()};
}

} // namespace

TEST(Jet, Examples) {
    auto q = evaluate_jet(HamiltonianModel::identity_quadratic(2), {1.0, 0.0});
    EXPECT_EQ(q.value, 1.0);
    EXPECT_EQ(q.gradient, (RealVector{2.0, 0.0}));
    EXPECT_EQ(q.hessian(0, 0), 2.0);
    EXPECT_EQ(q.hessian(0, 1), 0.0);
    auto p = evaluate_jet(HamiltonianModel::even_power(1, 4), {1.0});
    EXPECT_DOUBLE_EQ(p.value, 1.0);
    EXPECT_DOUBLE_EQ(p.gradient[0], 4.0);
    EXPECT_DOUBLE_EQ(p.hessian(0, 0), 12.0);
    auto l = evaluate_jet(HamiltonianModel::linear({Rational(1), Rational(1)}), {3.0, 5.0});
    EXPECT_EQ(l.value, 8.0);
    EXPECT_EQ(l.gradient, (RealVector{1.0, 1.0}));
    EXPECT_EQ(l.hessian.norm(), 0.0);
}

TEST(Jet, FiniteDifferencesAndSymmetry) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (const auto& h : sample_models()) {
        for (int s = 0; s < 20; ++s) {
            RealVector xi{u(rng), u(rng)};
            auto j = evaluate_jet(h, xi);
            EXPECT_LE((j.hessian - j.hessian.transpose()).cwiseAbs().maxCoeff(), 1e-12);
            for (double eps : {1e-3, 1e-4}) {
                for (std::size_t i = 0; i < 2; ++i) {
                    RealVector p = xi, m = xi;
                    p[i] += eps;
                    m[i] -= eps;
                    const double fd = (h.value(p.data()) - h.value(m.data())) / (2 * eps);
                    EXPECT_NEAR(fd, j.gradient[i], 50 * eps * eps + 1e-9);
                    auto gp = evaluate_jet(h, p).gradient, gm = evaluate_jet(h, m).gradient;
                    for (std::size_t k = 0; k < 2; ++k)
                        EXPECT_NEAR((gp[k] - gm[k]) / (2 * eps), j.hessian(k, i), 50 * eps * eps + 1e-8);
                }
            }
        }
    }
}

TEST(Jet, QuadraticExactGradient) {
    auto h = HamiltonianModel::quadratic({{Rational(2), Rational(1, 2)}, {Rational(1, 2), Rational(3)}});
    auto g = h.exact_gradient({Rational(1, 3), Rational(-1)});
    EXPECT_EQ(g[0], Rational(4, 3) - Rational(1));
    EXPECT_EQ(g[1], Rational(1, 3) - Rational(6));
}

TEST(Definite, Examples) {
    EXPECT_TRUE(is_definite(HamiltonianModel::identity_quadratic(2), {0.3, -2.0}));
    EXPECT_FALSE(is_definite(HamiltonianModel::difference_quadratic({1, -1}, {Rational(1), Rational(1)}), {1.0, 1.0}));
    EXPECT_FALSE(is_definite(HamiltonianModel::even_power(2, 4), {0.0, 0.0}));
    EXPECT_TRUE(is_definite(HamiltonianModel::even_power(2, 4), {1.0, 0.0}));
}

TEST(IntegerForm, MatchesFloatingValues) {
    const Rational h(1, 64);
    for (const auto& m : sample_models()) {
        if (!m.exact_rational()) continue;
        auto f = m.integer_form(h);
        for (long long a = -5; a <= 5; ++a)
            for (long long b = -5; b <= 5; ++b) {
                const long long k[2] = {a, b};
                const double xi[2] = {to_double(h) * a, to_double(h) * b};
                EXPECT_NEAR(to_double(f.scale) * static_cast<double>(f.poly(k)), m.value(xi), 1e-14);
            }
    }
}

TEST(FCoordinates, OrthogonalSplitForIsotropicH) {
    auto h = HamiltonianModel::identity_quadratic(2);
    auto frame = make_frame(h, saturate({lattice_vector({0, 1})}), {Rational(1), Rational(0)}, 0.5);
    auto s = F_coordinates(frame, h, {0.9, 0.2});
    EXPECT_NEAR(s.sigma[0], 0.9, 1e-14);
    EXPECT_NEAR(s.sigma[1], 0.0, 1e-14);
    EXPECT_NEAR(s.eta[1], 0.2, 1e-14);
    auto on = F_coordinates(frame, h, {1.1, 0.0});
    EXPECT_EQ(on.eta[1], 0.0);
    EXPECT_THROW(F_coordinates(frame, h, {0.9, 0.3}), DomainError);
}

TEST(FCoordinates, NewtonAgreesWithBisectionOracle) {
    auto h = cubic_model();
    auto frame = make_frame(h, saturate({lattice_vector({0, 1})}), {Rational(1), Rational(0)}, 0.5, false);
    const RealVector xi{1.0, 0.1};
    auto s = F_coordinates(frame, h, xi);
    // sigma = xi - c (0,1) with dH(sigma).(0,1) = 0; solve for c by bisection.
    auto residual = [&](double c) {
        double p[2] = {xi[0], xi[1] - c}, g[2];
        h.gradient(p, g);
        return g[1];
    };
    double lo = -0.24, hi = 0.24;
    ASSERT_LT(residual(lo) * residual(hi), 0.0);
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (residual(lo) * residual(mid) <= 0 ? hi : lo) = mid;
    }
    EXPECT_NEAR(s.eta[1], 0.5 * (lo + hi), 1e-12);
    double g[2];
    h.gradient(s.sigma.data(), g);
    EXPECT_LE(std::abs(g[1]), 1e-10);
    EXPECT_NEAR(s.sigma[0] + s.eta[0], xi[0], 1e-15);
}

TEST(Frame, ValidationRejectsNonResonantOrIndefinite) {
    auto h = HamiltonianModel::identity_quadratic(2);
    // (1,0) does not annihilate dH(1,0) = (2,0).
    EXPECT_THROW(make_frame(h, saturate({lattice_vector({1, 0})}), {Rational(1), Rational(0)}, 0.5), Error);
    auto d = HamiltonianModel::difference_quadratic({1, -1}, {Rational(1), Rational(1)});
    EXPECT_THROW(make_frame(d, saturate({lattice_vector({0, 1})}), {Rational(1), Rational(0)}, 0.5), Error);
}

TEST(Frame, CutoffPlateau) {
    auto h = HamiltonianModel::identity_quadratic(2);
    auto frame = make_frame(h, saturate({lattice_vector({0, 1})}), {Rational(1), Rational(0)}, 0.5);
    const double in[2] = {1.1, 0.1}, mid[2] = {1.0, 0.4}, out[2] = {1.0, 0.6};
    EXPECT_EQ(frame.cutoff(in), 1.0);
    EXPECT_GT(frame.cutoff(mid), 0.0);
    EXPECT_LT(frame.cutoff(mid), 1.0);
    EXPECT_EQ(frame.cutoff(out), 0.0);
}
