#pragma once

// Finite-h two-microlocal functionals along a resonant module Lambda.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "scl/errors.hpp"
#include "scl/hamiltonian.hpp"
#include "scl/lattice.hpp"
#include "scl/profiles.hpp"
#include "scl/propagator.hpp"
#include "scl/state.hpp"
#include "scl/wigner.hpp"

namespace scl {

// a(x, xi, eta) = (2pi)^{-d/2} sum_{k in K} a_k(xi, eta) e^{ik.x}, K inside Lambda.
template <std::size_t D>
struct TwoMicrolocalSymbol {
    using Evaluator = std::function<Complex(const double* xi, const double* eta)>;
    using HomEvaluator = std::function<Complex(const double* xi, const double* direction)>;
    struct Term {
        Mode<D> k;
        Evaluator coefficient;
        HomEvaluator homogeneous;  // may be empty
    };

    PrimitiveModule lambda;
    std::vector<Term> terms;
    double homogeneity_radius = 1.0;
    double eta_inner_radius = 0.0;  // eta-support stays outside this radius

    void validate() const {
        if (lambda.dim() != D) throw ParameterError("two-microlocal symbol: dimension mismatch");
        for (const auto& t : terms)
            if (!lambda.contains_small(t.k)) throw ParameterError("two-microlocal symbol: mode outside Lambda");
    }

    // Max deviation between a_k and its homogeneous part for |eta| > R0 at the samples.
    double homogeneity_error(const std::vector<std::pair<Point<D>, Point<D>>>& samples) const {
        double err = 0.0;
        for (const auto& t : terms) {
            if (!t.homogeneous) continue;
            for (const auto& [xi, eta] : samples) {
                double n = 0.0;
                for (double x : eta) n += x * x;
                n = std::sqrt(n);
                if (n <= homogeneity_radius) continue;
                Point<D> dir;
                for (std::size_t i = 0; i < D; ++i) dir[i] = eta[i] / n;
                err = std::max(err, std::abs(t.coefficient(xi.data(), eta.data()) - t.homogeneous(xi.data(), dir.data())));
            }
        }
        return err;
    }

    // An eta-independent symbol lifted to this class.
    static TwoMicrolocalSymbol lift(const Symbol<D>& a, PrimitiveModule lambda) {
        TwoMicrolocalSymbol s;
        s.lambda = std::move(lambda);
        for (const auto& t : a.terms) {
            auto f = t.coefficient;
            s.terms.push_back({t.k, [f](const double* xi, const double*) { return f(xi); },
                               [f](const double* xi, const double*) { return f(xi); }});
        }
        s.validate();
        return s;
    }
};

// Shared immutable data the split and flow transforms close over.
struct FrameContext {
    TwoMicrolocalFrame frame;
    HamiltonianModel hamiltonian;
};

inline std::shared_ptr<const FrameContext> make_context(const TwoMicrolocalFrame& f, const HamiltonianModel& h) {
    return std::make_shared<const FrameContext>(FrameContext{f, h});
}

template <std::size_t D>
double euclidean_norm(const double* v) {
    double s = 0.0;
    for (std::size_t i = 0; i < D; ++i) s += v[i] * v[i];
    return std::sqrt(s);
}

template <std::size_t D>
struct SplitSymbols {
    TwoMicrolocalSymbol<D> far;            // a (1 - chi(eta/R)) (1 - chi(eta(xi)/delta))
    TwoMicrolocalSymbol<D> spreading;      // a (1 - chi(eta/R)) chi(eta(xi)/delta)
    TwoMicrolocalSymbol<D> concentrating;  // a chi(eta/R)
};

namespace detail {

template <std::size_t D>
TwoMicrolocalSymbol<D> reweight(const TwoMicrolocalSymbol<D>& a,
                                std::function<double(const double*, const double*)> w) {
    TwoMicrolocalSymbol<D> out = a;
    for (auto& t : out.terms) {
        auto f = t.coefficient;
        t.coefficient = [f, w](const double* xi, const double* eta) { return f(xi, eta) * w(xi, eta); };
        t.homogeneous = nullptr;
    }
    return out;
}

} // namespace detail

// Three-way partition of a by cutoffs at |eta| ~ R and |eta(xi)| ~ delta.
template <std::size_t D>
SplitSymbols<D> split_symbol(const TwoMicrolocalSymbol<D>& a, const CutoffProfile& chi, double r, double delta,
                             const TwoMicrolocalFrame& frame, const HamiltonianModel& h) {
    if (!(r > 1.0)) throw ParameterError("split_symbol: R must exceed 1");
    if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("split_symbol: delta must lie in (0,1)");
    auto ctx = make_context(frame, h);
    auto near_eta = [chi, r](const double* eta) { return chi(euclidean_norm<D>(eta) / r); };
    auto near_i = [chi, delta, ctx](const double* xi) {
        auto s = split_unchecked(ctx->frame, ctx->hamiltonian, xi);
        return chi(euclidean_norm<D>(s.eta.data()) / delta);
    };
    SplitSymbols<D> out;
    out.far = detail::reweight<D>(a, [=](const double* xi, const double* eta) {
        return (1.0 - near_eta(eta)) * (1.0 - near_i(xi));
    });
    out.spreading = detail::reweight<D>(a, [=](const double* xi, const double* eta) {
        return (1.0 - near_eta(eta)) * near_i(xi);
    });
    out.concentrating = detail::reweight<D>(a, [=](const double*, const double* eta) { return near_eta(eta); });
    out.concentrating.homogeneity_radius = r;
    return out;
}

enum class PairPart { full, concentrating, spreading, far };

struct SplitParameters {
    double r = 4.0;
    double delta = 0.5;
    CutoffProfile chi{};
};

// Weyl pairing of the state evolved to tau t with a(x, xi, tau eta(xi)).
template <std::size_t D>
Complex two_scale_pair(const FourierState<D>& u, const TwoMicrolocalSymbol<D>& a, const TwoMicrolocalFrame& frame,
                       const HamiltonianModel& h, double tau, double t) {
    const auto v = evolve(u, h, tau * t);
    const SupportIndex<D> index(v);
    std::map<Mode<D>, RealVector> eta_cache;  // keyed by 2 * midpoint / h
    Complex s = 0.0;
    Point<D> mid;
    RealVector eta_scaled(D);
    for (const auto& term : a.terms) {
        for (const auto& e : v.entries()) {
            long p = index(e.k + term.k);
            if (p < 0) continue;
            Mode<D> key;
            for (std::size_t i = 0; i < D; ++i) {
                key[i] = 2 * e.k[i] + term.k[i];
                mid[i] = 0.5 * v.h() * static_cast<double>(key[i]);
            }
            auto it = eta_cache.find(key);
            if (it == eta_cache.end()) {
                if (frame.distance_to_center(mid.data()) >= 0.5 * frame.epsilon)
                    throw DomainError("two_scale_pair: pair midpoint leaves B(xi0, eps/2)");
                it = eta_cache.emplace(key, split_unchecked(frame, h, mid.data()).eta).first;
            }
            for (std::size_t i = 0; i < D; ++i) eta_scaled[i] = tau * it->second[i];
            s += e.value * std::conj(v.entries()[static_cast<std::size_t>(p)].value) *
                 term.coefficient(mid.data(), eta_scaled.data());
        }
    }
    return s * fourier_factor<D>();
}

template <std::size_t D>
Complex two_scale_pair(const FourierState<D>& u, const TwoMicrolocalSymbol<D>& a, const TwoMicrolocalFrame& frame,
                       const HamiltonianModel& h, double tau, double t, PairPart part, const SplitParameters& sp) {
    if (part == PairPart::full) return two_scale_pair(u, a, frame, h, tau, t);
    auto parts = split_symbol(a, sp.chi, sp.r, sp.delta, frame, h);
    const auto& chosen = part == PairPart::concentrating ? parts.concentrating
                         : part == PairPart::spreading   ? parts.spreading
                                                         : parts.far;
    return two_scale_pair(u, chosen, frame, h, tau, t);
}

struct Flow {
    enum class Kind { phi0, phi1, phi1_tilde } kind = Kind::phi0;
    double parameter = 0.0;  // s for phi0/phi1, t for phi1_tilde
};

// Exact composition of a with the flows phi0(s), phi1(s), phi1_tilde(t).
template <std::size_t D>
TwoMicrolocalSymbol<D> symbol_flow(const TwoMicrolocalSymbol<D>& a, const Flow& flow, const HamiltonianModel& h,
                                   const TwoMicrolocalFrame& frame) {
    if (flow.parameter == 0.0) return a;
    if (flow.kind == Flow::Kind::phi1 && !(a.eta_inner_radius > 0.0))
        throw FlowDomainError("phi1 needs a symbol vanishing near eta = 0");
    auto ctx = make_context(frame, h);
    const double p = flow.parameter;
    const auto kind = flow.kind;
    TwoMicrolocalSymbol<D> out = a;
    for (auto& t : out.terms) {
        const Mode<D> k = t.k;
        auto f = t.coefficient;
        // Phase as a function of (xi, eta) for the chosen flow.
        auto phase = [ctx, k, p, kind](const double* xi, const double* eta) {
            double kd = 0.0;
            if (kind == Flow::Kind::phi0) {
                double g[D];
                ctx->hamiltonian.gradient(xi, g);
                for (std::size_t i = 0; i < D; ++i) kd += static_cast<double>(k[i]) * g[i];
                return p * kd;
            }
            auto sp = split_unchecked(ctx->frame, ctx->hamiltonian, xi);
            double hess[D * D];
            ctx->hamiltonian.hessian(sp.sigma.data(), hess);
            double scale = 1.0;
            if (kind == Flow::Kind::phi1) {
                double n = euclidean_norm<D>(eta);
                scale = n > 0 ? 1.0 / n : 0.0;
            }
            for (std::size_t i = 0; i < D; ++i)
                for (std::size_t j = 0; j < D; ++j) kd += static_cast<double>(k[i]) * hess[i * D + j] * eta[j] * scale;
            return p * kd;
        };
        t.coefficient = [f, phase](const double* xi, const double* eta) {
            return f(xi, eta) * std::polar(1.0, phase(xi, eta));
        };
        if (t.homogeneous && kind == Flow::Kind::phi1) {
            auto g = t.homogeneous;
            t.homogeneous = [g, phase](const double* xi, const double* dir) {
                return g(xi, dir) * std::polar(1.0, phase(xi, dir));
            };
        } else if (kind != Flow::Kind::phi0) {
            t.homogeneous = nullptr;
        } else if (t.homogeneous) {
            auto g = t.homogeneous;
            t.homogeneous = [g, phase](const double* xi, const double* dir) {
                return g(xi, dir) * std::polar(1.0, phase(xi, dir));
            };
        }
    }
    return out;
}

// |<w_{I,h,R}(t), a> - <w_{I,h,R}(0), a o phi1_tilde(t)>|.
template <std::size_t D>
double propagation_defect(const FourierState<D>& u, const TwoMicrolocalSymbol<D>& a, const TwoMicrolocalFrame& frame,
                          const HamiltonianModel& h, double tau, double t, double r) {
    if (t == 0.0) return 0.0;
    SplitParameters sp;
    sp.r = r;
    Complex now = two_scale_pair(u, a, frame, h, tau, t, PairPart::concentrating, sp);
    auto flowed = symbol_flow(a, Flow{Flow::Kind::phi1_tilde, t}, h, frame);
    Complex then = two_scale_pair(u, flowed, frame, h, tau, 0.0, PairPart::concentrating, sp);
    return std::abs(now - then);
}

// Lattices and the projection alpha attached to a frame.
struct UhGeometry {
    PrimitiveModule lambda;
    PrimitiveModule lambda_perp;   // primal
    PrimitiveModule lambda_tilde;  // primal complement of lambda_perp
    Eigen::MatrixXd alpha_cov;     // sigma -> sigma^alpha = P^{-1} E P sigma

    static UhGeometry make(const PrimitiveModule& lambda) {
        UhGeometry g;
        g.lambda = lambda;
        g.lambda_perp = orthogonal_lattice(lambda);
        g.lambda_tilde = complement_lattice(g.lambda_perp);
        const auto d = static_cast<Eigen::Index>(lambda.dim());
        Eigen::MatrixXd p(d, d);
        Eigen::MatrixXd e = Eigen::MatrixXd::Zero(d, d);
        IntMatrix rows = stack(g.lambda_perp.basis(), g.lambda_tilde.basis());
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j)
                p(i, j) = to_double(rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
        for (auto i = static_cast<Eigen::Index>(g.lambda_perp.rank()); i < d; ++i) e(i, i) = 1.0;
        g.alpha_cov = p.inverse() * e * p;
        return g;
    }

    // {sigma^alpha / h} in the half-open basis box of Lambda.
    RealVector shift(const RealVector& sigma, double h) const {
        Eigen::VectorXd s = Eigen::Map<const Eigen::VectorXd>(sigma.data(), static_cast<Eigen::Index>(sigma.size()));
        Eigen::VectorXd sa = alpha_cov * s / h;
        RealVector v(sa.data(), sa.data() + sa.size());
        return fractional_part(v, lambda, 1e-7).frac;
    }
};

template <std::size_t D>
struct UhFamily {
    struct Member {
        RealVector sigma;
        RealVector shift;                          // {sigma^alpha / h}
        std::vector<ModeCoefficient<D>> modes;     // sorted, modes in Lambda
    };
    std::vector<Member> members;                   // sorted by sigma
    double max_integrality_error = 0.0;
    double h = 0.0;

    double total_mass() const {
        double s = 0.0;
        for (const auto& m : members)
            for (const auto& c : m.modes) s += std::norm(c.value);
        return s;
    }
};

// Regroups f along sigma-fibres: mode k goes to eta/h + {sigma^alpha/h} of the member at sigma(hk).
template <std::size_t D>
UhFamily<D> uh_transform(const FourierState<D>& f, const TwoMicrolocalFrame& frame, const HamiltonianModel& h) {
    const UhGeometry geo = UhGeometry::make(frame.lambda);
    const double hh = f.h();
    std::map<Mode<D>, std::size_t> by_coset;
    UhFamily<D> fam;
    fam.h = hh;
    for (const auto& e : f.entries()) {
        auto xi = f.momentum(e.k);
        const double b = frame.cutoff(xi.data());
        if (b == 0.0) continue;
        std::vector<Integer> kk;
        for (long long x : e.k) kk.emplace_back(x);
        auto rep = frame.lambda.reduce(kk);
        Mode<D> key;
        for (std::size_t i = 0; i < D; ++i) key[i] = rep[i].template convert_to<long long>();
        auto it = by_coset.find(key);
        if (it == by_coset.end()) {
            typename UhFamily<D>::Member m;
            m.sigma = split_unchecked(frame, h, xi.data()).sigma;
            m.shift = geo.shift(m.sigma, hh);
            fam.members.push_back(std::move(m));
            it = by_coset.emplace(key, fam.members.size() - 1).first;
        }
        auto& m = fam.members[it->second];
        Mode<D> out;
        std::vector<Integer> ov;
        for (std::size_t i = 0; i < D; ++i) {
            const double y = static_cast<double>(e.k[i]) - m.sigma[i] / hh + m.shift[i];
            const double r = std::round(y);
            fam.max_integrality_error = std::max(fam.max_integrality_error, std::abs(y - r));
            if (std::abs(y - r) > 1e-6) throw IntegralityError("U_h output mode is not an integer vector");
            out[i] = static_cast<long long>(r);
            ov.emplace_back(out[i]);
        }
        if (!frame.lambda.contains(ov)) throw IntegralityError("U_h output mode is not in Lambda");
        m.modes.push_back({out, b * e.value});
    }
    for (auto& m : fam.members) std::sort(m.modes.begin(), m.modes.end(), [](auto& a, auto& b) { return a.k < b.k; });
    std::sort(fam.members.begin(), fam.members.end(), [](const auto& a, const auto& b) { return a.sigma < b.sigma; });
    return fam;
}

struct ConjugatedCheck {
    Complex direct;
    Complex conjugated;
    double defect = 0.0;
};

// Direct two-scale pairing at the critical scale versus the per-fibre evolution
// under A(sigma, D_y) = 1/2 d^2H(sigma) D_y . D_y acting on U_h u.
template <std::size_t D>
ConjugatedCheck conjugated_evolution_check(const FourierState<D>& u, const Symbol<D>& a,
                                           const TwoMicrolocalFrame& frame, const HamiltonianModel& h, double t,
                                           double r, const CutoffProfile& chi = {}) {
    const double hh = u.h();
    const double tau = 1.0 / hh;
    for (const auto& term : a.terms)
        if (!frame.lambda.contains_small(term.k)) throw ParameterError("conjugated check: symbol modes must lie in Lambda");

    auto lifted = TwoMicrolocalSymbol<D>::lift(a, frame.lambda);
    SplitParameters sp;
    sp.r = r;
    sp.chi = chi;
    ConjugatedCheck out;
    out.direct = two_scale_pair(u, lifted, frame, h, tau, t, PairPart::concentrating, sp);

    const auto fam = uh_transform(u, frame, h);
    Complex total = 0.0;
    for (const auto& m : fam.members) {
        double hess[D * D];
        h.hessian(m.sigma.data(), hess);
        // Psi(v) = e^{-it A(sigma, v - shift)} U(v)
        std::vector<ModeCoefficient<D>> psi;
        for (const auto& c : m.modes) {
            double eta[D], a2 = 0.0;
            for (std::size_t i = 0; i < D; ++i) eta[i] = static_cast<double>(c.k[i]) - m.shift[i];
            for (std::size_t i = 0; i < D; ++i)
                for (std::size_t j = 0; j < D; ++j) a2 += 0.5 * hess[i * D + j] * eta[i] * eta[j];
            psi.push_back({c.k, c.value * std::polar(1.0, -t * a2)});
        }
        FourierState<D> fibre(hh, std::move(psi));
        for (const auto& term : a.terms) {
            const Complex coef = term.coefficient(m.sigma.data());
            for (const auto& e : fibre.entries()) {
                const Complex* q = fibre.find(e.k + term.k);
                if (!q) continue;
                double eta[D];
                for (std::size_t i = 0; i < D; ++i)
                    eta[i] = (static_cast<double>(e.k[i]) + 0.5 * static_cast<double>(term.k[i]) - m.shift[i]) / r;
                total += coef * chi(euclidean_norm<D>(eta)) * e.value * std::conj(*q);
            }
        }
    }
    out.conjugated = total * fourier_factor<D>();
    out.defect = std::abs(out.direct - out.conjugated);
    return out;
}

} // namespace scl
