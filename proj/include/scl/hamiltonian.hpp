#pragma once

// Hamiltonian symbols H(xi) with jets, exact rational evaluation, Hessian
// definiteness, and the split xi = sigma + eta along a resonant module.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scl/errors.hpp"
#include "scl/lattice.hpp"
#include "scl/profiles.hpp"

namespace scl {

using RealVector = std::vector<double>;

struct Jet {
    double value = 0.0;
    RealVector gradient;
    Eigen::MatrixXd hessian;
};

enum class HamiltonianKind { quadratic, even_power, linear, difference_quadratic, custom };

inline const char* kind_name(HamiltonianKind k) {
    switch (k) {
    case HamiltonianKind::quadratic: return "quadratic";
    case HamiltonianKind::even_power: return "even_power";
    case HamiltonianKind::linear: return "linear";
    case HamiltonianKind::difference_quadratic: return "difference_quadratic";
    case HamiltonianKind::custom: return "custom";
    }
    return "?";
}

// H(h k) = scale * P(k) with P integer valued on integer k.
struct IntegerForm {
    Rational scale;
    std::function<__int128(const long long*)> poly;
};

class HamiltonianModel {
public:
    using ValueFn = std::function<double(const double*)>;
    using GradFn = std::function<void(const double*, double*)>;
    using HessFn = std::function<void(const double*, double*)>;

    // H(xi) = xi . A xi with A symmetric.
    static HamiltonianModel quadratic(std::vector<RationalVector> a) {
        HamiltonianModel m;
        m.kind_ = HamiltonianKind::quadratic;
        m.dim_ = a.size();
        for (std::size_t i = 0; i < m.dim_; ++i) {
            if (a[i].size() != m.dim_) throw ParameterError("quadratic: A must be square");
            for (std::size_t j = 0; j < i; ++j)
                if (a[i][j] != a[j][i]) throw ParameterError("quadratic: A must be symmetric");
        }
        m.a_ = std::move(a);
        m.cache_quadratic();
        return m;
    }

    static HamiltonianModel identity_quadratic(std::size_t d) {
        std::vector<RationalVector> a(d, RationalVector(d, Rational(0)));
        for (std::size_t i = 0; i < d; ++i) a[i][i] = 1;
        return quadratic(std::move(a));
    }

    // H(xi) = |xi|^{exponent}, exponent = 2k even.
    static HamiltonianModel even_power(std::size_t d, int exponent) {
        if (exponent < 2 || exponent % 2 != 0) throw ParameterError("even_power: exponent must be even and >= 2");
        HamiltonianModel m;
        m.kind_ = HamiltonianKind::even_power;
        m.dim_ = d;
        m.exponent_ = exponent;
        return m;
    }

    // H(xi) = omega . xi.
    static HamiltonianModel linear(RationalVector omega) {
        HamiltonianModel m;
        m.kind_ = HamiltonianKind::linear;
        m.dim_ = omega.size();
        m.omega_ = std::move(omega);
        for (const auto& w : m.omega_) m.omega_d_.push_back(to_double(w));
        return m;
    }

    // H(xi) = sum_i sign_i c_i xi_i^2.
    static HamiltonianModel difference_quadratic(std::vector<int> signs, RationalVector coefficients) {
        if (signs.size() != coefficients.size()) throw ParameterError("difference_quadratic: size mismatch");
        HamiltonianModel m;
        m.kind_ = HamiltonianKind::difference_quadratic;
        m.dim_ = signs.size();
        m.signs_ = signs;
        m.coefficients_ = coefficients;
        m.a_.assign(m.dim_, RationalVector(m.dim_, Rational(0)));
        for (std::size_t i = 0; i < m.dim_; ++i) {
            if (signs[i] != 1 && signs[i] != -1) throw ParameterError("difference_quadratic: signs must be +-1");
            m.a_[i][i] = coefficients[i] * signs[i];
        }
        m.cache_quadratic();
        return m;
    }

    static HamiltonianModel custom(std::size_t d, ValueFn value, GradFn grad, HessFn hess) {
        HamiltonianModel m;
        m.kind_ = HamiltonianKind::custom;
        m.dim_ = d;
        m.value_fn_ = std::move(value);
        m.grad_fn_ = std::move(grad);
        m.hess_fn_ = std::move(hess);
        return m;
    }

    HamiltonianKind kind() const { return kind_; }
    std::size_t dim() const { return dim_; }
    bool exact_rational() const { return kind_ != HamiltonianKind::custom; }
    int exponent() const { return exponent_; }
    const std::vector<RationalVector>& matrix() const { return a_; }
    const RationalVector& omega() const { return omega_; }
    const std::vector<int>& signs() const { return signs_; }
    const RationalVector& coefficients() const { return coefficients_; }
    // True when d^2H does not depend on xi.
    bool constant_hessian() const { return kind_ != HamiltonianKind::even_power && kind_ != HamiltonianKind::custom; }

    double value(const double* xi) const {
        switch (kind_) {
        case HamiltonianKind::quadratic:
        case HamiltonianKind::difference_quadratic: {
            double s = 0.0;
            for (std::size_t i = 0; i < dim_; ++i)
                for (std::size_t j = 0; j < dim_; ++j) s += xi[i] * ad_[i * dim_ + j] * xi[j];
            return s;
        }
        case HamiltonianKind::even_power: return std::pow(norm2(xi), exponent_ / 2);
        case HamiltonianKind::linear: {
            double s = 0.0;
            for (std::size_t i = 0; i < dim_; ++i) s += omega_d_[i] * xi[i];
            return s;
        }
        case HamiltonianKind::custom: return value_fn_(xi);
        }
        return 0.0;
    }

    void gradient(const double* xi, double* g) const {
        switch (kind_) {
        case HamiltonianKind::quadratic:
        case HamiltonianKind::difference_quadratic:
            for (std::size_t i = 0; i < dim_; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < dim_; ++j) s += ad_[i * dim_ + j] * xi[j];
                g[i] = 2.0 * s;
            }
            return;
        case HamiltonianKind::even_power: {
            const int k = exponent_ / 2;
            double f = 2.0 * k * std::pow(norm2(xi), k - 1);
            for (std::size_t i = 0; i < dim_; ++i) g[i] = f * xi[i];
            return;
        }
        case HamiltonianKind::linear:
            for (std::size_t i = 0; i < dim_; ++i) g[i] = omega_d_[i];
            return;
        case HamiltonianKind::custom: grad_fn_(xi, g); return;
        }
    }

    void hessian(const double* xi, double* out) const {
        switch (kind_) {
        case HamiltonianKind::quadratic:
        case HamiltonianKind::difference_quadratic:
            for (std::size_t i = 0; i < dim_ * dim_; ++i) out[i] = 2.0 * ad_[i];
            return;
        case HamiltonianKind::even_power: {
            // d^2 (r2)^k = 2k r2^{k-1} I + 4k(k-1) r2^{k-2} xi xi^T
            const int k = exponent_ / 2;
            double r2 = norm2(xi);
            double a = 2.0 * k * std::pow(r2, k - 1);
            double b = k >= 2 ? 4.0 * k * (k - 1) * std::pow(r2, k - 2) : 0.0;
            for (std::size_t i = 0; i < dim_; ++i)
                for (std::size_t j = 0; j < dim_; ++j) out[i * dim_ + j] = (i == j ? a : 0.0) + b * xi[i] * xi[j];
            return;
        }
        case HamiltonianKind::linear:
            for (std::size_t i = 0; i < dim_ * dim_; ++i) out[i] = 0.0;
            return;
        case HamiltonianKind::custom: hess_fn_(xi, out); return;
        }
    }

    double value(const RealVector& xi) const { return value(xi.data()); }

    Jet jet(const RealVector& xi) const {
        check_dim(xi.size());
        Jet j;
        j.value = value(xi.data());
        j.gradient.resize(dim_);
        gradient(xi.data(), j.gradient.data());
        RealVector h(dim_ * dim_);
        hessian(xi.data(), h.data());
        j.hessian = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            h.data(), static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
        return j;
    }

    Rational exact_value(const RationalVector& xi) const {
        check_dim(xi.size());
        switch (kind_) {
        case HamiltonianKind::quadratic:
        case HamiltonianKind::difference_quadratic: {
            Rational s = 0;
            for (std::size_t i = 0; i < dim_; ++i)
                for (std::size_t j = 0; j < dim_; ++j) s += xi[i] * a_[i][j] * xi[j];
            return s;
        }
        case HamiltonianKind::even_power: {
            Rational r2 = 0, s = 1;
            for (const auto& x : xi) r2 += x * x;
            for (int i = 0; i < exponent_ / 2; ++i) s *= r2;
            return s;
        }
        case HamiltonianKind::linear: {
            Rational s = 0;
            for (std::size_t i = 0; i < dim_; ++i) s += omega_[i] * xi[i];
            return s;
        }
        case HamiltonianKind::custom: break;
        }
        throw ExactnessError("custom Hamiltonian has no exact evaluation");
    }

    RationalVector exact_gradient(const RationalVector& xi) const {
        check_dim(xi.size());
        RationalVector g(dim_, Rational(0));
        switch (kind_) {
        case HamiltonianKind::quadratic:
        case HamiltonianKind::difference_quadratic:
            for (std::size_t i = 0; i < dim_; ++i)
                for (std::size_t j = 0; j < dim_; ++j) g[i] += 2 * a_[i][j] * xi[j];
            return g;
        case HamiltonianKind::even_power: {
            const int k = exponent_ / 2;
            Rational r2 = 0, p = 1;
            for (const auto& x : xi) r2 += x * x;
            for (int i = 0; i < k - 1; ++i) p *= r2;
            for (std::size_t i = 0; i < dim_; ++i) g[i] = 2 * k * p * xi[i];
            return g;
        }
        case HamiltonianKind::linear: return omega_;
        case HamiltonianKind::custom: break;
        }
        throw ExactnessError("custom Hamiltonian has no exact gradient");
    }

    // H(h k) = scale * P(k) with integer P, for rational h.
    IntegerForm integer_form(const Rational& h) const {
        using boost::multiprecision::denominator;
        using boost::multiprecision::numerator;
        IntegerForm f;
        const std::size_t d = dim_;
        switch (kind_) {
        case HamiltonianKind::quadratic:
        case HamiltonianKind::difference_quadratic: {
            Integer l = 1;
            for (const auto& row : a_)
                for (const auto& x : row) l = boost::multiprecision::lcm(l, denominator(x));
            std::vector<long long> m(d * d);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) m[i * d + j] = numerator(Rational(a_[i][j] * l)).convert_to<long long>();
            f.scale = h * h / Rational(l);
            f.poly = [m, d](const long long* k) {
                __int128 s = 0;
                for (std::size_t i = 0; i < d; ++i)
                    for (std::size_t j = 0; j < d; ++j) s += static_cast<__int128>(k[i]) * m[i * d + j] * k[j];
                return s;
            };
            return f;
        }
        case HamiltonianKind::even_power: {
            const int k = exponent_ / 2;
            Rational s = 1;
            for (int i = 0; i < exponent_; ++i) s *= h;
            f.scale = s;
            f.poly = [k, d](const long long* v) {
                __int128 r2 = 0;
                for (std::size_t i = 0; i < d; ++i) r2 += static_cast<__int128>(v[i]) * v[i];
                __int128 p = 1;
                for (int i = 0; i < k; ++i) p *= r2;
                return p;
            };
            return f;
        }
        case HamiltonianKind::linear: {
            Integer l = 1;
            for (const auto& x : omega_) l = boost::multiprecision::lcm(l, denominator(x));
            std::vector<long long> w(d);
            for (std::size_t i = 0; i < d; ++i) w[i] = numerator(Rational(omega_[i] * l)).convert_to<long long>();
            f.scale = h / Rational(l);
            f.poly = [w, d](const long long* k) {
                __int128 s = 0;
                for (std::size_t i = 0; i < d; ++i) s += static_cast<__int128>(w[i]) * k[i];
                return s;
            };
            return f;
        }
        case HamiltonianKind::custom: break;
        }
        throw ExactnessError("custom Hamiltonian has no exact lattice evaluation");
    }

    // Largest |k|_inf for which integer_form cannot overflow 127 bits.
    double integer_form_safe_radius() const {
        double d = static_cast<double>(dim_);
        switch (kind_) {
        case HamiltonianKind::even_power: return std::pow(std::ldexp(1.0, 120) / std::pow(d, exponent_ / 2), 1.0 / exponent_);
        case HamiltonianKind::linear: return std::ldexp(1.0, 60);
        default: return std::ldexp(1.0, 30);
        }
    }

private:
    void check_dim(std::size_t n) const {
        if (n != dim_) throw ParameterError("Hamiltonian dimension mismatch");
    }
    double norm2(const double* xi) const {
        double s = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) s += xi[i] * xi[i];
        return s;
    }
    void cache_quadratic() {
        ad_.resize(dim_ * dim_);
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = 0; j < dim_; ++j) ad_[i * dim_ + j] = to_double(a_[i][j]);
    }

    HamiltonianKind kind_ = HamiltonianKind::quadratic;
    std::size_t dim_ = 0;
    std::vector<RationalVector> a_;
    RealVector ad_;
    int exponent_ = 2;
    RationalVector omega_;
    RealVector omega_d_;
    std::vector<int> signs_;
    RationalVector coefficients_;
    ValueFn value_fn_;
    GradFn grad_fn_;
    HessFn hess_fn_;
};

inline Jet evaluate_jet(const HamiltonianModel& h, const RealVector& xi) { return h.jet(xi); }

// The resonant module of a momentum together with its order d - rank.
struct MomentumClass {
    PrimitiveModule lambda;
    std::size_t order = 0;
};

inline MomentumClass classify_momentum(const HamiltonianModel& h, const RationalVector& xi) {
    if (xi.size() != h.dim()) throw ParameterError("classify_momentum: dimension mismatch");
    auto lambda = resonance_module(h.exact_gradient(xi));
    const std::size_t order = h.dim() - lambda.rank();
    return {std::move(lambda), order};
}

// All Hessian eigenvalues share one sign and have magnitude >= tol.
inline bool is_definite(const HamiltonianModel& h, const RealVector& xi, double tol = 1e-9) {
    if (tol <= 0) throw ParameterError("is_definite: tol must be positive");
    Jet j = h.jet(xi);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j.hessian, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    bool pos = ev.minCoeff() >= tol, neg = ev.maxCoeff() <= -tol;
    return pos || neg;
}

inline RealVector to_real(const RationalVector& v) {
    RealVector r;
    for (const auto& x : v) r.push_back(to_double(x));
    return r;
}

struct SplitCoordinates {
    RealVector sigma;
    RealVector eta;
    int iterations = 0;
};

// Frame of the second microlocalization at xi0 along Lambda.
struct TwoMicrolocalFrame {
    PrimitiveModule lambda;
    RationalVector xi0;
    RealVector xi0_real;
    double epsilon = 0.0;

    // b(xi): 1 on B(xi0, eps/2), 0 outside B(xi0, eps).
    double cutoff(const double* xi) const {
        double s = 0.0;
        for (std::size_t i = 0; i < xi0_real.size(); ++i) s += (xi[i] - xi0_real[i]) * (xi[i] - xi0_real[i]);
        return plateau(std::sqrt(s), 0.5 * epsilon, epsilon);
    }

    double distance_to_center(const double* xi) const {
        double s = 0.0;
        for (std::size_t i = 0; i < xi0_real.size(); ++i) s += (xi[i] - xi0_real[i]) * (xi[i] - xi0_real[i]);
        return std::sqrt(s);
    }
};

// Newton solve of dH(xi - B^T c) . k_i = 0 with eta = B^T c in <Lambda>.
inline SplitCoordinates split_unchecked(const TwoMicrolocalFrame& frame, const HamiltonianModel& h, const double* xi,
                                        double tol = 1e-12, int max_iter = 50) {
    const std::size_t d = frame.lambda.dim(), r = frame.lambda.rank();
    SplitCoordinates out;
    out.sigma.assign(xi, xi + d);
    out.eta.assign(d, 0.0);
    if (r == 0) return out;
    Eigen::MatrixXd b = frame.lambda.basis_matrix();  // r x d
    Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(xi, static_cast<Eigen::Index>(d));
    Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(r));
    RealVector sigma(d), grad(d), hess(d * d);
    double scale = 1.0;
    for (int it = 0; it <= max_iter; ++it) {
        Eigen::VectorXd s = x0 - b.transpose() * c;
        for (std::size_t i = 0; i < d; ++i) sigma[i] = s(static_cast<Eigen::Index>(i));
        h.gradient(sigma.data(), grad.data());
        Eigen::Map<Eigen::VectorXd> g(grad.data(), static_cast<Eigen::Index>(d));
        Eigen::VectorXd res = b * g;
        if (it == 0) scale = std::max(1.0, g.norm());
        if (res.cwiseAbs().maxCoeff() <= tol * scale) {
            out.sigma = sigma;
            for (std::size_t i = 0; i < d; ++i) out.eta[i] = xi[i] - sigma[i];
            out.iterations = it;
            return out;
        }
        if (it == max_iter) break;
        h.hessian(sigma.data(), hess.data());
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> hm(
            hess.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        Eigen::MatrixXd jac = -b * hm * b.transpose();
        c -= jac.fullPivLu().solve(res);
    }
    throw ConvergenceError("F coordinates: Newton did not converge");
}

inline SplitCoordinates F_coordinates(const TwoMicrolocalFrame& frame, const HamiltonianModel& h, const RealVector& xi) {
    if (xi.size() != frame.lambda.dim()) throw ParameterError("F_coordinates: dimension mismatch");
    if (frame.distance_to_center(xi.data()) >= 0.5 * frame.epsilon)
        throw DomainError("F_coordinates: point outside B(xi0, eps/2)");
    return split_unchecked(frame, h, xi.data());
}

// Builds a frame and validates definiteness and splitting on a 5^d grid.
inline TwoMicrolocalFrame make_frame(const HamiltonianModel& h, PrimitiveModule lambda, RationalVector xi0,
                                     double epsilon, bool validate = true) {
    if (epsilon <= 0) throw ParameterError("frame: epsilon must be positive");
    if (lambda.space() != Space::dual) throw ParameterError("frame: Lambda must be a dual module");
    TwoMicrolocalFrame f;
    f.lambda = std::move(lambda);
    f.xi0 = std::move(xi0);
    f.xi0_real = to_real(f.xi0);
    f.epsilon = epsilon;
    const std::size_t d = f.xi0.size();
    if (d != h.dim() || d != f.lambda.dim()) throw ParameterError("frame: dimension mismatch");
    if (!validate) return f;
    if (h.exact_rational()) {
        RationalVector g = h.exact_gradient(f.xi0);
        for (const auto& k : f.lambda.basis()) {
            Rational s = 0;
            for (std::size_t i = 0; i < d; ++i) s += Rational(k[i]) * g[i];
            if (s != 0) throw ParameterError("frame: xi0 is not in I_Lambda");
        }
    }
    std::vector<int> idx(d, 0);
    RealVector xi(d);
    for (;;) {
        double r2 = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            double off = f.epsilon * (idx[i] - 2) / 2.0;
            xi[i] = f.xi0_real[i] + off;
            r2 += off * off;
        }
        double r = std::sqrt(r2);
        if (r <= f.epsilon && !is_definite(h, xi)) throw ParameterError("frame: Hessian not definite on B(xi0, eps)");
        if (r < 0.5 * f.epsilon) {
            auto s = split_unchecked(f, h, xi.data());
            if (f.distance_to_center(s.sigma.data()) >= f.epsilon)
                throw ParameterError("frame: split leaves B(xi0, eps); choose a smaller eps");
        }
        std::size_t p = 0;
        while (p < d && ++idx[p] == 5) idx[p++] = 0;
        if (p == d) break;
    }
    return f;
}

} // namespace scl
