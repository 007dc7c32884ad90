#pragma once

// Exact integer lattice algebra: Hermite and Smith normal forms, saturation,
// integer kernels, unimodular completion and fractional parts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <regex>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <Eigen/Dense>

#include "scl/errors.hpp"

namespace scl {

using Integer = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;
using IntMatrix = std::vector<std::vector<Integer>>;

enum class Space { dual, primal };

struct LatticeVector {
    std::vector<Integer> entries;
    Space space = Space::dual;

    std::size_t dim() const { return entries.size(); }
    bool operator==(const LatticeVector&) const = default;
};

using RationalVector = std::vector<Rational>;

inline LatticeVector lattice_vector(std::initializer_list<long long> v, Space s = Space::dual) {
    LatticeVector out;
    out.space = s;
    for (long long x : v) out.entries.emplace_back(x);
    return out;
}

inline Rational parse_rational(const std::string& text) {
    static const std::regex pattern(R"(\s*([+-]?\d+)(?:/(\d+))?\s*)");
    std::smatch m;
    if (!std::regex_match(text, m, pattern)) throw ParameterError("not a rational 'p/q': '" + text + "'");
    Integer p(m[1].str()[0] == '+' ? m[1].str().substr(1) : m[1].str());
    Integer q(m[2].matched ? m[2].str() : std::string("1"));
    if (q == 0) throw ParameterError("zero denominator in '" + text + "'");
    return Rational(p, q);
}

inline std::string to_string(const Rational& r) {
    using boost::multiprecision::denominator;
    using boost::multiprecision::numerator;
    if (denominator(r) == 1) return numerator(r).str();
    return numerator(r).str() + "/" + denominator(r).str();
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }
inline double to_double(const Integer& r) { return r.convert_to<double>(); }

namespace detail {

// Floor division for arbitrary precision integers (b > 0 or b < 0).
inline Integer floor_div(const Integer& a, const Integer& b) {
    Integer q = a / b;
    Integer r = a - q * b;
    if (r != 0 && ((r < 0) != (b < 0))) q -= 1;
    return q;
}

inline bool is_zero_row(const std::vector<Integer>& row) {
    return std::all_of(row.begin(), row.end(), [](const Integer& x) { return x == 0; });
}

inline void axpy_row(std::vector<Integer>& dst, const Integer& q, const std::vector<Integer>& src) {
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += q * src[c];
}

} // namespace detail

// Row-style Hermite normal form: echelon rows, positive pivots, entries
// above each pivot reduced into [0, pivot). Zero rows are dropped.
inline IntMatrix hermite_normal_form(IntMatrix a) {
    if (a.empty()) return a;
    const std::size_t cols = a.front().size();
    std::size_t r = 0;
    for (std::size_t c = 0; c < cols && r < a.size(); ++c) {
        // Euclid on column c among rows r.. until a single nonzero remains.
        for (;;) {
            std::size_t best = a.size();
            for (std::size_t i = r; i < a.size(); ++i) {
                if (a[i][c] == 0) continue;
                if (best == a.size() || abs(a[i][c]) < abs(a[best][c])) best = i;
            }
            if (best == a.size()) break;
            std::swap(a[r], a[best]);
            bool done = true;
            for (std::size_t i = r + 1; i < a.size(); ++i) {
                if (a[i][c] == 0) continue;
                Integer q = a[i][c] / a[r][c];
                detail::axpy_row(a[i], -q, a[r]);
                if (a[i][c] != 0) done = false;
            }
            if (done) break;
        }
        if (a[r][c] == 0) continue;
        if (a[r][c] < 0)
            for (auto& x : a[r]) x = -x;
        for (std::size_t i = 0; i < r; ++i) {
            Integer q = detail::floor_div(a[i][c], a[r][c]);
            if (q != 0) detail::axpy_row(a[i], -q, a[r]);
        }
        ++r;
    }
    a.resize(r);
    return a;
}

// Smith form P A Q = D with the right transform Q and its inverse tracked.
struct SmithForm {
    IntMatrix diagonal;          // D, same shape as A
    IntMatrix right;             // Q (cols x cols)
    IntMatrix right_inverse;     // Q^{-1}
    std::vector<Integer> divisors;
    std::size_t rank = 0;
};

inline IntMatrix identity_matrix(std::size_t n) {
    IntMatrix m(n, std::vector<Integer>(n, Integer(0)));
    for (std::size_t i = 0; i < n; ++i) m[i][i] = 1;
    return m;
}

inline SmithForm smith_normal_form(IntMatrix a, std::size_t cols) {
    SmithForm out;
    out.right = identity_matrix(cols);
    out.right_inverse = identity_matrix(cols);
    const std::size_t rows = a.size();
    auto& q = out.right;
    auto& qi = out.right_inverse;

    auto swap_cols = [&](std::size_t i, std::size_t j) {
        if (i == j) return;
        for (auto& row : a) std::swap(row[i], row[j]);
        for (auto& row : q) std::swap(row[i], row[j]);
        std::swap(qi[i], qi[j]);
    };
    // col_j -= f * col_t, mirrored on Q and Q^{-1}.
    auto col_op = [&](std::size_t j, std::size_t t, const Integer& f) {
        for (auto& row : a) row[j] -= f * row[t];
        for (auto& row : q) row[j] -= f * row[t];
        detail::axpy_row(qi[t], f, qi[j]);
    };

    for (std::size_t t = 0; t < std::min(rows, cols); ++t) {
        for (;;) {
            std::size_t bi = rows, bj = cols;
            for (std::size_t i = t; i < rows; ++i)
                for (std::size_t j = t; j < cols; ++j)
                    if (a[i][j] != 0 && (bi == rows || abs(a[i][j]) < abs(a[bi][bj]))) {
                        bi = i;
                        bj = j;
                    }
            if (bi == rows) break;
            std::swap(a[t], a[bi]);
            swap_cols(t, bj);

            bool clean = true;
            for (std::size_t i = t + 1; i < rows; ++i) {
                if (a[i][t] == 0) continue;
                Integer f = a[i][t] / a[t][t];
                detail::axpy_row(a[i], -f, a[t]);
                if (a[i][t] != 0) clean = false;
            }
            for (std::size_t j = t + 1; j < cols; ++j) {
                if (a[t][j] == 0) continue;
                Integer f = a[t][j] / a[t][t];
                col_op(j, t, f);
                if (a[t][j] != 0) clean = false;
            }
            if (!clean) continue;
            // Enforce the divisibility chain on the remaining block.
            bool divides = true;
            for (std::size_t i = t + 1; i < rows && divides; ++i)
                for (std::size_t j = t + 1; j < cols; ++j)
                    if (a[i][j] % a[t][t] != 0) {
                        detail::axpy_row(a[t], Integer(1), a[i]);
                        divides = false;
                        break;
                    }
            if (divides) break;
        }
        if (a[t][t] == 0) break;
        if (a[t][t] < 0)
            for (auto& x : a[t]) x = -x;
        out.divisors.push_back(a[t][t]);
        ++out.rank;
    }
    out.diagonal = std::move(a);
    return out;
}

// Exact determinant of a square integer matrix (fraction-free Bareiss).
inline Integer determinant(IntMatrix m) {
    const std::size_t n = m.size();
    if (n == 0) return Integer(1);
    Integer sign = 1, prev = 1;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        if (m[k][k] == 0) {
            std::size_t p = k + 1;
            while (p < n && m[p][k] == 0) ++p;
            if (p == n) return Integer(0);
            std::swap(m[k], m[p]);
            sign = -sign;
        }
        for (std::size_t i = k + 1; i < n; ++i)
            for (std::size_t j = k + 1; j < n; ++j)
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
        prev = m[k][k];
    }
    return sign * m[n - 1][n - 1];
}

// A saturated sublattice of Z^d (primal) or (Z^d)* (dual) stored by its
// canonical row-style HNF basis.
class PrimitiveModule {
public:
    PrimitiveModule() = default;

    // Trusts that `basis` spans a saturated lattice; canonicalizes it.
    static PrimitiveModule from_saturated(std::size_t dim, IntMatrix basis, Space space) {
        PrimitiveModule m;
        m.dim_ = dim;
        m.space_ = space;
        m.basis_ = hermite_normal_form(std::move(basis));
        return m;
    }

    static PrimitiveModule full(std::size_t dim, Space space = Space::dual) {
        return from_saturated(dim, identity_matrix(dim), space);
    }

    static PrimitiveModule zero(std::size_t dim, Space space = Space::dual) {
        return from_saturated(dim, {}, space);
    }

    std::size_t dim() const { return dim_; }
    std::size_t rank() const { return basis_.size(); }
    Space space() const { return space_; }
    const IntMatrix& basis() const { return basis_; }

    bool operator==(const PrimitiveModule& o) const {
        return dim_ == o.dim_ && space_ == o.space_ && basis_ == o.basis_;
    }

    // Pivot column of each basis row.
    std::vector<std::size_t> pivots() const {
        std::vector<std::size_t> p;
        for (const auto& row : basis_) {
            std::size_t c = 0;
            while (row[c] == 0) ++c;
            p.push_back(c);
        }
        return p;
    }

    // Canonical representative of v modulo the lattice: pivot entries in [0, pivot).
    std::vector<Integer> reduce(std::vector<Integer> v) const {
        auto piv = pivots();
        for (std::size_t i = 0; i < basis_.size(); ++i) {
            Integer q = detail::floor_div(v[piv[i]], basis_[i][piv[i]]);
            if (q != 0) detail::axpy_row(v, -q, basis_[i]);
        }
        return v;
    }

    bool contains(const std::vector<Integer>& v) const {
        auto piv = pivots();
        std::vector<Integer> w = v;
        for (std::size_t i = 0; i < basis_.size(); ++i) {
            const Integer& p = basis_[i][piv[i]];
            if (w[piv[i]] % p != 0) return false;
            Integer q = w[piv[i]] / p;
            if (q != 0) detail::axpy_row(w, -q, basis_[i]);
        }
        return detail::is_zero_row(w);
    }

    bool contains(const LatticeVector& v) const { return contains(v.entries); }

    template <class IntLike>
    bool contains_small(const IntLike& v) const {
        std::vector<Integer> w;
        for (auto x : v) w.emplace_back(static_cast<long long>(x));
        return contains(w);
    }

    // Basis as a floating matrix (rank x dim).
    Eigen::MatrixXd basis_matrix() const {
        Eigen::MatrixXd b(static_cast<Eigen::Index>(rank()), static_cast<Eigen::Index>(dim_));
        for (std::size_t i = 0; i < rank(); ++i)
            for (std::size_t j = 0; j < dim_; ++j)
                b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = to_double(basis_[i][j]);
        return b;
    }

private:
    std::size_t dim_ = 0;
    Space space_ = Space::dual;
    IntMatrix basis_;
};

inline PrimitiveModule saturate_matrix(std::size_t dim, const IntMatrix& gens, Space space) {
    if (gens.empty()) return PrimitiveModule::zero(dim, space);
    SmithForm s = smith_normal_form(gens, dim);
    IntMatrix rows(s.right_inverse.begin(), s.right_inverse.begin() + static_cast<std::ptrdiff_t>(s.rank));
    return PrimitiveModule::from_saturated(dim, std::move(rows), space);
}

// Saturation of the module generated by `generators`.
inline PrimitiveModule saturate(const std::vector<LatticeVector>& generators, std::size_t dim = 0,
                                Space space = Space::dual) {
    if (!generators.empty()) {
        dim = generators.front().dim();
        space = generators.front().space;
    }
    IntMatrix gens;
    for (const auto& g : generators) {
        if (g.dim() != dim || g.space != space)
            throw ParameterError("generators disagree in dimension or space");
        gens.push_back(g.entries);
    }
    return saturate_matrix(dim, gens, space);
}

// True iff every elementary divisor of the row matrix equals 1.
inline bool is_saturated(std::size_t dim, const IntMatrix& rows) {
    if (rows.empty()) return true;
    SmithForm s = smith_normal_form(rows, dim);
    return std::all_of(s.divisors.begin(), s.divisors.end(), [](const Integer& x) { return x == 1; });
}

// Integer kernel {v : M v = 0} of an integer matrix with `dim` columns.
inline IntMatrix integer_kernel(std::size_t dim, const IntMatrix& m) {
    if (m.empty()) return identity_matrix(dim);
    SmithForm s = smith_normal_form(m, dim);
    IntMatrix out;
    for (std::size_t j = s.rank; j < dim; ++j) {
        std::vector<Integer> col(dim);
        for (std::size_t i = 0; i < dim; ++i) col[i] = s.right[i][j];
        out.push_back(std::move(col));
    }
    return out;
}

inline Space other(Space s) { return s == Space::dual ? Space::primal : Space::dual; }

// {k : k . gradient = 0} for an exact rational gradient.
inline PrimitiveModule resonance_module(const RationalVector& gradient) {
    using boost::multiprecision::denominator;
    using boost::multiprecision::numerator;
    const std::size_t d = gradient.size();
    Integer l = 1;
    for (const auto& g : gradient) l = boost::multiprecision::lcm(l, denominator(g));
    std::vector<Integer> row(d);
    for (std::size_t i = 0; i < d; ++i) row[i] = numerator(Rational(gradient[i] * l));
    if (detail::is_zero_row(row)) return PrimitiveModule::full(d, Space::dual);
    return PrimitiveModule::from_saturated(d, integer_kernel(d, {row}), Space::dual);
}

// The annihilator of a module under the duality pairing.
inline PrimitiveModule orthogonal_lattice(const PrimitiveModule& m) {
    return PrimitiveModule::from_saturated(m.dim(), integer_kernel(m.dim(), m.basis()), other(m.space()));
}

inline IntMatrix stack(const IntMatrix& a, const IntMatrix& b) {
    IntMatrix s = a;
    s.insert(s.end(), b.begin(), b.end());
    return s;
}

// A lattice C with L (+) C = Z^d. Unit-vector completions are preferred in
// lexicographic order of index sets; otherwise the Smith transform is used.
inline PrimitiveModule complement_lattice(const PrimitiveModule& l) {
    const std::size_t d = l.dim(), r = l.rank();
    if (!is_saturated(d, l.basis())) throw ParameterError("complement of a non-primitive lattice");
    const std::size_t need = d - r;
    if (need == 0) return PrimitiveModule::zero(d, l.space());

    std::vector<std::size_t> idx(need);
    std::iota(idx.begin(), idx.end(), 0);
    for (;;) {
        IntMatrix units;
        for (std::size_t i : idx) {
            std::vector<Integer> e(d, Integer(0));
            e[i] = 1;
            units.push_back(std::move(e));
        }
        if (abs(determinant(stack(l.basis(), units))) == 1)
            return PrimitiveModule::from_saturated(d, units, l.space());
        // next combination
        std::size_t k = need;
        while (k > 0 && idx[k - 1] == d - need + (k - 1)) --k;
        if (k == 0) break;
        ++idx[k - 1];
        for (std::size_t j = k; j < need; ++j) idx[j] = idx[j - 1] + 1;
    }
    SmithForm s = smith_normal_form(l.basis(), d);
    IntMatrix rows(s.right_inverse.begin() + static_cast<std::ptrdiff_t>(r), s.right_inverse.end());
    return PrimitiveModule::from_saturated(d, std::move(rows), l.space());
}

struct FractionalPart {
    std::vector<double> frac;
    std::vector<Integer> coefficients;  // int_part in basis coordinates
    LatticeVector int_part;             // basis^T . coefficients
};

// Splits eta in <Lambda> into a point of the half-open basis box and a lattice vector.
inline FractionalPart fractional_part(const std::vector<double>& eta, const PrimitiveModule& m,
                                      double tol = 1e-9) {
    const std::size_t d = m.dim(), r = m.rank();
    if (eta.size() != d) throw ParameterError("fractional_part: dimension mismatch");
    FractionalPart out;
    out.int_part.space = m.space();
    out.int_part.entries.assign(d, Integer(0));
    Eigen::VectorXd e = Eigen::Map<const Eigen::VectorXd>(eta.data(), static_cast<Eigen::Index>(d));
    double scale = std::max(1.0, e.norm());
    if (r == 0) {
        if (e.norm() > tol * scale) throw SpanError("vector not in the zero module");
        out.frac.assign(d, 0.0);
        return out;
    }
    Eigen::MatrixXd b = m.basis_matrix();
    Eigen::VectorXd c = (b * b.transpose()).ldlt().solve(b * e);
    if ((b.transpose() * c - e).norm() > tol * scale) throw SpanError("vector not in the module span");
    Eigen::VectorXd f(static_cast<Eigen::Index>(r));
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        double ci = c(i), ri = std::round(ci);
        if (std::abs(ci - ri) <= 1e-12 * std::max(1.0, std::abs(ci))) ci = ri;
        double fl = std::floor(ci);
        out.coefficients.emplace_back(static_cast<long long>(fl));
        f(i) = ci - fl;
    }
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < d; ++j) out.int_part.entries[j] += out.coefficients[i] * m.basis()[i][j];
    // frac = eta - basis^T floor(c), which keeps the reconstruction exact up to rounding.
    out.frac.resize(d);
    for (std::size_t j = 0; j < d; ++j) out.frac[j] = eta[j] - to_double(out.int_part.entries[j]);
    return out;
}

} // namespace scl
