#pragma once

// JSON and CSV serialization for modules, Hamiltonians, states and reports.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "scl/errors.hpp"
#include "scl/hamiltonian.hpp"
#include "scl/lattice.hpp"
#include "scl/microlocal.hpp"
#include "scl/state.hpp"
#include "scl/wigner.hpp"

namespace scl {

using Json = nlohmann::ordered_json;

// 17 significant digits, the format shared by every text artifact.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline Json module_to_json(const PrimitiveModule& m) {
    Json basis = Json::array();
    for (const auto& row : m.basis()) {
        Json r = Json::array();
        for (const auto& x : row) r.push_back(x.str());
        basis.push_back(r);
    }
    return Json{{"dim", m.dim()}, {"rank", m.rank()}, {"basis", basis},
                {"space", m.space() == Space::dual ? "dual" : "primal"}};
}

inline Integer json_integer(const Json& v) {
    if (v.is_string()) return Integer(v.get<std::string>());
    if (v.is_number_integer()) return Integer(v.get<long long>());
    throw ParameterError("expected an integer or decimal string");
}

inline Rational json_rational(const Json& v) {
    if (v.is_string()) return parse_rational(v.get<std::string>());
    if (v.is_number_integer()) return Rational(v.get<long long>());
    throw ParameterError("expected a rational as \"p/q\" string or an integer");
}

inline RationalVector json_rational_vector(const Json& v) {
    RationalVector out;
    for (const auto& x : v) out.push_back(json_rational(x));
    return out;
}

// Reads {"dim","rank","basis"}; the rows are saturated and canonicalized.
inline PrimitiveModule module_from_json(const Json& j) {
    const auto d = j.at("dim").get<std::size_t>();
    Space space = j.value("space", std::string("dual")) == "primal" ? Space::primal : Space::dual;
    IntMatrix rows;
    for (const auto& r : j.at("basis")) {
        std::vector<Integer> row;
        for (const auto& x : r) row.push_back(json_integer(x));
        if (row.size() != d) throw ParameterError("module basis row has wrong length");
        rows.push_back(std::move(row));
    }
    PrimitiveModule m = saturate_matrix(d, rows, space);
    if (j.contains("rank") && j.at("rank").get<std::size_t>() != m.rank())
        throw ParameterError("module rank does not match its basis");
    return m;
}

inline Json hamiltonian_to_json(const HamiltonianModel& h) {
    Json j{{"kind", kind_name(h.kind())}};
    switch (h.kind()) {
    case HamiltonianKind::quadratic: {
        Json a = Json::array();
        for (const auto& row : h.matrix()) {
            Json r = Json::array();
            for (const auto& x : row) r.push_back(to_string(x));
            a.push_back(r);
        }
        j["A"] = a;
        break;
    }
    case HamiltonianKind::even_power:
        j["dim"] = h.dim();
        j["exponent"] = h.exponent();
        break;
    case HamiltonianKind::linear: {
        Json w = Json::array();
        for (const auto& x : h.omega()) w.push_back(to_string(x));
        j["omega"] = w;
        break;
    }
    case HamiltonianKind::difference_quadratic: {
        Json c = Json::array();
        for (const auto& x : h.coefficients()) c.push_back(to_string(x));
        j["signs"] = h.signs();
        j["coefficients"] = c;
        break;
    }
    case HamiltonianKind::custom: throw ParameterError("custom Hamiltonians are not serializable");
    }
    return j;
}

inline HamiltonianModel hamiltonian_from_json(const Json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "quadratic") {
        std::vector<RationalVector> a;
        for (const auto& row : j.at("A")) a.push_back(json_rational_vector(row));
        return HamiltonianModel::quadratic(std::move(a));
    }
    if (kind == "even_power") return HamiltonianModel::even_power(j.at("dim").get<std::size_t>(), j.at("exponent").get<int>());
    if (kind == "linear") return HamiltonianModel::linear(json_rational_vector(j.at("omega")));
    if (kind == "difference_quadratic")
        return HamiltonianModel::difference_quadratic(j.at("signs").get<std::vector<int>>(),
                                                      json_rational_vector(j.at("coefficients")));
    throw ParameterError("unknown Hamiltonian kind '" + kind + "'");
}

// JSON lines {"k":[...],"re":...,"im":...} in lexicographic mode order.
template <std::size_t D>
std::string state_dump(const FourierState<D>& u) {
    std::ostringstream os;
    for (const auto& e : u.entries()) {
        os << "{\"k\":[";
        for (std::size_t i = 0; i < D; ++i) os << (i ? "," : "") << e.k[i];
        os << "],\"re\":" << fmt17(e.value.real()) << ",\"im\":" << fmt17(e.value.imag()) << "}\n";
    }
    return os.str();
}

template <std::size_t D>
FourierState<D> state_from_dump(const std::string& text, double h) {
    std::istringstream is(text);
    std::string line;
    std::vector<ModeCoefficient<D>> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto j = Json::parse(line);
        Mode<D> k;
        const auto& kk = j.at("k");
        if (kk.size() != D) throw ParameterError("state dump: wrong mode dimension");
        for (std::size_t i = 0; i < D; ++i) k[i] = kk[i].get<long long>();
        out.push_back({k, Complex(j.at("re").get<double>(), j.at("im").get<double>())});
    }
    return FourierState<D>(h, std::move(out));
}

// Columns m_1..m_d,re,im in lexicographic order of m.
template <std::size_t D>
std::string density_csv(const DensityReport<D>& rep) {
    std::vector<std::size_t> order(rep.modes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return rep.modes[a] < rep.modes[b]; });
    std::ostringstream os;
    for (std::size_t i = 0; i < D; ++i) os << "m_" << i + 1 << ",";
    os << "re,im\n";
    for (std::size_t i : order) {
        for (std::size_t a = 0; a < D; ++a) os << rep.modes[i][a] << ",";
        os << fmt17(rep.coefficients[i].real()) << "," << fmt17(rep.coefficients[i].imag()) << "\n";
    }
    return os.str();
}

// Columns x_1..x_d,value over the synthesized grid.
template <std::size_t D>
std::string grid_csv(const DensityReport<D>& rep) {
    if (!rep.grid) throw ParameterError("density report has no grid");
    const auto& g = *rep.grid;
    const std::size_t n = std::size_t(1) << g.exponent;
    std::ostringstream os;
    for (std::size_t i = 0; i < D; ++i) os << "x_" << i + 1 << ",";
    os << "value\n";
    for (std::size_t idx = 0; idx < g.values.size(); ++idx) {
        std::size_t rem = idx;
        std::array<std::size_t, D> c;
        for (std::size_t a = D; a-- > 0;) {
            c[a] = rem % n;
            rem /= n;
        }
        for (std::size_t a = 0; a < D; ++a) os << fmt17(two_pi * static_cast<double>(c[a]) / static_cast<double>(n)) << ",";
        os << fmt17(g.values[idx]) << "\n";
    }
    return os.str();
}

template <std::size_t D>
Json uh_family_to_json(const UhFamily<D>& fam) {
    Json out = Json::array();
    for (const auto& m : fam.members) {
        Json modes = Json::array();
        for (const auto& c : m.modes)
            modes.push_back(Json{{"eta", std::vector<long long>(c.k.begin(), c.k.end())},
                                 {"re", c.value.real()},
                                 {"im", c.value.imag()}});
        out.push_back(Json{{"sigma", m.sigma}, {"modes", modes}});
    }
    return out;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IOError("cannot open '" + path + "' for writing");
    f << content;
    if (!f) throw IOError("write failed for '" + path + "'");
}

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IOError("cannot open '" + path + "'");
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

} // namespace scl
