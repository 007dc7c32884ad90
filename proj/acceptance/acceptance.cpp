// Acceptance suite: one pass/fail line per criterion, tolerances pinned here.
// Usage: scl_acceptance [criterion ...]; no arguments runs every criterion.

#include <chrono>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>

#include "scl/experiments.hpp"

namespace {

using namespace scl;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        detail += (detail.empty() ? "" : "; ") + std::string(ok ? "" : "FAILED ") + what;
    }
};

constexpr double exact_tolerance = 1e-12;

double rel(Complex a, Complex b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// Checks the named assertions of a scenario report.
Outcome from_report(const SweepReport& rep, const std::vector<std::string>& names) {
    Outcome o;
    for (const auto& n : names) {
        auto it = std::find_if(rep.assertions.begin(), rep.assertions.end(), [&](const Assertion& a) { return a.name == n; });
        if (it == rep.assertions.end()) {
            o.require(false, n + " missing");
            continue;
        }
        o.require(it->pass, n + " (" + it->detail + ")");
    }
    return o;
}

SweepReport run_default(const std::string& name) { return run_scenario(make_spec(name)); }

Outcome exact_identities() {
    Outcome o;
    const auto ham = HamiltonianModel::identity_quadratic(2);
    const Rational hq(1, 256);
    const double h = to_double(hq);
    const auto u = scenarios::two_microlocal_state(8);
    const auto lambda = resonance_module(ham.exact_gradient({Rational(1), Rational(0)}));
    const auto frame = make_frame(ham, lambda, {Rational(1), Rational(0)}, 0.5);
    const auto a = scenarios::x2_symbol(1.0);
    const auto lifted = TwoMicrolocalSymbol<2>::lift(a, lambda);

    // Split partition, pointwise and at the pairing level.
    auto parts = split_symbol(lifted, CutoffProfile{}, 4.0, 0.5, frame, ham);
    double pw = 0.0;
    for (double x1 : {0.9, 1.0, 1.1})
        for (double x2 : {-0.15, 0.0, 0.2})
            for (double e : {0.0, 2.0, 3.9, 4.5, 7.0, 50.0}) {
                const double xi[2] = {x1, x2}, eta[2] = {0.0, e};
                for (std::size_t t = 0; t < lifted.terms.size(); ++t) {
                    const Complex sum = parts.far.terms[t].coefficient(xi, eta) +
                                        parts.spreading.terms[t].coefficient(xi, eta) +
                                        parts.concentrating.terms[t].coefficient(xi, eta);
                    pw = std::max(pw, rel(sum, lifted.terms[t].coefficient(xi, eta)));
                }
            }
    o.require(pw <= exact_tolerance, "split partition pointwise " + fmt17(pw));
    SplitParameters sp;
    const Complex full = two_scale_pair(u, lifted, frame, ham, 1.0 / h, 1.0);
    const Complex sum = two_scale_pair(u, lifted, frame, ham, 1.0 / h, 1.0, PairPart::far, sp) +
                        two_scale_pair(u, lifted, frame, ham, 1.0 / h, 1.0, PairPart::spreading, sp) +
                        two_scale_pair(u, lifted, frame, ham, 1.0 / h, 1.0, PairPart::concentrating, sp);
    o.require(rel(sum, full) <= exact_tolerance, "split partition pairing " + fmt17(rel(sum, full)));

    // Plancherel for U_h: family mass equals the mass of b(hD)u.
    const auto fam = uh_transform(u, frame, ham);
    double cut = 0.0;
    for (const auto& e : u.entries()) {
        auto xi = u.momentum(e.k);
        cut += std::norm(frame.cutoff(xi.data()) * e.value);
    }
    const double pl = std::abs(fam.total_mass() - cut) / cut;
    o.require(pl <= exact_tolerance, "U_h Plancherel " + fmt17(pl));

    // Mass identity c_0 = (2pi)^-d |u|^2.
    const auto packet = wave_packet(scenarios::packet_spec(default_config().at("common")), h, hq);
    const auto c0 = density_modes(packet, std::vector<Mode<2>>{{0, 0}}).coefficients[0];
    const double mass = std::abs(c0 * torus_volume<2>() - packet.norm2()) / packet.norm2();
    o.require(mass <= exact_tolerance, "mass identity " + fmt17(mass));

    // Unitarity and group law of evolve.
    const auto v1 = evolve(packet, ham, 0.37), v2 = evolve(v1, ham, 1.21), v12 = evolve(packet, ham, 1.58);
    const double unit = std::abs(v12.norm2() - packet.norm2()) / packet.norm2();
    double group = 0.0;
    for (std::size_t i = 0; i < v2.size(); ++i) group = std::max(group, std::abs(v2.entries()[i].value - v12.entries()[i].value));
    o.require(unit <= exact_tolerance, "unitarity " + fmt17(unit));
    o.require(group <= 1e-10, "group law " + fmt17(group));

    // Weyl pairing of an x-symbol against the density modes.
    const auto xs = position_symbol<2>({{{0, 0}, Complex(1.0)}, {{1, 0}, Complex(0.3, 0.1)}, {{0, -2}, Complex(-0.2, 0.4)}});
    const auto dens = density_modes(packet, xs.modes());
    Complex via_density = 0.0;
    for (std::size_t i = 0; i < xs.terms.size(); ++i)
        via_density += xs.terms[i].coefficient(nullptr) * std::conj(dens.coefficients[i]);
    via_density *= std::pow(two_pi, 1.0);  // (2pi)^{d/2}
    const double proj = rel(weyl_pair(packet, xs), via_density);
    o.require(proj <= exact_tolerance, "pairing vs density " + fmt17(proj));

    // Eigenspace reconstruction.
    const auto hs = scenarios::hierarchy_state(8);
    const auto dec = eigenspace_decompose(hs, ham);
    double recon = 0.0;
    for (const auto& e : hs.entries()) {
        Complex s = 0.0;
        for (const auto& g : dec.groups)
            if (const Complex* c = g.projected.find(e.k)) s += std::sqrt(g.weight * hs.norm2()) * *c;
        recon = std::max(recon, std::abs(s - e.value));
    }
    o.require(recon <= exact_tolerance, "eigenspace reconstruction " + fmt17(recon));

    // Complement unimodularity and saturation idempotence on fixed modules.
    bool unimodular = true, idempotent = true;
    const std::vector<std::vector<LatticeVector>> gens = {
        {lattice_vector({2, 4})}, {lattice_vector({1, -3, 0})}, {lattice_vector({2, 0, 4}), lattice_vector({0, 3, 3})},
        {lattice_vector({1, 2, 3, 4}), lattice_vector({0, 2, 4, 6})}};
    for (const auto& g : gens) {
        const auto m = saturate(g);
        const auto c = complement_lattice(m);
        const auto det = determinant(stack(m.basis(), c.basis()));
        unimodular = unimodular && (det == 1 || det == -1);
        std::vector<LatticeVector> again;
        for (const auto& row : m.basis()) again.push_back(LatticeVector{row, m.space()});
        idempotent = idempotent && saturate(again, m.dim(), m.space()) == m;
    }
    o.require(unimodular, "complement unimodular");
    o.require(idempotent, "saturation idempotent");
    return o;
}

// Exact rank by rational elimination, independent of the normal-form code.
std::size_t rational_rank(std::vector<std::vector<Rational>> m) {
    std::size_t rank = 0;
    const std::size_t cols = m.empty() ? 0 : m[0].size();
    for (std::size_t c = 0; c < cols && rank < m.size(); ++c) {
        std::size_t p = rank;
        while (p < m.size() && m[p][c] == 0) ++p;
        if (p == m.size()) continue;
        std::swap(m[p], m[rank]);
        for (std::size_t r = 0; r < m.size(); ++r) {
            if (r == rank || m[r][c] == 0) continue;
            const Rational f = m[r][c] / m[rank][c];
            for (std::size_t k = c; k < cols; ++k) m[r][k] -= f * m[rank][k];
        }
        ++rank;
    }
    return rank;
}

Outcome lattice_oracle() {
    Outcome o;
    std::mt19937_64 rng(20260418);
    std::uniform_int_distribution<int> entry(-5, 5), dims(1, 4);
    int sat_bad = 0, orth_bad = 0, class_bad = 0, sets = 200;
    for (int s = 0; s < sets; ++s) {
        const std::size_t d = static_cast<std::size_t>(dims(rng));
        std::uniform_int_distribution<int> count(0, static_cast<int>(d) + 1);
        const int n = count(rng);
        std::vector<LatticeVector> gens;
        std::vector<std::vector<Rational>> rows;
        for (int g = 0; g < n; ++g) {
            std::vector<long long> v(d);
            std::vector<Rational> r(d);
            for (std::size_t i = 0; i < d; ++i) r[i] = v[i] = entry(rng);
            LatticeVector lv;
            lv.space = Space::dual;
            for (long long x : v) lv.entries.emplace_back(x);
            gens.push_back(lv);
            rows.push_back(r);
        }
        const auto sat = saturate(gens, d, Space::dual);
        const auto orth = orthogonal_lattice(sat);
        const std::size_t base_rank = rational_rank(rows);
        if (sat.rank() != base_rank) ++sat_bad;
        // Random rational momentum for a diagonal quadratic H, exact gradient 2 A xi.
        std::vector<RationalVector> amat(d, RationalVector(d, Rational(0)));
        RationalVector xi(d);
        std::uniform_int_distribution<int> num(-4, 4), den(1, 4);
        for (std::size_t i = 0; i < d; ++i) {
            amat[i][i] = Rational(den(rng));
            xi[i] = Rational(num(rng), den(rng));
        }
        const auto ham = HamiltonianModel::quadratic(amat);
        const auto cls = classify_momentum(ham, xi);
        RationalVector grad(d);
        for (std::size_t i = 0; i < d; ++i) grad[i] = 2 * amat[i][i] * xi[i];
        if (cls.order != d - cls.lambda.rank()) ++class_bad;

        const long long box = 3;
        std::vector<long long> p(d, -box);
        bool done = false;
        while (!done) {
            std::vector<Integer> pi(p.begin(), p.end());
            // saturate: in the rational span of G iff in the module
            auto ext = rows;
            std::vector<Rational> pr(p.begin(), p.end());
            ext.push_back(pr);
            const bool in_span = rational_rank(ext) == base_rank;
            if (in_span != sat.contains(pi)) ++sat_bad;
            // orthogonal lattice: annihilates every generator iff in the annihilator
            bool ann = true;
            for (const auto& r : rows) {
                Rational dot = 0;
                for (std::size_t i = 0; i < d; ++i) dot += r[i] * pr[i];
                ann = ann && dot == 0;
            }
            if (ann != orth.contains(pi)) ++orth_bad;
            // classification: k . dH(xi) = 0 exactly iff k lies in Lambda
            Rational g = 0;
            for (std::size_t i = 0; i < d; ++i) g += grad[i] * pr[i];
            if ((g == 0) != cls.lambda.contains(pi)) ++class_bad;
            std::size_t i = 0;
            while (i < d && ++p[i] > box) p[i++] = -box;
            done = i == d;
        }
    }
    o.require(sat_bad == 0, "saturate mismatches " + std::to_string(sat_bad));
    o.require(orth_bad == 0, "orthogonal_lattice mismatches " + std::to_string(orth_bad));
    o.require(class_bad == 0, "classify_momentum mismatches " + std::to_string(class_bad));
    o.detail += "; " + std::to_string(sets) + " generator sets, 7^d boxes";
    return o;
}

Outcome orbit() {
    return from_report(run_default("orbit_measure"), {"c01_error_final", "c01_error_decreasing", "c10_final", "c10_decreasing"});
}
Outcome dirac() { return from_report(run_default("dirac_drift"), {"drift_slope_final"}); }
Outcome threshold() { return from_report(run_default("threshold_sweep"), {"subcritical_growth", "critical_bounded"}); }
Outcome degenerate() { return from_report(run_default("degenerate_quasimode"), {"residual_slope"}); }
Outcome wunsch() { return from_report(run_default("wunsch_subprincipal"), {"residual_below_h4", "horizon_exceeds_inverse_h"}); }
Outcome diagonal() { return from_report(run_default("diagonal_concentration"), {"exact_eigenfunction", "band_mass"}); }
Outcome hierarchy() { return from_report(run_default("hierarchy_average"), {"cross_term_bound", "final_offdiagonal"}); }
Outcome two_microlocal() {
    return from_report(run_default("two_microlocal_consistency"), {"defect_decreasing", "defect_final", "t0_defect_order_h"});
}
Outcome egorov() { return from_report(run_default("orbit_measure"), {"egorov_decreasing", "egorov_slope"}); }

struct Criterion {
    std::string name;
    double budget_seconds;
    std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> list = {
        {"exact_identities", 10, exact_identities},
        {"lattice_oracle", 30, lattice_oracle},
        {"orbit_measure", 120, orbit},
        {"dirac_drift", 120, dirac},
        {"threshold_dichotomy", 360, threshold},
        {"degenerate_quasimode", 30, degenerate},
        {"wunsch_example", 60, wunsch},
        {"diagonal_concentration", 30, diagonal},
        {"hierarchy_averaging", 30, hierarchy},
        {"two_microlocal_consistency", 240, two_microlocal},
        {"egorov_trend", 60, egorov},
    };
    return list;
}

} // namespace

int main(int argc, char** argv) {
    std::vector<std::string> wanted(argv + 1, argv + argc);
    bool all_pass = true;
    for (const auto& c : criteria()) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.name) == wanted.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("error: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > c.budget_seconds) o.require(false, "runtime budget " + fmt17(c.budget_seconds) + " s");
        std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << " [" << std::fixed << std::setprecision(2) << secs
                  << " s]: " << o.detail << std::endl;
        std::cout.unsetf(std::ios::fixed);
        all_pass = all_pass && o.pass;
    }
    for (const auto& w : wanted)
        if (std::none_of(criteria().begin(), criteria().end(), [&](const Criterion& c) { return c.name == w; })) {
            std::cerr << "unknown criterion '" << w << "'\n";
            return 1;
        }
    return all_pass ? 0 : 1;
}
