#pragma once

// Scenario registry, dyadic sweeps, fits and report emission.

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "scl/errors.hpp"
#include "scl/hamiltonian.hpp"
#include "scl/io.hpp"
#include "scl/lattice.hpp"
#include "scl/microlocal.hpp"
#include "scl/propagator.hpp"
#include "scl/state.hpp"
#include "scl/wigner.hpp"

namespace scl {

inline constexpr const char* library_version = "1.0.0";

// Versioned defaults and pass/fail thresholds; mirrored by config/defaults.json.
inline const char* default_config_text() {
    return R"json({
  "version": 1,
  "common": {
    "x0": [3.141592653589793, 1.0],
    "xi0": ["1", "0"],
    "eps_exponent": 0.5,
    "window": [0.0, 1.0],
    "window_kind": "indicator",
    "profile_radius": 1.0
  },
  "orbit_measure": {
    "jmin": 6, "jmax": 11, "tau_exponent": 0.5,
    "egorov_s": 1.0, "egorov_t": 1.0,
    "thresholds": {"c01_error_max": 0.1, "c10_max": 0.02, "egorov_slope_min": 1.0}
  },
  "dirac_drift": {
    "jmin": 6, "jmax": 11, "tau_exponent": 0.5, "eta0": [0.0, 0.5],
    "times": [0.0, 0.25, 0.5, 1.0],
    "thresholds": {"slope_relative_error": 0.1}
  },
  "threshold_sweep": {
    "jmin": 6, "jmax": 11, "from_j": 8,
    "thresholds": {"growth_min": 1.2, "critical_variation_max": 0.2}
  },
  "degenerate_quasimode": {
    "jmin": 6, "jmax": 12, "exponent": 4,
    "thresholds": {"slope_min": 3.7, "slope_max": 4.3}
  },
  "wunsch_subprincipal": {
    "jmin": 6, "jmax": 10, "eps_exponent": 0.5, "grid": 4096, "target_error": 0.1, "from_j": 8,
    "thresholds": {"residual_power": 4.0}
  },
  "hierarchy_average": {
    "jmin": 6, "jmax": 10, "ball_radius": 2.0, "tau_multiple": 100.0,
    "thresholds": {"final_max": 0.05}
  },
  "resonant_transport": {
    "jmin": 6, "jmax": 10, "omega": ["1", "1"], "tau_exponent": 1.0,
    "thresholds": {"identity_tolerance": 1e-12}
  },
  "diagonal_concentration": {
    "jmin": 6, "jmax": 10, "check_j": 8, "sigma_fraction": 0.125, "band_factor": 8.0,
    "thresholds": {"residual_max": 1e-13, "band_mass_min": 0.95}
  },
  "two_microlocal_consistency": {
    "jmin": 6, "jmax": 11, "frame_radius": 0.5, "R": 4.0, "t": 1.0, "R_ladder": [2.0, 4.0, 8.0, 16.0],
    "thresholds": {"final_fraction": 0.05, "t0_slope_min": 0.8}
  }
})json";
}

inline Json default_config() { return Json::parse(default_config_text()); }

inline const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names = {
        "orbit_measure",        "dirac_drift",          "threshold_sweep",
        "degenerate_quasimode", "wunsch_subprincipal",  "hierarchy_average",
        "resonant_transport",   "diagonal_concentration", "two_microlocal_consistency"};
    return names;
}

struct ScenarioSpec {
    std::string name;
    int jmin = 6;
    int jmax = 11;
    Json config;  // full merged configuration (common + scenario block)
    std::string out_dir;

    Json scenario_block() const { return config.at(name); }
    Json common() const { return config.at("common"); }

    Json to_json() const { return Json{{"name", name}, {"jmin", jmin}, {"jmax", jmax}, {"config", config}}; }

    static ScenarioSpec from_json(const Json& j) {
        ScenarioSpec s;
        s.name = j.at("name").get<std::string>();
        s.jmin = j.at("jmin").get<int>();
        s.jmax = j.at("jmax").get<int>();
        s.config = j.at("config");
        return s;
    }

    bool operator==(const ScenarioSpec& o) const {
        return name == o.name && jmin == o.jmin && jmax == o.jmax && config == o.config;
    }
};

// Defaults merged with an optional override document (RFC 7386 merge patch).
inline ScenarioSpec make_spec(const std::string& name, const Json& overrides = Json::object(),
                              std::optional<int> jmin = std::nullopt, std::optional<int> jmax = std::nullopt) {
    if (std::find(scenario_names().begin(), scenario_names().end(), name) == scenario_names().end())
        throw ParameterError("unknown scenario '" + name + "'");
    ScenarioSpec s;
    s.name = name;
    s.config = default_config();
    if (!overrides.is_null()) s.config.merge_patch(overrides);
    const auto& block = s.config.at(name);
    s.jmin = jmin.value_or(block.at("jmin").get<int>());
    s.jmax = jmax.value_or(block.at("jmax").get<int>());
    if (s.jmin > s.jmax || s.jmin < 1 || s.jmax > 30) throw ParameterError("invalid h ladder");
    return s;
}

struct SweepRow {
    int j = 0;
    double h = 0.0;
    std::vector<std::pair<std::string, double>> values;

    void set(const std::string& key, double v) {
        for (auto& [k, x] : values)
            if (k == key) {
                x = v;
                return;
            }
        values.emplace_back(key, v);
    }
    double get(const std::string& key) const {
        for (const auto& [k, x] : values)
            if (k == key) return x;
        throw ParameterError("row has no observable '" + key + "'");
    }
    bool has(const std::string& key) const {
        for (const auto& kv : values)
            if (kv.first == key) return true;
        return false;
    }
};

struct Assertion {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct FitResult {
    std::string observable;
    std::string kind;
    double value = 0.0;       // slope or extrapolated limit
    double intercept = 0.0;
    double residual_variance = 0.0;
    std::size_t points = 0;
};

struct SweepReport {
    ScenarioSpec spec;
    std::vector<SweepRow> rows;  // decreasing h
    std::vector<Assertion> assertions;
    std::vector<FitResult> fits;

    bool passed() const {
        return std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.pass; });
    }
    std::vector<double> column(const std::string& key) const {
        std::vector<double> v;
        for (const auto& r : rows) v.push_back(r.get(key));
        return v;
    }
    std::vector<double> hs() const {
        std::vector<double> v;
        for (const auto& r : rows) v.push_back(r.h);
        return v;
    }
    const SweepRow& row(int j) const {
        for (const auto& r : rows)
            if (r.j == j) return r;
        throw ParameterError("report has no row for j=" + std::to_string(j));
    }
};

// Least-squares line through (log x, log y).
inline FitResult fit_loglog(const std::vector<double>& x, const std::vector<double>& y, const std::string& obs = "") {
    if (x.size() != y.size() || x.size() < 3) throw FitError("log-log fit needs at least 3 points");
    const std::size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0) || !(y[i] > 0)) throw FitError("log-log fit needs positive data");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    const double den = n * sxx - sx * sx;
    if (den == 0) throw FitError("degenerate abscissae");
    FitResult f;
    f.observable = obs;
    f.kind = "loglog_slope";
    f.value = (n * sxy - sx * sy) / den;
    f.intercept = (sy - f.value * sx) / n;
    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) ss += std::pow(ly[i] - f.intercept - f.value * lx[i], 2);
    f.residual_variance = ss / n;
    f.points = n;
    return f;
}

// Fits y = L + c h^order by least squares and reports L.
inline FitResult fit_limit(const std::vector<double>& h, const std::vector<double>& y, double order = 1.0,
                           const std::string& obs = "") {
    if (h.size() != y.size() || h.size() < 3) throw FitError("limit extrapolation needs at least 3 points");
    const std::size_t n = h.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double x = std::pow(h[i], order);
        sx += x;
        sy += y[i];
        sxx += x * x;
        sxy += x * y[i];
    }
    const double den = n * sxx - sx * sx;
    if (den == 0) throw FitError("degenerate abscissae");
    FitResult f;
    f.observable = obs;
    f.kind = "limit_extrapolation";
    const double c = (n * sxy - sx * sy) / den;
    f.value = (sy - c * sx) / n;
    f.intercept = c;
    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) ss += std::pow(y[i] - f.value - c * std::pow(h[i], order), 2);
    f.residual_variance = ss / n;
    f.points = n;
    return f;
}

inline bool strictly_decreasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1])) return false;
    return true;
}

namespace scenarios {

inline Point<2> json_point(const Json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

inline Point<2> rational_point(const Json& j) {
    auto r = json_rational_vector(j);
    return {to_double(r[0]), to_double(r[1])};
}

inline TimeWindow window_of(const Json& common) {
    auto w = common.at("window");
    auto kind = common.at("window_kind").get<std::string>() == "hat" ? TimeWindow::Kind::hat : TimeWindow::Kind::indicator;
    return TimeWindow(w.at(0).get<double>(), w.at(1).get<double>(), kind);
}

inline WavePacketSpec<2> packet_spec(const Json& common) {
    WavePacketSpec<2> s;
    s.x0 = json_point(common.at("x0"));
    s.xi0 = rational_point(common.at("xi0"));
    s.gamma_eps = common.at("eps_exponent").get<double>();
    s.profile_radius = common.at("profile_radius").get<double>();
    return s;
}

inline Rational dyadic(int j) { return Rational(Integer(1), Integer(1) << j); }

inline std::string fmt(double v) { return fmt17(v); }

inline void add(SweepReport& rep, const std::string& name, bool pass, const std::string& detail) {
    rep.assertions.push_back({name, pass, detail});
}

// Mass identity for a density report: c_0 = (2pi)^{-d} norm^2.
inline double mass_error(const DensityReport<2>& rep, double norm2) {
    const double target = norm2 / torus_volume<2>();
    for (std::size_t i = 0; i < rep.modes.size(); ++i)
        if (rep.modes[i] == Mode<2>{0, 0}) return std::abs(rep.coefficients[i] - target) / target;
    return 0.0;
}

// Real symbol (1 + cos x2) with a linear momentum weight, modes (0,0), (0,+-1).
inline Symbol<2> x2_symbol(double slope) {
    Symbol<2> a;
    const double c = two_pi;  // (2pi)^{d/2} for d = 2
    a.terms.push_back({{0, 0}, [=](const double* xi) { return Complex(c * (1.0 + slope * xi[1])); }});
    a.terms.push_back({{0, 1}, [=](const double* xi) { return Complex(0.5 * c * (1.0 + slope * xi[1])); }});
    a.terms.push_back({{0, -1}, [=](const double* xi) { return Complex(0.5 * c * (1.0 + slope * xi[1])); }});
    return a;
}

// Seven-by-five block of modes around xi0/h with fixed asymmetric weights.
inline FourierState<2> two_microlocal_state(int j) {
    const long long n = 1LL << j;
    std::vector<ModeCoefficient<2>> modes;
    for (long long p = -2; p <= 2; ++p)
        for (long long q = -3; q <= 3; ++q) {
            const double pp = static_cast<double>(p), qq = static_cast<double>(q);
            modes.push_back({{n + p, q}, std::polar(std::exp(-(pp * pp + (qq - 0.7) * (qq - 0.7)) / 4.0), 0.4 * qq - 0.3 * pp)});
        }
    return spectral_superposition<2>(std::ldexp(1.0, -j), std::move(modes), dyadic(j));
}

inline SweepReport orbit_measure(const ScenarioSpec& spec) {
    SweepReport rep{spec, {}, {}, {}};
    const auto cfg = spec.scenario_block();
    const auto common = spec.common();
    const auto th = cfg.at("thresholds");
    const auto ps = packet_spec(common);
    const auto window = window_of(common);
    const auto ham = HamiltonianModel::identity_quadratic(2);
    const double te = cfg.at("tau_exponent").get<double>();
    const Complex ref = std::polar(1.0 / torus_volume<2>(), -ps.x0[1]);
    const auto sym = x2_symbol(0.0);
    for (int j = spec.jmin; j <= spec.jmax; ++j) {
        const double h = std::ldexp(1.0, -j);
        const auto u = wave_packet(ps, h, dyadic(j));
        const double tau = std::pow(h, -te);
        auto d = time_averaged_density(u, ham, tau, window, std::vector<Mode<2>>{{0, 0}, {0, 1}, {1, 0}});
        SweepRow r{j, h, {}};
        const Complex c01 = d.coefficient({0, 1}), c10 = d.coefficient({1, 0});
        r.set("support", static_cast<double>(u.size()));
        r.set("c01_re", c01.real());
        r.set("c01_im", c01.imag());
        r.set("c01_error", std::abs(c01 - ref) * torus_volume<2>());
        r.set("c10_abs", std::abs(c10) * torus_volume<2>());
        r.set("mass_error", mass_error(d, u.norm2()));
        const double es = cfg.at("egorov_s").get<double>(), et = cfg.at("egorov_t").get<double>();
        // The packet disperses across x2 by time 1/h, so its defect only tracks the profile tail.
        r.set("egorov_defect_packet", egorov_defect(u, ham, sym, es, et, 1.0 / h));
        r.set("egorov_defect", egorov_defect(two_microlocal_state(j), ham, sym, es, et, 1.0 / h));
        rep.rows.push_back(r);
    }
    const auto e01 = rep.column("c01_error"), a10 = rep.column("c10_abs");
    add(rep, "c01_error_final", e01.back() <= th.at("c01_error_max").get<double>(), "final " + fmt(e01.back()));
    add(rep, "c01_error_decreasing", strictly_decreasing(e01), "error sequence in (2pi)^-2 units");
    add(rep, "c10_final", a10.back() <= th.at("c10_max").get<double>(), "final " + fmt(a10.back()));
    add(rep, "c10_decreasing", strictly_decreasing(a10), "|c10| sequence in (2pi)^-2 units");
    double worst = 0;
    for (double m : rep.column("mass_error")) worst = std::max(worst, m);
    add(rep, "mass_identity", worst <= 1e-12, "max relative error " + fmt(worst));
    if (rep.rows.size() >= 3) {
        auto f = fit_loglog(rep.hs(), rep.column("egorov_defect"), "egorov_defect");
        rep.fits.push_back(f);
        add(rep, "egorov_slope", f.value >= th.at("egorov_slope_min").get<double>(), "slope " + fmt(f.value));
        add(rep, "egorov_decreasing", strictly_decreasing(rep.column("egorov_defect")), "defect along the ladder");
    }
    return rep;
}

// Unwrapped phases, least-squares slope against t.
inline double phase_slope(const std::vector<double>& t, std::vector<double> phase) {
    for (std::size_t i = 1; i < phase.size(); ++i) {
        while (phase[i] - phase[i - 1] > std::numbers::pi) phase[i] -= two_pi;
        while (phase[i] - phase[i - 1] < -std::numbers::pi) phase[i] += two_pi;
    }
    const double n = static_cast<double>(t.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        sx += t[i];
        sy += phase[i];
        sxx += t[i] * t[i];
        sxy += t[i] * phase[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline SweepReport dirac_drift(const ScenarioSpec& spec) {
    SweepReport rep{spec, {}, {}, {}};
    const auto cfg = spec.scenario_block();
    const auto common = spec.common();
    auto ps = packet_spec(common);
    ps.eta0 = json_point(cfg.at("eta0"));
    ps.c_tau = 1.0;
    ps.gamma_tau = cfg.at("tau_exponent").get<double>();
    const auto ham = HamiltonianModel::identity_quadratic(2);
    const auto times = cfg.at("times").get<std::vector<double>>();
    // Expected slope -d^2H(xi0) eta0 . (0,1).
    const double expected = -2.0 * (*ps.eta0)[1];
    for (int j = spec.jmin; j <= spec.jmax; ++j) {
        const double h = std::ldexp(1.0, -j);
        const auto u = modulated_wave_packet(ps, h, dyadic(j));
        const double tau = ps.tau(h);
        SweepRow r{j, h, {}};
        std::vector<double> phases;
        for (std::size_t i = 0; i < times.size(); ++i) {
            auto v = evolve(u, ham, tau * times[i]);
            auto d = density_modes(v, std::vector<Mode<2>>{{0, 1}});
            phases.push_back(std::arg(d.coefficients[0]));
            r.set("phase_t" + std::to_string(i), phases.back());
        }
        const double slope = phase_slope(times, phases);
        r.set("slope", slope);
        r.set("slope_error", std::abs(slope - expected) / std::abs(expected));
        rep.rows.push_back(r);
    }
    const double err = rep.rows.back().get("slope_error");
    add(rep, "drift_slope_final", err <= cfg.at("thresholds").at("slope_relative_error").get<double>(),
        "slope " + fmt(rep.rows.back().get("slope")) + " vs " + fmt(expected));
    return rep;
}

// Grid L2 norm of the window-averaged density over the full autocorrelation set.
inline double averaged_density_l2(const FourierState<2>& u, const HamiltonianModel& ham, double tau,
                                  const TimeWindow& w, double* mass_err = nullptr) {
    auto modes = difference_set(u);
    auto d = time_averaged_density(u, ham, tau, w, modes);
    if (mass_err) *mass_err = mass_error(d, u.norm2());
    synthesize_grid(d);
    return d.grid->l2;
}

inline SweepReport threshold_sweep(const ScenarioSpec& spec) {
    SweepReport rep{spec, {}, {}, {}};
    const auto cfg = spec.scenario_block();
    const auto common = spec.common();
    const auto th = cfg.at("thresholds");
    const auto ps = packet_spec(common);
    const auto window = window_of(common);
    const auto ham = HamiltonianModel::identity_quadratic(2);
    for (int j = spec.jmin; j <= spec.jmax; ++j) {
        const double h = std::ldexp(1.0, -j);
        const auto u = wave_packet(ps, h, dyadic(j));
        SweepRow r{j, h, {}};
        double m1 = 0, m2 = 0;
        const double sub = averaged_density_l2(u, ham, std::pow(h, -0.5), window, &m1);
        const double crit = averaged_density_l2(u, ham, 1.0 / h, window, &m2);
        r.set("l2_subcritical", sub);
        r.set("l2_critical", crit);
        r.set("ratio", sub / crit);
        r.set("mass_error", std::max(m1, m2));
        rep.rows.push_back(r);
    }
    const int from = cfg.at("from_j").get<int>();
    const double gmin = th.at("growth_min").get<double>();
    bool grow = true;
    std::string detail;
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        const auto& r = rep.rows[i];
        if (r.j >= from) {
            lo = std::min(lo, r.get("l2_critical"));
            hi = std::max(hi, r.get("l2_critical"));
        }
        if (i == 0 || r.j <= from) continue;
        const double g = r.get("l2_subcritical") / rep.rows[i - 1].get("l2_subcritical");
        detail += (detail.empty() ? "" : ", ") + fmt(g);
        if (g < gmin) grow = false;
    }
    add(rep, "subcritical_growth", grow, "per-step factors " + detail);
    const double var = hi / lo - 1.0;
    add(rep, "critical_bounded", var <= th.at("critical_variation_max").get<double>(), "max/min - 1 = " + fmt(var));
    add(rep, "ratio_increasing", [&] {
        auto r = rep.column("ratio");
        for (std::size_t i = 1; i < r.size(); ++i)
            if (!(r[i] > r[i - 1])) return false;
        return true;
    }(), "sub/critical ratio along the ladder");
    double worst = 0;
    for (double m : rep.column("mass_error")) worst = std::max(worst, m);
    add(rep, "mass_identity", worst <= 1e-12, "max relative error " + fmt(worst));
    return rep;
}

inline SweepReport degenerate_quasimode(const ScenarioSpec& spec) {
    SweepReport rep{spec, {}, {}, {}};
    const auto cfg = spec.scenario_block();
    const auto common = spec.common();
    auto ps = packet_spec(common);
    ps.xi0 = {0.0, 0.0};
    const auto ham = HamiltonianModel::even_power(2, cfg.at("exponent").get<int>());
    for (int j = spec.jmin; j <= spec.jmax; ++j) {
        const double h = std::ldexp(1.0, -j);
        const auto u = wave_packet(ps, h, dyadic(j));
        SweepRow r{j, h, {}};
        r.set("h_over_eps", h / ps.epsilon(h));
        r.set("residual", quasimode_residual(u, ham, 0.0));
        rep.rows.push_back(r);
    }
    auto f = fit_loglog(rep.column("h_over_eps"), rep.column("residual"), "residual");
    rep.fits.push_back(f);
    const auto th = cfg.at("thresholds");
    add(rep, "residual_slope", f.value >= th.at("slope_min").get<double>() && f.value <= th.at("slope_max").get<double>(),
        "slope vs h/eps " + fmt(f.value));
    return rep;
}

inline SweepReport wunsch_subprincipal(const ScenarioSpec& spec) {
    SweepReport rep{spec, {}, {}, {}};
    const auto cfg = spec.scenario_block();
    const double ex = cfg.at("eps_exponent").get<double>();
    const double target = cfg.at("target_error").get<double>();
    const double power = cfg.at("thresholds").at("residual_power").get<double>();
    const int from = cfg.at("from_j").get<int>();
    bool res_ok = true, hor_ok = true;
    std::string res_detail, hor_detail;
    for (int j = spec.jmin; j <= spec.jmax; ++j) {
        const double h = std::ldexp(1.0, -j);
        const auto w = wunsch_quasimode(h, ex, cfg.at("grid").get<std::size_t>());
        const auto res = wunsch_residual(w, h);
        SweepRow r{j, h, {}};
        r.set("residual", res.residual);
        r.set("gate", std::pow(h, power));
        r.set("truncation_estimate", res.truncation_estimate);
        r.set("second_moment", w.meta.second_moment);
        r.set("second_moment_reference", 0.5 * std::pow(h, ex));
        const double horizon = stability_horizon(res.residual, h, target);
        r.set("horizon", horizon);
        r.set("horizon_times_h", horizon * h);
        rep.rows.push_back(r);
        if (res.residual > std::pow(h, power)) {
            res_ok = false;
            res_detail += " j=" + std::to_string(j) + ":" + fmt(res.residual);
        }
        if (j >= from && !(horizon > 1.0 / h)) {
            hor_ok = false;
            hor_detail += " j=" + std::to_string(j) + ":" + fmt(horizon * h);
        }
    }
    add(rep, "residual_below_h4", res_ok, res_ok ? "all rows" : "violations" + res_detail);
    add(rep, "horizon_exceeds_inverse_h", hor_ok, hor_ok ? "all rows" : "horizon*h" + hor_detail);
    return rep;
}

// Three |xi|^2 eigenspaces near |hk| = 1/2 with fixed complex weights.
inline FourierState<2> hierarchy_state(int j) {
    const long long n = 1LL << (j - 1);
    const Rational hq = dyadic(j);
    std::vector<ModeCoefficient<2>> modes;
    auto put = [&](long long a, long long b, double mag, double ph) { modes.push_back({{a, b}, std::polar(mag, ph)}); };
    // |k|^2 = n^2
    put(n, 0, 1.0, 0.1);
    put(0, n, 0.8, 0.7);
    put(-n, 0, 0.6, -0.4);
    // |k|^2 = n^2 + 1
    put(n, 1, 0.9, 1.3);
    put(1, n, 0.7, -0.9);
    put(n, -1, 0.5, 2.1);
    // |k|^2 = (n+1)^2
    put(n + 1, 0, 0.75, -1.7);
    put(0, n + 1, 0.65, 0.3);
    return spectral_superposition<2>(to_double(hq), std::move(modes), hq);
}

inline SweepReport hierarchy_average(const ScenarioSpec& spec) {
    SweepReport rep{spec, {}, {}, {}};
    const auto cfg = spec.scenario_block();
    const auto common = spec.common();
    const auto window = window_of(common);
    const auto ham = HamiltonianModel::identity_quadratic(2);
    const double radius = cfg.at("ball_radius").get<double>();
    bool hard = true;
    for (int j = spec.jmin; j <= spec.jmax; ++j) {
        const Rational hq = dyadic(j);
        const double h = to_double(hq);
        const auto u = hierarchy_state(j);
        const auto sp = spacing_scale<2>(ham, hq, MomentumRegion<2>::ball({0.0, 0.0}, radius));
        if (!sp.tau) throw ParameterError("hierarchy: spacing scale is infinite");
        const double tau = cfg.at("tau_multiple").get<double>() * *sp.tau;
        const auto dec = eigenspace_decompose(u, ham);
        // group index of each mode
        std::map<Mode<2>, std::size_t> group;
        std::vector<double> energy(dec.groups.size());
        for (std::size_t g = 0; g < dec.groups.size(); ++g) {
            energy[g] = dec.groups[g].energy;
            for (const auto& e : dec.groups[g].projected.entries()) group[e.k] = g;
        }
        const auto modes = difference_set(u);
        const auto avg = time_averaged_density(u, ham, tau, window, modes);
        double worst = 0, worst_bound = 0, weight_sum = 0;
        for (const auto& g : dec.groups) weight_sum += g.weight;
        for (std::size_t i = 0; i < modes.size(); ++i) {
            Complex diag = 0.0;
            double bound = 0.0;
            for (const auto& e : u.entries()) {
                const Complex* q = u.find(e.k + modes[i]);
                if (!q) continue;
                const auto ga = group[e.k], gb = group[e.k + modes[i]];
                const Complex term = *q * std::conj(e.value) / torus_volume<2>();
                if (ga == gb) {
                    diag += term;
                } else {
                    const double omega = tau * (energy[gb] - energy[ga]) / h;
                    bound += 2.0 * std::abs(term) / (std::abs(omega) * window.length());
                }
            }
            const double diff = std::abs(avg.coefficients[i] - diag);
            if (diff > bound * (1.0 + 1e-12) + 1e-300) hard = false;
            worst = std::max(worst, diff);
            worst_bound = std::max(worst_bound, bound);
        }
        SweepRow r{j, h, {}};
        r.set("tau_H", *sp.tau);
        r.set("tau", tau);
        r.set("groups", static_cast<double>(dec.groups.size()));
        r.set("weight_sum", weight_sum);
        r.set("max_offdiagonal", worst * torus_volume<2>());
        r.set("max_bound", worst_bound * torus_volume<2>());
        rep.rows.push_back(r);
    }
    add(rep, "cross_term_bound", hard, "|avg - diagonal| <= sum 2|u u|/(|omega| L) for every mode");
    const auto& last = rep.rows.back();
    add(rep, "final_offdiagonal", last.get("max_offdiagonal") <= cfg.at("thresholds").at("final_max").get<double>(),
        "final " + fmt(last.get("max_offdiagonal")) + " in (2pi)^-2 units");
    bool weights = true;
    for (double w : rep.column("weight_sum")) weights = weights && std::abs(w - 1.0) <= 1e-12;
    add(rep, "weights_sum_to_one", weights, "sum of eigenspace weights");
    return rep;
}

inline SweepReport resonant_transport(const ScenarioSpec& spec) {
    SweepReport rep{spec, {}, {}, {}};
    const auto cfg = spec.scenario_block();
    const auto common = spec.common();
    const auto ps = packet_spec(common);
    const auto window = window_of(common);
    const auto omega = json_rational_vector(cfg.at("omega"));
    const auto ham = HamiltonianModel::linear(omega);
    const PrimitiveModule lambda = resonance_module(omega);
    const double te = cfg.at("tau_exponent").get<double>();
    const double tol = cfg.at("thresholds").at("identity_tolerance").get<double>();
    bool identity = true;
    // x-symbol with modes (1,-1) in Lambda and (1,0), (0,1) outside.
    const auto a = position_symbol<2>({{{0, 0}, Complex(1.0)},
                                       {{1, -1}, Complex(0.5, 0.2)},
                                       {{-1, 1}, Complex(0.5, -0.2)},
                                       {{1, 0}, Complex(0.3)},
                                       {{-1, 0}, Complex(0.3)},
                                       {{0, 1}, Complex(0.0, 0.4)},
                                       {{0, -1}, Complex(0.0, -0.4)}});
    const auto a_avg = averaged_symbol(a, lambda);
    for (int j = spec.jmin; j <= spec.jmax; ++j) {
        const double h = std::ldexp(1.0, -j);
        const auto u = wave_packet(ps, h, dyadic(j));
        const double tau = std::pow(h, -te);
        const std::vector<Mode<2>> modes = {{1, -1}, {1, 0}, {0, 1}};
        const auto inst = density_modes(u, modes);
        const auto avg = time_averaged_density(u, ham, tau, window, modes);
        double off = 0, worst_identity = 0;
        for (std::size_t i = 0; i < modes.size(); ++i) {
            double w = 0;
            for (std::size_t c = 0; c < 2; ++c) w += static_cast<double>(modes[i][c]) * to_double(omega[c]);
            const Complex expect = inst.coefficients[i] * window.phi(tau * w);
            worst_identity = std::max(worst_identity, std::abs(avg.coefficients[i] - expect));
            if (!lambda.contains_small(modes[i])) off = std::max(off, std::abs(avg.coefficients[i]) * torus_volume<2>());
        }
        if (worst_identity > tol) identity = false;
        // Averaged pairing with a against the pairing of the initial density with <a>_Lambda.
        Complex avg_pair = 0.0, proj_pair = 0.0;
        const auto all = a.modes();
        const auto avg_all = time_averaged_density(u, ham, tau, window, all);
        const auto inst_all = density_modes(u, all);
        for (std::size_t i = 0; i < all.size(); ++i) {
            const Complex coef = a.terms[i].coefficient(nullptr);
            avg_pair += coef * std::conj(avg_all.coefficients[i]);
            if (lambda.contains_small(all[i])) proj_pair += coef * std::conj(inst_all.coefficients[i]);
        }
        SweepRow r{j, h, {}};
        r.set("tau", tau);
        r.set("identity_error", worst_identity);
        r.set("max_off_lambda", off);
        r.set("projection_gap", std::abs(avg_pair - proj_pair) * fourier_factor<2>() * torus_volume<2>());
        r.set("lambda_modes_kept", static_cast<double>(a_avg.terms.size()));
        rep.rows.push_back(r);
    }
    add(rep, "closed_form_identity", identity, "c_m^avg = c_m Phi(tau m.omega)");
    add(rep, "off_lambda_decreasing", strictly_decreasing(rep.column("max_off_lambda")), "modes outside Lambda damp out");
    add(rep, "projection_gap_decreasing", strictly_decreasing(rep.column("projection_gap")),
        "averaged pairing approaches the Lambda-projected pairing");
    return rep;
}

// Antidiagonal Gaussian state sum_n w_n e^{in(x1-x2)}, |n| <= N/2.
inline FourierState<2> diagonal_state(int j, double sigma_fraction) {
    const long long n = 1LL << j;
    const double sigma = sigma_fraction * static_cast<double>(n);
    std::vector<ModeCoefficient<2>> modes;
    for (long long k = -n / 2; k <= n / 2; ++k)
        modes.push_back({{k, -k}, Complex(std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma)))});
    return spectral_superposition<2>(std::ldexp(1.0, -j), std::move(modes), dyadic(j));
}

// Mass of |u|^2 in the band |x1 - x2| <= w (mod 2pi) for an antidiagonal state.
inline double diagonal_band_mass(const FourierState<2>& u, double w) {
    double s = 0.0;
    for (const auto& a : u.entries())
        for (const auto& b : u.entries()) {
            const long long q = a.k[0] - b.k[0];
            const double kern = q == 0 ? 2.0 * w : 2.0 * std::sin(static_cast<double>(q) * w) / static_cast<double>(q);
            s += (a.value * std::conj(b.value)).real() * kern;
        }
    return s / two_pi;
}

inline SweepReport diagonal_concentration(const ScenarioSpec& spec) {
    SweepReport rep{spec, {}, {}, {}};
    const auto cfg = spec.scenario_block();
    const auto th = cfg.at("thresholds");
    const auto ham = HamiltonianModel::difference_quadratic({1, -1}, {Rational(1), Rational(1)});
    const double band_factor = cfg.at("band_factor").get<double>();
    for (int j = spec.jmin; j <= spec.jmax; ++j) {
        const double h = std::ldexp(1.0, -j);
        const auto u = diagonal_state(j, cfg.at("sigma_fraction").get<double>());
        SweepRow r{j, h, {}};
        r.set("residual", quasimode_residual(u, ham, 0.0));
        const auto dec = eigenspace_decompose(u, ham);
        r.set("groups", static_cast<double>(dec.groups.size()));
        r.set("band_mass", diagonal_band_mass(u, band_factor * h * two_pi));
        rep.rows.push_back(r);
    }
    double worst = 0;
    for (double v : rep.column("residual")) worst = std::max(worst, v);
    add(rep, "exact_eigenfunction", worst <= th.at("residual_max").get<double>(), "max residual " + fmt(worst));
    const int cj = cfg.at("check_j").get<int>();
    if (cj >= spec.jmin && cj <= spec.jmax) {
        const double m = rep.row(cj).get("band_mass");
        add(rep, "band_mass", m > th.at("band_mass_min").get<double>(), "mass at j=" + std::to_string(cj) + ": " + fmt(m));
    }
    bool single = true;
    for (double g : rep.column("groups")) single = single && g == 1.0;
    add(rep, "single_eigenspace", single, "all modes share H(hk) = 0");
    return rep;
}

inline SweepReport two_microlocal_consistency(const ScenarioSpec& spec) {
    SweepReport rep{spec, {}, {}, {}};
    const auto cfg = spec.scenario_block();
    const auto th = cfg.at("thresholds");
    const auto ham = HamiltonianModel::identity_quadratic(2);
    const auto lambda = resonance_module(ham.exact_gradient({Rational(1), Rational(0)}));
    const auto frame = make_frame(ham, lambda, {Rational(1), Rational(0)}, cfg.at("frame_radius").get<double>());
    const auto a = x2_symbol(1.0);
    const double r_main = cfg.at("R").get<double>(), t = cfg.at("t").get<double>();
    const auto r_ladder = cfg.at("R_ladder").get<std::vector<double>>();
    // sup |a| over the frame ball: (2pi)^{-1} sum_k |a_k| at the largest xi2.
    const double max_a = 2.0 * (1.0 + 0.5 * frame.epsilon);
    for (int j = spec.jmin; j <= spec.jmax; ++j) {
        const double h = std::ldexp(1.0, -j);
        const auto u = two_microlocal_state(j);
        SweepRow r{j, h, {}};
        const auto c1 = conjugated_evolution_check(u, a, frame, ham, t, r_main);
        const auto c0 = conjugated_evolution_check(u, a, frame, ham, 0.0, r_main);
        r.set("direct_re", c1.direct.real());
        r.set("direct_im", c1.direct.imag());
        r.set("defect", c1.defect);
        r.set("defect_t0", c0.defect);
        for (double rr : r_ladder)
            r.set("defect_R" + std::to_string(static_cast<int>(rr)), conjugated_evolution_check(u, a, frame, ham, t, rr).defect);
        // Split sum rule on the pairing level.
        auto lifted = TwoMicrolocalSymbol<2>::lift(a, lambda);
        SplitParameters sp;
        sp.r = r_main;
        const double tau = 1.0 / h;
        const Complex full = two_scale_pair(u, lifted, frame, ham, tau, t);
        const Complex parts = two_scale_pair(u, lifted, frame, ham, tau, t, PairPart::concentrating, sp) +
                              two_scale_pair(u, lifted, frame, ham, tau, t, PairPart::spreading, sp) +
                              two_scale_pair(u, lifted, frame, ham, tau, t, PairPart::far, sp);
        r.set("split_sum_error", std::abs(full - parts));
        rep.rows.push_back(r);
    }
    const auto defect = rep.column("defect");
    add(rep, "defect_decreasing", strictly_decreasing(defect), "t=1 defect along the ladder");
    add(rep, "defect_final", defect.back() <= th.at("final_fraction").get<double>() * max_a,
        "final " + fmt(defect.back()) + " vs " + fmt(th.at("final_fraction").get<double>() * max_a));
    auto f = fit_loglog(rep.hs(), rep.column("defect_t0"), "defect_t0");
    rep.fits.push_back(f);
    add(rep, "t0_defect_order_h", f.value >= th.at("t0_slope_min").get<double>(), "slope " + fmt(f.value));
    double worst = 0;
    for (double v : rep.column("split_sum_error")) worst = std::max(worst, v);
    add(rep, "split_sum_rule", worst <= 1e-12, "max " + fmt(worst));
    return rep;
}

} // namespace scenarios

inline SweepReport run_scenario(const ScenarioSpec& spec) {
    using Fn = SweepReport (*)(const ScenarioSpec&);
    static const std::map<std::string, Fn> table = {
        {"orbit_measure", scenarios::orbit_measure},
        {"dirac_drift", scenarios::dirac_drift},
        {"threshold_sweep", scenarios::threshold_sweep},
        {"degenerate_quasimode", scenarios::degenerate_quasimode},
        {"wunsch_subprincipal", scenarios::wunsch_subprincipal},
        {"hierarchy_average", scenarios::hierarchy_average},
        {"resonant_transport", scenarios::resonant_transport},
        {"diagonal_concentration", scenarios::diagonal_concentration},
        {"two_microlocal_consistency", scenarios::two_microlocal_consistency}};
    auto it = table.find(spec.name);
    if (it == table.end()) throw ParameterError("unknown scenario '" + spec.name + "'");
    try {
        return it->second(spec);
    } catch (const Error& e) {
        throw std::runtime_error(std::string(e.what()) + " [scenario " + spec.name + "]");
    }
}

// Fits one observable of a finished report against h.
inline FitResult sweep_fit(const SweepReport& rep, const std::string& observable, const std::string& kind,
                           const std::string& abscissa = "h") {
    if (rep.rows.size() < 3) throw FitError("fit needs at least 3 rows");
    for (const auto& r : rep.rows)
        if (!r.has(observable)) throw FitError("observable '" + observable + "' missing from rows");
    const auto x = abscissa == "h" ? rep.hs() : rep.column(abscissa);
    const auto y = rep.column(observable);
    if (kind == "loglog" || kind == "loglog_slope") return fit_loglog(x, y, observable);
    if (kind == "limit" || kind == "limit_extrapolation") return fit_limit(x, y, 1.0, observable);
    throw FitError("unknown fit kind '" + kind + "'");
}

// One row per h; columns j, h and the observables in first-seen order.
inline std::string report_csv(const SweepReport& rep) {
    std::vector<std::string> cols;
    for (const auto& r : rep.rows)
        for (const auto& kv : r.values)
            if (std::find(cols.begin(), cols.end(), kv.first) == cols.end()) cols.push_back(kv.first);
    std::ostringstream os;
    os << "j,h";
    for (const auto& c : cols) os << "," << c;
    os << "\n";
    for (const auto& r : rep.rows) {
        os << r.j << "," << fmt17(r.h);
        for (const auto& c : cols) os << "," << (r.has(c) ? fmt17(r.get(c)) : std::string());
        os << "\n";
    }
    return os.str();
}

inline Json report_json(const SweepReport& rep, bool with_timestamp = true) {
    Json rows = Json::array();
    for (const auto& r : rep.rows) {
        Json o{{"j", r.j}, {"h", r.h}};
        for (const auto& [k, v] : r.values) o[k] = v;
        rows.push_back(o);
    }
    Json asserts = Json::array();
    for (const auto& a : rep.assertions) asserts.push_back(Json{{"name", a.name}, {"pass", a.pass}, {"detail", a.detail}});
    Json fits = Json::array();
    for (const auto& f : rep.fits)
        fits.push_back(Json{{"observable", f.observable}, {"kind", f.kind}, {"value", f.value},
                            {"intercept", f.intercept}, {"residual_variance", f.residual_variance}, {"points", f.points}});
    Json prov{{"code_version", library_version}};
    if (with_timestamp) {
        std::time_t now = std::time(nullptr);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        prov["timestamp"] = buf;
    }
    return Json{{"scenario", rep.spec.name}, {"spec", rep.spec.to_json()}, {"provenance", prov},
                {"rows", rows}, {"fits", fits}, {"assertions", asserts}, {"passed", rep.passed()}};
}

// Writes <out>/<scenario>.csv or .json; returns the written path.
inline std::string emit_report(const SweepReport& rep, const std::string& out_dir, const std::string& format) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IOError("cannot create '" + out_dir + "': " + ec.message());
    if (format == "csv") {
        auto path = (std::filesystem::path(out_dir) / (rep.spec.name + ".csv")).string();
        write_file(path, report_csv(rep));
        return path;
    }
    if (format == "json") {
        auto path = (std::filesystem::path(out_dir) / (rep.spec.name + ".json")).string();
        write_file(path, report_json(rep).dump(2) + "\n");
        return path;
    }
    throw ParameterError("unknown format '" + format + "'");
}

} // namespace scl
