// Command-line front end: scenarios, sweeps and single-shot module calls.

#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "scl/experiments.hpp"

namespace {

using namespace scl;

constexpr int exit_ok = 0;
constexpr int exit_error = 1;
constexpr int exit_assertion = 2;

// Accepts "2^-J", "p/q" or a plain integer.
Rational parse_h(const std::string& text) {
    if (text.rfind("2^-", 0) == 0) {
        const int j = std::stoi(text.substr(3));
        if (j < 0 || j > 60) throw ParameterError("h exponent out of range");
        return Rational(Integer(1), Integer(1) << j);
    }
    Rational h = parse_rational(text);
    if (h <= 0) throw ParameterError("h must be positive");
    return h;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

void print_assertions(const SweepReport& rep) {
    for (const auto& a : rep.assertions)
        std::cerr << (a.pass ? "PASS " : "FAIL ") << rep.spec.name << "." << a.name << ": " << a.detail << "\n";
}

Json load_overrides(const std::string& path) {
    if (path.empty()) return Json::object();
    try {
        return Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        throw IOError(std::string("config is not valid JSON: ") + e.what());
    }
}

template <std::size_t D>
SpacingResult run_spacing(const HamiltonianModel& ham, const Rational& h, const std::vector<double>& box) {
    if (box.size() != 2 * D) throw ParameterError("--box needs 2d comma-separated bounds a1,b1,...");
    Point<D> lo, hi;
    for (std::size_t i = 0; i < D; ++i) {
        lo[i] = box[2 * i];
        hi[i] = box[2 * i + 1];
    }
    return spacing_scale<D>(ham, h, MomentumRegion<D>::box(lo, hi));
}

// Position symbol from {"terms":[{"k":[..],"re":..,"im":..}, ...]}.
Symbol<2> symbol_from_json(const Json& j) {
    std::vector<std::pair<Mode<2>, Complex>> terms;
    for (const auto& t : j.at("terms")) {
        Mode<2> k{t.at("k").at(0).get<long long>(), t.at("k").at(1).get<long long>()};
        terms.emplace_back(k, Complex(t.value("re", 0.0), t.value("im", 0.0)));
    }
    return position_symbol<2>(terms);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semiclassical lattice dynamics toolkit"};
    app.require_subcommand(1);
    // "--h" is the semiclassical parameter, so help is only available as --help.
    app.set_help_flag("--help", "Print this help message and exit");

    std::string name, config_path, out_dir = "out", format = "csv", observable, fit_kind = "loglog", abscissa = "h";
    std::optional<int> jmin, jmax;

    auto* scenario = app.add_subcommand("scenario", "Run a named scenario over its h ladder");
    scenario->set_help_flag("--help", "Print this help message and exit");
    scenario->add_option("name", name, "Scenario name")->required();
    scenario->add_option("--config", config_path, "JSON overrides merged into the defaults");
    scenario->add_option("--jmin", jmin, "Smallest ladder exponent j (h = 2^-j)");
    scenario->add_option("--jmax", jmax, "Largest ladder exponent j");
    scenario->add_option("--out", out_dir, "Output directory");
    scenario->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

    auto* sweep = app.add_subcommand("sweep", "Run a scenario and fit one observable against h");
    sweep->set_help_flag("--help", "Print this help message and exit");
    sweep->add_option("name", name, "Scenario name")->required();
    sweep->add_option("--observable", observable, "Row column to fit")->required();
    sweep->add_option("--fit", fit_kind, "loglog or limit")->check(CLI::IsMember({"loglog", "limit"}));
    sweep->add_option("--against", abscissa, "Abscissa column (default h)");
    sweep->add_option("--config", config_path, "JSON overrides merged into the defaults");
    sweep->add_option("--jmin", jmin, "Smallest ladder exponent j");
    sweep->add_option("--jmax", jmax, "Largest ladder exponent j");

    std::string ham_path, h_text, box_text;
    auto* spacing = app.add_subcommand("spacing", "Spectral spacing scale of H(hD) on a momentum box");
    spacing->set_help_flag("--help", "Print this help message and exit");
    spacing->add_option("--hamiltonian", ham_path, "Hamiltonian JSON file")->required();
    spacing->add_option("--h", h_text, "h as 2^-J or p/q")->required();
    spacing->add_option("--box", box_text, "Box bounds a1,b1,...,ad,bd")->required();

    std::string state_path, symbol_path;
    auto* pair = app.add_subcommand("pair", "Weyl pairing of a two-dimensional state dump with a position symbol");
    pair->set_help_flag("--help", "Print this help message and exit");
    pair->add_option("--state", state_path, "State dump (JSON lines)")->required();
    pair->add_option("--h", h_text, "h as 2^-J or p/q")->required();
    pair->add_option("--symbol", symbol_path, "Symbol JSON file")->required();

    bool with_grid = false;
    double tau = 0.0;
    auto* density = app.add_subcommand("density", "Position density modes of a two-dimensional state dump");
    density->set_help_flag("--help", "Print this help message and exit");
    density->add_option("--state", state_path, "State dump (JSON lines)")->required();
    density->add_option("--h", h_text, "h as 2^-J or p/q")->required();
    density->add_option("--hamiltonian", ham_path, "Hamiltonian JSON; enables time averaging with --tau");
    density->add_option("--tau", tau, "Time scale for the window average over [0,1]");
    density->add_flag("--grid", with_grid, "Emit the synthesized grid instead of the modes");

    int packet_j = 8;
    auto* state = app.add_subcommand("state", "Dump the default two-dimensional wave packet at h = 2^-j");
    state->set_help_flag("--help", "Print this help message and exit");
    state->add_option("--j", packet_j, "Ladder exponent")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (scenario->parsed()) {
            auto spec = make_spec(name, load_overrides(config_path), jmin, jmax);
            auto rep = run_scenario(spec);
            std::cout << emit_report(rep, out_dir, format) << "\n";
            print_assertions(rep);
            return rep.passed() ? exit_ok : exit_assertion;
        }
        if (sweep->parsed()) {
            auto rep = run_scenario(make_spec(name, load_overrides(config_path), jmin, jmax));
            auto f = sweep_fit(rep, observable, fit_kind, abscissa);
            std::cout << Json{{"observable", f.observable}, {"kind", f.kind}, {"value", f.value},
                              {"intercept", f.intercept}, {"residual_variance", f.residual_variance},
                              {"points", f.points}}.dump(2)
                      << "\n";
            return exit_ok;
        }
        if (spacing->parsed()) {
            const auto ham = hamiltonian_from_json(Json::parse(read_file(ham_path)));
            const auto h = parse_h(h_text);
            const auto box = parse_list(box_text);
            SpacingResult r;
            switch (ham.dim()) {
            case 1: r = run_spacing<1>(ham, h, box); break;
            case 2: r = run_spacing<2>(ham, h, box); break;
            case 3: r = run_spacing<3>(ham, h, box); break;
            case 4: r = run_spacing<4>(ham, h, box); break;
            default: throw ParameterError("spacing supports d <= 4");
            }
            Json out{{"points", r.points}, {"distinct_values", r.distinct_values}};
            out["tau"] = r.tau ? Json(*r.tau) : Json("inf");
            out["gap"] = r.gap ? Json(to_string(*r.gap)) : Json(nullptr);
            std::cout << out.dump(2) << "\n";
            return exit_ok;
        }
        if (pair->parsed()) {
            const auto h = parse_h(h_text);
            const auto u = state_from_dump<2>(read_file(state_path), to_double(h));
            const auto a = symbol_from_json(Json::parse(read_file(symbol_path)));
            const Complex p = weyl_pair(u, a);
            std::cout << Json{{"re", p.real()}, {"im", p.imag()}}.dump() << "\n";
            return exit_ok;
        }
        if (density->parsed()) {
            const auto h = parse_h(h_text);
            const auto u = state_from_dump<2>(read_file(state_path), to_double(h));
            const auto modes = difference_set(u);
            auto rep = ham_path.empty()
                           ? density_modes(u, modes)
                           : time_averaged_density(u, hamiltonian_from_json(Json::parse(read_file(ham_path))), tau,
                                                   TimeWindow(0.0, 1.0), modes);
            if (with_grid) {
                synthesize_grid(rep);
                std::cout << grid_csv(rep);
            } else {
                std::cout << density_csv(rep);
            }
            return exit_ok;
        }
        if (state->parsed()) {
            const auto common = default_config().at("common");
            const Rational h(Integer(1), Integer(1) << packet_j);
            std::cout << state_dump(wave_packet(scenarios::packet_spec(common), to_double(h), h));
            return exit_ok;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_error;
    }
    return exit_error;
}
