#include "commands.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>
#include <sstream>

using namespace pwsc;
using namespace pwsc::cli;

namespace {

Vector parse_point(const std::string& text) {
    std::vector<double> xs;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            xs.push_back(std::stod(item, &used));
            if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("--point expects comma-separated numbers, e.g. 0,4");
        }
    }
    return Eigen::Map<Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

struct Flags {
    std::string config;
    std::string out = "out";
    std::string measure;
    std::optional<double> cbar;
    std::optional<std::size_t> grid;
    std::optional<double> step;
    std::optional<double> truncate;

    void attach(CLI::App* cmd, bool needs_config) {
        auto* c = cmd->add_option("--config", config, "Project file (JSON)");
        if (needs_config) c->required();
        cmd->add_option("--out", out, "Output directory")->capture_default_str();
        cmd->add_option("--measure", measure, "Matrix measure: 1, 2 or inf");
        cmd->add_option("--cbar", cbar, "Target contraction rate");
        cmd->add_option("--grid", grid, "Grid nodes per axis");
        cmd->add_option("--step", step, "Integration step (simulate) or gain step (synthesize)");
        cmd->add_option("--truncate", truncate, "Bound used for unbounded region sides");
    }

    Overrides overrides() const {
        Overrides ov;
        if (!measure.empty()) {
            ov.measure = parse_measure_kind(measure);
            if (!ov.measure) throw ConfigError(fmt::format("--measure: unknown measure '{}'", measure));
        }
        ov.c_bar = cbar;
        ov.grid = grid;
        ov.step = step;
        ov.truncate = truncate;
        return ov;
    }

    ProjectConfig load() const {
        ProjectConfig cfg = load_config(config);
        apply(cfg, overrides());
        return cfg;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Contraction certificates and switching-controller design for bimodal Filippov systems"};
    app.require_subcommand(1);

    Flags measure_f, certify_f, simulate_f, synth_f, repro_f;
    std::string point_text;
    std::string example;

    auto* measure = app.add_subcommand("measure", "Matrix measures of the open-loop Jacobian at a point");
    measure_f.attach(measure, true);
    measure->add_option("--point", point_text, "State, comma separated")->required();

    auto* certify = app.add_subcommand("certify", "Check the switched closed loop on the region grid");
    certify_f.attach(certify, true);
    auto* simulate = app.add_subcommand("simulate", "Simulate initial-condition pairs and compare with the decay bound");
    simulate_f.attach(simulate, true);
    auto* synthesize = app.add_subcommand("synthesize", "Build H from the open-loop measure and search template gains");
    synth_f.attach(synthesize, true);
    auto* reproduce = app.add_subcommand("reproduce", "Run a built-in worked example end to end");
    repro_f.attach(reproduce, false);
    reproduce->add_option("example", example, "example1 or example2")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kConfigError;
    }

    try {
        if (*measure) return cmd_measure(measure_f.load(), parse_point(point_text), std::cout);
        if (*certify) return cmd_certify(certify_f.load(), certify_f.out, std::cout);
        if (*simulate) return cmd_simulate(simulate_f.load(), simulate_f.out, std::cout);
        if (*synthesize) return cmd_synthesize(synth_f.load(), synth_f.out, std::cout);
        if (*reproduce) return cmd_reproduce(example, repro_f.overrides(), repro_f.out, std::cout);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const CertifyError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const SimulationError& e) {
        std::cerr << "simulation error: " << e.what() << '\n';
        return kSimulationError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    }
    return kConfigError;
}
