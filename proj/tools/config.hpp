#pragma once

// JSON project files for the command-line front end.
//
//   {
//     "variables": ["x1", "x2"],
//     "f": ["-4*x1", "x2^2 - 6*x2"],
//     "g": [["1", "2"]],                       // columns of g(x)
//     "H": "x2 - 2",                           // or {"synthesized": true}
//     "controller": {"u_plus": ["-10*x2"], "u_minus": ["0"]},
//     "measure": "1", "c_bar": 2,              // optional "c1", "c2"
//     "region": {"lower": [null, null], "upper": [null, 7],
//                "resolution": 200, "truncation": 50,
//                "predicate": "x1^2 + x2^2 <= 100"},
//     "simulation": {"t_span": [0, 4], "step": 1e-3,
//                    "pairs": [[[1, 4], [2, 5]]], "K": 1, "lambda": 2},
//     "synthesis": {"template": [["x2"]], "gain_lower": -20, "gain_upper": 0, "gain_step": 0.5}
//   }

#include "pwsc/certify.hpp"
#include "pwsc/dynamics.hpp"
#include "pwsc/measures.hpp"
#include "pwsc/synth.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pwsc::cli {

/// Malformed or inconsistent project file; the message names the source and location.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RegionConfig {
    std::vector<std::optional<double>> lower;
    std::vector<std::optional<double>> upper;
    std::vector<std::size_t> resolution;
    double truncation = 50.0;
    std::string predicate;
};

struct SimulationConfig {
    double t0 = 0.0;
    double t1 = 1.0;
    double step = 1e-3;
    std::vector<std::pair<Vector, Vector>> pairs;
    std::vector<Vector> initial_conditions;
    double k = 1.0;
    double lambda = 0.0;
    MeasureKind norm = MeasureKind::One;
    std::optional<double> epsilon;  // also run the regularised system
};

struct SynthesisConfig {
    std::vector<std::vector<std::string>> basis;
    std::vector<double> gain_lower;  // empty: library default [-10, 0]
    std::vector<double> gain_upper;
    double gain_step = 0.5;
};

struct ProjectConfig {
    std::string source;
    std::vector<std::string> vars;
    ControlledSystem system;
    std::optional<std::string> h_expr;  // empty means synthesised from the measure
    std::optional<std::vector<std::string>> u_plus;
    std::optional<std::vector<std::string>> u_minus;
    MeasureKind measure = MeasureKind::One;
    double c_bar = 1.0;
    std::optional<double> c1;
    std::optional<double> c2;
    std::optional<RegionConfig> region;
    std::optional<SimulationConfig> simulation;
    std::optional<SynthesisConfig> synthesis;
};

/// Command-line overrides; unset fields keep the file's values.
struct Overrides {
    std::optional<MeasureKind> measure;
    std::optional<double> c_bar;
    std::optional<std::size_t> grid;
    std::optional<double> step;
    std::optional<double> truncate;
};

[[nodiscard]] ProjectConfig parse_config(const std::string& text, const std::string& source);
[[nodiscard]] ProjectConfig load_config(const std::string& path);
void apply(ProjectConfig& cfg, const Overrides& ov);

/// Axis-aligned grid plus compiled predicate. Throws ConfigError without a region block.
[[nodiscard]] RegionSpec build_region(const ProjectConfig& cfg);
[[nodiscard]] BuiltSurface build_surface(const ProjectConfig& cfg);
/// u+/u- default to zero when the file has no controller block.
[[nodiscard]] SwitchedController build_controller(const ProjectConfig& cfg, SurfacePtr surface);
/// H is always built from the measure here; an explicit H in the file is not used.
[[nodiscard]] DesignSpec build_design(const ProjectConfig& cfg);

/// "lhs OP rhs" with OP one of <, <=, >, >=.
[[nodiscard]] std::function<bool(const Vector&)> compile_predicate(const std::string& text,
                                                                   const std::vector<std::string>& vars);

}  // namespace pwsc::cli
