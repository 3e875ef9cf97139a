#pragma once

#include "config.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace pwsc::cli {

/// Process exit codes.
enum Exit : int {
    kPass = 0,
    kCertificateFail = 1,
    kSimulationError = 2,
    kSynthesisFailure = 3,
    kConfigError = 64,
};

int cmd_measure(const ProjectConfig& cfg, const Vector& point, std::ostream& out);
int cmd_certify(const ProjectConfig& cfg, const std::filesystem::path& dir, std::ostream& out);
int cmd_simulate(const ProjectConfig& cfg, const std::filesystem::path& dir, std::ostream& out);
int cmd_synthesize(const ProjectConfig& cfg, const std::filesystem::path& dir, std::ostream& out);
/// `id` is example1 or example2; overrides apply to the built-in project.
int cmd_reproduce(const std::string& id, const Overrides& ov, const std::filesystem::path& dir, std::ostream& out);

/// Built-in project text for an example id; throws ConfigError for unknown ids.
[[nodiscard]] std::string builtin_config(const std::string& id);

}  // namespace pwsc::cli
