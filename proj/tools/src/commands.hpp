#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"

namespace twomem::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericalAbort = 3, kCheckFailed = 4 };

struct CommandOptions {
    std::filesystem::path out = ".";
    unsigned workers = 0;
    bool check = false;
    std::ostream* log = nullptr;
};

/// Version string baked in at configure time.
const char* version();

/// Metadata every output file carries: tool version and digest of the
/// resolved config.
std::vector<std::pair<std::string, std::string>> provenance(const RunConfig& config);

// Each command writes its files under options.out and returns kOk or, with
// options.check, kCheckFailed. Configuration problems throw ConfigError and
// numerical failures propagate as NonFiniteError, EnsembleAborted or
// NonPhysicalError.
int cmd_map(const RunConfig& config, const CommandOptions& options);
int cmd_sweep(const RunConfig& config, const CommandOptions& options);
int cmd_trajectory(const RunConfig& config, const CommandOptions& options);
int cmd_entangle(const RunConfig& config, const CommandOptions& options);
int cmd_meanfield(const RunConfig& config, const CommandOptions& options);

/// Runs `command` and maps exceptions to exit codes, reporting on `err`.
int dispatch(const std::string& command, const RunConfig& config, const CommandOptions& options, std::ostream& err);

}  // namespace twomem::cli
