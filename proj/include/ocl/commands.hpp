#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "ocl/run_config.hpp"

namespace ocl {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,
  kExitMissingArtifact = 3,
  kExitFingerprint = 4,
};

/// Command-line overrides; set fields win over the config file.
struct Overrides {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::optional<double> alpha;
  std::optional<std::size_t> folds;
  std::optional<std::size_t> depth;
  std::optional<std::string> loss_mode;
  bool no_mc = false;
  bool no_imputation = false;
};

RunConfig resolve_config(const Overrides& overrides);

/// `--out` when given, else <runs_root>/<command>-<config hash>-<UTC timestamp>.
std::filesystem::path run_directory(const std::string& command, const RunConfig& config,
                                    const Overrides& overrides);

/// Runs one subcommand and maps failures onto ExitCode values. Progress goes
/// to `log`, errors to `err`.
int run_command(const std::string& command, const Overrides& overrides, std::ostream& log,
                std::ostream& err);

/// Entry point of the `ocl` executable.
int cli_main(int argc, char** argv);

}  // namespace ocl
