#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gci/io.hpp"

namespace gci::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericError = 3, kNonconvergence = 4 };

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  /// Relative paths inside the config (design CSVs) resolve against this.
  std::filesystem::path base_dir = ".";
};

/// One artifact in both precisions. `extension` is "json" or "csv".
struct Artifact {
  std::string suffix;
  std::string extension;
  std::string text;
  std::string raw_text;
};

struct CommandOutput {
  /// Primary artifact first; simulate adds the fit JSON.
  std::vector<Artifact> artifacts;
  /// Unrounded result record (handy for tests and logging).
  io::json result;
  io::Provenance provenance;
};

std::vector<std::string> command_names();

/// Reads a JSON config; throws ConfigError on I/O or parse failure.
io::json load_config(const std::filesystem::path& path);

/// Validates `config` against the command's schema and runs it.
CommandOutput run_command(const std::string& command, const io::json& config,
                          const RunOptions& options = {});

/// Hash of the effective configuration (thread count excluded).
std::uint64_t config_hash(const std::string& command, const io::json& config);

/// Maps an in-flight exception to an exit code and writes the message.
int exit_code_for_current_exception(std::ostream& err);

/// Command-line entry point.
int main(int argc, char** argv);

}  // namespace gci::cli
