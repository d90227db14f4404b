#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "kscontrol/config.hpp"

namespace ksc {

inline constexpr std::string_view kVersion = "0.1.0";

/// Environment variable that overrides output_dir.
inline constexpr const char* kOutputDirEnv = "KSCTL_OUTPUT_DIR";

enum ExitCode : int {
  kExitOk = 0,
  kExitIo = 1,
  kExitUsage = 2,
  kExitBlowUp = 3,
  kExitCg = 4,
  kExitNumerical = 5,
};

const std::vector<std::string>& subcommands();

struct Artifact {
  std::string file;
  std::string content;
};

/// Runs one subcommand and renders its CSV and JSON outputs in memory.
/// Library errors propagate unchanged.
std::vector<Artifact> compute_artifacts(std::string_view command, const RunConfig& cfg);

/// Manifest text for a finished run.
std::string render_manifest(std::string_view command, const RunConfig& cfg,
                            const std::vector<Artifact>& artifacts, double wall_time_seconds);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// output_dir, or the value of KSCTL_OUTPUT_DIR when that is set and nonempty.
std::filesystem::path resolve_output_dir(const RunConfig& cfg);

/// Computes, then writes every artifact and manifest.json. Nothing is written
/// unless the computation succeeds. Failures print one JSON object to `err`
/// and return the matching ExitCode.
int run_subcommand(std::string_view command, const RunConfig& cfg, std::ostream& out,
                   std::ostream& err);

/// `ksctl <subcommand> [--config FILE] [--set key=value]...`
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ksc
