#pragma once

// Subcommand implementations behind safe_ctl. Each returns the process exit
// code: 0 success, 1 configuration or input error, 2 diverged run.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "safe/trainer.hpp"

namespace safe {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitDiverged = 2;

struct RunOverrides {
  std::optional<std::filesystem::path> config;
  std::optional<std::string> mode;
  std::optional<int> steps;
  std::optional<std::uint64_t> seed;
};

/// Loads the config (defaults when absent) and applies the overrides.
/// Throws ConfigError.
RunConfig resolve_config(const RunOverrides& o);

/// --out, else $SAFE_CTL_OUT_DIR, else the working directory.
std::filesystem::path resolve_out_dir(const std::optional<std::filesystem::path>& out);

std::string trace_file_name(Mode mode, std::uint64_t seed);
std::string stability_file_name(Mode mode, std::uint64_t seed);

struct RunOptions {
  RunOverrides overrides;
  std::optional<std::filesystem::path> out;
};
int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err);

struct CompareOptions {
  RunOverrides overrides;  ///< mode and seed overrides are ignored
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> modes;
  std::optional<std::filesystem::path> out;
  unsigned jobs = 0;  ///< 0 picks the hardware concurrency
};
int cmd_compare(const CompareOptions& opts, std::ostream& out, std::ostream& err);

struct ReplayOptions {
  std::filesystem::path trace;
  std::optional<std::filesystem::path> config;
};
int cmd_replay(const ReplayOptions& opts, std::ostream& out, std::ostream& err);

struct ReportOptions {
  std::vector<std::filesystem::path> traces;
  std::optional<std::filesystem::path> out;
};
int cmd_report(const ReportOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace safe
