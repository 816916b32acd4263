#pragma once

#include "bitload/channel.hpp"
#include "bitload/core_math.hpp"
#include "bitload/harness.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Workflow front end behind the command-line binary: merges defaults, an
// optional key=value config file, and command-line flags into one resolved
// RunConfig, then executes the chosen workflow and writes its output files.
// Kept apart from the flag parser so tests can drive workflows without a
// subprocess.

namespace bitload {

enum class Workflow { alloc, sweep, oracle };

std::string to_string(Workflow workflow);

/// Configuration problem: unknown key, malformed value, out-of-range setting.
/// Messages name the offending dotted key.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat dotted-key settings, e.g. {"system.alpha", "0.5"}.
using KeyValueMap = std::map<std::string, std::string>;

/// Parses `key = value` lines; '#' starts a comment, blank lines are skipped,
/// later duplicates win.
KeyValueMap read_config_file(const std::filesystem::path& path);

/// Fully resolved invocation. `system.power_threshold` stays unbounded here;
/// the budget field is the single source of the power constraint so absolute
/// and fraction-of-unconstrained modes are handled uniformly.
struct RunConfig {
  Workflow workflow = Workflow::alloc;
  SystemConfig system;
  ChannelModelConfig channel_model;
  PowerBudget budget;
  std::vector<AllocatorKind> allocators{AllocatorKind::proposed,
                                        AllocatorKind::proposed_unconstrained};
  int num_realizations = 500;
  SweepVariable sweep_variable = SweepVariable::noise_variance;
  std::vector<double> sweep_values;
  int oracle_b_max = 12;
  bool force_oracle = false;
  std::optional<std::filesystem::path> channel_file;
  std::filesystem::path output_dir = ".";
  std::uint64_t seed = 1;
  // Explicit subcarrier counts must match a channel file; inferred ones adapt.
  bool subcarriers_explicit = false;
};

/// Defaults <- config file <- flags, then validation. Flag values use the
/// same dotted keys as the file.
RunConfig resolve_config(Workflow workflow, const KeyValueMap& file_values,
                         const KeyValueMap& flag_values);

/// "0.1mW" -> 1e-4; accepted suffixes W, mW, uW; a bare number means watts.
double parse_power(const std::string& text, const std::string& key);

/// Comma-separated reals, e.g. "1e-11,1e-10".
std::vector<double> parse_value_list(const std::string& text, const std::string& key);

/// Executes the workflow and writes its outputs under cfg.output_dir:
///   alloc  -> allocation.csv (+ channel.csv when the channel was generated)
///   sweep  -> sweep.csv + sweep_meta.json
///   oracle -> oracle_gap.csv + oracle_meta.json
/// Output is a pure function of cfg; reruns produce byte-identical files.
/// Returns 0; failures raise (ConfigError / OracleGuardError / runtime_error).
int run(const RunConfig& cfg);

}  // namespace bitload
