#pragma once

#include "bitload/alloc.hpp"
#include "bitload/channel.hpp"
#include "bitload/core_math.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

// Monte Carlo experiment driver: sweeps noise variance, the objective weight,
// or the power threshold across many fading realizations, averages the
// per-symbol throughput / transmit power / reported SNR per allocator, and
// compares the greedy pipeline against the exhaustive search. All randomness
// descends from a single master seed so identical specs reproduce identical
// tables byte for byte.

namespace bitload {

enum class SweepVariable { noise_variance, alpha, power_threshold };
enum class AllocatorKind { proposed, proposed_unconstrained, baseline, oracle };

std::string to_string(SweepVariable variable);
std::string to_string(AllocatorKind kind);
SweepVariable sweep_variable_from_string(const std::string& name);
AllocatorKind allocator_from_string(const std::string& name);

/// Total-power budget applied per realization. `fraction` scales the same
/// realization's unconstrained total, so the bite tracks the channel.
struct PowerBudget {
  enum class Mode { unbounded, absolute, fraction };

  Mode mode = Mode::unbounded;
  double value = 0.0;  // watts for absolute, ratio for fraction

  /// Threshold in watts for one realization (kUnboundedPower when unbounded).
  double resolve(double unconstrained_total) const;
  void validate() const;
};

/// Averages for one (sweep value, allocator) pair.
struct TrialSummary {
  double sweep_value = 0.0;
  double avg_throughput = 0.0;      // bits per OFDM symbol
  double avg_transmit_power = 0.0;  // W
  double avg_reported_snr_db = 0.0;
  double avg_objective = 0.0;
  int num_realizations = 0;
};

struct AllocatorSeries {
  AllocatorKind allocator = AllocatorKind::proposed;
  std::vector<TrialSummary> points;  // one per sweep value, in order
};

struct SweepSpec {
  SweepVariable variable = SweepVariable::noise_variance;
  std::vector<double> values;  // non-empty, sorted ascending
  SystemConfig fixed;          // template; the swept field is overridden per value
  ChannelModelConfig channel;
  int num_realizations = 500;
  std::uint64_t master_seed = 1;
  std::vector<AllocatorKind> allocators{AllocatorKind::proposed,
                                        AllocatorKind::proposed_unconstrained};
  PowerBudget budget;
  int oracle_b_max = 12;
  bool force_oracle = false;
  // Feasibility is rechecked on ~1% of trials by default; tests flip this on
  // to audit every trial.
  bool check_all_feasibility = false;

  void validate() const;
};

/// One full sweep; series come back in the order allocators were requested.
/// Identical spec ⟹ identical result.
std::vector<AllocatorSeries> run_sweep(const SweepSpec& spec);

/// One sweep point over prebuilt per-trial channel gains (gains[r] is trial
/// r's frequency response). Exposed so tests can drive handcrafted channels.
std::vector<TrialSummary> run_point(const SweepSpec& spec, double sweep_value,
                                    const std::vector<Eigen::ArrayXcd>& gains);

/// Linear-domain mean of P_i |H_i|^2 / sigma^2 over all subcarriers of all
/// realizations (silent subcarriers contribute zero), in dB; -inf when every
/// allocation is silent.
double reported_average_snr(const std::vector<Allocation>& allocations,
                            const std::vector<ChannelRealization>& realizations,
                            double noise_variance);

struct OracleGapSample {
  int trial_index = 0;
  std::uint64_t seed = 0;
  double objective_greedy = 0.0;
  double objective_oracle = 0.0;
  double relative_gap = 0.0;  // (greedy - oracle) / max(|oracle|, tiny)
};

struct OracleComparison {
  std::vector<OracleGapSample> samples;
  double median_relative_gap = 0.0;
  double max_relative_gap = 0.0;
};

/// Greedy pipeline vs exhaustive search on spec.fixed across
/// spec.num_realizations channels (sweep values are ignored). Aborts with an
/// exception if the search ever beats the guarantee that it lower-bounds the
/// greedy objective.
OracleComparison compare_to_oracle(const SweepSpec& spec);

struct ScalingRow {
  int num_subcarriers = 0;
  double avg_budget_iterations = 0.0;    // bit removals per realization
  double avg_power_evaluations = 0.0;    // release-table refreshes per realization
};

/// Budget-loop work vs problem size under a tight threshold (a fraction of
/// each realization's unconstrained total); evidence for the quadratic
/// worst-case growth, inspected offline rather than asserted.
std::vector<ScalingRow> operation_count_scaling(const std::vector<int>& sizes,
                                                std::uint64_t master_seed,
                                                int num_realizations = 20,
                                                double threshold_fraction = 0.25);

/// Compensated (Kahan-Babuska-Neumaier) accumulator; keeps sweep averages
/// accurate and independent of any future re-ordering of the reduction.
struct KahanSum {
  double sum = 0.0;
  double compensation = 0.0;

  void add(double term);
  double value() const { return sum + compensation; }
};

/// Sweep table: one row per (sweep value, allocator), columns
/// sweep_variable, sweep_value, allocator, avg_snr_db, avg_throughput_bits,
/// avg_power_w, avg_objective, num_realizations, master_seed.
void write_sweep_csv(std::ostream& os, const SweepSpec& spec,
                     const std::vector<AllocatorSeries>& series);
void write_sweep_csv(const std::filesystem::path& path, const SweepSpec& spec,
                     const std::vector<AllocatorSeries>& series);

/// JSON sidecar: resolved spec, seed-derivation rule, RNG description, tool
/// version. Deliberately free of timestamps and paths so reruns are
/// byte-identical.
std::string sweep_metadata_json(const SweepSpec& spec);
void write_sweep_metadata(const std::filesystem::path& path, const SweepSpec& spec);

}  // namespace bitload
