#pragma once

#include "bitload/core_math.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// Allocators. The main pipeline is
//
//   closed_form_continuous  ->  discretize  ->  enforce_power_budget
//
// closed_form_continuous evaluates the stationary solution of the weighted
// power/throughput objective under per-subcarrier BER equality; discretize
// rounds to integer constellations and restores BER equality; the budget loop
// strips bits greedily (largest released power first) until the total-power
// threshold holds. A uniform-power incremental loader and an exhaustive
// discrete search provide the comparison points.

namespace bitload {

/// One bit-removal step of the budget loop. bits_after is bits_before - 1, or
/// 0 when the subcarrier was nulled from the 4-QAM floor.
struct RemovalStep {
  int subcarrier_index = 0;
  int bits_before = 0;
  int bits_after = 0;
  double power_released = 0.0;  // W
};

/// Audit trail of enforce_power_budget: total power strictly decreases along
/// steps and final.total_power() meets the threshold.
struct AllocationTrace {
  Allocation initial;
  std::vector<RemovalStep> steps;
  Allocation final;
};

/// Smallest channel-to-noise ratio at which a subcarrier can carry the 4-QAM
/// minimum: C >= (4 / 1.6) * (alpha ln 2 / (1 - alpha)) * ln(0.2 / ber_target).
double activation_threshold(double alpha, double ber_target);

/// Stationary bit load for an active subcarrier.
double continuous_bits(double cnr, double alpha, double ber_target);

/// Stationary power ((1 - alpha) / (alpha ln 2)) * (1 - 2^-bits).
double continuous_power(double bits, double alpha);

/// Closed-form solution per subcarrier; subcarriers failing the activation
/// test come back inactive with zeros.
ContinuousAllocation closed_form_continuous(const Eigen::ArrayXd& cnrs, double alpha,
                                            const Eigen::ArrayXd& ber_targets);

/// Round active bit loads to the nearest integer (halves away from zero),
/// optionally cap them, and recompute powers to BER equality.
Allocation discretize(const ContinuousAllocation& cont, const Eigen::ArrayXd& cnrs,
                      const Eigen::ArrayXd& ber_targets, double alpha,
                      std::optional<int> max_bits = {});

/// Greedy bit removal until total power meets `power_threshold`: each
/// iteration drops one bit (or nulls a floor subcarrier entirely) on the
/// subcarrier releasing the most power, lowest index on ties.
std::pair<Allocation, AllocationTrace> enforce_power_budget(
    const Allocation& alloc, const Eigen::ArrayXd& cnrs,
    const Eigen::ArrayXd& ber_targets, double power_threshold, double alpha);

/// Full pipeline under `cfg`; the budget stage is skipped when the threshold
/// is unbounded.
std::pair<Allocation, AllocationTrace> allocate(const Eigen::ArrayXd& cnrs,
                                                const SystemConfig& cfg);

/// Uniform-power comparison scheme: every loaded subcarrier transmits
/// total_power / N; bits are granted one at a time (activation starts at the
/// 4-QAM floor) to the candidate with the smallest mean-BER increase while the
/// mean BER over loaded subcarriers stays within the mean target.
Allocation uniform_power_baseline(const Eigen::ArrayXd& cnrs, const SystemConfig& cfg,
                                  double total_power);

/// Thrown when an exhaustive search is requested above the tractability guard.
struct OracleGuardError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Discrete optimum by enumeration of ({0} u {2..b_max})^N with minimal
/// BER-equality powers; ties resolve to the lexicographically smallest bit
/// vector. Refuses N * log2(b_max + 1) > 40 unless `force` is set.
Allocation exhaustive_oracle(const Eigen::ArrayXd& cnrs, const SystemConfig& cfg,
                             int b_max, bool force = false);

/// Per-subcarrier result table, one row per subcarrier: columns
/// index, cnr, bits_unconstrained, power_unconstrained_W, bits_final,
/// power_final_W. The path overload prefixes '#' comment lines.
void write_allocation_table(std::ostream& os, const Eigen::ArrayXd& cnrs,
                            const Allocation& unconstrained,
                            const Allocation& final_alloc);
void write_allocation_table(const std::filesystem::path& path, const Eigen::ArrayXd& cnrs,
                            const Allocation& unconstrained, const Allocation& final_alloc,
                            const std::vector<std::string>& header_comments = {});

}  // namespace bitload
