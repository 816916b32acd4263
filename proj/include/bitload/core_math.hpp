#pragma once

#include <Eigen/Dense>

#include <limits>
#include <optional>

// Scalar formulas of the adaptive-modulation model and the small value types
// shared by every other component. All functions here are pure and safe to
// call concurrently.
//
// The BER model for square M-ary QAM on subcarrier i is
//
//   BER = 0.2 * exp(-1.6 * P * C / (2^b - 1)),   C = |H|^2 / sigma_n^2
//
// valid for b >= 2. Powers are in watts throughout; any unit conversion
// happens at the CLI boundary.

namespace bitload {

using ArrayXb = Eigen::Array<bool, Eigen::Dynamic, 1>;

inline constexpr double kBerCoefficient = 0.2;
inline constexpr double kSnrGapFactor = 1.6;
inline constexpr double kMinBits = 2.0;  // 4-QAM floor

// Feasibility tolerances: equality-by-construction allocations must pass.
inline constexpr double kBerResidualTol = 1e-12;          // absolute, per subcarrier
inline constexpr double kPowerResidualRelTol = 1e-15;     // relative, scaled by N

inline constexpr double kUnboundedPower = std::numeric_limits<double>::infinity();

/// System-wide allocation parameters. `power_threshold` is +inf when the
/// total-power constraint is absent.
struct SystemConfig {
  int num_subcarriers = 0;
  double alpha = 0.5;                    // objective weight, in (0, 1)
  Eigen::ArrayXd ber_targets;            // one target per subcarrier, each in (0, 0.2)
  double noise_variance = 0.0;           // W
  double power_threshold = kUnboundedPower;  // W
  std::optional<int> max_bits_per_subcarrier;  // cap for the oracle and, when set, discretization

  bool bounded() const { return power_threshold != kUnboundedPower; }

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  /// Uniform BER target broadcast across all subcarriers.
  static SystemConfig uniform(int num_subcarriers, double alpha, double ber_target,
                              double noise_variance,
                              double power_threshold = kUnboundedPower);
};

/// Discrete allocation: bits[i] is 0 (nulled) or >= 2, powers[i] = 0 iff bits[i] = 0.
struct Allocation {
  Eigen::ArrayXi bits;
  Eigen::ArrayXd powers;   // W
  double objective_value = 0.0;

  int size() const { return static_cast<int>(bits.size()); }
  long total_bits() const { return bits.cast<long>().sum(); }
  double total_power() const { return powers.sum(); }

  static Allocation null_allocation(int num_subcarriers);
};

/// Real-valued stationary solution before rounding. Inactive subcarriers carry
/// zeros; active ones satisfy bits >= 2.
struct ContinuousAllocation {
  Eigen::ArrayXd bits;
  Eigen::ArrayXd powers;  // W
  ArrayXb active;

  int size() const { return static_cast<int>(bits.size()); }
};

/// BER of a b-bit QAM subcarrier at transmit power `power`. Strictly
/// decreasing in power, strictly increasing in bits; range (0, 0.2].
double ber_estimate(double power, double bits, double cnr);

/// Power that meets `ber_target` with equality at `bits` (real-valued bits
/// define the BER-equality curve used by the grid checks):
///   P = (2^bits - 1) * ln(0.2 / ber_target) / (1.6 * cnr).
double power_for_ber(double bits, double cnr, double ber_target);

/// Scalarized objective F = alpha * sum(P) - (1 - alpha) * sum(b).
double objective(double total_power, double total_bits, double alpha);
double objective(const Allocation& alloc, double alpha);

/// N+1 feasibility residuals (g_j <= 0 means feasible): N per-subcarrier BER
/// residuals followed by the total-power residual. Nulled subcarriers
/// contribute -ber_target; an unbounded power threshold yields a large
/// negative sentinel.
Eigen::ArrayXd constraint_residuals(const Allocation& alloc, const SystemConfig& cfg,
                                    const Eigen::ArrayXd& cnrs);

/// Residual check at the standard tolerances (kBerResidualTol absolute on BER,
/// kPowerResidualRelTol * N relative on total power).
bool is_feasible(const Allocation& alloc, const SystemConfig& cfg,
                 const Eigen::ArrayXd& cnrs);

/// Per-subcarrier Lagrange multiplier of the BER constraint at a stationary
/// point; positive for every valid input. Verification aid only.
double kkt_multiplier(double power, double bits, double cnr, double alpha);

}  // namespace bitload
