#include "bitload/core_math.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace bitload {

namespace {

[[noreturn]] void fail_field(const std::string& field, const std::string& detail) {
  throw std::invalid_argument("system." + field + ": " + detail);
}

}  // namespace

void SystemConfig::validate() const {
  if (num_subcarriers < 1) {
    fail_field("num_subcarriers", "must be a positive integer");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    std::ostringstream os;
    os << "must lie in the open interval (0, 1), got " << alpha;
    fail_field("alpha", os.str());
  }
  if (ber_targets.size() != num_subcarriers) {
    fail_field("ber_target", "needs one entry per subcarrier");
  }
  for (Eigen::Index i = 0; i < ber_targets.size(); ++i) {
    if (!(ber_targets[i] > 0.0 && ber_targets[i] < kBerCoefficient)) {
      std::ostringstream os;
      os << "each target must lie in (0, 0.2), got " << ber_targets[i]
         << " at subcarrier " << i;
      fail_field("ber_target", os.str());
    }
  }
  if (!(noise_variance > 0.0)) {
    fail_field("noise_variance", "must be positive");
  }
  if (!(power_threshold > 0.0)) {
    fail_field("power_threshold", "must be positive (or unbounded)");
  }
  if (max_bits_per_subcarrier && *max_bits_per_subcarrier < 2) {
    fail_field("max_bits", "cap must be at least 2");
  }
}

SystemConfig SystemConfig::uniform(int num_subcarriers, double alpha, double ber_target,
                                   double noise_variance, double power_threshold) {
  SystemConfig cfg;
  cfg.num_subcarriers = num_subcarriers;
  cfg.alpha = alpha;
  cfg.ber_targets = Eigen::ArrayXd::Constant(num_subcarriers, ber_target);
  cfg.noise_variance = noise_variance;
  cfg.power_threshold = power_threshold;
  return cfg;
}

Allocation Allocation::null_allocation(int num_subcarriers) {
  Allocation alloc;
  alloc.bits = Eigen::ArrayXi::Zero(num_subcarriers);
  alloc.powers = Eigen::ArrayXd::Zero(num_subcarriers);
  alloc.objective_value = 0.0;
  return alloc;
}

double ber_estimate(double power, double bits, double cnr) {
  if (bits < kMinBits) {
    throw std::domain_error("ber_estimate: bits below the 4-QAM floor");
  }
  if (!(cnr > 0.0)) {
    throw std::domain_error("ber_estimate: cnr must be positive");
  }
  if (power < 0.0) {
    throw std::domain_error("ber_estimate: power must be nonnegative");
  }
  return kBerCoefficient *
         std::exp(-kSnrGapFactor * power * cnr / (std::exp2(bits) - 1.0));
}

double power_for_ber(double bits, double cnr, double ber_target) {
  if (bits < kMinBits) {
    throw std::domain_error("power_for_ber: bits below the 4-QAM floor");
  }
  if (!(cnr > 0.0)) {
    throw std::domain_error("power_for_ber: cnr must be positive");
  }
  if (!(ber_target > 0.0 && ber_target < kBerCoefficient)) {
    throw std::domain_error("power_for_ber: ber_target must lie in (0, 0.2)");
  }
  return (std::exp2(bits) - 1.0) * std::log(kBerCoefficient / ber_target) /
         (kSnrGapFactor * cnr);
}

double objective(double total_power, double total_bits, double alpha) {
  return alpha * total_power - (1.0 - alpha) * total_bits;
}

double objective(const Allocation& alloc, double alpha) {
  return objective(alloc.total_power(), static_cast<double>(alloc.total_bits()), alpha);
}

Eigen::ArrayXd constraint_residuals(const Allocation& alloc, const SystemConfig& cfg,
                                    const Eigen::ArrayXd& cnrs) {
  const int n = cfg.num_subcarriers;
  Eigen::ArrayXd residuals(n + 1);
  for (int i = 0; i < n; ++i) {
    if (alloc.bits[i] == 0) {
      residuals[i] = -cfg.ber_targets[i];
    } else {
      residuals[i] =
          ber_estimate(alloc.powers[i], alloc.bits[i], cnrs[i]) - cfg.ber_targets[i];
    }
  }
  if (cfg.bounded()) {
    residuals[n] = alloc.total_power() - cfg.power_threshold;
  } else {
    residuals[n] = -std::numeric_limits<double>::max();
  }
  return residuals;
}

bool is_feasible(const Allocation& alloc, const SystemConfig& cfg,
                 const Eigen::ArrayXd& cnrs) {
  const Eigen::ArrayXd residuals = constraint_residuals(alloc, cfg, cnrs);
  const int n = cfg.num_subcarriers;
  for (int i = 0; i < n; ++i) {
    if (residuals[i] > kBerResidualTol) {
      return false;
    }
  }
  if (!cfg.bounded()) {
    return true;
  }
  return residuals[n] <= kPowerResidualRelTol * n * cfg.power_threshold;
}

double kkt_multiplier(double power, double bits, double cnr, double alpha) {
  if (bits < kMinBits) {
    throw std::domain_error("kkt_multiplier: bits below the 4-QAM floor");
  }
  if (!(cnr > 0.0)) {
    throw std::domain_error("kkt_multiplier: cnr must be positive");
  }
  if (power < 0.0) {
    throw std::domain_error("kkt_multiplier: power must be nonnegative");
  }
  const double denom = std::exp2(bits) - 1.0;
  const double slope = kBerCoefficient * kSnrGapFactor * cnr / denom *
                       std::exp(-kSnrGapFactor * cnr * power / denom);
  return alpha / slope;
}

}  // namespace bitload
