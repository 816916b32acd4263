#include "bitload/alloc.hpp"

#include "bitload/detail/format.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace bitload {

namespace {

// (1 - alpha) / (alpha ln 2): scale of the stationary power expression.
double weight_ratio(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::domain_error("alpha must lie in (0, 1)");
  }
  return (1.0 - alpha) / (alpha * std::numbers::ln2);
}

double log_ber_margin(double ber_target) {
  if (!(ber_target > 0.0 && ber_target < kBerCoefficient)) {
    throw std::domain_error("ber_target must lie in (0, 0.2)");
  }
  return std::log(kBerCoefficient / ber_target);
}

void require_same_size(const Eigen::ArrayXd& cnrs, const Eigen::ArrayXd& ber_targets) {
  if (cnrs.size() != ber_targets.size()) {
    throw std::invalid_argument("cnrs and ber_targets must have equal length");
  }
}

void require_valid_cnrs(const Eigen::ArrayXd& cnrs) {
  for (Eigen::Index i = 0; i < cnrs.size(); ++i) {
    if (!(cnrs[i] >= 0.0) || !std::isfinite(cnrs[i])) {
      throw std::invalid_argument("cnrs[" + std::to_string(i) +
                                  "] must be finite and nonnegative");
    }
  }
}

// Sequential sum; selection loops below depend on a fixed association order.
double total_power_of(const Eigen::ArrayXd& powers) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < powers.size(); ++i) total += powers[i];
  return total;
}

}  // namespace

double activation_threshold(double alpha, double ber_target) {
  // Solves continuous_bits(cnr) == 2 for cnr: the 4-QAM floor is the smallest
  // admissible load, so below this ratio the subcarrier stays silent.
  return std::exp2(kMinBits) * log_ber_margin(ber_target) /
         (kSnrGapFactor * weight_ratio(alpha));
}

double continuous_bits(double cnr, double alpha, double ber_target) {
  if (!(cnr > 0.0)) {
    throw std::domain_error("continuous_bits: cnr must be positive");
  }
  return std::log2(weight_ratio(alpha) * kSnrGapFactor * cnr / log_ber_margin(ber_target));
}

double continuous_power(double bits, double alpha) {
  return weight_ratio(alpha) * (1.0 - std::exp2(-bits));
}

ContinuousAllocation closed_form_continuous(const Eigen::ArrayXd& cnrs, double alpha,
                                            const Eigen::ArrayXd& ber_targets) {
  require_same_size(cnrs, ber_targets);
  require_valid_cnrs(cnrs);
  const Eigen::Index n = cnrs.size();

  ContinuousAllocation cont;
  cont.bits = Eigen::ArrayXd::Zero(n);
  cont.powers = Eigen::ArrayXd::Zero(n);
  cont.active = ArrayXb::Constant(n, false);

  for (Eigen::Index i = 0; i < n; ++i) {
    const double threshold = activation_threshold(alpha, ber_targets[i]);
    if (cnrs[i] < threshold) continue;
    // At cnr == threshold the stationary load is exactly the floor; the max
    // guards the last-ulp case where log2 rounds a hair below it.
    const double bits = std::max(continuous_bits(cnrs[i], alpha, ber_targets[i]), kMinBits);
    cont.bits[i] = bits;
    cont.powers[i] = continuous_power(bits, alpha);
    cont.active[i] = true;
  }
  return cont;
}

Allocation discretize(const ContinuousAllocation& cont, const Eigen::ArrayXd& cnrs,
                      const Eigen::ArrayXd& ber_targets, double alpha,
                      std::optional<int> max_bits) {
  require_same_size(cnrs, ber_targets);
  if (cont.size() != cnrs.size()) {
    throw std::invalid_argument("continuous allocation and cnrs must have equal length");
  }
  const Eigen::Index n = cnrs.size();

  Allocation alloc = Allocation::null_allocation(static_cast<int>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!cont.active[i]) continue;
    int bits = static_cast<int>(std::round(cont.bits[i]));  // halves away from zero
    if (max_bits) bits = std::min(bits, *max_bits);
    if (bits < static_cast<int>(kMinBits)) {
      // Active loads are >= 2 by construction, so rounding cannot go below it.
      throw std::logic_error("discretize: rounded load fell below the 4-QAM floor");
    }
    alloc.bits[i] = bits;
    // Rounding breaks the BER equality the continuous power satisfied;
    // restore it at the integer load.
    alloc.powers[i] = power_for_ber(bits, cnrs[i], ber_targets[i]);
  }
  alloc.objective_value = objective(alloc, alpha);
  return alloc;
}

std::pair<Allocation, AllocationTrace> enforce_power_budget(
    const Allocation& alloc, const Eigen::ArrayXd& cnrs,
    const Eigen::ArrayXd& ber_targets, double power_threshold, double alpha) {
  require_same_size(cnrs, ber_targets);
  if (alloc.size() != cnrs.size()) {
    throw std::invalid_argument("allocation and cnrs must have equal length");
  }
  if (!(power_threshold > 0.0)) {
    throw std::invalid_argument("power_threshold must be positive");
  }

  const Eigen::Index n = cnrs.size();
  Eigen::ArrayXi bits = alloc.bits;
  Eigen::ArrayXd powers = alloc.powers;

  AllocationTrace trace;
  trace.initial = alloc;

  // release[i]: power freed by taking one bit (or the whole floor load) off
  // subcarrier i. Only the touched entry changes between iterations.
  std::vector<double> release(static_cast<std::size_t>(n), 0.0);
  std::vector<double> next_power(static_cast<std::size_t>(n), 0.0);
  auto refresh = [&](Eigen::Index i) {
    if (bits[i] == 0) {
      release[i] = 0.0;
      next_power[i] = 0.0;
    } else if (bits[i] == static_cast<int>(kMinBits)) {
      // Below the floor the subcarrier goes silent and releases everything.
      release[i] = powers[i];
      next_power[i] = 0.0;
    } else {
      next_power[i] = power_for_ber(bits[i] - 1, cnrs[i], ber_targets[i]);
      release[i] = powers[i] - next_power[i];
    }
  };
  for (Eigen::Index i = 0; i < n; ++i) refresh(i);

  while (total_power_of(powers) > power_threshold) {
    Eigen::Index best = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (bits[i] == 0) continue;
      if (best < 0 || release[i] > release[best]) best = i;  // ties keep the lowest index
    }
    if (best < 0) break;  // nothing left to remove; total is zero

    RemovalStep step;
    step.subcarrier_index = static_cast<int>(best);
    step.bits_before = bits[best];
    step.bits_after = bits[best] == static_cast<int>(kMinBits) ? 0 : bits[best] - 1;
    step.power_released = powers[best] - next_power[best];

    bits[best] = step.bits_after;
    powers[best] = next_power[best];
    refresh(best);
    trace.steps.push_back(step);
  }

  Allocation trimmed;
  trimmed.bits = std::move(bits);
  trimmed.powers = std::move(powers);
  trimmed.objective_value = objective(trimmed, alpha);
  trace.final = trimmed;
  return {trimmed, trace};
}

std::pair<Allocation, AllocationTrace> allocate(const Eigen::ArrayXd& cnrs,
                                                const SystemConfig& cfg) {
  cfg.validate();
  if (cnrs.size() != cfg.num_subcarriers) {
    throw std::invalid_argument("cnrs length does not match system.num_subcarriers");
  }
  require_valid_cnrs(cnrs);

  const ContinuousAllocation cont = closed_form_continuous(cnrs, cfg.alpha, cfg.ber_targets);
  const Allocation rounded =
      discretize(cont, cnrs, cfg.ber_targets, cfg.alpha, cfg.max_bits_per_subcarrier);
  if (cfg.bounded()) {
    return enforce_power_budget(rounded, cnrs, cfg.ber_targets, cfg.power_threshold,
                                cfg.alpha);
  }
  AllocationTrace trace;
  trace.initial = rounded;
  trace.final = rounded;
  return {rounded, trace};
}

Allocation uniform_power_baseline(const Eigen::ArrayXd& cnrs, const SystemConfig& cfg,
                                  double total_power) {
  cfg.validate();
  if (cnrs.size() != cfg.num_subcarriers) {
    throw std::invalid_argument("cnrs length does not match system.num_subcarriers");
  }
  require_valid_cnrs(cnrs);
  if (!(total_power >= 0.0) || !std::isfinite(total_power)) {
    throw std::invalid_argument("total_power must be finite and nonnegative");
  }

  const Eigen::Index n = cnrs.size();
  const double per_subcarrier = total_power / static_cast<double>(n);
  const int cap = cfg.max_bits_per_subcarrier.value_or(std::numeric_limits<int>::max());

  Eigen::ArrayXi bits = Eigen::ArrayXi::Zero(n);
  // current_ber[i] holds the BER at the present load, next_ber[i] the BER one
  // bit higher (or at the floor when silent); only the granted subcarrier's
  // entries change between rounds.
  std::vector<double> current_ber(static_cast<std::size_t>(n), 0.0);
  std::vector<double> next_ber(static_cast<std::size_t>(n),
                               std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (cnrs[i] > 0.0) next_ber[i] = ber_estimate(per_subcarrier, kMinBits, cnrs[i]);
  }

  while (true) {
    // Means over the loaded set only; silent subcarriers carry no traffic and
    // do not dilute the error rate.
    double sum_ber = 0.0;
    double sum_target = 0.0;
    int loaded = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (bits[i] == 0) continue;
      sum_ber += current_ber[i];
      sum_target += cfg.ber_targets[i];
      ++loaded;
    }

    Eigen::Index best = -1;
    double best_mean = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (cnrs[i] <= 0.0) continue;
      if (bits[i] >= cap) continue;
      double cand_mean;
      double cand_target_mean;
      if (bits[i] == 0) {
        cand_mean = (sum_ber + next_ber[i]) / (loaded + 1);
        cand_target_mean = (sum_target + cfg.ber_targets[i]) / (loaded + 1);
      } else {
        cand_mean = (sum_ber - current_ber[i] + next_ber[i]) / loaded;
        cand_target_mean = sum_target / loaded;
      }
      if (cand_mean > cand_target_mean + kBerResidualTol) continue;
      if (cand_mean < best_mean) {  // ties keep the lowest index
        best_mean = cand_mean;
        best = i;
      }
    }
    if (best < 0) break;

    bits[best] = bits[best] == 0 ? static_cast<int>(kMinBits) : bits[best] + 1;
    current_ber[best] = next_ber[best];
    next_ber[best] = ber_estimate(per_subcarrier, bits[best] + 1, cnrs[best]);
  }

  Allocation alloc;
  alloc.bits = std::move(bits);
  alloc.powers = Eigen::ArrayXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (alloc.bits[i] > 0) alloc.powers[i] = per_subcarrier;
  }
  alloc.objective_value = objective(alloc, cfg.alpha);
  return alloc;
}

namespace {

// Depth-first enumeration over per-subcarrier load menus in ascending order,
// so the first optimum found is the lexicographically smallest one. Two exact
// prunes: partial power already over the threshold (powers only grow with
// depth), and partial objective plus a per-suffix lower bound unable to beat
// the incumbent strictly.
struct OracleSearch {
  struct Level {
    int bits;
    double power;
    double cost;  // alpha * power - (1 - alpha) * bits
  };

  Eigen::Index n = 0;
  double power_threshold = 0.0;
  std::vector<std::vector<Level>> menus;
  std::vector<double> suffix_bound;  // min achievable cost from depth k onward

  std::vector<int> bits;
  std::vector<int> best_bits;
  double best_cost = std::numeric_limits<double>::infinity();

  void run() {
    bits.assign(static_cast<std::size_t>(n), 0);
    descend(0, 0.0, 0.0);
  }

  void descend(Eigen::Index depth, double partial_power, double partial_cost) {
    if (depth == n) {
      if (partial_cost < best_cost) {
        best_cost = partial_cost;
        best_bits = bits;
      }
      return;
    }
    for (const Level& level : menus[static_cast<std::size_t>(depth)]) {
      const double power = partial_power + level.power;
      if (power > power_threshold) break;  // menu power is ascending
      const double cost = partial_cost + level.cost;
      if (cost + suffix_bound[static_cast<std::size_t>(depth) + 1] >= best_cost) continue;
      bits[static_cast<std::size_t>(depth)] = level.bits;
      descend(depth + 1, power, cost);
    }
    bits[static_cast<std::size_t>(depth)] = 0;
  }
};

}  // namespace

Allocation exhaustive_oracle(const Eigen::ArrayXd& cnrs, const SystemConfig& cfg,
                             int b_max, bool force) {
  cfg.validate();
  if (cnrs.size() != cfg.num_subcarriers) {
    throw std::invalid_argument("cnrs length does not match system.num_subcarriers");
  }
  require_valid_cnrs(cnrs);
  if (b_max < static_cast<int>(kMinBits)) {
    throw std::invalid_argument("b_max must be at least the 4-QAM floor");
  }

  const Eigen::Index n = cnrs.size();
  const int cap = std::min(b_max, cfg.max_bits_per_subcarrier.value_or(b_max));
  const double search_exponent = static_cast<double>(n) * std::log2(cap + 1.0);
  if (search_exponent > 40.0 && !force) {
    throw OracleGuardError(
        "exhaustive search over roughly 2^" + std::to_string(search_exponent) +
        " load vectors refused; rerun with force to override");
  }

  OracleSearch search;
  search.n = n;
  search.power_threshold = cfg.power_threshold;
  search.menus.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& menu = search.menus[static_cast<std::size_t>(i)];
    menu.push_back({0, 0.0, 0.0});
    if (cnrs[i] <= 0.0) continue;
    // Keep a load only when it beats every cheaper load on cost: anything
    // else is never part of an optimum (a cheaper load with no worse cost
    // would replace it), and on equal cost the cheaper load wins the
    // lexicographic tie anyway.
    double running_min = 0.0;
    for (int b = static_cast<int>(kMinBits); b <= cap; ++b) {
      const double power = power_for_ber(b, cnrs[i], cfg.ber_targets[i]);
      const double cost = cfg.alpha * power - (1.0 - cfg.alpha) * b;
      if (cost >= running_min) continue;
      running_min = cost;
      menu.push_back({b, power, cost});
    }
  }

  search.suffix_bound.assign(static_cast<std::size_t>(n) + 1, 0.0);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    double lowest = 0.0;
    for (const auto& level : search.menus[static_cast<std::size_t>(i)]) {
      lowest = std::min(lowest, level.cost);
    }
    search.suffix_bound[static_cast<std::size_t>(i)] =
        lowest + search.suffix_bound[static_cast<std::size_t>(i) + 1];
  }

  search.run();

  Allocation best = Allocation::null_allocation(static_cast<int>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int b = search.best_bits[static_cast<std::size_t>(i)];
    if (b == 0) continue;
    best.bits[i] = b;
    best.powers[i] = power_for_ber(b, cnrs[i], cfg.ber_targets[i]);
  }
  best.objective_value = objective(best, cfg.alpha);
  return best;
}

void write_allocation_table(std::ostream& os, const Eigen::ArrayXd& cnrs,
                            const Allocation& unconstrained,
                            const Allocation& final_alloc) {
  if (unconstrained.size() != cnrs.size() || final_alloc.size() != cnrs.size()) {
    throw std::invalid_argument("write_allocation_table: length mismatch");
  }
  os << "index,cnr,bits_unconstrained,power_unconstrained_W,bits_final,power_final_W\n";
  for (Eigen::Index i = 0; i < cnrs.size(); ++i) {
    os << i << ',' << detail::format_g17(cnrs[i]) << ',' << unconstrained.bits[i] << ','
       << detail::format_g17(unconstrained.powers[i]) << ',' << final_alloc.bits[i] << ','
       << detail::format_g17(final_alloc.powers[i]) << '\n';
  }
}

void write_allocation_table(const std::filesystem::path& path, const Eigen::ArrayXd& cnrs,
                            const Allocation& unconstrained, const Allocation& final_alloc,
                            const std::vector<std::string>& header_comments) {
  std::ofstream os(path);
  if (!os) {
    throw std::runtime_error("cannot open allocation table for writing: " + path.string());
  }
  for (const auto& line : header_comments) {
    os << "# " << line << '\n';
  }
  write_allocation_table(os, cnrs, unconstrained, final_alloc);
  if (!os) {
    throw std::runtime_error("failed writing allocation table: " + path.string());
  }
}

}  // namespace bitload
