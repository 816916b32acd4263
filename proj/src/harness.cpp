#include "bitload/harness.hpp"

#include "bitload/detail/format.hpp"
#include "bitload/version.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace bitload {

namespace {

using detail::format_g17;

// The exhaustive search can only tie or beat the greedy pipeline; anything
// past this slack is an implementation bug, not noise.
constexpr double kOracleDominanceTol = 1e-9;

// Salt for picking the ~1% feasibility audit sample; any fixed value works,
// it only has to be independent of the trial seeds themselves.
constexpr std::uint64_t kAuditSalt = 0x5FEA51B1D00DULL;

[[noreturn]] void bad_name(const std::string& what, const std::string& name,
                           const std::string& options) {
  throw std::invalid_argument("unknown " + what + " \"" + name + "\" (expected one of " +
                              options + ")");
}

}  // namespace

std::string to_string(SweepVariable variable) {
  switch (variable) {
    case SweepVariable::noise_variance: return "noise_variance";
    case SweepVariable::alpha: return "alpha";
    case SweepVariable::power_threshold: return "power_threshold";
  }
  throw std::logic_error("unreachable sweep variable");
}

std::string to_string(AllocatorKind kind) {
  switch (kind) {
    case AllocatorKind::proposed: return "proposed";
    case AllocatorKind::proposed_unconstrained: return "proposed_unconstrained";
    case AllocatorKind::baseline: return "baseline";
    case AllocatorKind::oracle: return "oracle";
  }
  throw std::logic_error("unreachable allocator kind");
}

SweepVariable sweep_variable_from_string(const std::string& name) {
  if (name == "noise_variance") return SweepVariable::noise_variance;
  if (name == "alpha") return SweepVariable::alpha;
  if (name == "power_threshold") return SweepVariable::power_threshold;
  bad_name("sweep variable", name, "noise_variance, alpha, power_threshold");
}

AllocatorKind allocator_from_string(const std::string& name) {
  if (name == "proposed") return AllocatorKind::proposed;
  if (name == "proposed_unconstrained") return AllocatorKind::proposed_unconstrained;
  if (name == "baseline") return AllocatorKind::baseline;
  if (name == "oracle") return AllocatorKind::oracle;
  bad_name("allocator", name, "proposed, proposed_unconstrained, baseline, oracle");
}

double PowerBudget::resolve(double unconstrained_total) const {
  switch (mode) {
    case Mode::unbounded: return kUnboundedPower;
    case Mode::absolute: return value;
    case Mode::fraction: return value * unconstrained_total;
  }
  throw std::logic_error("unreachable budget mode");
}

void PowerBudget::validate() const {
  if (mode == Mode::unbounded) return;
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw std::invalid_argument("budget.value: must be positive and finite");
  }
}

void SweepSpec::validate() const {
  if (values.empty()) {
    throw std::invalid_argument("sweep.values: must not be empty");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw std::invalid_argument("sweep.values: entries must be finite");
    }
    if (i > 0 && values[i] < values[i - 1]) {
      throw std::invalid_argument("sweep.values: must be sorted ascending");
    }
    const bool ok = variable == SweepVariable::alpha ? values[i] > 0.0 && values[i] < 1.0
                                                     : values[i] > 0.0;
    if (!ok) {
      throw std::invalid_argument("sweep.values: out of range for " + to_string(variable));
    }
  }
  fixed.validate();
  if (fixed.bounded()) {
    throw std::invalid_argument(
        "sweep.fixed.power_threshold: set the sweep budget instead of a fixed threshold");
  }
  channel.validate();
  if (channel.num_subcarriers != fixed.num_subcarriers) {
    throw std::invalid_argument(
        "sweep.channel.num_subcarriers: must match system.num_subcarriers");
  }
  if (num_realizations < 1) {
    throw std::invalid_argument("sweep.num_realizations: must be positive");
  }
  if (allocators.empty()) {
    throw std::invalid_argument("sweep.allocators: must not be empty");
  }
  for (std::size_t i = 0; i < allocators.size(); ++i) {
    for (std::size_t j = i + 1; j < allocators.size(); ++j) {
      if (allocators[i] == allocators[j]) {
        throw std::invalid_argument("sweep.allocators: duplicate entry " +
                                    to_string(allocators[i]));
      }
    }
  }
  budget.validate();
  if (variable == SweepVariable::power_threshold &&
      budget.mode == PowerBudget::Mode::unbounded) {
    throw std::invalid_argument(
        "sweep.budget: sweeping power_threshold needs an absolute or fraction mode");
  }
  const bool wants_oracle =
      std::find(allocators.begin(), allocators.end(), AllocatorKind::oracle) !=
      allocators.end();
  if (wants_oracle) {
    if (oracle_b_max < static_cast<int>(kMinBits)) {
      throw std::invalid_argument("sweep.oracle_b_max: must be at least the 4-QAM floor");
    }
    const int cap = std::min(oracle_b_max,
                             fixed.max_bits_per_subcarrier.value_or(oracle_b_max));
    const double exponent = fixed.num_subcarriers * std::log2(cap + 1.0);
    if (exponent > 40.0 && !force_oracle) {
      throw OracleGuardError("sweep requests the exhaustive allocator over roughly 2^" +
                             std::to_string(exponent) +
                             " load vectors; shrink the problem or set force");
    }
  }
}

void KahanSum::add(double term) {
  const double t = sum + term;
  if (std::abs(sum) >= std::abs(term)) {
    compensation += (sum - t) + term;
  } else {
    compensation += (term - t) + sum;
  }
  sum = t;
}

namespace {

// Everything the per-trial pipeline produces that more than one allocator
// reuses: the budget resolves against the unconstrained total, and the
// uniform-power baseline spends the constrained scheme's power.
struct TrialPipeline {
  Eigen::ArrayXd cnrs;
  Allocation unconstrained;
  double resolved_threshold = kUnboundedPower;
  Allocation proposed;
};

TrialPipeline run_pipeline(const Eigen::ArrayXcd& gains, const SystemConfig& cfg,
                           const PowerBudget& budget) {
  TrialPipeline trial;
  trial.cnrs = channel_to_noise(gains, cfg.noise_variance);
  const ContinuousAllocation cont =
      closed_form_continuous(trial.cnrs, cfg.alpha, cfg.ber_targets);
  trial.unconstrained =
      discretize(cont, trial.cnrs, cfg.ber_targets, cfg.alpha, cfg.max_bits_per_subcarrier);
  trial.resolved_threshold = budget.resolve(trial.unconstrained.total_power());
  if (trial.resolved_threshold < kUnboundedPower &&
      trial.unconstrained.total_power() > trial.resolved_threshold) {
    trial.proposed = enforce_power_budget(trial.unconstrained, trial.cnrs, cfg.ber_targets,
                                          trial.resolved_threshold, cfg.alpha)
                         .first;
  } else {
    trial.proposed = trial.unconstrained;
  }
  return trial;
}

Allocation run_allocator(AllocatorKind kind, const TrialPipeline& trial,
                         const SystemConfig& cfg, const SweepSpec& spec) {
  switch (kind) {
    case AllocatorKind::proposed:
      return trial.proposed;
    case AllocatorKind::proposed_unconstrained:
      return trial.unconstrained;
    case AllocatorKind::baseline:
      return uniform_power_baseline(trial.cnrs, cfg, trial.proposed.total_power());
    case AllocatorKind::oracle: {
      if (trial.resolved_threshold <= 0.0) {
        // A zero budget admits only the silent allocation.
        return Allocation::null_allocation(cfg.num_subcarriers);
      }
      SystemConfig bounded = cfg;
      bounded.power_threshold = trial.resolved_threshold;
      return exhaustive_oracle(trial.cnrs, bounded, spec.oracle_b_max, spec.force_oracle);
    }
  }
  throw std::logic_error("unreachable allocator kind");
}

// The equality-designed allocators must satisfy every per-subcarrier BER
// residual and the power budget; the uniform-power baseline answers to its
// mean-BER rule instead.
void audit_trial(AllocatorKind kind, const Allocation& alloc, const TrialPipeline& trial,
                 const SystemConfig& cfg, double sweep_value, int trial_index) {
  bool ok = true;
  if (kind == AllocatorKind::baseline) {
    double sum_ber = 0.0;
    double sum_target = 0.0;
    int loaded = 0;
    for (int i = 0; i < alloc.size(); ++i) {
      if (alloc.bits[i] == 0) continue;
      sum_ber += ber_estimate(alloc.powers[i], alloc.bits[i], trial.cnrs[i]);
      sum_target += cfg.ber_targets[i];
      ++loaded;
    }
    ok = loaded == 0 || sum_ber / loaded <= sum_target / loaded + kBerResidualTol;
  } else {
    SystemConfig check = cfg;
    check.power_threshold = kind == AllocatorKind::proposed_unconstrained
                                ? kUnboundedPower
                                : std::max(trial.resolved_threshold,
                                           std::numeric_limits<double>::min());
    ok = is_feasible(alloc, check, trial.cnrs);
  }
  if (!ok) {
    throw std::logic_error("feasibility audit failed for " + to_string(kind) +
                           " at sweep value " + format_g17(sweep_value) + ", trial " +
                           std::to_string(trial_index));
  }
}

}  // namespace

std::vector<TrialSummary> run_point(const SweepSpec& spec, double sweep_value,
                                    const std::vector<Eigen::ArrayXcd>& gains) {
  if (static_cast<int>(gains.size()) != spec.num_realizations) {
    throw std::invalid_argument("run_point: one gain vector per realization required");
  }

  SystemConfig cfg = spec.fixed;
  PowerBudget budget = spec.budget;
  switch (spec.variable) {
    case SweepVariable::noise_variance: cfg.noise_variance = sweep_value; break;
    case SweepVariable::alpha: cfg.alpha = sweep_value; break;
    case SweepVariable::power_threshold: budget.value = sweep_value; break;
  }

  const std::size_t num_allocators = spec.allocators.size();
  std::vector<KahanSum> bits_sum(num_allocators);
  std::vector<KahanSum> power_sum(num_allocators);
  std::vector<KahanSum> objective_sum(num_allocators);
  std::vector<KahanSum> snr_sum(num_allocators);

  for (int trial = 0; trial < spec.num_realizations; ++trial) {
    const TrialPipeline pipeline = run_pipeline(gains[trial], cfg, budget);
    const bool audit =
        spec.check_all_feasibility ||
        derive_seed(spec.master_seed ^ kAuditSalt, static_cast<std::uint64_t>(trial)) %
                100 ==
            0;
    for (std::size_t a = 0; a < num_allocators; ++a) {
      const Allocation alloc = run_allocator(spec.allocators[a], pipeline, cfg, spec);
      if (audit) audit_trial(spec.allocators[a], alloc, pipeline, cfg, sweep_value, trial);
      bits_sum[a].add(static_cast<double>(alloc.total_bits()));
      power_sum[a].add(alloc.total_power());
      objective_sum[a].add(alloc.objective_value);
      for (int i = 0; i < alloc.size(); ++i) {
        snr_sum[a].add(alloc.powers[i] * pipeline.cnrs[i]);
      }
    }
  }

  std::vector<TrialSummary> points(num_allocators);
  const double denom = static_cast<double>(spec.num_realizations);
  const double snr_denom = denom * spec.fixed.num_subcarriers;
  for (std::size_t a = 0; a < num_allocators; ++a) {
    TrialSummary& point = points[a];
    point.sweep_value = sweep_value;
    point.avg_throughput = bits_sum[a].value() / denom;
    point.avg_transmit_power = power_sum[a].value() / denom;
    point.avg_objective = objective_sum[a].value() / denom;
    const double mean_snr = snr_sum[a].value() / snr_denom;
    point.avg_reported_snr_db = mean_snr > 0.0
                                    ? 10.0 * std::log10(mean_snr)
                                    : -std::numeric_limits<double>::infinity();
    point.num_realizations = spec.num_realizations;
  }
  return points;
}

std::vector<AllocatorSeries> run_sweep(const SweepSpec& spec) {
  spec.validate();

  // Channel gains are drawn once per trial and shared across sweep values:
  // sweep points differ only in the swept parameter, never in the fading.
  std::vector<Eigen::ArrayXcd> gains;
  gains.reserve(static_cast<std::size_t>(spec.num_realizations));
  for (int trial = 0; trial < spec.num_realizations; ++trial) {
    std::mt19937_64 rng(derive_seed(spec.master_seed, static_cast<std::uint64_t>(trial)));
    const Eigen::ArrayXcd taps = generate_impulse_response(spec.channel, rng);
    gains.push_back(frequency_response(taps, spec.channel.num_subcarriers));
  }

  std::vector<AllocatorSeries> series(spec.allocators.size());
  for (std::size_t a = 0; a < spec.allocators.size(); ++a) {
    series[a].allocator = spec.allocators[a];
    series[a].points.reserve(spec.values.size());
  }
  for (double value : spec.values) {
    std::vector<TrialSummary> points = run_point(spec, value, gains);
    for (std::size_t a = 0; a < points.size(); ++a) {
      series[a].points.push_back(points[a]);
    }
  }
  return series;
}

double reported_average_snr(const std::vector<Allocation>& allocations,
                            const std::vector<ChannelRealization>& realizations,
                            double noise_variance) {
  if (allocations.size() != realizations.size() || allocations.empty()) {
    throw std::invalid_argument(
        "reported_average_snr: need equally many allocations and realizations");
  }
  if (!(noise_variance > 0.0)) {
    throw std::invalid_argument("reported_average_snr: noise_variance must be positive");
  }
  KahanSum sum;
  long count = 0;
  for (std::size_t r = 0; r < allocations.size(); ++r) {
    const Allocation& alloc = allocations[r];
    const ChannelRealization& ch = realizations[r];
    if (alloc.size() != ch.size()) {
      throw std::invalid_argument("reported_average_snr: allocation/realization mismatch");
    }
    for (int i = 0; i < alloc.size(); ++i) {
      sum.add(alloc.powers[i] * std::norm(ch.gains[i]) / noise_variance);
    }
    count += alloc.size();
  }
  const double mean = sum.value() / static_cast<double>(count);
  return mean > 0.0 ? 10.0 * std::log10(mean)
                    : -std::numeric_limits<double>::infinity();
}

OracleComparison compare_to_oracle(const SweepSpec& spec) {
  // The generic validation only guards the oracle when it is a sweep
  // allocator; here the search always runs, so guard unconditionally. The
  // comparison has no sweep axis, so an empty value list is tolerated.
  SweepSpec guarded = spec;
  if (std::find(guarded.allocators.begin(), guarded.allocators.end(),
                AllocatorKind::oracle) == guarded.allocators.end()) {
    guarded.allocators.push_back(AllocatorKind::oracle);
  }
  if (guarded.values.empty()) {
    guarded.values = {guarded.fixed.noise_variance};
  }
  // Certify like against like: the greedy pipeline must draw from the same
  // constellation menu the search enumerates, so the tighter of the two caps
  // binds both sides.
  int menu_cap = guarded.oracle_b_max;
  if (guarded.fixed.max_bits_per_subcarrier.has_value()) {
    menu_cap = std::min(menu_cap, *guarded.fixed.max_bits_per_subcarrier);
  }
  guarded.fixed.max_bits_per_subcarrier = menu_cap;
  guarded.validate();

  OracleComparison comparison;
  comparison.samples.reserve(static_cast<std::size_t>(guarded.num_realizations));
  for (int trial = 0; trial < guarded.num_realizations; ++trial) {
    const std::uint64_t seed =
        derive_seed(guarded.master_seed, static_cast<std::uint64_t>(trial));
    std::mt19937_64 rng(seed);
    const Eigen::ArrayXcd taps = generate_impulse_response(guarded.channel, rng);
    const Eigen::ArrayXcd gains =
        frequency_response(taps, guarded.channel.num_subcarriers);

    const TrialPipeline pipeline = run_pipeline(gains, guarded.fixed, guarded.budget);
    const Allocation oracle =
        run_allocator(AllocatorKind::oracle, pipeline, guarded.fixed, guarded);

    OracleGapSample sample;
    sample.trial_index = trial;
    sample.seed = seed;
    sample.objective_greedy = pipeline.proposed.objective_value;
    sample.objective_oracle = oracle.objective_value;
    if (sample.objective_oracle > sample.objective_greedy + kOracleDominanceTol) {
      throw std::logic_error("exhaustive search lost to the greedy pipeline on trial " +
                             std::to_string(trial) + ": " +
                             format_g17(sample.objective_oracle) + " vs " +
                             format_g17(sample.objective_greedy));
    }
    const double gap = sample.objective_greedy - sample.objective_oracle;
    sample.relative_gap = gap / std::max(std::abs(sample.objective_oracle), 1e-30);
    comparison.samples.push_back(sample);
  }

  std::vector<double> gaps;
  gaps.reserve(comparison.samples.size());
  for (const auto& sample : comparison.samples) gaps.push_back(sample.relative_gap);
  std::sort(gaps.begin(), gaps.end());
  const std::size_t n = gaps.size();
  comparison.median_relative_gap =
      n % 2 == 1 ? gaps[n / 2] : 0.5 * (gaps[n / 2 - 1] + gaps[n / 2]);
  comparison.max_relative_gap = gaps.back();
  return comparison;
}

std::vector<ScalingRow> operation_count_scaling(const std::vector<int>& sizes,
                                                std::uint64_t master_seed,
                                                int num_realizations,
                                                double threshold_fraction) {
  if (num_realizations < 1) {
    throw std::invalid_argument("operation_count_scaling: num_realizations must be positive");
  }
  if (!(threshold_fraction > 0.0 && threshold_fraction < 1.0)) {
    throw std::invalid_argument(
        "operation_count_scaling: threshold_fraction must lie in (0, 1)");
  }

  std::vector<ScalingRow> rows;
  rows.reserve(sizes.size());
  for (int n : sizes) {
    // Experimental constants for the scaling probe; only the problem size
    // varies between rows.
    SystemConfig cfg = SystemConfig::uniform(n, 0.5, 1e-4, 1e-9);
    ChannelModelConfig channel;
    channel.num_taps = std::min(channel.num_taps, n);
    channel.num_subcarriers = n;

    KahanSum iterations;
    KahanSum evaluations;
    for (int trial = 0; trial < num_realizations; ++trial) {
      const std::uint64_t seed =
          derive_seed(master_seed, static_cast<std::uint64_t>(trial));
      const ChannelRealization ch = realize_channel(channel, seed, cfg.noise_variance);
      const ContinuousAllocation cont =
          closed_form_continuous(ch.cnrs, cfg.alpha, cfg.ber_targets);
      const Allocation unconstrained =
          discretize(cont, ch.cnrs, cfg.ber_targets, cfg.alpha, {});
      const double total = unconstrained.total_power();
      if (total <= 0.0) continue;  // nothing to strip on an all-silent draw
      const auto [trimmed, trace] = enforce_power_budget(
          unconstrained, ch.cnrs, cfg.ber_targets, threshold_fraction * total, cfg.alpha);
      (void)trimmed;
      iterations.add(static_cast<double>(trace.steps.size()));
      // One release-table refresh per subcarrier up front, one per removal.
      evaluations.add(static_cast<double>(n + trace.steps.size()));
    }

    ScalingRow row;
    row.num_subcarriers = n;
    row.avg_budget_iterations = iterations.value() / num_realizations;
    row.avg_power_evaluations = evaluations.value() / num_realizations;
    rows.push_back(row);
  }
  return rows;
}

void write_sweep_csv(std::ostream& os, const SweepSpec& spec,
                     const std::vector<AllocatorSeries>& series) {
  os << "sweep_variable,sweep_value,allocator,avg_snr_db,avg_throughput_bits,"
        "avg_power_w,avg_objective,num_realizations,master_seed\n";
  const std::string variable = to_string(spec.variable);
  for (std::size_t v = 0; v < spec.values.size(); ++v) {
    for (const AllocatorSeries& s : series) {
      if (s.points.size() != spec.values.size()) {
        throw std::invalid_argument("write_sweep_csv: series/value count mismatch");
      }
      const TrialSummary& point = s.points[v];
      os << variable << ',' << format_g17(point.sweep_value) << ','
         << to_string(s.allocator) << ',' << format_g17(point.avg_reported_snr_db) << ','
         << format_g17(point.avg_throughput) << ','
         << format_g17(point.avg_transmit_power) << ','
         << format_g17(point.avg_objective) << ',' << point.num_realizations << ','
         << spec.master_seed << '\n';
    }
  }
}

void write_sweep_csv(const std::filesystem::path& path, const SweepSpec& spec,
                     const std::vector<AllocatorSeries>& series) {
  std::ofstream os(path);
  if (!os) {
    throw std::runtime_error("cannot open sweep table for writing: " + path.string());
  }
  write_sweep_csv(os, spec, series);
  if (!os) {
    throw std::runtime_error("failed writing sweep table: " + path.string());
  }
}

std::string sweep_metadata_json(const SweepSpec& spec) {
  nlohmann::json meta;
  meta["sweep_variable"] = to_string(spec.variable);
  meta["sweep_values"] = spec.values;
  meta["num_realizations"] = spec.num_realizations;
  meta["master_seed"] = spec.master_seed;

  nlohmann::json system;
  system["num_subcarriers"] = spec.fixed.num_subcarriers;
  system["alpha"] = spec.fixed.alpha;
  const Eigen::ArrayXd& targets = spec.fixed.ber_targets;
  const bool uniform_targets =
      targets.size() > 0 && (targets == targets[0]).all();
  if (uniform_targets) {
    system["ber_target"] = targets[0];
  } else {
    system["ber_targets"] = std::vector<double>(targets.begin(), targets.end());
  }
  system["noise_variance_w"] = spec.fixed.noise_variance;
  if (spec.fixed.max_bits_per_subcarrier) {
    system["max_bits_per_subcarrier"] = *spec.fixed.max_bits_per_subcarrier;
  }
  meta["system"] = system;

  nlohmann::json channel;
  channel["num_taps"] = spec.channel.num_taps;
  channel["decay_factor"] = spec.channel.decay_factor;
  channel["num_subcarriers"] = spec.channel.num_subcarriers;
  meta["channel_model"] = channel;

  nlohmann::json budget;
  switch (spec.budget.mode) {
    case PowerBudget::Mode::unbounded: budget["mode"] = "unbounded"; break;
    case PowerBudget::Mode::absolute: budget["mode"] = "absolute"; break;
    case PowerBudget::Mode::fraction: budget["mode"] = "fraction"; break;
  }
  if (spec.budget.mode != PowerBudget::Mode::unbounded) {
    budget["value"] = spec.budget.value;
  }
  meta["budget"] = budget;

  std::vector<std::string> allocator_names;
  allocator_names.reserve(spec.allocators.size());
  for (AllocatorKind kind : spec.allocators) allocator_names.push_back(to_string(kind));
  meta["allocators"] = allocator_names;
  if (std::find(spec.allocators.begin(), spec.allocators.end(), AllocatorKind::oracle) !=
      spec.allocators.end()) {
    meta["oracle_b_max"] = spec.oracle_b_max;
  }

  meta["seed_derivation"] = kSeedDerivationRule;
  meta["rng"] = kRngDescription;
  meta["tool"] = kToolName;
  meta["version"] = kVersion;
  meta["notes"] = {
      "reported SNR averages P_i * |H_i|^2 / noise_variance over all subcarriers, "
      "silent ones included as zero",
      "the uniform-power baseline keeps the mean BER over loaded subcarriers within "
      "the mean BER target",
  };
  return meta.dump(2) + "\n";
}

void write_sweep_metadata(const std::filesystem::path& path, const SweepSpec& spec) {
  std::ofstream os(path);
  if (!os) {
    throw std::runtime_error("cannot open metadata for writing: " + path.string());
  }
  os << sweep_metadata_json(spec);
  if (!os) {
    throw std::runtime_error("failed writing metadata: " + path.string());
  }
}

}  // namespace bitload
