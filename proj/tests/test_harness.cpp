#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bitload/harness.hpp"
#include "support/test_support.hpp"

#include <json.hpp>

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

using namespace bitload;
using testsupport::rel_err;
using testsupport::throws_with;

namespace {

SweepSpec small_spec() {
  SweepSpec spec;
  spec.variable = SweepVariable::noise_variance;
  spec.values = {1e-9, 1e-8};
  spec.fixed = SystemConfig::uniform(16, 0.5, 1e-4, 1e-9);
  spec.channel.num_taps = 3;
  spec.channel.num_subcarriers = 16;
  spec.num_realizations = 5;
  spec.master_seed = 11;
  spec.allocators = {AllocatorKind::proposed, AllocatorKind::baseline};
  spec.check_all_feasibility = true;
  return spec;
}

std::string csv_of(const SweepSpec& spec, const std::vector<AllocatorSeries>& series) {
  std::ostringstream os;
  write_sweep_csv(os, spec, series);
  return os.str();
}

}  // namespace

TEST_CASE("enum names round-trip through their string forms") {
  for (SweepVariable v : {SweepVariable::noise_variance, SweepVariable::alpha,
                          SweepVariable::power_threshold}) {
    CHECK(sweep_variable_from_string(to_string(v)) == v);
  }
  for (AllocatorKind k :
       {AllocatorKind::proposed, AllocatorKind::proposed_unconstrained,
        AllocatorKind::baseline, AllocatorKind::oracle}) {
    CHECK(allocator_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(sweep_variable_from_string("snr"), std::invalid_argument);
  CHECK_THROWS_AS(allocator_from_string("greedy"), std::invalid_argument);
}

TEST_CASE("power budgets resolve to watts per mode") {
  PowerBudget unbounded;
  CHECK(unbounded.resolve(123.0) == kUnboundedPower);

  PowerBudget absolute{PowerBudget::Mode::absolute, 1e-4};
  CHECK(absolute.resolve(123.0) == 1e-4);

  PowerBudget fraction{PowerBudget::Mode::fraction, 0.5};
  CHECK(fraction.resolve(2e-3) == 1e-3);

  PowerBudget bad{PowerBudget::Mode::absolute, 0.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_NOTHROW(unbounded.validate());
}

TEST_CASE("sweep specs reject inconsistent setups with named errors") {
  SweepSpec spec = small_spec();
  CHECK_NOTHROW(spec.validate());

  SweepSpec empty = spec;
  empty.values.clear();
  CHECK(throws_with<std::invalid_argument>([&] { empty.validate(); }, "sweep.values"));

  SweepSpec unsorted = spec;
  unsorted.values = {1e-8, 1e-9};
  CHECK(throws_with<std::invalid_argument>([&] { unsorted.validate(); }, "ascending"));

  SweepSpec bad_alpha = spec;
  bad_alpha.variable = SweepVariable::alpha;
  bad_alpha.values = {0.5, 1.5};
  CHECK(throws_with<std::invalid_argument>([&] { bad_alpha.validate(); }, "out of range"));

  // The budget field is the single owner of the power constraint; a fixed
  // threshold on the system config would create two competing sources.
  SweepSpec fixed_threshold = spec;
  fixed_threshold.fixed.power_threshold = 1e-4;
  CHECK(throws_with<std::invalid_argument>([&] { fixed_threshold.validate(); },
                                           "sweep.fixed.power_threshold"));

  SweepSpec mismatch = spec;
  mismatch.channel.num_subcarriers = 8;
  CHECK(throws_with<std::invalid_argument>([&] { mismatch.validate(); },
                                           "num_subcarriers"));

  SweepSpec dup = spec;
  dup.allocators = {AllocatorKind::proposed, AllocatorKind::proposed};
  CHECK(throws_with<std::invalid_argument>([&] { dup.validate(); }, "duplicate"));

  SweepSpec threshold_sweep = spec;
  threshold_sweep.variable = SweepVariable::power_threshold;
  threshold_sweep.values = {1e-5, 1e-4};
  CHECK(throws_with<std::invalid_argument>([&] { threshold_sweep.validate(); },
                                           "sweep.budget"));
  threshold_sweep.budget = {PowerBudget::Mode::absolute, 1e-5};
  CHECK_NOTHROW(threshold_sweep.validate());

  SweepSpec big_oracle = spec;
  big_oracle.allocators = {AllocatorKind::oracle};
  CHECK_THROWS_AS(big_oracle.validate(), OracleGuardError);  // 16 subcarriers is too many
}

TEST_CASE("a flat unit channel reproduces the hand-computed point") {
  // |H| = 1 on every subcarrier and sigma^2 = 1e-9 puts every carrier-to-noise
  // ratio at 1e9, where the per-subcarrier load is 28 bits at
  // 1.2752198188361237 W; the baseline, handed the same total power, lands on
  // the same loading because the channel is flat.
  const int n = 8;
  SweepSpec spec;
  spec.values = {1e-9};
  spec.fixed = SystemConfig::uniform(n, 0.5, 1e-4, 1e-9);
  spec.channel.num_subcarriers = n;
  spec.num_realizations = 1;
  spec.allocators = {AllocatorKind::proposed, AllocatorKind::proposed_unconstrained,
                     AllocatorKind::baseline};
  spec.check_all_feasibility = true;

  const std::vector<Eigen::ArrayXcd> gains{Eigen::ArrayXcd::Ones(n)};
  const std::vector<TrialSummary> points = run_point(spec, 1e-9, gains);
  REQUIRE(points.size() == 3);

  const double per_subcarrier_power = 1.2752198188361237;
  for (const TrialSummary& point : points) {
    CHECK(point.avg_throughput == 8.0 * 28.0);
    CHECK(rel_err(point.avg_transmit_power, n * per_subcarrier_power) < 1e-13);
    CHECK(point.num_realizations == 1);
    CHECK(rel_err(point.avg_reported_snr_db,
                  10.0 * std::log10(per_subcarrier_power * 1e9)) < 1e-13);
  }
  // Unbounded run: constrained and unconstrained series coincide.
  CHECK(points[0].avg_transmit_power == points[1].avg_transmit_power);
  CHECK(points[0].avg_objective == points[1].avg_objective);
}

TEST_CASE("reported average signal-to-noise follows its definition exactly") {
  ChannelRealization ch;
  ch.gains = Eigen::ArrayXcd::Ones(1);
  ch.cnrs = Eigen::ArrayXd::Constant(1, 4.0);

  Allocation alloc = Allocation::null_allocation(1);

  SUBCASE("a single subcarrier at ratio ten reads ten decibels") {
    alloc.bits[0] = 2;
    alloc.powers[0] = 2.5;
    CHECK(reported_average_snr({alloc}, {ch}, 0.25) == 10.0);
  }

  SUBCASE("an all-silent allocation reads negative infinity") {
    const double snr = reported_average_snr({alloc}, {ch}, 0.25);
    CHECK(std::isinf(snr));
    CHECK(snr < 0.0);
  }

  SUBCASE("doubling every power adds three-point-zero-one decibels") {
    alloc.bits[0] = 2;
    alloc.powers[0] = 2.5;
    Allocation doubled = alloc;
    doubled.powers[0] = 5.0;
    const double base = reported_average_snr({alloc}, {ch}, 0.25);
    const double up = reported_average_snr({doubled}, {ch}, 0.25);
    CHECK(up - base == doctest::Approx(3.010299956639812).epsilon(1e-12));
  }

  SUBCASE("silent subcarriers still count in the averaging denominator") {
    ChannelRealization two;
    two.gains = Eigen::ArrayXcd::Ones(2);
    two.cnrs = Eigen::ArrayXd::Constant(2, 4.0);
    Allocation half = Allocation::null_allocation(2);
    half.bits[0] = 2;
    half.powers[0] = 5.0;  // P*C = 20 on one of two subcarriers -> mean 10
    CHECK(reported_average_snr({half}, {two}, 0.25) == 10.0);
  }
}

TEST_CASE("sweeps are reproducible and genuinely seeded") {
  const SweepSpec spec = small_spec();
  const auto first = run_sweep(spec);
  const auto second = run_sweep(spec);
  CHECK(csv_of(spec, first) == csv_of(spec, second));

  SweepSpec reseeded = spec;
  reseeded.master_seed = 12;
  const auto third = run_sweep(reseeded);
  CHECK(csv_of(spec, first) != csv_of(reseeded, third));
}

TEST_CASE("sweeps reuse one set of channel draws across all sweep values") {
  const SweepSpec spec = small_spec();
  const auto series = run_sweep(spec);

  // Rebuild the per-trial channels with the documented seeding rule and feed
  // them through the single-point runner; every summary must match bitwise.
  std::vector<Eigen::ArrayXcd> gains;
  for (int trial = 0; trial < spec.num_realizations; ++trial) {
    std::mt19937_64 rng(derive_seed(spec.master_seed, static_cast<std::uint64_t>(trial)));
    const Eigen::ArrayXcd taps = generate_impulse_response(spec.channel, rng);
    gains.push_back(frequency_response(taps, spec.channel.num_subcarriers));
  }
  for (std::size_t v = 0; v < spec.values.size(); ++v) {
    const auto points = run_point(spec, spec.values[v], gains);
    for (std::size_t a = 0; a < spec.allocators.size(); ++a) {
      CHECK(series[a].points[v].avg_throughput == points[a].avg_throughput);
      CHECK(series[a].points[v].avg_transmit_power == points[a].avg_transmit_power);
      CHECK(series[a].points[v].avg_reported_snr_db == points[a].avg_reported_snr_db);
      CHECK(series[a].points[v].avg_objective == points[a].avg_objective);
    }
  }
}

TEST_CASE("an absolute budget caps the average spend and still transmits") {
  SweepSpec spec = small_spec();
  spec.values = {1e-9};
  spec.allocators = {AllocatorKind::proposed, AllocatorKind::proposed_unconstrained};
  spec.budget = {PowerBudget::Mode::absolute, 1e-4};
  spec.num_realizations = 20;

  const auto series = run_sweep(spec);
  const TrialSummary& constrained = series[0].points[0];
  const TrialSummary& unconstrained = series[1].points[0];
  CHECK(constrained.avg_transmit_power <= 1e-4 * (1.0 + 1e-12));
  CHECK(constrained.avg_transmit_power > 0.5e-4);  // the budget is nearly used up
  CHECK(unconstrained.avg_transmit_power > 1e-4);  // the cap genuinely binds
  CHECK(constrained.avg_throughput < unconstrained.avg_throughput);
}

TEST_CASE("a fractional budget scales with each realization's unconstrained spend") {
  SweepSpec spec = small_spec();
  spec.values = {1e-9};
  spec.allocators = {AllocatorKind::proposed, AllocatorKind::proposed_unconstrained};
  spec.budget = {PowerBudget::Mode::fraction, 0.5};
  spec.num_realizations = 10;

  const auto series = run_sweep(spec);
  const TrialSummary& constrained = series[0].points[0];
  const TrialSummary& unconstrained = series[1].points[0];
  // Every realization spends at most half its unconstrained total, so the
  // averages inherit the same bound.
  CHECK(constrained.avg_transmit_power <= 0.5 * unconstrained.avg_transmit_power *
        (1.0 + 1e-12));
}

TEST_CASE("the exhaustive comparison certifies the greedy objective") {
  SweepSpec spec;
  spec.fixed = SystemConfig::uniform(6, 0.5, 1e-4, 1e-9);
  spec.fixed.max_bits_per_subcarrier = 8;
  spec.channel.num_subcarriers = 6;
  spec.channel.num_taps = 3;
  spec.num_realizations = 40;
  spec.master_seed = 77;
  spec.budget = {PowerBudget::Mode::absolute, 5e-6};
  spec.oracle_b_max = 8;

  const OracleComparison comparison = compare_to_oracle(spec);
  REQUIRE(static_cast<int>(comparison.samples.size()) == 40);
  for (int trial = 0; trial < 40; ++trial) {
    const OracleGapSample& sample = comparison.samples[static_cast<std::size_t>(trial)];
    CHECK(sample.trial_index == trial);
    CHECK(sample.seed == derive_seed(77, static_cast<std::uint64_t>(trial)));
    CHECK(sample.objective_oracle <= sample.objective_greedy + 1e-9);
    CHECK(sample.relative_gap >= -1e-9);
  }
  CHECK(comparison.median_relative_gap <= comparison.max_relative_gap);
}

TEST_CASE("budget-loop work grows with the problem size") {
  const auto rows = operation_count_scaling({8, 16}, 4242, 10, 0.25);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].num_subcarriers == 8);
  CHECK(rows[1].num_subcarriers == 16);
  for (const ScalingRow& row : rows) {
    CHECK(row.avg_budget_iterations > 0.0);  // a 4x budget cut forces removals
    CHECK(row.avg_power_evaluations >=
          row.num_subcarriers + row.avg_budget_iterations - 1e-9);
  }
  CHECK(rows[1].avg_budget_iterations > rows[0].avg_budget_iterations);
}

TEST_CASE("compensated accumulation survives catastrophic cancellation") {
  KahanSum sum;
  sum.add(1e16);
  sum.add(1.0);
  sum.add(-1e16);
  CHECK(sum.value() == 1.0);  // a naive sum returns 0 here

  KahanSum tenths;
  for (int k = 0; k < 10; ++k) tenths.add(0.1);
  CHECK(tenths.value() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("sweep tables carry the documented header and one row per pair") {
  const SweepSpec spec = small_spec();
  const auto series = run_sweep(spec);
  const std::string csv = csv_of(spec, series);

  std::istringstream is(csv);
  std::string line;
  REQUIRE(std::getline(is, line));
  CHECK(line ==
        "sweep_variable,sweep_value,allocator,avg_snr_db,avg_throughput_bits,"
        "avg_power_w,avg_objective,num_realizations,master_seed");
  int rows = 0;
  while (std::getline(is, line)) {
    CHECK(line.rfind("noise_variance,", 0) == 0);
    // Every row ends with the realization count and the master seed.
    REQUIRE(line.size() >= 5);
    CHECK(line.substr(line.size() - 5) == ",5,11");
    ++rows;
  }
  CHECK(rows == static_cast<int>(spec.values.size() * spec.allocators.size()));
}

TEST_CASE("metadata records the resolved setup and nothing volatile") {
  SweepSpec spec = small_spec();
  spec.budget = {PowerBudget::Mode::absolute, 2e-4};
  const std::string text = sweep_metadata_json(spec);
  const nlohmann::json meta = nlohmann::json::parse(text);

  CHECK(meta.at("sweep_variable") == "noise_variance");
  CHECK(meta.at("sweep_values").get<std::vector<double>>() == spec.values);
  CHECK(meta.at("num_realizations") == 5);
  CHECK(meta.at("master_seed") == 11);
  CHECK(meta.at("system").at("num_subcarriers") == 16);
  CHECK(meta.at("system").at("alpha") == 0.5);
  CHECK(meta.at("system").at("ber_target") == 1e-4);
  CHECK(meta.at("system").at("noise_variance_w") == 1e-9);
  CHECK(meta.at("channel_model").at("num_taps") == 3);
  CHECK(meta.at("channel_model").at("decay_factor") == 0.2);
  CHECK(meta.at("budget").at("mode") == "absolute");
  CHECK(meta.at("budget").at("value") == 2e-4);
  CHECK(meta.at("allocators").size() == 2);
  CHECK(meta.at("seed_derivation") == kSeedDerivationRule);
  CHECK(meta.at("rng") == kRngDescription);
  CHECK(meta.at("tool") == "bitload");
  CHECK(meta.contains("version"));

  // Reruns must be byte-identical, so nothing time- or path-dependent may
  // leak into the sidecar.
  CHECK(text.find("timestamp") == std::string::npos);
  CHECK(text.find("date") == std::string::npos);
  CHECK(text.find("output_dir") == std::string::npos);

  // Per-subcarrier targets switch the sidecar to the full list.
  SweepSpec mixed = spec;
  mixed.fixed.ber_targets[3] = 1e-5;
  const nlohmann::json meta2 = nlohmann::json::parse(sweep_metadata_json(mixed));
  CHECK_FALSE(meta2.at("system").contains("ber_target"));
  CHECK(meta2.at("system").at("ber_targets").size() == 16);

  // Requesting the exhaustive allocator records its search cap.
  SweepSpec with_oracle = spec;
  with_oracle.fixed.num_subcarriers = 6;
  with_oracle.fixed.ber_targets = Eigen::ArrayXd::Constant(6, 1e-4);
  with_oracle.channel.num_subcarriers = 6;
  with_oracle.allocators.push_back(AllocatorKind::oracle);
  with_oracle.oracle_b_max = 6;
  const nlohmann::json meta3 = nlohmann::json::parse(sweep_metadata_json(with_oracle));
  CHECK(meta3.at("oracle_b_max") == 6);
  CHECK_FALSE(meta.contains("oracle_b_max"));
}
