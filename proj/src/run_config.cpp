#include "bitload/run_config.hpp"

#include "bitload/alloc.hpp"
#include "bitload/detail/format.hpp"
#include "bitload/version.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace bitload {

namespace {

using detail::format_g17;

std::string trim(const std::string& text) {
  const auto begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = text.find_last_not_of(" \t\r\n");
  return text.substr(begin, end - begin + 1);
}

double parse_double(const std::string& text, const std::string& key) {
  const std::string trimmed = trim(text);
  std::size_t pos = 0;
  double value = 0.0;
  try {
    value = std::stod(trimmed, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": not a number: \"" + text + "\"");
  }
  if (pos != trimmed.size()) {
    throw ConfigError(key + ": trailing characters in \"" + text + "\"");
  }
  return value;
}

long parse_long(const std::string& text, const std::string& key) {
  const std::string trimmed = trim(text);
  std::size_t pos = 0;
  long value = 0;
  try {
    value = std::stol(trimmed, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": not an integer: \"" + text + "\"");
  }
  if (pos != trimmed.size()) {
    throw ConfigError(key + ": trailing characters in \"" + text + "\"");
  }
  return value;
}

std::uint64_t parse_seed(const std::string& text, const std::string& key) {
  const std::string trimmed = trim(text);
  std::size_t pos = 0;
  std::uint64_t value = 0;
  try {
    value = std::stoull(trimmed, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": not an unsigned integer: \"" + text + "\"");
  }
  if (pos != trimmed.size()) {
    throw ConfigError(key + ": trailing characters in \"" + text + "\"");
  }
  return value;
}

bool parse_bool(const std::string& text, const std::string& key) {
  const std::string trimmed = trim(text);
  if (trimmed == "1" || trimmed == "true") return true;
  if (trimmed == "0" || trimmed == "false") return false;
  throw ConfigError(key + ": expected a boolean (1/0/true/false), got \"" + text + "\"");
}

}  // namespace

std::string to_string(Workflow workflow) {
  switch (workflow) {
    case Workflow::alloc: return "alloc";
    case Workflow::sweep: return "sweep";
    case Workflow::oracle: return "oracle";
  }
  throw std::logic_error("unreachable workflow");
}

KeyValueMap read_config_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) {
    throw std::runtime_error("cannot open config file: " + path.string());
  }
  KeyValueMap values;
  std::string line;
  int line_number = 0;
  while (std::getline(is, line)) {
    ++line_number;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_number) +
                        ": expected key = value");
    }
    const std::string key = trim(stripped.substr(0, eq));
    if (key.empty()) {
      throw ConfigError(path.string() + ":" + std::to_string(line_number) +
                        ": empty key");
    }
    values[key] = trim(stripped.substr(eq + 1));
  }
  return values;
}

double parse_power(const std::string& text, const std::string& key) {
  const std::string trimmed = trim(text);
  std::size_t pos = 0;
  double value = 0.0;
  try {
    value = std::stod(trimmed, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": not a power value: \"" + text + "\"");
  }
  const std::string suffix = trim(trimmed.substr(pos));
  double scale = 1.0;
  if (suffix.empty() || suffix == "W") {
    scale = 1.0;
  } else if (suffix == "mW") {
    scale = 1e-3;
  } else if (suffix == "uW") {
    scale = 1e-6;
  } else {
    throw ConfigError(key + ": unknown power unit \"" + suffix + "\" (use W, mW or uW)");
  }
  return value * scale;
}

std::vector<double> parse_value_list(const std::string& text, const std::string& key) {
  std::vector<double> values;
  std::istringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    values.push_back(parse_double(item, key));
  }
  if (values.empty()) {
    throw ConfigError(key + ": expected a comma-separated list of numbers");
  }
  return values;
}

RunConfig resolve_config(Workflow workflow, const KeyValueMap& file_values,
                         const KeyValueMap& flag_values) {
  static const std::vector<std::string> recognized = {
      "system.num_subcarriers", "system.alpha", "system.ber_target",
      "system.noise_variance", "system.power_threshold", "system.power_threshold_frac",
      "system.max_bits_per_subcarrier", "channel.num_taps", "channel.decay_factor",
      "run.seed", "run.out", "run.realizations", "run.allocators", "run.channel_file",
      "sweep.variable", "sweep.values", "oracle.b_max", "oracle.force",
  };

  KeyValueMap merged = file_values;
  for (const auto& [key, value] : flag_values) merged[key] = value;
  for (const auto& [key, value] : merged) {
    if (std::find(recognized.begin(), recognized.end(), key) == recognized.end()) {
      throw ConfigError("unrecognized key \"" + key + "\"");
    }
  }
  auto lookup = [&merged](const std::string& key) -> const std::string* {
    const auto it = merged.find(key);
    return it == merged.end() ? nullptr : &it->second;
  };

  RunConfig cfg;
  cfg.workflow = workflow;

  // Experimental defaults: 128 subcarriers, 5-tap exponential-decay channel,
  // uniform 1e-4 BER target, alpha 0.5, 1e-9 W noise.
  int num_subcarriers = 128;
  double alpha = 0.5;
  double ber_target = 1e-4;
  double noise_variance = 1e-9;

  if (const auto* v = lookup("system.num_subcarriers")) {
    const long n = parse_long(*v, "system.num_subcarriers");
    if (n < 1) throw ConfigError("system.num_subcarriers: must be positive, got " + *v);
    num_subcarriers = static_cast<int>(n);
    cfg.subcarriers_explicit = true;
  }
  if (const auto* v = lookup("system.alpha")) alpha = parse_double(*v, "system.alpha");
  if (const auto* v = lookup("system.ber_target")) {
    ber_target = parse_double(*v, "system.ber_target");
  }
  if (const auto* v = lookup("system.noise_variance")) {
    noise_variance = parse_power(*v, "system.noise_variance");
  }

  cfg.system = SystemConfig::uniform(num_subcarriers, alpha, ber_target, noise_variance);
  if (const auto* v = lookup("system.max_bits_per_subcarrier")) {
    const long cap = parse_long(*v, "system.max_bits_per_subcarrier");
    if (cap < static_cast<long>(kMinBits)) {
      throw ConfigError("system.max_bits_per_subcarrier: must be at least 2, got " + *v);
    }
    cfg.system.max_bits_per_subcarrier = static_cast<int>(cap);
  }

  const auto* threshold = lookup("system.power_threshold");
  const auto* threshold_frac = lookup("system.power_threshold_frac");
  if (threshold && threshold_frac) {
    throw ConfigError(
        "system.power_threshold and system.power_threshold_frac are mutually exclusive");
  }
  if (threshold) {
    if (trim(*threshold) == "unbounded") {
      cfg.budget.mode = PowerBudget::Mode::unbounded;
    } else {
      cfg.budget.mode = PowerBudget::Mode::absolute;
      cfg.budget.value = parse_power(*threshold, "system.power_threshold");
      if (!(cfg.budget.value > 0.0)) {
        throw ConfigError("system.power_threshold: must be positive");
      }
    }
  } else if (threshold_frac) {
    cfg.budget.mode = PowerBudget::Mode::fraction;
    cfg.budget.value = parse_double(*threshold_frac, "system.power_threshold_frac");
    if (!(cfg.budget.value > 0.0)) {
      throw ConfigError("system.power_threshold_frac: must be positive");
    }
  }

  cfg.channel_model.num_subcarriers = num_subcarriers;
  if (const auto* v = lookup("channel.num_taps")) {
    const long taps = parse_long(*v, "channel.num_taps");
    if (taps < 1) throw ConfigError("channel.num_taps: must be positive, got " + *v);
    cfg.channel_model.num_taps = static_cast<int>(taps);
  }
  if (const auto* v = lookup("channel.decay_factor")) {
    cfg.channel_model.decay_factor = parse_double(*v, "channel.decay_factor");
  }

  if (const auto* v = lookup("run.seed")) cfg.seed = parse_seed(*v, "run.seed");
  if (const auto* v = lookup("run.out")) cfg.output_dir = trim(*v);
  if (const auto* v = lookup("run.realizations")) {
    const long r = parse_long(*v, "run.realizations");
    if (r < 1) throw ConfigError("run.realizations: must be positive, got " + *v);
    cfg.num_realizations = static_cast<int>(r);
  }
  if (const auto* v = lookup("run.allocators")) {
    cfg.allocators.clear();
    std::istringstream stream(*v);
    std::string item;
    while (std::getline(stream, item, ',')) {
      try {
        cfg.allocators.push_back(allocator_from_string(trim(item)));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("run.allocators: ") + e.what());
      }
    }
    if (cfg.allocators.empty()) {
      throw ConfigError("run.allocators: expected a comma-separated list");
    }
    for (std::size_t i = 0; i < cfg.allocators.size(); ++i) {
      for (std::size_t j = i + 1; j < cfg.allocators.size(); ++j) {
        if (cfg.allocators[i] == cfg.allocators[j]) {
          throw ConfigError("run.allocators: duplicate entry " +
                            to_string(cfg.allocators[i]));
        }
      }
    }
  }
  if (const auto* v = lookup("run.channel_file")) {
    cfg.channel_file = std::filesystem::path(trim(*v));
    if (!std::filesystem::exists(*cfg.channel_file)) {
      throw ConfigError("run.channel_file: no such file: " + cfg.channel_file->string());
    }
  }

  if (const auto* v = lookup("sweep.variable")) {
    try {
      cfg.sweep_variable = sweep_variable_from_string(trim(*v));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("sweep.variable: ") + e.what());
    }
  }
  if (const auto* v = lookup("sweep.values")) {
    cfg.sweep_values = parse_value_list(*v, "sweep.values");
  } else {
    cfg.sweep_values = {1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6};
  }

  if (const auto* v = lookup("oracle.b_max")) {
    const long b = parse_long(*v, "oracle.b_max");
    if (b < static_cast<long>(kMinBits)) {
      throw ConfigError("oracle.b_max: must be at least 2, got " + *v);
    }
    cfg.oracle_b_max = static_cast<int>(b);
  }
  if (const auto* v = lookup("oracle.force")) {
    cfg.force_oracle = parse_bool(*v, "oracle.force");
  }

  // A power_threshold sweep reads its thresholds from the sweep values; give
  // it a concrete budget mode when the user did not pick one.
  if (workflow == Workflow::sweep && cfg.sweep_variable == SweepVariable::power_threshold &&
      cfg.budget.mode == PowerBudget::Mode::unbounded) {
    cfg.budget.mode = PowerBudget::Mode::absolute;
    cfg.budget.value = cfg.sweep_values.front();
  }

  try {
    cfg.system.validate();
    cfg.channel_model.validate();
    cfg.budget.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

namespace {

SweepSpec make_sweep_spec(const RunConfig& cfg) {
  SweepSpec spec;
  spec.variable = cfg.sweep_variable;
  spec.values = cfg.sweep_values;
  spec.fixed = cfg.system;
  spec.channel = cfg.channel_model;
  spec.num_realizations = cfg.num_realizations;
  spec.master_seed = cfg.seed;
  spec.allocators = cfg.allocators;
  spec.budget = cfg.budget;
  spec.oracle_b_max = cfg.oracle_b_max;
  spec.force_oracle = cfg.force_oracle;
  return spec;
}

std::string describe_budget(const PowerBudget& budget) {
  switch (budget.mode) {
    case PowerBudget::Mode::unbounded: return "unbounded";
    case PowerBudget::Mode::absolute: return format_g17(budget.value) + " W";
    case PowerBudget::Mode::fraction:
      return format_g17(budget.value) + " of the unconstrained total";
  }
  throw std::logic_error("unreachable budget mode");
}

void run_alloc(const RunConfig& cfg) {
  SystemConfig system = cfg.system;
  ChannelModelConfig channel = cfg.channel_model;
  Eigen::ArrayXcd gains;
  const bool generated = !cfg.channel_file.has_value();
  std::uint64_t trial_seed = 0;

  if (generated) {
    trial_seed = derive_seed(cfg.seed, 0);
    std::mt19937_64 rng(trial_seed);
    const Eigen::ArrayXcd taps = generate_impulse_response(channel, rng);
    gains = frequency_response(taps, channel.num_subcarriers);
  } else {
    gains = read_channel_table(*cfg.channel_file);
    const int n = static_cast<int>(gains.size());
    if (n != system.num_subcarriers) {
      if (cfg.subcarriers_explicit) {
        throw ConfigError("system.num_subcarriers: set to " +
                          std::to_string(system.num_subcarriers) + " but " +
                          cfg.channel_file->string() + " holds " + std::to_string(n) +
                          " subcarriers");
      }
      // Adopt the file's size; targets are uniform by construction here.
      system = SystemConfig::uniform(n, system.alpha, system.ber_targets[0],
                                     system.noise_variance);
      system.max_bits_per_subcarrier = cfg.system.max_bits_per_subcarrier;
      channel.num_subcarriers = n;
      channel.num_taps = std::min(channel.num_taps, n);
    }
  }

  const Eigen::ArrayXd cnrs = channel_to_noise(gains, system.noise_variance);
  const ContinuousAllocation cont =
      closed_form_continuous(cnrs, system.alpha, system.ber_targets);
  const Allocation unconstrained =
      discretize(cont, cnrs, system.ber_targets, system.alpha,
                 system.max_bits_per_subcarrier);
  const double resolved = cfg.budget.resolve(unconstrained.total_power());
  Allocation final_alloc = unconstrained;
  if (resolved < kUnboundedPower && unconstrained.total_power() > resolved) {
    final_alloc = enforce_power_budget(unconstrained, cnrs, system.ber_targets, resolved,
                                       system.alpha)
                      .first;
  }

  std::vector<std::string> comments;
  comments.push_back(std::string(kToolName) + " " + kVersion + " single-realization allocation");
  comments.push_back("num_subcarriers = " + std::to_string(system.num_subcarriers));
  comments.push_back("alpha = " + format_g17(system.alpha));
  comments.push_back("ber_target = " + format_g17(system.ber_targets[0]));
  comments.push_back("noise_variance = " + format_g17(system.noise_variance) + " W");
  comments.push_back("power_budget = " + describe_budget(cfg.budget));
  if (cfg.budget.mode != PowerBudget::Mode::unbounded) {
    comments.push_back("resolved_power_threshold = " + format_g17(resolved) + " W");
  }
  if (system.max_bits_per_subcarrier) {
    comments.push_back("max_bits_per_subcarrier = " +
                       std::to_string(*system.max_bits_per_subcarrier));
  }
  if (generated) {
    comments.push_back("channel = generated, num_taps = " +
                       std::to_string(channel.num_taps) + ", decay_factor = " +
                       format_g17(channel.decay_factor));
    comments.push_back("master_seed = " + std::to_string(cfg.seed) +
                       ", trial_seed = " + std::to_string(trial_seed));
    comments.push_back(std::string("seed_derivation: ") + kSeedDerivationRule);
    comments.push_back(std::string("rng: ") + kRngDescription);
  } else {
    comments.push_back("channel = file " + cfg.channel_file->string());
  }

  write_allocation_table(cfg.output_dir / "allocation.csv", cnrs, unconstrained,
                         final_alloc, comments);
  if (generated) {
    std::vector<std::string> channel_comments;
    channel_comments.push_back(std::string(kToolName) + " " + kVersion +
                               " channel realization");
    channel_comments.push_back("num_taps = " + std::to_string(channel.num_taps) +
                               ", decay_factor = " + format_g17(channel.decay_factor));
    channel_comments.push_back("master_seed = " + std::to_string(cfg.seed) +
                               ", trial_seed = " + std::to_string(trial_seed));
    channel_comments.push_back(std::string("seed_derivation: ") + kSeedDerivationRule);
    channel_comments.push_back(std::string("rng: ") + kRngDescription);
    write_channel_table(cfg.output_dir / "channel.csv", gains, channel_comments);
  }
}

void run_sweep_workflow(const RunConfig& cfg) {
  const SweepSpec spec = make_sweep_spec(cfg);
  const std::vector<AllocatorSeries> series = run_sweep(spec);
  write_sweep_csv(cfg.output_dir / "sweep.csv", spec, series);
  write_sweep_metadata(cfg.output_dir / "sweep_meta.json", spec);
}

void run_oracle_workflow(const RunConfig& cfg) {
  SweepSpec spec = make_sweep_spec(cfg);
  spec.values = {cfg.system.noise_variance};  // no sweep axis in this workflow
  if (std::find(spec.allocators.begin(), spec.allocators.end(), AllocatorKind::oracle) ==
      spec.allocators.end()) {
    spec.allocators.push_back(AllocatorKind::oracle);
  }
  const OracleComparison comparison = compare_to_oracle(spec);

  const std::filesystem::path gap_path = cfg.output_dir / "oracle_gap.csv";
  std::ofstream os(gap_path);
  if (!os) {
    throw std::runtime_error("cannot open gap table for writing: " + gap_path.string());
  }
  os << "trial_index,seed,objective_greedy,objective_oracle,relative_gap\n";
  for (const OracleGapSample& sample : comparison.samples) {
    os << sample.trial_index << ',' << sample.seed << ','
       << format_g17(sample.objective_greedy) << ','
       << format_g17(sample.objective_oracle) << ','
       << format_g17(sample.relative_gap) << '\n';
  }
  if (!os) {
    throw std::runtime_error("failed writing gap table: " + gap_path.string());
  }

  nlohmann::json meta;
  meta["spec"] = nlohmann::json::parse(sweep_metadata_json(spec));
  meta["comparison"]["num_realizations"] = static_cast<int>(comparison.samples.size());
  meta["comparison"]["median_relative_gap"] = comparison.median_relative_gap;
  meta["comparison"]["max_relative_gap"] = comparison.max_relative_gap;
  const std::filesystem::path meta_path = cfg.output_dir / "oracle_meta.json";
  std::ofstream meta_os(meta_path);
  if (!meta_os) {
    throw std::runtime_error("cannot open metadata for writing: " + meta_path.string());
  }
  meta_os << meta.dump(2) << '\n';
  if (!meta_os) {
    throw std::runtime_error("failed writing metadata: " + meta_path.string());
  }
}

}  // namespace

int run(const RunConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create output directory " + cfg.output_dir.string() +
                             ": " + ec.message());
  }
  switch (cfg.workflow) {
    case Workflow::alloc: run_alloc(cfg); break;
    case Workflow::sweep: run_sweep_workflow(cfg); break;
    case Workflow::oracle: run_oracle_workflow(cfg); break;
  }
  return 0;
}

}  // namespace bitload
