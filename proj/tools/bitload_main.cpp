#include "bitload/run_config.hpp"
#include "bitload/version.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

namespace {

// Every value flag is kept as text and funneled through the same resolver as
// config-file entries, so units, ranges, and diagnostics behave identically
// in both places.
struct FlagText {
  std::string config;
  std::string seed;
  std::string out;
  std::string subcarriers;
  std::string alpha;
  std::string ber_target;
  std::string noise_variance;
  std::string power_threshold;
  std::string power_threshold_frac;
  std::string realizations;
  std::string allocators;
  std::string channel_file;
  std::string sweep_var;
  std::string sweep_values;
  std::string b_max;
  bool force = false;
};

void add_shared_flags(CLI::App* sub, FlagText& flags) {
  sub->add_option("--config", flags.config, "key = value configuration file");
  sub->add_option("--seed", flags.seed, "master seed, default 1");
  sub->add_option("--out", flags.out, "output directory, default .");
  sub->add_option("--subcarriers", flags.subcarriers, "number of subcarriers, default 128");
  sub->add_option("--alpha", flags.alpha, "objective weight in (0, 1), default 0.5");
  sub->add_option("--ber-target", flags.ber_target, "BER target in (0, 0.2), default 1e-4");
  sub->add_option("--noise-variance", flags.noise_variance,
                  "noise variance, unit suffix W/mW/uW, default 1e-9 W");
  sub->add_option("--power-threshold", flags.power_threshold,
                  "total power budget with unit suffix, or 'unbounded' (default)");
  sub->add_option("--power-threshold-frac", flags.power_threshold_frac,
                  "budget as a fraction of the unconstrained total");
  sub->add_option("--realizations", flags.realizations,
                  "Monte Carlo realizations, default 500");
  sub->add_option("--allocators", flags.allocators,
                  "comma list of proposed, proposed_unconstrained, baseline, oracle");
  sub->add_option("--channel-file", flags.channel_file,
                  "run on a fixed channel table (index,re_h,im_h) instead of drawing one");
}

bitload::KeyValueMap collect_flags(const FlagText& flags) {
  bitload::KeyValueMap values;
  auto put = [&values](const char* key, const std::string& text) {
    if (!text.empty()) values[key] = text;
  };
  put("run.seed", flags.seed);
  put("run.out", flags.out);
  put("system.num_subcarriers", flags.subcarriers);
  put("system.alpha", flags.alpha);
  put("system.ber_target", flags.ber_target);
  put("system.noise_variance", flags.noise_variance);
  put("system.power_threshold", flags.power_threshold);
  put("system.power_threshold_frac", flags.power_threshold_frac);
  put("run.realizations", flags.realizations);
  put("run.allocators", flags.allocators);
  put("run.channel_file", flags.channel_file);
  put("sweep.variable", flags.sweep_var);
  put("sweep.values", flags.sweep_values);
  put("oracle.b_max", flags.b_max);
  if (flags.force) values["oracle.force"] = "1";
  return values;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("multicarrier bit and power allocation toolkit (") +
               bitload::kToolName + " " + bitload::kVersion + ")"};
  app.require_subcommand(1);

  FlagText flags;
  CLI::App* alloc_cmd =
      app.add_subcommand("alloc", "allocate one channel realization, write allocation.csv");
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "Monte Carlo sweep, write sweep.csv + sweep_meta.json");
  CLI::App* oracle_cmd = app.add_subcommand(
      "oracle", "greedy vs exhaustive comparison, write oracle_gap.csv + oracle_meta.json");
  add_shared_flags(alloc_cmd, flags);
  add_shared_flags(sweep_cmd, flags);
  add_shared_flags(oracle_cmd, flags);
  sweep_cmd->add_option("--sweep-var", flags.sweep_var,
                        "noise_variance (default), alpha, or power_threshold");
  sweep_cmd->add_option("--sweep-values", flags.sweep_values,
                        "comma-separated sweep values");
  oracle_cmd->add_option("--b-max", flags.b_max,
                         "largest constellation exponent searched, default 12");
  oracle_cmd->add_flag("--force", flags.force, "override the enumeration size guard");

  CLI11_PARSE(app, argc, argv);

  bitload::Workflow workflow = bitload::Workflow::alloc;
  if (app.got_subcommand(sweep_cmd)) workflow = bitload::Workflow::sweep;
  if (app.got_subcommand(oracle_cmd)) workflow = bitload::Workflow::oracle;

  try {
    bitload::KeyValueMap file_values;
    if (!flags.config.empty()) file_values = bitload::read_config_file(flags.config);
    const bitload::RunConfig cfg =
        bitload::resolve_config(workflow, file_values, collect_flags(flags));
    return bitload::run(cfg);
  } catch (const bitload::OracleGuardError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const bitload::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
