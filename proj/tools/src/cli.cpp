#include "ael_cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <memory>

#include "ael/checkpoint.hpp"
#include "ael/errors.hpp"
#include "ael_cli/config.hpp"
#include "ael_cli/experiments.hpp"

namespace ael::cli {

namespace {

std::string flag_for(const std::string& key) {
  std::string flag = "--" + key;
  std::replace(flag.begin(), flag.end(), '_', '-');
  return flag;
}

/// Flag values as given on the command line, keyed by setting name.
struct FlagValues {
  std::string config_file;
  std::map<std::string, std::string> values;
};

void add_setting_flags(CLI::App& cmd, FlagValues& flags) {
  cmd.add_option("--config", flags.config_file, "key=value config file");
  for (const auto& key : setting_keys()) cmd.add_option(flag_for(key), flags.values[key]);
}

/// Defaults, then the config file, then flags that were actually given.
Config resolve(const CLI::App& cmd, const FlagValues& flags) {
  Config config;
  if (!flags.config_file.empty()) load_config_file(config, flags.config_file);
  for (const auto& [key, value] : flags.values) {
    if (cmd.count(flag_for(key)) > 0) apply_setting(config, key, value);
  }
  config.validate();
  return config;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string dataset_label(const Config& config) { return config.dataset.filename().string(); }

int cmd_train(const Config& config, std::ostream& out) {
  const auto split = load_split(config);
  std::filesystem::create_directories(config.out);
  const auto run = train_run(split, config.train, config.checkpoint_path());
  write_training_log(config.out / "train_log.csv", run.report);
  const Ranker ranker = aggregator_ranker(config.aggregator, run.model, run.gating, split, config.train,
                                          config.bma_temperature);
  auto report = evaluate(ranker, split, config.cutoffs);
  report.seed = config.train.seed;
  const std::string json = metrics_json(report, dataset_label(config), aggregator_name(config.aggregator),
                                        config.train.k);
  write_text(config.out / "metrics.json", json);
  out << "trained " << run.report.epochs.size() << " epochs, best epoch " << run.report.best_epoch
      << ", checkpoint " << config.checkpoint_path().string() << "\n"
      << json;
  return kExitOk;
}

int cmd_evaluate(const Config& config, std::ostream& out) {
  const auto split = load_split(config);
  const auto checkpoint = load_checkpoint(config.checkpoint_path());
  if (checkpoint.model.num_users() != split.train.num_users() ||
      checkpoint.model.num_items() != split.train.num_items()) {
    throw DataError("checkpoint shape does not match the dataset");
  }
  if (config.aggregator == AggregatorKind::SparseGate && !checkpoint.gating) {
    throw DataError("checkpoint has no gate parameters");
  }
  const GatingParams gating =
      checkpoint.gating ? *checkpoint.gating : GatingParams(split.train.num_items(), kNumExperts, config.train.k);
  const Ranker ranker = aggregator_ranker(config.aggregator, checkpoint.model, gating, split, config.train,
                                          config.bma_temperature);
  auto report = evaluate(ranker, split, config.cutoffs);
  report.seed = config.train.seed;
  const std::string json = metrics_json(report, dataset_label(config), aggregator_name(config.aggregator), gating.k);
  write_text(config.out / ("evaluate_" + std::string(aggregator_name(config.aggregator)) + ".json"), json);
  out << json;
  return kExitOk;
}

int cmd_sweep_k(const Config& config, std::ostream& out, std::ostream& err) {
  const auto split = load_split(config);
  const auto result = sweep_k(config, split, &err);
  write_sweep_csv(config.out / "sweep_k.csv", result);
  out << "wrote " << (config.out / "sweep_k.csv").string() << "\n";
  return kExitOk;
}

int cmd_ablate_noise(const Config& config, std::ostream& out, std::ostream& err) {
  const auto split = load_split(config);
  const auto result = ablate_noise(config, split, &err);
  write_ablation_csv(config.out / "ablate_noise.csv", result);
  out << "wrote " << (config.out / "ablate_noise.csv").string() << "\n";
  return kExitOk;
}

int cmd_compare_aggregators(const Config& config, std::ostream& out, std::ostream& err) {
  const auto split = load_split(config);
  const auto result = compare_aggregators(config, split, &err);
  write_comparison_csv(config.out / "compare_aggregators.csv", result);
  out << "wrote " << (config.out / "compare_aggregators.csv").string() << "\n";
  return kExitOk;
}

int cmd_count_params(const Config& config, std::ostream& out) {
  const auto& d = config.train.dims;
  const char* names[] = {"large", "medium", "small"};
  std::uint64_t prev = config.items;
  out << "users " << config.users << ", items " << config.items << "\n";
  for (std::size_t l = 0; l < kNumLevels; ++l) {
    out << names[l] << " (" << prev << " -> " << d[l]
        << "): " << group_thousands(count_level_parameters(config.users, prev, d[l])) << "\n";
    prev = d[l];
  }
  const auto without = count_parameters(config.users, config.items, d, false);
  const auto with = count_parameters(config.users, config.items, d, true);
  out << "gating: " << group_thousands(with - without) << "\n"
      << "total without gating: " << group_thousands(without) << "\n"
      << "total with gating: " << group_thousands(with) << "\n";
  return kExitOk;
}

}  // namespace

std::string group_thousands(unsigned long long value) {
  std::string digits = std::to_string(value);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive ensemble of denoising autoencoders for implicit feedback", "ael"};
  app.require_subcommand(1);
  struct Command {
    CLI::App* app;
    FlagValues flags;
  };
  std::vector<std::unique_ptr<Command>> commands;
  const std::pair<const char*, const char*> specs[] = {
      {"train", "train one model, write checkpoint, training log and metrics"},
      {"evaluate", "evaluate a checkpoint"},
      {"sweep-k", "train and evaluate k = 1, 2, 3 over the seeds"},
      {"ablate-noise", "inject false positives at each rate and compare experts"},
      {"compare-aggregators", "gate vs average vs BMA on the same models"},
      {"count-params", "print the parameter count breakdown"},
  };
  for (const auto& [name, help] : specs) {
    auto cmd = std::make_unique<Command>();
    cmd->app = app.add_subcommand(name, help);
    add_setting_flags(*cmd->app, cmd->flags);
    commands.push_back(std::move(cmd));
  }

  // CLI11 takes the arguments in reverse order.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitConfig;
  }

  try {
    for (const auto& cmd : commands) {
      if (!cmd->app->parsed()) continue;
      const Config config = resolve(*cmd->app, cmd->flags);
      const std::string name = cmd->app->get_name();
      if (name == "train") return cmd_train(config, out);
      if (name == "evaluate") return cmd_evaluate(config, out);
      if (name == "sweep-k") return cmd_sweep_k(config, out, err);
      if (name == "ablate-noise") return cmd_ablate_noise(config, out, err);
      if (name == "compare-aggregators") return cmd_compare_aggregators(config, out, err);
      return cmd_count_params(config, out);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace ael::cli
