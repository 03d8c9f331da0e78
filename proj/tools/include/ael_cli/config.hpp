#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ael/aggregation.hpp"
#include "ael/dataset.hpp"
#include "ael/training.hpp"

namespace ael::cli {

/// Everything a command needs. Built from defaults, then a key=value file, then flags.
struct Config {
  TrainConfig train;
  std::filesystem::path dataset;
  FileFormat format = FileFormat::Auto;
  std::filesystem::path out = "out";
  std::filesystem::path checkpoint;  // empty: <out>/checkpoint.ael
  std::vector<std::size_t> cutoffs{5, 20};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  AggregatorKind aggregator = AggregatorKind::SparseGate;
  std::vector<double> rates{0.0, 0.25, 0.5, 1.0};
  double train_ratio = 0.8;
  /// The 8:2 split is fixed across seeds; only training randomness varies.
  std::uint64_t split_seed = 2024;
  double bma_temperature = 1.0;
  /// Shape for count-params.
  std::uint64_t users = 44784;
  std::uint64_t items = 1020;

  std::filesystem::path checkpoint_path() const {
    return checkpoint.empty() ? out / "checkpoint.ael" : checkpoint;
  }
  /// Throws ConfigError.
  void validate() const;
};

/// Keys accepted by apply_setting and in config files.
const std::vector<std::string>& setting_keys();

/// Sets one field from its text form. Throws ConfigError on an unknown key or a bad value.
void apply_setting(Config& config, const std::string& key, const std::string& value);

/// Flat `key = value` lines; `#` starts a comment. Throws ConfigError on unreadable
/// files or malformed lines.
void load_config_file(Config& config, const std::filesystem::path& path);

}  // namespace ael::cli
