#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "ael/aggregation.hpp"
#include "ael/evaluation.hpp"
#include "ael/gating.hpp"
#include "ael/model.hpp"
#include "ael/training.hpp"
#include "ael_cli/config.hpp"

namespace ael::cli {

/// Loads config.dataset and splits it with config.split_seed. Throws DataError.
SplitDataset load_split(const Config& config);

struct TrainedRun {
  AelModel model;
  GatingParams gating;
  TrainReport report;
};

/// Fresh model and gate from cfg.seed, trained on split.train.
TrainedRun train_run(const SplitDataset& split, const TrainConfig& cfg,
                     const std::filesystem::path& checkpoint = {});

/// Ranker for the configured aggregator. BMA weights come from the validation carve of
/// split.train. The returned ranker references `model` and `gating`.
Ranker aggregator_ranker(AggregatorKind kind, const AelModel& model, const GatingParams& gating,
                         const SplitDataset& split, const TrainConfig& cfg, double temperature);

/// Per-key mean and population std across runs, keyed like metric_values.
struct MetricSummary {
  std::vector<std::string> names;  // metric_values order
  std::map<std::string, double> mean;
  std::map<std::string, double> std;
};
MetricSummary summarize(const std::vector<MetricsReport>& runs);

/// One row group per k in {1, 2, 3}.
struct SweepResult {
  std::map<std::size_t, std::vector<MetricsReport>> runs;  // k -> one report per seed
  std::map<std::size_t, MetricSummary> summary;
};
SweepResult sweep_k(const Config& config, const SplitDataset& split, std::ostream* log = nullptr);
/// Header `k,metric,mean,std`.
void write_sweep_csv(const std::filesystem::path& path, const SweepResult& result);

inline const std::vector<std::string> kAblationRankers{"mild", "moderate", "strong", "average"};

struct AblationResult {
  std::vector<double> rates;
  /// rate index -> ranker -> one report per seed
  std::vector<std::map<std::string, std::vector<MetricsReport>>> runs;
  std::vector<std::map<std::string, MetricSummary>> summary;
};
/// For each rate, injects noise into split.train only, trains once per seed and evaluates
/// the single-expert rankers and the average combiner against the clean test rows.
AblationResult ablate_noise(const Config& config, const SplitDataset& split, std::ostream* log = nullptr);
/// Header `rate,ranker,metric,mean`.
void write_ablation_csv(const std::filesystem::path& path, const AblationResult& result);

struct AggregatorComparison {
  std::map<std::string, std::vector<MetricsReport>> runs;  // aggregator name -> per seed
  std::map<std::string, MetricSummary> summary;
};
/// Trains once per seed and evaluates the gate, average and BMA combiners on that model.
AggregatorComparison compare_aggregators(const Config& config, const SplitDataset& split,
                                         std::ostream* log = nullptr);
/// Header `aggregator,metric,mean,std`.
void write_comparison_csv(const std::filesystem::path& path, const AggregatorComparison& result);

/// Seed used to inject noise for a given training seed and rate index.
std::uint64_t noise_seed(std::uint64_t seed, std::size_t rate_index);

}  // namespace ael::cli
