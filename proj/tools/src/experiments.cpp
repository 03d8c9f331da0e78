#include "ael_cli/experiments.hpp"

#include <cmath>
#include <fstream>

#include "ael/errors.hpp"

namespace ael::cli {

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(10);
  return out;
}

void log_run(std::ostream* log, const std::string& label, const MetricsReport& r) {
  if (!log) return;
  *log << label;
  for (const auto& [name, value] : metric_values(r)) *log << " " << name << "=" << value;
  *log << "\n";
}

}  // namespace

SplitDataset load_split(const Config& config) {
  if (config.dataset.empty()) throw DataError("no dataset given");
  const auto loaded = load_interactions(config.dataset, config.format);
  return split_train_test(loaded.matrix, config.train_ratio, config.split_seed);
}

TrainedRun train_run(const SplitDataset& split, const TrainConfig& cfg, const std::filesystem::path& checkpoint) {
  TrainedRun run{make_model(split.train.num_users(), split.train.num_items(), cfg),
                 GatingParams(split.train.num_items(), kNumExperts, cfg.k), {}};
  run.report = train(run.model, run.gating, split, cfg, checkpoint);
  return run;
}

Ranker aggregator_ranker(AggregatorKind kind, const AelModel& model, const GatingParams& gating,
                         const SplitDataset& split, const TrainConfig& cfg, double temperature) {
  Aggregator aggregator{kind, {}};
  if (kind == AggregatorKind::Bma) {
    const auto carve = validation_carve(split.train, cfg);
    aggregator.weights = bma_weights(parent_validation_losses(model, carve.train, carve.test), temperature);
  }
  return make_ranker(aggregator, model, gating);
}

MetricSummary summarize(const std::vector<MetricsReport>& runs) {
  MetricSummary s;
  if (runs.empty()) return s;
  for (const auto& [name, value] : metric_values(runs.front())) s.names.push_back(name);
  for (const auto& name : s.names) {
    Vector values;
    for (const auto& r : runs) {
      for (const auto& [n, v] : metric_values(r)) {
        if (n == name) values.push_back(v);
      }
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    s.mean[name] = mean;
    s.std[name] = std::sqrt(var / static_cast<double>(values.size()));
  }
  return s;
}

SweepResult sweep_k(const Config& config, const SplitDataset& split, std::ostream* log) {
  SweepResult result;
  for (std::size_t k = 1; k <= kNumExperts; ++k) {
    for (std::uint64_t seed : config.seeds) {
      TrainConfig cfg = config.train;
      cfg.k = k;
      cfg.seed = seed;
      const auto run = train_run(split, cfg);
      auto report = evaluate(gated_ranker(run.model, run.gating), split, config.cutoffs);
      report.seed = seed;
      log_run(log, "k=" + std::to_string(k) + " seed=" + std::to_string(seed), report);
      result.runs[k].push_back(report);
    }
    result.summary[k] = summarize(result.runs[k]);
  }
  return result;
}

void write_sweep_csv(const std::filesystem::path& path, const SweepResult& result) {
  auto out = open_csv(path);
  out << "k,metric,mean,std\n";
  for (const auto& [k, s] : result.summary) {
    for (const auto& name : s.names) out << k << "," << name << "," << s.mean.at(name) << "," << s.std.at(name) << "\n";
  }
}

std::uint64_t noise_seed(std::uint64_t seed, std::size_t rate_index) {
  return Rng(seed).split(1000 + rate_index).next();
}

AblationResult ablate_noise(const Config& config, const SplitDataset& split, std::ostream* log) {
  AblationResult result;
  result.rates = config.rates;
  for (std::size_t r = 0; r < config.rates.size(); ++r) {
    std::map<std::string, std::vector<MetricsReport>> per_ranker;
    for (std::uint64_t seed : config.seeds) {
      const SplitDataset noisy{inject_noise(split.train, config.rates[r], noise_seed(seed, r)), split.test};
      TrainConfig cfg = config.train;
      cfg.seed = seed;
      const auto run = train_run(noisy, cfg);
      for (const auto& name : kAblationRankers) {
        const Ranker ranker = name == "average" ? average_ranker(run.model) : single_expert_ranker(run.model, name);
        auto report = evaluate(ranker, noisy, config.cutoffs);
        report.seed = seed;
        log_run(log, "rate=" + std::to_string(config.rates[r]) + " seed=" + std::to_string(seed) + " " + name, report);
        per_ranker[name].push_back(report);
      }
    }
    std::map<std::string, MetricSummary> summary;
    for (const auto& [name, runs] : per_ranker) summary[name] = summarize(runs);
    result.runs.push_back(std::move(per_ranker));
    result.summary.push_back(std::move(summary));
  }
  return result;
}

void write_ablation_csv(const std::filesystem::path& path, const AblationResult& result) {
  auto out = open_csv(path);
  out << "rate,ranker,metric,mean\n";
  for (std::size_t r = 0; r < result.rates.size(); ++r) {
    for (const auto& name : kAblationRankers) {
      const auto& s = result.summary[r].at(name);
      for (const auto& metric : s.names) out << result.rates[r] << "," << name << "," << metric << "," << s.mean.at(metric) << "\n";
    }
  }
}

AggregatorComparison compare_aggregators(const Config& config, const SplitDataset& split, std::ostream* log) {
  AggregatorComparison result;
  const AggregatorKind kinds[] = {AggregatorKind::SparseGate, AggregatorKind::Average, AggregatorKind::Bma};
  for (std::uint64_t seed : config.seeds) {
    TrainConfig cfg = config.train;
    cfg.seed = seed;
    const auto run = train_run(split, cfg);
    for (AggregatorKind kind : kinds) {
      const Ranker ranker = aggregator_ranker(kind, run.model, run.gating, split, cfg, config.bma_temperature);
      auto report = evaluate(ranker, split, config.cutoffs);
      report.seed = seed;
      log_run(log, std::string(aggregator_name(kind)) + " seed=" + std::to_string(seed), report);
      result.runs[aggregator_name(kind)].push_back(report);
    }
  }
  for (const auto& [name, runs] : result.runs) result.summary[name] = summarize(runs);
  return result;
}

void write_comparison_csv(const std::filesystem::path& path, const AggregatorComparison& result) {
  auto out = open_csv(path);
  out << "aggregator,metric,mean,std\n";
  for (const char* name : {"gate", "average", "bma"}) {
    const auto& s = result.summary.at(name);
    for (const auto& metric : s.names) out << name << "," << metric << "," << s.mean.at(metric) << "," << s.std.at(metric) << "\n";
  }
}

}  // namespace ael::cli
