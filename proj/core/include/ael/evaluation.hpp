#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ael/dataset.hpp"
#include "ael/numerics.hpp"

namespace ael {

/// Frozen scorer: (user, raw train vector) -> one score per item.
struct Ranker {
  std::string name;
  std::function<Vector(UserIndex, std::span<const double>)> score;
};

/// Items not in the user's train row, by descending score then ascending index.
/// Throws std::invalid_argument when the user has no test items.
std::vector<ItemIndex> rank_items(const Ranker& ranker, UserIndex user, const InteractionMatrix& train,
                                  const InteractionMatrix& test);
std::vector<ItemIndex> rank_items(const Ranker& ranker, UserIndex user, const SplitDataset& split);

/// Ordering used by rank_items, exposed for callers that already hold scores.
/// With `limit`, only the first `limit` positions are returned.
std::vector<ItemIndex> rank_scores(std::span<const double> scores, std::span<const ItemIndex> excluded,
                                   std::size_t limit = static_cast<std::size_t>(-1));

/// `test_items` must be sorted ascending. All three throw on an empty test set or N == 0.
double recall_at(std::span<const ItemIndex> ranking, std::span<const ItemIndex> test_items, std::size_t n);
double precision_at(std::span<const ItemIndex> ranking, std::span<const ItemIndex> test_items, std::size_t n);
double mrr_at(std::span<const ItemIndex> ranking, std::span<const ItemIndex> test_items, std::size_t n);

struct MetricsReport {
  std::vector<std::size_t> cutoffs;
  Vector recall;
  Vector precision;
  Vector mrr;
  std::size_t users_evaluated = 0;
  std::uint64_t seed = 0;

  double recall_at(std::size_t n) const;
  double precision_at(std::size_t n) const;
  double mrr_at(std::size_t n) const;
};

/// Uniform average over users with a nonempty test row. Throws std::invalid_argument
/// when no user is evaluable.
MetricsReport evaluate(const Ranker& ranker, const InteractionMatrix& train, const InteractionMatrix& test,
                       std::span<const std::size_t> cutoffs);
MetricsReport evaluate(const Ranker& ranker, const SplitDataset& split, std::span<const std::size_t> cutoffs);

struct AggregateReport {
  std::vector<std::size_t> cutoffs;
  Vector recall_mean, recall_std;
  Vector precision_mean, precision_std;
  Vector mrr_mean, mrr_std;
  std::size_t runs = 0;
};

/// Mean and population std per metric across runs. Throws on mismatched cutoffs.
AggregateReport aggregate_seeds(std::span<const MetricsReport> reports);

/// Flat (name, value) view: "recall@5", "mrr@5", ... in cutoff order per metric.
std::vector<std::pair<std::string, double>> metric_values(const MetricsReport& r);

/// Metrics JSON: {dataset, model, seed, k, recall@N..., mrr@N..., precision@N..., users_evaluated}.
std::string metrics_json(const MetricsReport& r, const std::string& dataset, const std::string& model,
                         std::size_t k);

}  // namespace ael
