#include "ael/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ael {

namespace {

void check_query(std::span<const ItemIndex> test_items, std::size_t n) {
  if (test_items.empty()) throw std::invalid_argument("metric: empty test set");
  if (n == 0) throw std::invalid_argument("metric: cutoff must be at least 1");
}

std::size_t hits_at(std::span<const ItemIndex> ranking, std::span<const ItemIndex> test_items, std::size_t n) {
  std::size_t hits = 0;
  const std::size_t limit = std::min(n, ranking.size());
  for (std::size_t r = 0; r < limit; ++r) {
    if (std::binary_search(test_items.begin(), test_items.end(), ranking[r])) ++hits;
  }
  return hits;
}

std::size_t index_of(std::span<const std::size_t> cutoffs, std::size_t n) {
  const auto it = std::find(cutoffs.begin(), cutoffs.end(), n);
  if (it == cutoffs.end()) throw std::out_of_range("cutoff " + std::to_string(n) + " not in report");
  return static_cast<std::size_t>(it - cutoffs.begin());
}

}  // namespace

std::vector<ItemIndex> rank_scores(std::span<const double> scores, std::span<const ItemIndex> excluded,
                                   std::size_t limit) {
  std::vector<ItemIndex> items;
  items.reserve(scores.size());
  for (ItemIndex i = 0; i < scores.size(); ++i) {
    if (!std::binary_search(excluded.begin(), excluded.end(), i)) items.push_back(i);
  }
  const auto before = [&](ItemIndex a, ItemIndex b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  if (limit < items.size()) {
    std::partial_sort(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(limit), items.end(), before);
    items.resize(limit);
  } else {
    std::sort(items.begin(), items.end(), before);
  }
  return items;
}

std::vector<ItemIndex> rank_items(const Ranker& ranker, UserIndex user, const InteractionMatrix& train,
                                  const InteractionMatrix& test) {
  if (test.row(user).empty()) throw std::invalid_argument("rank_items: user has no test items");
  const Vector x = train.dense_row(user);
  const Vector scores = ranker.score(user, x);
  if (scores.size() != train.num_items()) throw std::invalid_argument("rank_items: score length mismatch");
  return rank_scores(scores, train.row(user));
}

std::vector<ItemIndex> rank_items(const Ranker& ranker, UserIndex user, const SplitDataset& split) {
  return rank_items(ranker, user, split.train, split.test);
}

double recall_at(std::span<const ItemIndex> ranking, std::span<const ItemIndex> test_items, std::size_t n) {
  check_query(test_items, n);
  return static_cast<double>(hits_at(ranking, test_items, n)) / static_cast<double>(test_items.size());
}

double precision_at(std::span<const ItemIndex> ranking, std::span<const ItemIndex> test_items, std::size_t n) {
  check_query(test_items, n);
  return static_cast<double>(hits_at(ranking, test_items, n)) / static_cast<double>(n);
}

double mrr_at(std::span<const ItemIndex> ranking, std::span<const ItemIndex> test_items, std::size_t n) {
  check_query(test_items, n);
  const std::size_t limit = std::min(n, ranking.size());
  for (std::size_t r = 0; r < limit; ++r) {
    if (std::binary_search(test_items.begin(), test_items.end(), ranking[r])) {
      return 1.0 / static_cast<double>(r + 1);
    }
  }
  return 0.0;
}

double MetricsReport::recall_at(std::size_t n) const { return recall[index_of(cutoffs, n)]; }
double MetricsReport::precision_at(std::size_t n) const { return precision[index_of(cutoffs, n)]; }
double MetricsReport::mrr_at(std::size_t n) const { return mrr[index_of(cutoffs, n)]; }

MetricsReport evaluate(const Ranker& ranker, const InteractionMatrix& train, const InteractionMatrix& test,
                       std::span<const std::size_t> cutoffs) {
  if (cutoffs.empty()) throw std::invalid_argument("evaluate: no cutoffs");
  MetricsReport r;
  r.cutoffs.assign(cutoffs.begin(), cutoffs.end());
  r.recall.assign(cutoffs.size(), 0.0);
  r.precision.assign(cutoffs.size(), 0.0);
  r.mrr.assign(cutoffs.size(), 0.0);
  const std::size_t depth = *std::max_element(cutoffs.begin(), cutoffs.end());
  for (UserIndex u = 0; u < test.num_users(); ++u) {
    const auto held_out = test.row(u);
    if (held_out.empty()) continue;
    const Vector scores = ranker.score(u, train.dense_row(u));
    if (scores.size() != train.num_items()) throw std::invalid_argument("evaluate: score length mismatch");
    const auto ranking = rank_scores(scores, train.row(u), depth);
    for (std::size_t c = 0; c < cutoffs.size(); ++c) {
      r.recall[c] += ael::recall_at(ranking, held_out, cutoffs[c]);
      r.precision[c] += ael::precision_at(ranking, held_out, cutoffs[c]);
      r.mrr[c] += ael::mrr_at(ranking, held_out, cutoffs[c]);
    }
    ++r.users_evaluated;
  }
  if (r.users_evaluated == 0) throw std::invalid_argument("evaluate: no user has test items");
  const double n = static_cast<double>(r.users_evaluated);
  for (auto* v : {&r.recall, &r.precision, &r.mrr}) {
    for (double& x : *v) x /= n;
  }
  return r;
}

MetricsReport evaluate(const Ranker& ranker, const SplitDataset& split, std::span<const std::size_t> cutoffs) {
  return evaluate(ranker, split.train, split.test, cutoffs);
}

AggregateReport aggregate_seeds(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw std::invalid_argument("aggregate_seeds: no reports");
  AggregateReport a;
  a.cutoffs = reports.front().cutoffs;
  a.runs = reports.size();
  for (const auto& r : reports) {
    if (r.cutoffs != a.cutoffs) throw std::invalid_argument("aggregate_seeds: cutoff mismatch");
  }
  auto stats = [&](Vector MetricsReport::*field, Vector& mean, Vector& std_dev) {
    const std::size_t c = a.cutoffs.size();
    mean.assign(c, 0.0);
    std_dev.assign(c, 0.0);
    const double n = static_cast<double>(reports.size());
    for (const auto& r : reports) {
      for (std::size_t i = 0; i < c; ++i) mean[i] += (r.*field)[i];
    }
    for (double& m : mean) m /= n;
    for (const auto& r : reports) {
      for (std::size_t i = 0; i < c; ++i) {
        const double d = (r.*field)[i] - mean[i];
        std_dev[i] += d * d;
      }
    }
    for (double& s : std_dev) s = std::sqrt(s / n);
  };
  stats(&MetricsReport::recall, a.recall_mean, a.recall_std);
  stats(&MetricsReport::precision, a.precision_mean, a.precision_std);
  stats(&MetricsReport::mrr, a.mrr_mean, a.mrr_std);
  return a;
}

std::vector<std::pair<std::string, double>> metric_values(const MetricsReport& r) {
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t c = 0; c < r.cutoffs.size(); ++c) out.emplace_back("recall@" + std::to_string(r.cutoffs[c]), r.recall[c]);
  for (std::size_t c = 0; c < r.cutoffs.size(); ++c) out.emplace_back("mrr@" + std::to_string(r.cutoffs[c]), r.mrr[c]);
  for (std::size_t c = 0; c < r.cutoffs.size(); ++c) out.emplace_back("precision@" + std::to_string(r.cutoffs[c]), r.precision[c]);
  return out;
}

std::string metrics_json(const MetricsReport& r, const std::string& dataset, const std::string& model,
                         std::size_t k) {
  nlohmann::ordered_json j;
  j["dataset"] = dataset;
  j["model"] = model;
  j["seed"] = r.seed;
  j["k"] = k;
  for (const auto& [name, value] : metric_values(r)) j[name] = value;
  j["users_evaluated"] = r.users_evaluated;
  return j.dump(2) + "\n";
}

}  // namespace ael
