#include "ael/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ael/errors.hpp"

namespace ael {

AggregatorKind parse_aggregator(const std::string& name) {
  if (name == "gate") return AggregatorKind::SparseGate;
  if (name == "average") return AggregatorKind::Average;
  if (name == "bma") return AggregatorKind::Bma;
  throw ConfigError("unknown aggregator '" + name + "' (expected gate, average or bma)");
}

const char* aggregator_name(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::SparseGate: return "gate";
    case AggregatorKind::Average: return "average";
    case AggregatorKind::Bma: return "bma";
  }
  return "?";
}

Vector average_combine(std::span<const Vector> expert_outputs) {
  if (expert_outputs.size() != kNumExperts) throw std::invalid_argument("average_combine: expected three outputs");
  const std::size_t d = expert_outputs.front().size();
  Vector out(d, 0.0);
  for (const auto& y : expert_outputs) {
    if (y.size() != d) throw std::invalid_argument("average_combine: length mismatch");
    for (std::size_t i = 0; i < d; ++i) out[i] += y[i];
  }
  for (double& v : out) v /= static_cast<double>(expert_outputs.size());
  return out;
}

Vector bma_weights(std::span<const double> validation_losses, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("bma_weights: temperature must be positive");
  Vector logits(validation_losses.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(validation_losses[i])) throw std::invalid_argument("bma_weights: non-finite loss");
    logits[i] = -validation_losses[i] / temperature;
  }
  return softmax(logits);
}

Vector parent_validation_losses(const AelModel& model, const InteractionMatrix& fit,
                                const InteractionMatrix& validation) {
  Vector losses(kNumExperts, 0.0);
  std::size_t users = 0;
  for (UserIndex u = 0; u < validation.num_users(); ++u) {
    if (validation.row(u).empty()) continue;
    const Vector x = fit.dense_row(u);
    Vector target = x;
    for (ItemIndex i : validation.row(u)) target[i] = 1.0;
    for (std::size_t e = 0; e < kNumExperts; ++e) {
      losses[e] += mse(parent_forward(model, parent_at(e), u, x), target);
    }
    ++users;
  }
  if (users == 0) throw std::invalid_argument("parent_validation_losses: no validation users");
  for (double& l : losses) l /= static_cast<double>(users);
  return losses;
}

Ranker single_expert_ranker(const AelModel& model, Parent parent) {
  return {parent_name(parent), [&model, parent](UserIndex u, std::span<const double> x) {
            return parent_forward(model, parent, u, x);
          }};
}

Ranker single_expert_ranker(const AelModel& model, const std::string& name) {
  return single_expert_ranker(model, parse_parent(name));
}

Ranker gated_ranker(const AelModel& model, const GatingParams& gating) {
  return {"gate", [&model, &gating](UserIndex u, std::span<const double> x) {
            const GateDecision d = gate_forward(gating, x, nullptr);
            return combine(d, [&](std::size_t e) { return parent_forward(model, parent_at(e), u, x); });
          }};
}

Ranker average_ranker(const AelModel& model) {
  return {"average", [&model](UserIndex u, std::span<const double> x) {
            std::vector<Vector> outs;
            for (std::size_t e = 0; e < kNumExperts; ++e) outs.push_back(parent_forward(model, parent_at(e), u, x));
            return average_combine(outs);
          }};
}

Ranker weighted_ranker(const AelModel& model, Vector weights, std::string name) {
  if (weights.size() != kNumExperts) throw std::invalid_argument("weighted_ranker: expected three weights");
  return {std::move(name), [&model, w = std::move(weights)](UserIndex u, std::span<const double> x) {
            Vector out(x.size(), 0.0);
            for (std::size_t e = 0; e < kNumExperts; ++e) {
              if (w[e] == 0.0) continue;
              const Vector y = parent_forward(model, parent_at(e), u, x);
              for (std::size_t i = 0; i < y.size(); ++i) out[i] += w[e] * y[i];
            }
            return out;
          }};
}

Ranker make_ranker(const Aggregator& aggregator, const AelModel& model, const GatingParams& gating) {
  switch (aggregator.kind) {
    case AggregatorKind::SparseGate: return gated_ranker(model, gating);
    case AggregatorKind::Average: return average_ranker(model);
    case AggregatorKind::Bma: return weighted_ranker(model, aggregator.weights, "bma");
  }
  throw std::invalid_argument("make_ranker: unknown aggregator");
}

}  // namespace ael
