#pragma once

#include <span>
#include <string>

#include "ael/dataset.hpp"
#include "ael/evaluation.hpp"
#include "ael/gating.hpp"
#include "ael/model.hpp"

namespace ael {

enum class AggregatorKind { SparseGate, Average, Bma };

/// "gate", "average" or "bma"; throws ConfigError otherwise.
AggregatorKind parse_aggregator(const std::string& name);
const char* aggregator_name(AggregatorKind kind);

/// How the three parent outputs are combined. `weights` is used by BMA only.
struct Aggregator {
  AggregatorKind kind = AggregatorKind::SparseGate;
  Vector weights;
};

/// Elementwise mean of the expert outputs.
Vector average_combine(std::span<const Vector> expert_outputs);

/// w_i ∝ exp(-loss_i / temperature).
Vector bma_weights(std::span<const double> validation_losses, double temperature = 1.0);

/// Mean reconstruction MSE of each parent alone over users with validation items. The
/// input is the user's fit row and the target is fit ∪ validation.
Vector parent_validation_losses(const AelModel& model, const InteractionMatrix& fit,
                                const InteractionMatrix& validation);

/// Rankers below hold references: the model and gate must outlive them.
Ranker single_expert_ranker(const AelModel& model, Parent parent);
Ranker single_expert_ranker(const AelModel& model, const std::string& parent_name);
Ranker gated_ranker(const AelModel& model, const GatingParams& gating);
Ranker average_ranker(const AelModel& model);
Ranker weighted_ranker(const AelModel& model, Vector weights, std::string name);
Ranker make_ranker(const Aggregator& aggregator, const AelModel& model, const GatingParams& gating);

}  // namespace ael
