#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ael/numerics.hpp"

namespace ael {

/// Gate and noise projections (D × E each) plus the number of experts kept per input.
struct GatingParams {
  Matrix w_gate;
  Matrix w_noise;
  std::size_t k = 2;

  GatingParams() = default;
  /// Zero-initialized: every expert starts with the same clean score.
  GatingParams(std::size_t num_items, std::size_t num_experts, std::size_t k);

  std::size_t num_experts() const { return w_gate.cols; }
  std::size_t input_dim() const { return w_gate.rows; }

  std::vector<std::span<double>> blocks() { return {w_gate.data, w_noise.data}; }
  std::vector<std::span<const double>> blocks() const { return {w_gate.data, w_noise.data}; }
  GatingParams zeros_like() const { return GatingParams(input_dim(), num_experts(), k); }
  void set_zero();

  bool operator==(const GatingParams&) const = default;
};

struct GateDecision {
  Vector weights;        // G(x), zero off `selected`
  Vector clean_scores;   // x · W_gate
  Vector noise_logits;   // x · W_noise
  Vector noise_scales;   // softplus(noise_logits)
  Vector noise_draws;    // standard normal draws, all zero at inference
  Vector noisy_scores;   // clean + draw · scale
  std::vector<std::size_t> selected;  // ascending expert indices
};

/// Keeps the k largest entries (ties toward the lower index) and sets the rest to -inf.
Vector keep_top_k(std::span<const double> scores, std::size_t k);

/// Noisy top-k gating. With an rng the noise term is sampled (training); without one the
/// noisy scores equal the clean scores (inference).
GateDecision gate_forward(const GatingParams& g, std::span<const double> x, Rng* rng = nullptr);

/// Weighted sum of the selected experts' outputs. Throws std::invalid_argument when a
/// selected expert has no output.
Vector combine(const GateDecision& decision, std::span<const std::optional<Vector>> expert_outputs);

/// Evaluates only the selected experts.
Vector combine(const GateDecision& decision, const std::function<Vector(std::size_t)>& expert);

/// Per-expert sum of gate weights over the batch.
Vector importance(std::span<const GateDecision> batch);
double importance_loss(std::span<const GateDecision> batch, double w_importance);

/// Index of the k-th highest noisy score among experts other than `expert`
/// (ties toward the lower index).
std::size_t kth_excluding(std::span<const double> noisy_scores, std::size_t expert, std::size_t k);

/// Probability that `expert` stays in the top k when only its own noise is redrawn:
/// Φ((clean_e - kth_excluding_e(noisy)) / noise_scale_e). Identically 1 when k equals
/// the number of experts.
double load_probability(const GateDecision& decision, std::size_t expert, std::size_t k);
double load_probability(const GatingParams& g, std::span<const double> x, std::size_t expert,
                        Rng* rng = nullptr);

/// Per-expert sum of load probabilities over the batch.
Vector load(std::span<const GateDecision> batch, std::size_t k);
double load_loss(std::span<const GateDecision> batch, std::size_t k, double w_load);
/// Computes gate decisions for the inputs first (noisy when rng is given).
double load_loss(const GatingParams& g, std::span<const Vector> batch_inputs, double w_load,
                 Rng* rng = nullptr);

/// d(CV(v)^2)/dv with population variance; zero when the mean is zero.
Vector cv_squared_gradient(std::span<const double> v);

/// Backpropagates d(loss)/d(weights) and d(loss)/d(load probability) of one input into
/// the gate matrices. `grad_load_probability` may be empty.
void gate_backward(const GatingParams& g, std::span<const double> x, const GateDecision& decision,
                   std::span<const double> grad_weights, std::span<const double> grad_load_probability,
                   GatingParams& grads);

}  // namespace ael
