#include "ael/gating.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ael {

GatingParams::GatingParams(std::size_t num_items, std::size_t num_experts, std::size_t k_)
    : w_gate(num_items, num_experts), w_noise(num_items, num_experts), k(k_) {
  if (k < 1 || k > num_experts) throw std::invalid_argument("GatingParams: k must be in [1, num_experts]");
}

void GatingParams::set_zero() {
  std::fill(w_gate.data.begin(), w_gate.data.end(), 0.0);
  std::fill(w_noise.data.begin(), w_noise.data.end(), 0.0);
}

namespace {

/// Indices sorted by descending score, lower index first among ties.
std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

Vector project(const Matrix& w, std::span<const double> x) {
  Vector out(w.cols, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) continue;
    const auto r = w.row(i);
    for (std::size_t e = 0; e < w.cols; ++e) out[e] += x[i] * r[e];
  }
  return out;
}

}  // namespace

Vector keep_top_k(std::span<const double> scores, std::size_t k) {
  if (k < 1 || k > scores.size()) throw std::invalid_argument("keep_top_k: k out of range");
  Vector out(scores.size(), -std::numeric_limits<double>::infinity());
  const auto order = descending_order(scores);
  for (std::size_t r = 0; r < k; ++r) out[order[r]] = scores[order[r]];
  return out;
}

GateDecision gate_forward(const GatingParams& g, std::span<const double> x, Rng* rng) {
  if (x.size() != g.input_dim()) throw std::invalid_argument("gate_forward: input dimension mismatch");
  const std::size_t n = g.num_experts();
  GateDecision d;
  d.clean_scores = project(g.w_gate, x);
  d.noise_logits = project(g.w_noise, x);
  d.noise_scales = softplus(d.noise_logits);
  d.noise_draws.assign(n, 0.0);
  d.noisy_scores = d.clean_scores;
  if (rng) {
    for (std::size_t e = 0; e < n; ++e) {
      d.noise_draws[e] = std_normal_sample(*rng);
      d.noisy_scores[e] += d.noise_draws[e] * d.noise_scales[e];
    }
  }
  const Vector kept = keep_top_k(d.noisy_scores, g.k);
  d.weights = softmax(kept);
  for (std::size_t e = 0; e < n; ++e) {
    if (!std::isinf(kept[e])) d.selected.push_back(e);
  }
  return d;
}

Vector combine(const GateDecision& decision, std::span<const std::optional<Vector>> expert_outputs) {
  if (expert_outputs.size() != decision.weights.size()) {
    throw std::invalid_argument("combine: expert count mismatch");
  }
  return combine(decision, [&](std::size_t e) -> Vector {
    if (!expert_outputs[e]) throw std::invalid_argument("combine: missing output for a selected expert");
    return *expert_outputs[e];
  });
}

Vector combine(const GateDecision& decision, const std::function<Vector(std::size_t)>& expert) {
  Vector out;
  for (std::size_t e : decision.selected) {
    const Vector y = expert(e);
    if (out.empty()) out.assign(y.size(), 0.0);
    if (y.size() != out.size()) throw std::invalid_argument("combine: expert output length mismatch");
    const double w = decision.weights[e];
    for (std::size_t i = 0; i < y.size(); ++i) out[i] += w * y[i];
  }
  return out;
}

Vector importance(std::span<const GateDecision> batch) {
  if (batch.empty()) throw std::invalid_argument("importance: empty batch");
  Vector sums(batch.front().weights.size(), 0.0);
  for (const auto& d : batch) {
    for (std::size_t e = 0; e < sums.size(); ++e) sums[e] += d.weights[e];
  }
  return sums;
}

double importance_loss(std::span<const GateDecision> batch, double w_importance) {
  const double cv = coefficient_of_variation(importance(batch));
  return w_importance * cv * cv;
}

std::size_t kth_excluding(std::span<const double> noisy_scores, std::size_t expert, std::size_t k) {
  const auto order = descending_order(noisy_scores);
  std::size_t seen = 0;
  for (std::size_t idx : order) {
    if (idx == expert) continue;
    if (++seen == k) return idx;
  }
  throw std::invalid_argument("kth_excluding: k must be smaller than the number of experts");
}

double load_probability(const GateDecision& d, std::size_t expert, std::size_t k) {
  const std::size_t n = d.clean_scores.size();
  if (expert >= n) throw std::invalid_argument("load_probability: expert index out of range");
  if (k >= n) return 1.0;
  const std::size_t j = kth_excluding(d.noisy_scores, expert, k);
  return std_normal_cdf((d.clean_scores[expert] - d.noisy_scores[j]) / d.noise_scales[expert]);
}

double load_probability(const GatingParams& g, std::span<const double> x, std::size_t expert, Rng* rng) {
  return load_probability(gate_forward(g, x, rng), expert, g.k);
}

Vector load(std::span<const GateDecision> batch, std::size_t k) {
  if (batch.empty()) throw std::invalid_argument("load: empty batch");
  Vector sums(batch.front().weights.size(), 0.0);
  for (const auto& d : batch) {
    for (std::size_t e = 0; e < sums.size(); ++e) sums[e] += load_probability(d, e, k);
  }
  return sums;
}

double load_loss(std::span<const GateDecision> batch, std::size_t k, double w_load) {
  const double cv = coefficient_of_variation(load(batch, k));
  return w_load * cv * cv;
}

double load_loss(const GatingParams& g, std::span<const Vector> batch_inputs, double w_load, Rng* rng) {
  std::vector<GateDecision> decisions;
  decisions.reserve(batch_inputs.size());
  for (const auto& x : batch_inputs) decisions.push_back(gate_forward(g, x, rng));
  return load_loss(decisions, g.k, w_load);
}

Vector cv_squared_gradient(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("cv_squared_gradient: empty vector");
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  Vector grad(v.size(), 0.0);
  if (mean == 0.0) return grad;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= n;
  // CV² = var / mean²; d var/dv_e = 2(v_e - mean)/n, d mean/dv_e = 1/n.
  for (std::size_t e = 0; e < v.size(); ++e) {
    grad[e] = 2.0 * (v[e] - mean) / (n * mean * mean) - 2.0 * var / (n * mean * mean * mean);
  }
  return grad;
}

void gate_backward(const GatingParams& g, std::span<const double> x, const GateDecision& d,
                   std::span<const double> grad_weights, std::span<const double> grad_load_probability,
                   GatingParams& grads) {
  const std::size_t n = g.num_experts();
  if (grad_weights.size() != n || (!grad_load_probability.empty() && grad_load_probability.size() != n)) {
    throw std::invalid_argument("gate_backward: gradient length mismatch");
  }
  Vector grad_clean(n, 0.0), grad_scale(n, 0.0), grad_noisy(n, 0.0);

  // Softmax over the selected entries; unselected scores sit at -inf and get no gradient.
  double weighted = 0.0;
  for (std::size_t e : d.selected) weighted += d.weights[e] * grad_weights[e];
  for (std::size_t e : d.selected) grad_noisy[e] += d.weights[e] * (grad_weights[e] - weighted);

  if (!grad_load_probability.empty() && g.k < n) {
    for (std::size_t e = 0; e < n; ++e) {
      const double gp = grad_load_probability[e];
      if (gp == 0.0) continue;
      const std::size_t j = kth_excluding(d.noisy_scores, e, g.k);
      const double sigma = d.noise_scales[e];
      const double z = (d.clean_scores[e] - d.noisy_scores[j]) / sigma;
      const double dens = std_normal_pdf(z) / sigma;
      grad_clean[e] += gp * dens;
      grad_noisy[j] -= gp * dens;
      grad_scale[e] -= gp * dens * z;
    }
  }

  for (std::size_t e = 0; e < n; ++e) {
    grad_clean[e] += grad_noisy[e];
    grad_scale[e] += grad_noisy[e] * d.noise_draws[e];
  }
  Vector grad_logit(n);
  for (std::size_t e = 0; e < n; ++e) grad_logit[e] = grad_scale[e] * sigmoid(d.noise_logits[e]);

  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) continue;
    auto gg = grads.w_gate.row(i);
    auto gn = grads.w_noise.row(i);
    for (std::size_t e = 0; e < n; ++e) {
      gg[e] += x[i] * grad_clean[e];
      gn[e] += x[i] * grad_logit[e];
    }
  }
}

}  // namespace ael
