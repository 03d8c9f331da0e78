#include "ael/gating.hpp"

#include <cmath>
#include <limits>
#include <optional>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace ael {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

GatingParams random_gate(std::size_t d, std::size_t k, std::uint64_t seed, double scale = 1.0) {
  GatingParams g(d, 3, k);
  Rng rng(seed);
  init_uniform(g.w_gate.data, scale, rng);
  init_uniform(g.w_noise.data, scale, rng);
  return g;
}

Vector random_input(std::size_t n, Rng& rng) {
  Vector x(n);
  for (double& v : x) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
  return x;
}

/// Decision with explicit clean scores and noise scales and no sampled noise.
GateDecision decision_from(Vector clean, Vector scales, Vector draws, std::size_t k) {
  GateDecision d;
  d.clean_scores = clean;
  d.noise_scales = scales;
  d.noise_draws = draws;
  d.noisy_scores.resize(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) d.noisy_scores[i] = clean[i] + draws[i] * scales[i];
  d.weights = softmax(keep_top_k(d.noisy_scores, k));
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (d.weights[i] > 0.0) d.selected.push_back(i);
  }
  return d;
}

TEST(KeepTopK, Examples) {
  EXPECT_EQ(keep_top_k(Vector{3, 1, 2}, 2), (Vector{3, kNegInf, 2}));
  EXPECT_EQ(keep_top_k(Vector{3, 1, 2}, 3), (Vector{3, 1, 2}));
  EXPECT_EQ(keep_top_k(Vector{5, 5, 1}, 1), (Vector{5, kNegInf, kNegInf}));
}

TEST(GateForward, ZeroGateIsUniformAtFullK) {
  GatingParams g(5, 3, 3);
  Rng rng(1);
  const auto d = gate_forward(g, random_input(5, rng));
  for (double w : d.weights) EXPECT_DOUBLE_EQ(w, 1.0 / 3.0);
}

TEST(GateForward, InferenceUsesCleanScores) {
  const auto g = random_gate(6, 2, 2);
  Rng rng(3);
  const auto x = random_input(6, rng);
  const auto d = gate_forward(g, x);
  EXPECT_EQ(d.noisy_scores, d.clean_scores);
  for (double e : d.noise_draws) EXPECT_EQ(e, 0.0);
  EXPECT_EQ(gate_forward(g, x).weights, d.weights);
}

TEST(GateForward, HandSoftmaxExample) {
  // One input feature equal to 1 so that the clean scores are the gate row itself.
  GatingParams g(1, 3, 2);
  g.w_gate.data = {3, 1, 2};
  const auto d = gate_forward(g, Vector{1.0});
  EXPECT_NEAR(d.weights[0], 0.7311, 1e-4);
  EXPECT_EQ(d.weights[1], 0.0);
  EXPECT_NEAR(d.weights[2], 0.2689, 1e-4);
  EXPECT_EQ(d.selected, (std::vector<std::size_t>{0, 2}));
}

TEST(GateForward, TrainingModeReproducibleWithSeed) {
  const auto g = random_gate(6, 2, 4);
  Rng input_rng(5);
  const auto x = random_input(6, input_rng);
  Rng a(9), b(9);
  const auto da = gate_forward(g, x, &a);
  const auto db = gate_forward(g, x, &b);
  EXPECT_EQ(da.weights, db.weights);
  EXPECT_EQ(da.noise_draws, db.noise_draws);
}

TEST(GateForward, ExactlyKNonzerosSummingToOne) {
  Rng rng(10);
  for (std::size_t k = 1; k <= 3; ++k) {
    for (int trial = 0; trial < 1000; ++trial) {
      const auto g = random_gate(8, k, rng.next(), 2.0);
      Rng noise(rng.next());
      const auto d = gate_forward(g, random_input(8, rng), &noise);
      std::size_t nonzero = 0;
      double total = 0.0;
      for (double w : d.weights) {
        EXPECT_GE(w, 0.0);
        nonzero += w > 0.0;
        total += w;
      }
      ASSERT_EQ(nonzero, k);
      ASSERT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(GateForward, FullKWithoutNoiseIsSoftmax) {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = random_gate(7, 3, rng.next(), 3.0);
    const auto d = gate_forward(g, random_input(7, rng));
    const auto expected = softmax(d.clean_scores);
    for (std::size_t e = 0; e < 3; ++e) EXPECT_NEAR(d.weights[e], expected[e], 1e-12);
  }
}

TEST(GateForward, ShiftInvariantWithoutNoise) {
  // A bias feature that is always 1 shifts every clean score by the same constant.
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    auto g = random_gate(6, 2, rng.next());
    auto x = random_input(6, rng);
    x[5] = 0.0;
    const auto before = gate_forward(g, x);
    x[5] = 1.0;
    for (std::size_t e = 0; e < 3; ++e) g.w_gate(5, e) = 4.25;
    const auto after = gate_forward(g, x);
    EXPECT_EQ(before.selected, after.selected);
    for (std::size_t e = 0; e < 3; ++e) EXPECT_NEAR(before.weights[e], after.weights[e], 1e-12);
  }
}

TEST(Combine, Examples) {
  GateDecision d;
  d.weights = {1, 0, 0};
  d.selected = {0};
  std::vector<std::optional<Vector>> outs = {Vector{0.1, 0.9}, std::nullopt, std::nullopt};
  EXPECT_EQ(combine(d, outs), (Vector{0.1, 0.9}));

  d.weights = {0.5, 0.5, 0};
  d.selected = {0, 1};
  outs = {Vector{0.2, 0.2}, Vector{0.4, 0.4}, std::nullopt};
  const auto mixed = combine(d, outs);
  EXPECT_NEAR(mixed[0], 0.3, 1e-15);
  EXPECT_NEAR(mixed[1], 0.3, 1e-15);

  outs[1] = std::nullopt;
  EXPECT_THROW(combine(d, outs), std::invalid_argument);
}

TEST(Combine, MatchesDenseSum) {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = random_gate(5, 1 + trial % 3, rng.next());
    Rng noise(rng.next());
    const auto d = gate_forward(g, random_input(5, rng), &noise);
    std::vector<Vector> all(3, Vector(4));
    for (auto& v : all) {
      for (double& x : v) x = rng.uniform();
    }
    Vector expected(4, 0.0);
    for (std::size_t e = 0; e < 3; ++e) {
      for (std::size_t i = 0; i < 4; ++i) expected[i] += d.weights[e] * all[e][i];
    }
    const auto lazy = combine(d, [&](std::size_t e) { return all[e]; });
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(lazy[i], expected[i], 1e-12);
  }
}

TEST(ImportanceLoss, Examples) {
  std::vector<GateDecision> batch(4);
  for (auto& d : batch) d.weights = {1, 0, 0};
  EXPECT_NEAR(importance_loss(batch, 0.01), 2.0 * 0.01, 1e-15);
  EXPECT_EQ(importance_loss(batch, 0.0), 0.0);
  batch[1].weights = {0, 1, 0};
  batch[2].weights = {0, 0, 1};
  batch[3].weights = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  EXPECT_NEAR(importance_loss(batch, 1.0), 0.0, 1e-15);
}

TEST(LoadProbability, DominantExpertNearOne) {
  const auto d = decision_from({10, 0, 0}, {0.5, 0.5, 0.5}, {0, 0, 0}, 1);
  EXPECT_GT(load_probability(d, 0, 1), 0.999);
}

TEST(LoadProbability, SymmetricPairIsHalf) {
  GateDecision d = decision_from({1.5, 1.5}, {0.7, 0.7}, {0, 0}, 1);
  EXPECT_NEAR(load_probability(d, 0, 1), 0.5, 1e-9);
  EXPECT_NEAR(load_probability(d, 1, 1), 0.5, 1e-9);
}

TEST(LoadProbability, OneWhenKeepingEveryExpert) {
  const auto d = decision_from({0, 1, 2}, {1, 1, 1}, {0.3, -0.2, 0.1}, 3);
  for (std::size_t e = 0; e < 3; ++e) EXPECT_EQ(load_probability(d, e, 3), 1.0);
}

TEST(LoadProbability, MatchesMonteCarlo) {
  Rng rng(14);
  for (int instance = 0; instance < 20; ++instance) {
    const std::size_t k = 1 + instance % 2;
    Vector clean(3), scales(3), draws(3);
    for (std::size_t e = 0; e < 3; ++e) {
      clean[e] = 2.0 * rng.uniform() - 1.0;
      scales[e] = 0.2 + rng.uniform();
      draws[e] = std_normal_sample(rng);
    }
    const auto d = decision_from(clean, scales, draws, k);
    for (std::size_t e = 0; e < 3; ++e) {
      // Redraw only expert e's noise; count how often it lands in the top k.
      constexpr int kDraws = 100000;
      int hits = 0;
      Vector noisy = d.noisy_scores;
      for (int s = 0; s < kDraws; ++s) {
        noisy[e] = clean[e] + std_normal_sample(rng) * scales[e];
        std::size_t above = 0;
        for (std::size_t j = 0; j < 3; ++j) above += j != e && noisy[j] > noisy[e];
        hits += above < k;
      }
      EXPECT_NEAR(load_probability(d, e, k), static_cast<double>(hits) / kDraws, 0.01)
          << "instance " << instance << " expert " << e;
    }
  }
}

TEST(LoadProbability, InsideUnitIntervalAndMonotoneInOwnScore) {
  Vector previous(3, 0.0);
  for (double c = -3.0; c <= 3.0; c += 0.25) {
    const auto d = decision_from({c, 0.4, -0.1}, {0.8, 0.6, 0.9}, {0.0, 0.5, -0.3}, 1);
    const double p = load_probability(d, 0, 1);
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
    EXPECT_GE(p, previous[0]);
    previous[0] = p;
  }
}

TEST(LoadLoss, Examples) {
  std::vector<GateDecision> batch{decision_from({1, 1, 1}, {1, 1, 1}, {0, 0, 0}, 2)};
  EXPECT_NEAR(load_loss(batch, 2, 1.0), 0.0, 1e-15);
  batch.push_back(decision_from({3, 0, -1}, {0.5, 1, 2}, {0.1, 0.2, 0.3}, 2));
  EXPECT_EQ(load_loss(batch, 2, 0.0), 0.0);
}

TEST(LoadLoss, MatchesLoopOracle) {
  Rng rng(15);
  std::vector<GateDecision> batch;
  for (int b = 0; b < 6; ++b) {
    Vector clean(3), scales(3), draws(3);
    for (std::size_t e = 0; e < 3; ++e) {
      clean[e] = rng.uniform();
      scales[e] = 0.3 + rng.uniform();
      draws[e] = std_normal_sample(rng);
    }
    batch.push_back(decision_from(clean, scales, draws, 2));
  }
  // Loop oracle with the definitional k-th largest competitor.
  Vector load_sum(3, 0.0);
  for (const auto& d : batch) {
    for (std::size_t e = 0; e < 3; ++e) {
      Vector others;
      for (std::size_t j = 0; j < 3; ++j) {
        if (j != e) others.push_back(d.noisy_scores[j]);
      }
      std::sort(others.begin(), others.end(), std::greater<>());
      load_sum[e] += std_normal_cdf((d.clean_scores[e] - others[1]) / d.noise_scales[e]);
    }
  }
  const double cv = coefficient_of_variation(load_sum);
  EXPECT_NEAR(load_loss(batch, 2, 0.3), 0.3 * cv * cv, 1e-10);
}

TEST(ImportanceLoss, GradientStepReducesImbalance) {
  // Two experts, expert 0 dominates; descend importance_loss only.
  GatingParams g(2, 2, 2);
  g.w_gate(0, 0) = 2.0;
  g.w_gate(1, 0) = 1.0;
  const std::vector<Vector> inputs = {{1, 0}, {0, 1}, {1, 1}};
  auto cv_now = [&] {
    std::vector<GateDecision> batch;
    for (const auto& x : inputs) batch.push_back(gate_forward(g, x));
    return coefficient_of_variation(importance(batch));
  };
  const double before = cv_now();
  std::vector<GateDecision> batch;
  for (const auto& x : inputs) batch.push_back(gate_forward(g, x));
  const auto grad_imp = cv_squared_gradient(importance(batch));
  auto grads = g.zeros_like();
  for (std::size_t b = 0; b < inputs.size(); ++b) gate_backward(g, inputs[b], batch[b], grad_imp, {}, grads);
  for (std::size_t i = 0; i < g.w_gate.data.size(); ++i) g.w_gate.data[i] -= 0.1 * grads.w_gate.data[i];
  EXPECT_LT(cv_now(), before);
}

TEST(GateBackward, MatchesFiniteDifferences) {
  // Loss = sum_e a_e * G_e + sum_e b_e * P_e with fixed draws, checked against both matrices.
  Rng rng(16);
  for (std::size_t k = 1; k <= 3; ++k) {
    auto g = random_gate(4, k, 17 + k, 0.7);
    Vector x = {1, 0, 1, 1};
    Rng noise(18);
    const auto base = gate_forward(g, x, &noise);
    const Vector draws = base.noise_draws;
    Vector a(3), b(3);
    for (std::size_t e = 0; e < 3; ++e) {
      a[e] = rng.uniform() - 0.5;
      b[e] = rng.uniform() - 0.5;
    }
    auto loss = [&] {
      GateDecision d;
      d.clean_scores = Vector(3, 0.0);
      d.noise_logits = Vector(3, 0.0);
      for (std::size_t e = 0; e < 3; ++e) {
        for (std::size_t i = 0; i < 4; ++i) {
          d.clean_scores[e] += x[i] * g.w_gate(i, e);
          d.noise_logits[e] += x[i] * g.w_noise(i, e);
        }
      }
      d = decision_from(d.clean_scores, softplus(d.noise_logits), draws, k);
      double acc = 0.0;
      for (std::size_t e = 0; e < 3; ++e) acc += a[e] * d.weights[e] + b[e] * load_probability(d, e, k);
      return acc;
    };
    auto grads = g.zeros_like();
    gate_backward(g, x, base, a, b, grads);
    for (std::size_t i = 0; i < g.w_gate.data.size(); ++i) {
      const double num_gate = testing_util::central_difference(loss, g.w_gate.data[i], 1e-6);
      EXPECT_LT(testing_util::relative_error(grads.w_gate.data[i], num_gate), 1e-4) << "k=" << k << " gate " << i;
      const double num_noise = testing_util::central_difference(loss, g.w_noise.data[i], 1e-6);
      EXPECT_LT(testing_util::relative_error(grads.w_noise.data[i], num_noise), 1e-4) << "k=" << k << " noise " << i;
    }
  }
}

}  // namespace
}  // namespace ael
