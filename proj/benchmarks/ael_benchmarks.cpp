#include <benchmark/benchmark.h>

#include "ael/aggregation.hpp"
#include "ael/evaluation.hpp"
#include "ael/model.hpp"
#include "ael/numerics.hpp"
#include "ael/training.hpp"

namespace {

using namespace ael;

Vector sparse_row(std::size_t items, double density, Rng& rng) {
  Vector x(items, 0.0);
  for (double& v : x) v = rng.uniform() < density ? 1.0 : 0.0;
  return x;
}

InteractionMatrix random_interactions(std::size_t users, std::size_t items, double density, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<ItemIndex>> rows(users);
  for (auto& r : rows) {
    for (ItemIndex i = 0; i < items; ++i) {
      if (rng.uniform() < density) r.push_back(i);
    }
    if (r.empty()) r.push_back(static_cast<ItemIndex>(rng.below(items)));
  }
  return InteractionMatrix(users, items, std::move(rows));
}

void BM_DenseForward(benchmark::State& state) {
  const auto in = static_cast<std::size_t>(state.range(0));
  const auto out = static_cast<std::size_t>(state.range(1));
  DenseLayer layer(in, out);
  Rng rng(1);
  init_uniform(layer.weight.data, 0.1, rng);
  const Vector x = sparse_row(in, 0.06, rng);
  for (auto _ : state) benchmark::DoNotOptimize(dense_forward(layer, x));
}
BENCHMARK(BM_DenseForward)->Args({1682, 128})->Args({128, 1682})->Args({128, 48});

void BM_DenseBackward(benchmark::State& state) {
  const auto in = static_cast<std::size_t>(state.range(0));
  const auto out = static_cast<std::size_t>(state.range(1));
  DenseLayer layer(in, out);
  Rng rng(2);
  init_uniform(layer.weight.data, 0.1, rng);
  const Vector x = sparse_row(in, 0.5, rng);
  Vector up(out, 0.01);
  Matrix grad_weight(in, out);
  Vector grad_bias(out, 0.0), grad_input(in, 0.0);
  for (auto _ : state) {
    dense_backward_accumulate(layer, x, up, grad_weight, grad_bias, grad_input);
    benchmark::DoNotOptimize(grad_input.data());
  }
}
BENCHMARK(BM_DenseBackward)->Args({1682, 128})->Args({128, 1682});

void BM_ParentForward(benchmark::State& state) {
  TrainConfig cfg;
  auto model = make_model(943, 1682, cfg);
  Rng rng(3);
  const Vector x = sparse_row(1682, 0.06, rng);
  const Parent parent = parent_at(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(parent_forward(model, parent, 7, x));
}
BENCHMARK(BM_ParentForward)->DenseRange(0, 2);

void BM_BatchLossGradients(benchmark::State& state) {
  const auto data = random_interactions(943, 1682, 0.06, 4);
  TrainConfig cfg;
  auto model = make_model(943, 1682, cfg);
  GatingParams gating(1682, kNumExperts, cfg.k);
  auto model_grads = model.zeros_like();
  auto gate_grads = gating.zeros_like();
  std::vector<UserIndex> batch(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = static_cast<UserIndex>(i);
  Rng rng(5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(batch_loss_gradients(model, gating, batch, data, cfg, rng, model_grads, gate_grads));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BatchLossGradients)->Arg(32)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_RankScores(benchmark::State& state) {
  Rng rng(6);
  Vector scores(1682);
  for (double& s : scores) s = rng.uniform();
  const std::vector<ItemIndex> excluded = {3, 50, 900};
  const auto limit = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(rank_scores(scores, excluded, limit));
}
BENCHMARK(BM_RankScores)->Arg(20)->Arg(1682);

}  // namespace

BENCHMARK_MAIN();
