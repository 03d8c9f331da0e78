#include "ael/model.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace ael {
namespace {

using testing_util::central_difference;
using testing_util::relative_error;

constexpr HiddenDims kTiny{4, 3, 2};

AelModel random_model(std::size_t users, std::size_t items, HiddenDims dims, std::uint64_t seed, double scale = 0.5) {
  AelModel m(users, items, dims);
  Rng rng(seed);
  for (auto block : m.blocks()) init_uniform(block, scale, rng);
  return m;
}

Vector random_input(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Vector x(n);
  for (double& v : x) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
  return x;
}

Vector sigmoid_oracle(const DenseLayer& layer, std::span<const double> in, std::span<const double> extra) {
  Vector out(layer.out_dim());
  for (std::size_t j = 0; j < out.size(); ++j) {
    double acc = layer.bias[j];
    for (std::size_t i = 0; i < in.size(); ++i) acc += in[i] * layer.weight(i, j);
    if (!extra.empty()) acc += extra[j];
    out[j] = 1.0 / (1.0 + std::exp(-acc));
  }
  return out;
}

TEST(Composition, NestedDepths) {
  EXPECT_EQ(composition(Parent::Mild).depth, 1u);
  EXPECT_EQ(composition(Parent::Moderate).depth, 2u);
  EXPECT_EQ(composition(Parent::Strong).depth, 3u);
  EXPECT_EQ(parse_parent("Moderate"), Parent::Moderate);
  EXPECT_EQ(parse_parent("STRONG"), Parent::Strong);
  EXPECT_THROW(parse_parent("extreme"), std::invalid_argument);
}

TEST(SubAE, ShapesFollowStack) {
  AelModel m(5, 30);
  EXPECT_EQ(m.level(Level::Large).prev_dim(), 30u);
  EXPECT_EQ(m.level(Level::Medium).prev_dim(), 128u);
  EXPECT_EQ(m.level(Level::Small).prev_dim(), 48u);
  EXPECT_GT(m.level(0).hidden(), m.level(1).hidden());
  EXPECT_GT(m.level(1).hidden(), m.level(2).hidden());
  EXPECT_EQ(m.level(Level::Small).user_embedding.rows, 5u);
}

TEST(EncodeLevel, ZeroParametersGiveHalf) {
  AelModel m(2, 7, kTiny);
  const auto z = encode_level(m.level(0), 1, random_input(7, 1));
  ASSERT_EQ(z.size(), 4u);
  for (double v : z) EXPECT_EQ(v, 0.5);
  const auto x = decode_level(m.level(0), z);
  ASSERT_EQ(x.size(), 7u);
  for (double v : x) EXPECT_EQ(v, 0.5);
}

TEST(EncodeLevel, MatchesLoopOracle) {
  const auto m = random_model(3, 9, kTiny, 2);
  const auto x = random_input(9, 3);
  const auto& large = m.level(Level::Large);
  const auto z = encode_level(large, 2, x);
  const auto expected = sigmoid_oracle(large.encoder, x, large.user_embedding.row(2));
  for (std::size_t j = 0; j < z.size(); ++j) EXPECT_NEAR(z[j], expected[j], 1e-12);
  const auto out = decode_level(large, z);
  const auto expected_out = sigmoid_oracle(large.decoder, z, {});
  for (std::size_t j = 0; j < out.size(); ++j) EXPECT_NEAR(out[j], expected_out[j], 1e-12);
}

TEST(EncodeLevel, EmbeddingParticipates) {
  const auto m = random_model(2, 9, kTiny, 4);
  const auto x = random_input(9, 5);
  EXPECT_NE(encode_level(m.level(0), 0, x), encode_level(m.level(0), 1, x));
}

TEST(ParentForward, ZeroModelIsConstantHalf) {
  AelModel m(1, 6, kTiny);
  for (std::size_t p = 0; p < kNumExperts; ++p) {
    for (double v : parent_forward(m, parent_at(p), 0, random_input(6, 1))) EXPECT_EQ(v, 0.5);
  }
}

TEST(ParentForward, PathsVisitExpectedBottlenecks) {
  AelModel m(1, 200);
  const auto x = random_input(200, 2);
  const std::pair<Parent, std::size_t> cases[] = {{Parent::Mild, 128}, {Parent::Moderate, 48}, {Parent::Strong, 12}};
  for (const auto& [parent, bottleneck] : cases) {
    PathTrace trace;
    parent_forward(m, parent, 0, x, &trace);
    const std::size_t depth = composition(parent).depth;
    EXPECT_EQ(trace.encode_calls, depth);
    EXPECT_EQ(trace.decode_calls, depth);
    EXPECT_EQ(*std::min_element(trace.widths.begin(), trace.widths.end()), bottleneck);
  }
}

TEST(ParentForward, StrongMatchesChainedLevels) {
  const auto m = random_model(2, 8, kTiny, 6);
  const auto x = random_input(8, 7);
  const auto z1 = encode_level(m.level(0), 1, x);
  const auto z2 = encode_level(m.level(1), 1, z1);
  const auto z3 = encode_level(m.level(2), 1, z2);
  const auto expected = decode_level(m.level(0), decode_level(m.level(1), decode_level(m.level(2), z3)));
  const auto out = parent_forward(m, Parent::Strong, 1, x);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], expected[i], 1e-12);
}

TEST(ParentForward, OutputsStrictlyInsideUnitInterval) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = random_model(2, 10, kTiny, seed, 2.0);
    for (std::size_t p = 0; p < kNumExperts; ++p) {
      for (double v : parent_forward(m, parent_at(p), 0, random_input(10, seed + 100))) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
      }
    }
  }
}

TEST(ParentForward, LargeEncoderIsSharedByAllParents) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto m = random_model(2, 8, kTiny, seed);
    const auto x = random_input(8, seed + 1);
    std::vector<Vector> before;
    for (std::size_t p = 0; p < kNumExperts; ++p) before.push_back(parent_forward(m, parent_at(p), 0, x));
    for (double& w : m.level(Level::Large).encoder.weight.data) w += 0.1;
    for (std::size_t p = 0; p < kNumExperts; ++p) EXPECT_NE(parent_forward(m, parent_at(p), 0, x), before[p]);
  }
}

TEST(ParentBackward, ZeroUpstreamGivesZeroGradient) {
  const auto m = random_model(2, 6, kTiny, 1);
  const auto x = random_input(6, 2);
  auto grads = m.zeros_like();
  const auto acts = parent_forward_cached(m, Parent::Strong, 0, x);
  parent_backward(m, acts, 0, x, Vector(6, 0.0), grads);
  EXPECT_EQ(grads, m.zeros_like());
}

TEST(ParentBackward, MildLeavesDeeperLevelsUntouched) {
  const auto m = random_model(2, 6, kTiny, 3);
  const auto x = random_input(6, 4);
  auto grads = m.zeros_like();
  const auto acts = parent_forward_cached(m, Parent::Mild, 1, x);
  parent_backward(m, acts, 1, x, Vector(6, 1.0), grads);
  const auto zero = m.zeros_like();
  EXPECT_EQ(grads.level(Level::Medium), zero.level(Level::Medium));
  EXPECT_EQ(grads.level(Level::Small), zero.level(Level::Small));
  EXPECT_NE(grads.level(Level::Large), zero.level(Level::Large));
}

class ParentGradient : public ::testing::TestWithParam<Parent> {};

TEST_P(ParentGradient, MatchesFiniteDifferences) {
  const Parent parent = GetParam();
  auto m = random_model(3, 6, kTiny, 11);
  const auto x = random_input(6, 12);
  const UserIndex user = 2;
  // Scalar loss sum_i c_i * out_i with fixed random c.
  Vector c(6);
  Rng rng(13);
  for (double& v : c) v = 2.0 * rng.uniform() - 1.0;
  auto loss = [&] {
    const auto out = parent_forward(m, parent, user, x);
    double acc = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) acc += c[i] * out[i];
    return acc;
  };
  auto grads = m.zeros_like();
  parent_backward(m, parent_forward_cached(m, parent, user, x), user, x, c, grads);

  double worst = 0.0;
  auto params = m.blocks();
  const auto analytic = std::as_const(grads).blocks();
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double numeric = central_difference(loss, params[b][i]);
      worst = std::max(worst, relative_error(analytic[b][i], numeric));
    }
  }
  EXPECT_LT(worst, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(AllParents, ParentGradient,
                         ::testing::Values(Parent::Mild, Parent::Moderate, Parent::Strong));

TEST(CountParameters, ReferenceConfiguration) { EXPECT_EQ(count_parameters(44784, 1020, HiddenDims{}, false), 8695336u); }

TEST(CountParameters, HandFormulaSingleLevel) { EXPECT_EQ(count_level_parameters(1, 2, 1), 8u); }

TEST(CountParameters, MovieLensShape) {
  // Independent evaluation: per level prev*K (enc) + U*K + K + K*prev (dec) + prev.
  std::uint64_t expected = 0;
  std::uint64_t prev = 1682;
  for (std::uint64_t k : {128u, 48u, 12u}) {
    expected += prev * k + 943 * k + k + k * prev + prev;
    prev = k;
  }
  EXPECT_EQ(expected, 623362u);
  EXPECT_EQ(count_parameters(943, 1682, HiddenDims{}, false), 623362u);
  EXPECT_EQ(count_parameters(943, 1682, HiddenDims{}, true), 633454u);
}

TEST(CountParameters, EqualsAllocatedScalars) {
  for (auto [users, items] : {std::pair<std::size_t, std::size_t>{3, 6}, {17, 40}, {943, 1682}}) {
    AelModel m(users, items);
    std::size_t allocated = 0;
    for (auto block : m.blocks()) allocated += block.size();
    EXPECT_EQ(allocated, count_parameters(users, items, HiddenDims{}, false));
    EXPECT_EQ(m.num_parameters(), allocated);
  }
}

TEST(Initialize, DeterministicAndBounded) {
  AelModel a(4, 30), b(4, 30);
  Rng ra(5), rb(5);
  a.initialize(ra);
  b.initialize(rb);
  EXPECT_EQ(a, b);
  for (double v : a.level(0).user_embedding.data) EXPECT_LE(std::abs(v), 0.01);
  for (double v : a.level(0).encoder.bias) EXPECT_EQ(v, 0.0);
  const double limit = std::sqrt(6.0 / (30 + 128));
  for (double v : a.level(0).encoder.weight.data) EXPECT_LE(std::abs(v), limit);
}

}  // namespace
}  // namespace ael
