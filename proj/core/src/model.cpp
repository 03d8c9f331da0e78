#include "ael/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace ael {

ParentComposition composition(Parent p) { return {p, static_cast<std::size_t>(p) + 1}; }

const char* parent_name(Parent p) {
  switch (p) {
    case Parent::Mild: return "mild";
    case Parent::Moderate: return "moderate";
    case Parent::Strong: return "strong";
  }
  return "?";
}

Parent parse_parent(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "mild") return Parent::Mild;
  if (lower == "moderate") return Parent::Moderate;
  if (lower == "strong") return Parent::Strong;
  throw std::invalid_argument("unknown parent autoencoder '" + name + "'");
}

AelModel::AelModel(std::size_t num_users, std::size_t num_items, HiddenDims dims)
    : num_users_(num_users), num_items_(num_items), dims_(dims) {
  if (num_users == 0 || num_items == 0 || dims.large == 0 || dims.medium == 0 || dims.small == 0) {
    throw std::invalid_argument("AelModel: dimensions must be positive");
  }
  std::size_t prev = num_items;
  for (std::size_t l = 0; l < kNumLevels; ++l) {
    auto& s = levels_[l];
    s.level = static_cast<Level>(l);
    s.encoder = DenseLayer(prev, dims[l]);
    s.user_embedding = Matrix(num_users, dims[l]);
    s.decoder = DenseLayer(dims[l], prev);
    prev = dims[l];
  }
}

void AelModel::initialize(Rng& rng) {
  for (auto& s : levels_) {
    const double enc_limit = std::sqrt(6.0 / static_cast<double>(s.prev_dim() + s.hidden()));
    init_uniform(s.encoder.weight.data, enc_limit, rng);
    std::fill(s.encoder.bias.begin(), s.encoder.bias.end(), 0.0);
    init_uniform(s.user_embedding.data, 0.01, rng);
    init_uniform(s.decoder.weight.data, enc_limit, rng);
    std::fill(s.decoder.bias.begin(), s.decoder.bias.end(), 0.0);
  }
}

std::vector<std::span<double>> AelModel::level_blocks(std::size_t l) {
  auto& s = levels_.at(l);
  return {s.encoder.weight.data, s.encoder.bias, s.user_embedding.data, s.decoder.weight.data,
          s.decoder.bias};
}

std::vector<std::span<const double>> AelModel::level_blocks(std::size_t l) const {
  const auto& s = levels_.at(l);
  return {s.encoder.weight.data, s.encoder.bias, s.user_embedding.data, s.decoder.weight.data,
          s.decoder.bias};
}

std::vector<std::span<double>> AelModel::blocks() {
  std::vector<std::span<double>> out;
  for (std::size_t l = 0; l < kNumLevels; ++l) {
    auto b = level_blocks(l);
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

std::vector<std::span<const double>> AelModel::blocks() const {
  std::vector<std::span<const double>> out;
  for (std::size_t l = 0; l < kNumLevels; ++l) {
    auto b = level_blocks(l);
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

std::size_t AelModel::num_parameters() const {
  std::size_t n = 0;
  for (auto b : blocks()) n += b.size();
  return n;
}

void AelModel::set_zero() {
  for (auto b : blocks()) std::fill(b.begin(), b.end(), 0.0);
}

namespace {

void check_user(const SubAEParams& subae, UserIndex user) {
  if (user >= subae.user_embedding.rows) throw std::out_of_range("user index out of range");
}

}  // namespace

Vector encode_level(const SubAEParams& subae, UserIndex user, std::span<const double> input) {
  check_user(subae, user);
  Vector pre = dense_forward(subae.encoder, input);
  const auto emb = subae.user_embedding.row(user);
  for (std::size_t j = 0; j < pre.size(); ++j) pre[j] = sigmoid(pre[j] + emb[j]);
  return pre;
}

Vector decode_level(const SubAEParams& subae, std::span<const double> code) {
  Vector pre = dense_forward(subae.decoder, code);
  for (double& v : pre) v = sigmoid(v);
  return pre;
}

ParentActivations parent_forward_cached(const AelModel& model, Parent parent, UserIndex user,
                                        std::span<const double> input, PathTrace* trace) {
  if (input.size() != model.num_items()) {
    throw std::invalid_argument("parent_forward: input length does not match item count");
  }
  const std::size_t depth = composition(parent).depth;
  ParentActivations acts;
  acts.parent = parent;
  acts.codes.resize(depth);
  acts.decoded.resize(depth);
  if (trace) trace->widths.push_back(input.size());

  std::span<const double> current = input;
  for (std::size_t l = 0; l < depth; ++l) {
    acts.codes[l] = encode_level(model.level(l), user, current);
    current = acts.codes[l];
    if (trace) {
      trace->widths.push_back(current.size());
      ++trace->encode_calls;
    }
  }
  for (std::size_t l = depth; l-- > 0;) {
    acts.decoded[l] = decode_level(model.level(l), current);
    current = acts.decoded[l];
    if (trace) {
      trace->widths.push_back(current.size());
      ++trace->decode_calls;
    }
  }
  return acts;
}

Vector parent_forward(const AelModel& model, Parent parent, UserIndex user,
                      std::span<const double> input, PathTrace* trace) {
  auto acts = parent_forward_cached(model, parent, user, input, trace);
  return std::move(acts.decoded.front());
}

void parent_backward(const AelModel& model, const ParentActivations& acts, UserIndex user,
                     std::span<const double> input, std::span<const double> grad_output,
                     AelModel& grads) {
  const std::size_t depth = acts.codes.size();
  if (input.size() != model.num_items() || grad_output.size() != model.num_items()) {
    throw std::invalid_argument("parent_backward: vector length does not match item count");
  }
  if (grads.num_users() != model.num_users() || grads.num_items() != model.num_items() ||
      !(grads.dims() == model.dims())) {
    throw std::invalid_argument("parent_backward: gradient shape does not match model");
  }

  // Decoders, outermost first. Decoder l reads the deepest code or the output of decoder l+1.
  Vector grad(grad_output.begin(), grad_output.end());
  for (std::size_t l = 0; l < depth; ++l) {
    const Vector& y = acts.decoded[l];
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] *= y[j] * (1.0 - y[j]);
    const Vector& in = (l + 1 == depth) ? acts.codes[depth - 1] : acts.decoded[l + 1];
    Vector grad_in(in.size(), 0.0);
    auto& g = grads.level(l);
    dense_backward_accumulate(model.level(l).decoder, in, grad, g.decoder.weight, g.decoder.bias, grad_in);
    grad = std::move(grad_in);
  }

  // Encoders, innermost first.
  for (std::size_t l = depth; l-- > 0;) {
    const Vector& z = acts.codes[l];
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] *= z[j] * (1.0 - z[j]);
    auto& g = grads.level(l);
    auto emb = g.user_embedding.row(user);
    for (std::size_t j = 0; j < grad.size(); ++j) emb[j] += grad[j];
    std::span<const double> in = l == 0 ? input : std::span<const double>(acts.codes[l - 1]);
    if (l == 0) {
      dense_backward_accumulate(model.level(l).encoder, in, grad, g.encoder.weight, g.encoder.bias, {});
    } else {
      Vector grad_in(in.size(), 0.0);
      dense_backward_accumulate(model.level(l).encoder, in, grad, g.encoder.weight, g.encoder.bias, grad_in);
      grad = std::move(grad_in);
    }
  }
}

std::uint64_t count_level_parameters(std::uint64_t num_users, std::uint64_t prev_dim,
                                     std::uint64_t hidden) {
  return prev_dim * hidden + num_users * hidden + hidden + hidden * prev_dim + prev_dim;
}

std::uint64_t count_parameters(std::uint64_t num_users, std::uint64_t num_items, HiddenDims dims,
                               bool include_gating) {
  std::uint64_t total = 0;
  std::uint64_t prev = num_items;
  for (std::size_t l = 0; l < kNumLevels; ++l) {
    total += count_level_parameters(num_users, prev, dims[l]);
    prev = dims[l];
  }
  if (include_gating) total += 2 * num_items * kNumExperts;
  return total;
}

}  // namespace ael
