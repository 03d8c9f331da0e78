#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ael/dataset.hpp"
#include "ael/numerics.hpp"

namespace ael {

inline constexpr std::size_t kNumLevels = 3;
inline constexpr std::size_t kNumExperts = 3;

/// Sub-autoencoder levels, outermost first.
enum class Level : std::size_t { Large = 0, Medium = 1, Small = 2 };

/// Parent autoencoders. Each is a prefix of the shared level stack: encode through
/// `depth` levels, then decode back out in reverse.
enum class Parent : std::size_t { Mild = 0, Moderate = 1, Strong = 2 };

struct ParentComposition {
  Parent name;
  std::size_t depth;
};

ParentComposition composition(Parent p);
const char* parent_name(Parent p);
/// Accepts "mild", "moderate", "strong" in any case; throws std::invalid_argument otherwise.
Parent parse_parent(const std::string& name);
inline Parent parent_at(std::size_t expert) { return static_cast<Parent>(expert); }

struct HiddenDims {
  std::size_t large = 128;
  std::size_t medium = 48;
  std::size_t small = 12;

  std::size_t operator[](std::size_t level) const {
    return level == 0 ? large : level == 1 ? medium : small;
  }
  bool operator==(const HiddenDims&) const = default;
};

/// One level of the stack. The encoder maps prev_dim -> hidden, the per-user embedding
/// row is added before the sigmoid, and the decoder maps hidden -> prev_dim.
struct SubAEParams {
  Level level = Level::Large;
  DenseLayer encoder;
  Matrix user_embedding;
  DenseLayer decoder;

  std::size_t hidden() const { return encoder.out_dim(); }
  std::size_t prev_dim() const { return encoder.in_dim(); }
  bool operator==(const SubAEParams&) const = default;
};

/// The three shared sub-autoencoders. Parents own no parameters of their own, so every
/// parent reads the same storage.
class AelModel {
 public:
  AelModel() = default;
  /// All parameters zero.
  AelModel(std::size_t num_users, std::size_t num_items, HiddenDims dims = {});

  /// Uniform ±sqrt(6/(in+out)) weights, ±0.01 embeddings, zero biases.
  void initialize(Rng& rng);

  std::size_t num_users() const { return num_users_; }
  std::size_t num_items() const { return num_items_; }
  const HiddenDims& dims() const { return dims_; }

  SubAEParams& level(std::size_t l) { return levels_.at(l); }
  const SubAEParams& level(std::size_t l) const { return levels_.at(l); }
  SubAEParams& level(Level l) { return level(static_cast<std::size_t>(l)); }
  const SubAEParams& level(Level l) const { return level(static_cast<std::size_t>(l)); }

  /// Parameter blocks in checkpoint order: per level encoder weight, encoder bias,
  /// user embedding, decoder weight, decoder bias.
  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;
  std::vector<std::span<double>> level_blocks(std::size_t l);
  std::vector<std::span<const double>> level_blocks(std::size_t l) const;

  std::size_t num_parameters() const;
  /// Same shapes, all zero. Used as a gradient accumulator.
  AelModel zeros_like() const { return AelModel(num_users_, num_items_, dims_); }
  void set_zero();

  bool operator==(const AelModel&) const = default;

 private:
  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  HiddenDims dims_;
  std::array<SubAEParams, kNumLevels> levels_;
};

/// Records the vector widths a forward pass visits, for instrumentation.
struct PathTrace {
  std::vector<std::size_t> widths;
  std::size_t encode_calls = 0;
  std::size_t decode_calls = 0;
};

Vector encode_level(const SubAEParams& subae, UserIndex user, std::span<const double> input);
Vector decode_level(const SubAEParams& subae, std::span<const double> code);

/// Intermediate activations of one parent pass, kept for the backward pass.
/// codes[l] is the output of encoder l; decoded[l] is the output of decoder l, so
/// decoded[0] is the reconstruction of the input.
struct ParentActivations {
  Parent parent = Parent::Mild;
  std::vector<Vector> codes;
  std::vector<Vector> decoded;

  const Vector& output() const { return decoded.front(); }
};

ParentActivations parent_forward_cached(const AelModel& model, Parent parent, UserIndex user,
                                        std::span<const double> input, PathTrace* trace = nullptr);
Vector parent_forward(const AelModel& model, Parent parent, UserIndex user,
                      std::span<const double> input, PathTrace* trace = nullptr);

/// Adds d(loss)/d(parameters) into `grads` given d(loss)/d(output). Parameters off the
/// path are untouched.
void parent_backward(const AelModel& model, const ParentActivations& acts, UserIndex user,
                     std::span<const double> input, std::span<const double> grad_output,
                     AelModel& grads);

/// Scalar parameter count of the level stack, plus 2·D·E gate weights when requested.
std::uint64_t count_parameters(std::uint64_t num_users, std::uint64_t num_items, HiddenDims dims,
                               bool include_gating);
/// Count for a single level with the given input width.
std::uint64_t count_level_parameters(std::uint64_t num_users, std::uint64_t prev_dim,
                                     std::uint64_t hidden);

}  // namespace ael
