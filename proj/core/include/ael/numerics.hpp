#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ael {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::size_t size() const { return data.size(); }
  bool operator==(const Matrix&) const = default;
};

/// Affine map y = xᵀW + b with W stored in_dim × out_dim.
struct DenseLayer {
  Matrix weight;
  Vector bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in_dim, std::size_t out_dim) : weight(in_dim, out_dim), bias(out_dim, 0.0) {}

  std::size_t in_dim() const { return weight.rows; }
  std::size_t out_dim() const { return weight.cols; }
  bool operator==(const DenseLayer&) const = default;
};

struct DenseGradients {
  Matrix weight;
  Vector bias;
  Vector input;
};

Vector dense_forward(const DenseLayer& layer, std::span<const double> input);

/// Gradients of the affine map for a single input row.
DenseGradients dense_backward(const DenseLayer& layer, std::span<const double> input,
                              std::span<const double> upstream);

/// Adds the affine-map gradients into caller-owned buffers. Zero input entries are
/// skipped when accumulating the weight gradient, so sparse inputs cost O(nnz · out).
/// Pass an empty grad_input to skip the input gradient.
void dense_backward_accumulate(const DenseLayer& layer, std::span<const double> input,
                               std::span<const double> upstream, Matrix& grad_weight,
                               std::span<double> grad_bias, std::span<double> grad_input);

double sigmoid(double x);
double softplus(double x);
Vector sigmoid(std::span<const double> v);
Vector softplus(std::span<const double> v);

/// Max-shifted softmax. -inf entries map to exactly 0; all -inf is an error.
Vector softmax(std::span<const double> v);

/// xoshiro256** seeded through splitmix64. Bit-for-bit reproducible across platforms,
/// unlike the standard distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Independent stream derived from this generator's seed and a stream id.
  Rng split(std::uint64_t stream) const;

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  bool operator==(const Rng&) const = default;

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;

  friend double std_normal_sample(Rng& rng);
};

/// Marsaglia polar method.
double std_normal_sample(Rng& rng);
double std_normal_cdf(double x);
double std_normal_pdf(double x);

/// Population standard deviation over mean; 0 for an all-zero vector.
double coefficient_of_variation(std::span<const double> v);

double mse(std::span<const double> a, std::span<const double> b);

void init_uniform(std::span<double> values, double limit, Rng& rng);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment accumulators for a fixed list of parameter blocks.
struct OptimizerState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<Vector> first_moment;
  std::vector<Vector> second_moment;

  OptimizerState() = default;
  OptimizerState(AdamConfig cfg, std::span<const std::size_t> block_sizes);
};

/// One adaptive-moment update in place. Throws NumericError on a non-finite gradient
/// (parameters are left untouched in that case) and std::invalid_argument on shape mismatch.
void optimizer_step(OptimizerState& state, std::span<const std::span<double>> params,
                    std::span<const std::span<const double>> grads);

}  // namespace ael
