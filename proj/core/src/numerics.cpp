#include "ael/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ael/errors.hpp"

namespace ael {

#if defined(__GNUC__) && defined(__x86_64__) && !defined(__clang__)
#define AEL_KERNEL __attribute__((target_clones("avx2", "default")))
#else
#define AEL_KERNEL
#endif

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

AEL_KERNEL void axpy(double a, const double* __restrict__ x, double* __restrict__ y, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) y[j] += a * x[j];
}

/// Four interleaved partial sums combined in a fixed order, so the result does not
/// depend on the vector width the compiler picks.
AEL_KERNEL double dot(const double* __restrict__ a, const double* __restrict__ b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    s0 += a[j] * b[j];
    s1 += a[j + 1] * b[j + 1];
    s2 += a[j + 2] * b[j + 2];
    s3 += a[j + 3] * b[j + 3];
  }
  for (; j < n; ++j) s0 += a[j] * b[j];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace

Vector dense_forward(const DenseLayer& layer, std::span<const double> input) {
  require(input.size() == layer.in_dim(), "dense_forward: input size does not match in_dim");
  Vector out(layer.bias);
  const std::size_t out_dim = layer.out_dim();
  double* o = out.data();
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double xi = input[i];
    if (xi == 0.0) continue;
    axpy(xi, layer.weight.data.data() + i * out_dim, o, out_dim);
  }
  return out;
}

void dense_backward_accumulate(const DenseLayer& layer, std::span<const double> input,
                               std::span<const double> upstream, Matrix& grad_weight,
                               std::span<double> grad_bias, std::span<double> grad_input) {
  const std::size_t in_dim = layer.in_dim();
  const std::size_t out_dim = layer.out_dim();
  require(input.size() == in_dim, "dense_backward: input size does not match in_dim");
  require(upstream.size() == out_dim, "dense_backward: upstream size does not match out_dim");
  require(grad_weight.rows == in_dim && grad_weight.cols == out_dim,
          "dense_backward: weight gradient shape mismatch");
  require(grad_bias.size() == out_dim, "dense_backward: bias gradient shape mismatch");
  require(grad_input.empty() || grad_input.size() == in_dim,
          "dense_backward: input gradient shape mismatch");

  const double* up = upstream.data();
  for (std::size_t j = 0; j < out_dim; ++j) grad_bias[j] += up[j];
  for (std::size_t i = 0; i < in_dim; ++i) {
    if (!grad_input.empty()) grad_input[i] += dot(layer.weight.data.data() + i * out_dim, up, out_dim);
    const double xi = input[i];
    if (xi == 0.0) continue;
    axpy(xi, up, grad_weight.data.data() + i * out_dim, out_dim);
  }
}

DenseGradients dense_backward(const DenseLayer& layer, std::span<const double> input,
                              std::span<const double> upstream) {
  DenseGradients g{Matrix(layer.in_dim(), layer.out_dim()), Vector(layer.out_dim(), 0.0),
                   Vector(layer.in_dim(), 0.0)};
  dense_backward_accumulate(layer, input, upstream, g.weight, g.bias, g.input);
  return g;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  // log(1 + e^x) = max(x, 0) + log1p(e^{-|x|})
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

Vector sigmoid(std::span<const double> v) {
  Vector out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double x) { return sigmoid(x); });
  return out;
}

Vector softplus(std::span<const double> v) {
  Vector out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double x) { return softplus(x); });
  return out;
}

Vector softmax(std::span<const double> v) {
  require(!v.empty(), "softmax: empty input");
  double max_value = -std::numeric_limits<double>::infinity();
  for (double x : v) max_value = std::max(max_value, x);
  if (std::isinf(max_value) && max_value < 0) {
    throw std::invalid_argument("softmax: every entry is -inf");
  }
  Vector out(v.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::isinf(v[i]) && v[i] < 0) continue;
    out[i] = std::exp(v[i] - max_value);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& s : s_) s = splitmix64(x);
}

std::uint64_t Rng::next() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
  require(n > 0, "Rng::below: empty range");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r;
  do {
    r = next();
  } while (r >= limit);
  return r % n;
}

Rng Rng::split(std::uint64_t stream) const {
  std::uint64_t x = seed_ ^ (0xd1b54a32d192ed03ULL * (stream + 1));
  return Rng(splitmix64(x));
}

double std_normal_sample(Rng& rng) {
  if (rng.has_spare_normal_) {
    rng.has_spare_normal_ = false;
    return rng.spare_normal_;
  }
  double u, v, s;
  do {
    u = 2.0 * rng.uniform() - 1.0;
    v = 2.0 * rng.uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double scale = std::sqrt(-2.0 * std::log(s) / s);
  rng.spare_normal_ = v * scale;
  rng.has_spare_normal_ = true;
  return u * scale;
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double std_normal_pdf(double x) {
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double coefficient_of_variation(std::span<const double> v) {
  require(!v.empty(), "coefficient_of_variation: empty vector");
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  if (mean == 0.0) return 0.0;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= n;
  return std::sqrt(var) / mean;
}

double mse(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "mse: length mismatch");
  require(!a.empty(), "mse: empty vectors");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

void init_uniform(std::span<double> values, double limit, Rng& rng) {
  for (double& x : values) x = (2.0 * rng.uniform() - 1.0) * limit;
}

OptimizerState::OptimizerState(AdamConfig cfg, std::span<const std::size_t> block_sizes)
    : config(cfg) {
  first_moment.reserve(block_sizes.size());
  second_moment.reserve(block_sizes.size());
  for (std::size_t n : block_sizes) {
    first_moment.emplace_back(n, 0.0);
    second_moment.emplace_back(n, 0.0);
  }
}

void optimizer_step(OptimizerState& state, std::span<const std::span<double>> params,
                    std::span<const std::span<const double>> grads) {
  require(params.size() == grads.size() && params.size() == state.first_moment.size(),
          "optimizer_step: block count mismatch");
  for (std::size_t b = 0; b < params.size(); ++b) {
    require(params[b].size() == grads[b].size() && params[b].size() == state.first_moment[b].size(),
            "optimizer_step: block shape mismatch");
    for (double g : grads[b]) {
      if (!std::isfinite(g)) {
        throw NumericError("optimizer_step: non-finite gradient in block " + std::to_string(b));
      }
    }
  }

  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  const double step_size = c.learning_rate * std::sqrt(bias2) / bias1;
  const double eps_hat = c.epsilon * std::sqrt(bias2);

  for (std::size_t b = 0; b < params.size(); ++b) {
    double* p = params[b].data();
    const double* g = grads[b].data();
    double* m = state.first_moment[b].data();
    double* v = state.second_moment[b].data();
    const std::size_t n = params[b].size();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      p[i] -= step_size * m[i] / (std::sqrt(v[i]) + eps_hat);
    }
  }
}

}  // namespace ael
