#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "ael/dataset.hpp"
#include "ael/numerics.hpp"

namespace ael::testing_util {

/// Central difference of f with respect to `param`, which f reads by reference.
template <typename F>
double central_difference(F&& f, double& param, double h = 1e-5) {
  const double saved = param;
  param = saved + h;
  const double up = f();
  param = saved - h;
  const double down = f();
  param = saved;
  return (up - down) / (2.0 * h);
}

/// |a - b| / max(|a|, |b|), with an absolute floor so that gradients that are both
/// tiny do not produce noise-level relative errors.
inline double relative_error(double analytic, double numeric, double floor = 1e-7) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

/// Seeded random binary matrix with every user holding at least `min_items` positives.
inline InteractionMatrix random_matrix(std::size_t users, std::size_t items, double density, std::uint64_t seed,
                                       std::size_t min_items = 1) {
  Rng rng(seed);
  std::vector<std::vector<ItemIndex>> rows(users);
  for (auto& r : rows) {
    for (ItemIndex i = 0; i < items; ++i) {
      if (rng.uniform() < density) r.push_back(i);
    }
    while (r.size() < min_items) r.push_back(static_cast<ItemIndex>(rng.below(items)));
  }
  return InteractionMatrix(users, items, std::move(rows));
}

/// Scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("ael_test_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream(p, std::ios::binary) << content;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace ael::testing_util
