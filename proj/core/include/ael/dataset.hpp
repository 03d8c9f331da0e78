#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ael/numerics.hpp"

namespace ael {

using ItemIndex = std::uint32_t;
using UserIndex = std::uint32_t;

/// Sparse binary user × item matrix of implicit positives. Each row holds strictly
/// ascending item indices. Immutable once built.
class InteractionMatrix {
 public:
  InteractionMatrix() = default;
  /// Rows are sorted and deduplicated; throws std::invalid_argument on an item index >= num_items.
  InteractionMatrix(std::size_t num_users, std::size_t num_items,
                    std::vector<std::vector<ItemIndex>> rows);

  std::size_t num_users() const { return num_users_; }
  std::size_t num_items() const { return num_items_; }
  std::size_t num_positives() const { return num_positives_; }

  std::span<const ItemIndex> row(UserIndex user) const { return rows_.at(user); }
  const std::vector<std::vector<ItemIndex>>& rows() const { return rows_; }
  bool contains(UserIndex user, ItemIndex item) const;

  /// Row as a 0/1 vector of length num_items.
  Vector dense_row(UserIndex user) const;

  bool operator==(const InteractionMatrix&) const = default;

 private:
  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  std::size_t num_positives_ = 0;
  std::vector<std::vector<ItemIndex>> rows_;
};

/// 1 - n / (U * D). Throws std::invalid_argument for a zero-size matrix.
double sparsity(const InteractionMatrix& m);

struct SplitDataset {
  InteractionMatrix train;
  InteractionMatrix test;
};

/// Bijective external <-> internal identifier tables.
class IdMap {
 public:
  UserIndex add_user(const std::string& external);
  ItemIndex add_item(const std::string& external);

  const std::string& external_user(UserIndex u) const { return users_.at(u); }
  const std::string& external_item(ItemIndex i) const { return items_.at(i); }
  UserIndex internal_user(const std::string& external) const { return user_index_.at(external); }
  ItemIndex internal_item(const std::string& external) const { return item_index_.at(external); }

  std::size_t num_users() const { return users_.size(); }
  std::size_t num_items() const { return items_.size(); }

 private:
  std::vector<std::string> users_;
  std::vector<std::string> items_;
  std::unordered_map<std::string, UserIndex> user_index_;
  std::unordered_map<std::string, ItemIndex> item_index_;
};

enum class FileFormat { Auto, Tsv, Csv };

FileFormat parse_file_format(const std::string& name);

struct LoadedDataset {
  InteractionMatrix matrix;
  IdMap ids;
};

/// Reads `user item [rating] [timestamp]` lines. Ratings and timestamps are ignored,
/// duplicate pairs collapse, `#` lines and blank lines are skipped. Internal IDs are
/// assigned in order of first appearance. Throws DataError on I/O problems, a line with
/// fewer than two fields (message names the line) or an empty dataset.
LoadedDataset load_interactions(const std::filesystem::path& path, FileFormat format = FileFormat::Auto);

/// Per user: shuffle with a seeded generator, first ceil(ratio * |row|) items go to train,
/// the remainder to test. Single-item users keep their item in train.
SplitDataset split_train_test(const InteractionMatrix& m, double ratio, std::uint64_t seed);

/// Adds round(rate * n) uniformly sampled absent (user, item) pairs as positives.
/// Throws std::invalid_argument when not enough absent cells remain.
InteractionMatrix inject_noise(const InteractionMatrix& m, double rate, std::uint64_t seed);

}  // namespace ael
