#include "ael/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string_view>
#include <unordered_set>

#include "ael/errors.hpp"

namespace ael {

InteractionMatrix::InteractionMatrix(std::size_t num_users, std::size_t num_items,
                                     std::vector<std::vector<ItemIndex>> rows)
    : num_users_(num_users), num_items_(num_items), rows_(std::move(rows)) {
  if (rows_.size() != num_users_) {
    throw std::invalid_argument("InteractionMatrix: row count does not match num_users");
  }
  for (auto& r : rows_) {
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    if (!r.empty() && r.back() >= num_items_) {
      throw std::invalid_argument("InteractionMatrix: item index out of range");
    }
    num_positives_ += r.size();
  }
}

bool InteractionMatrix::contains(UserIndex user, ItemIndex item) const {
  const auto& r = rows_.at(user);
  return std::binary_search(r.begin(), r.end(), item);
}

Vector InteractionMatrix::dense_row(UserIndex user) const {
  Vector x(num_items_, 0.0);
  for (ItemIndex i : rows_.at(user)) x[i] = 1.0;
  return x;
}

double sparsity(const InteractionMatrix& m) {
  if (m.num_users() == 0 || m.num_items() == 0) {
    throw std::invalid_argument("sparsity: zero-size matrix");
  }
  const double cells = static_cast<double>(m.num_users()) * static_cast<double>(m.num_items());
  return 1.0 - static_cast<double>(m.num_positives()) / cells;
}

UserIndex IdMap::add_user(const std::string& external) {
  auto [it, inserted] = user_index_.try_emplace(external, static_cast<UserIndex>(users_.size()));
  if (inserted) users_.push_back(external);
  return it->second;
}

ItemIndex IdMap::add_item(const std::string& external) {
  auto [it, inserted] = item_index_.try_emplace(external, static_cast<ItemIndex>(items_.size()));
  if (inserted) items_.push_back(external);
  return it->second;
}

FileFormat parse_file_format(const std::string& name) {
  if (name == "tsv") return FileFormat::Tsv;
  if (name == "csv") return FileFormat::Csv;
  if (name == "auto" || name.empty()) return FileFormat::Auto;
  throw ConfigError("unknown dataset format '" + name + "' (expected tsv or csv)");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

bool is_skipped(std::string_view line) {
  const auto t = trim(line);
  return t.empty() || t.front() == '#';
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    auto field = trim(line.substr(start, pos == std::string_view::npos ? line.npos : pos - start));
    if (!field.empty()) fields.push_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

}  // namespace

LoadedDataset load_interactions(const std::filesystem::path& path, FileFormat format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file '" + path.string() + "'");

  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
  if (in.bad()) throw DataError("error while reading '" + path.string() + "'");

  char sep = '\t';
  if (format == FileFormat::Csv) {
    sep = ',';
  } else if (format == FileFormat::Auto) {
    for (const auto& l : lines) {
      if (is_skipped(l)) continue;
      sep = l.find('\t') != std::string::npos ? '\t' : ',';
      break;
    }
  }

  LoadedDataset out;
  std::vector<std::vector<ItemIndex>> rows;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (is_skipped(lines[n])) continue;
    const auto fields = split_fields(lines[n], sep);
    if (fields.size() < 2) {
      throw DataError(path.string() + ":" + std::to_string(n + 1) +
                      ": malformed line (expected at least user and item fields)");
    }
    const UserIndex u = out.ids.add_user(std::string(fields[0]));
    const ItemIndex i = out.ids.add_item(std::string(fields[1]));
    if (u >= rows.size()) rows.resize(u + 1);
    rows[u].push_back(i);
  }
  if (rows.empty()) throw DataError("dataset '" + path.string() + "' contains no interactions");
  out.matrix = InteractionMatrix(out.ids.num_users(), out.ids.num_items(), std::move(rows));
  return out;
}

SplitDataset split_train_test(const InteractionMatrix& m, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("split_train_test: ratio must be in (0,1)");
  Rng rng(seed);
  std::vector<std::vector<ItemIndex>> train(m.num_users()), test(m.num_users());
  for (UserIndex u = 0; u < m.num_users(); ++u) {
    std::vector<ItemIndex> items(m.row(u).begin(), m.row(u).end());
    rng.shuffle(std::span<ItemIndex>(items));
    // The epsilon keeps exact products such as 0.8 * 10 from rounding up to 9.
    auto n_train = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(items.size()) - 1e-9));
    n_train = std::min(n_train, items.size());
    if (items.size() == 1) n_train = 1;
    train[u].assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n_train));
    test[u].assign(items.begin() + static_cast<std::ptrdiff_t>(n_train), items.end());
  }
  return {InteractionMatrix(m.num_users(), m.num_items(), std::move(train)),
          InteractionMatrix(m.num_users(), m.num_items(), std::move(test))};
}

InteractionMatrix inject_noise(const InteractionMatrix& m, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0)) throw std::invalid_argument("inject_noise: rate must be non-negative");
  const auto n = m.num_positives();
  const auto to_add = static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
  const std::size_t cells = m.num_users() * m.num_items();
  const std::size_t absent = cells - n;
  if (to_add > absent) {
    throw std::invalid_argument("inject_noise: rate exceeds the number of absent cells");
  }
  auto rows = m.rows();
  if (to_add == 0) return m;

  Rng rng(seed);
  if (to_add * 2 > absent) {
    // Dense regime: enumerate absent cells and take a uniform prefix of a shuffle.
    std::vector<std::uint64_t> free_cells;
    free_cells.reserve(absent);
    for (UserIndex u = 0; u < m.num_users(); ++u) {
      for (ItemIndex i = 0; i < m.num_items(); ++i) {
        if (!m.contains(u, i)) free_cells.push_back(std::uint64_t{u} * m.num_items() + i);
      }
    }
    for (std::size_t k = 0; k < to_add; ++k) {
      const auto j = k + static_cast<std::size_t>(rng.below(free_cells.size() - k));
      std::swap(free_cells[k], free_cells[j]);
      rows[free_cells[k] / m.num_items()].push_back(static_cast<ItemIndex>(free_cells[k] % m.num_items()));
    }
  } else {
    std::unordered_set<std::uint64_t> added;
    while (added.size() < to_add) {
      const auto cell = rng.below(cells);
      const auto u = static_cast<UserIndex>(cell / m.num_items());
      const auto i = static_cast<ItemIndex>(cell % m.num_items());
      if (m.contains(u, i) || !added.insert(cell).second) continue;
      rows[u].push_back(i);
    }
  }
  return InteractionMatrix(m.num_users(), m.num_items(), std::move(rows));
}

}  // namespace ael
