#include "ael_cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ael/errors.hpp"

namespace ael::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  T value{};
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || end != t.data() + t.size()) {
    throw ConfigError("invalid value for " + key + ": '" + text + "'");
  }
  return value;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(parse_number<T>(key, part));
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

using Setter = std::function<void(Config&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"learning_rate", [](Config& c, auto& k, auto& v) { c.train.learning_rate = parse_number<double>(k, v); }},
      {"batch_size", [](Config& c, auto& k, auto& v) { c.train.batch_size = parse_number<std::size_t>(k, v); }},
      {"epochs", [](Config& c, auto& k, auto& v) { c.train.epochs = parse_number<std::size_t>(k, v); }},
      {"corruption_prob", [](Config& c, auto& k, auto& v) { c.train.corruption_prob = parse_number<double>(k, v); }},
      {"l2_lambda", [](Config& c, auto& k, auto& v) { c.train.l2_lambda = parse_number<double>(k, v); }},
      {"w_importance", [](Config& c, auto& k, auto& v) { c.train.w_importance = parse_number<double>(k, v); }},
      {"w_load", [](Config& c, auto& k, auto& v) { c.train.w_load = parse_number<double>(k, v); }},
      {"k", [](Config& c, auto& k, auto& v) { c.train.k = parse_number<std::size_t>(k, v); }},
      {"seed", [](Config& c, auto& k, auto& v) { c.train.seed = parse_number<std::uint64_t>(k, v); }},
      {"pretrain_epochs", [](Config& c, auto& k, auto& v) { c.train.pretrain_epochs = parse_number<std::size_t>(k, v); }},
      {"early_stop_patience",
       [](Config& c, auto& k, auto& v) { c.train.early_stop_patience = parse_number<std::size_t>(k, v); }},
      {"validation_fraction",
       [](Config& c, auto& k, auto& v) { c.train.validation_fraction = parse_number<double>(k, v); }},
      {"validation_seed",
       [](Config& c, auto& k, auto& v) { c.train.validation_seed = parse_number<std::uint64_t>(k, v); }},
      {"dims",
       [](Config& c, auto& k, auto& v) {
         const auto d = parse_list<std::size_t>(k, v);
         if (d.size() != 3) throw ConfigError("dims takes three values: large,medium,small");
         c.train.dims = HiddenDims{d[0], d[1], d[2]};
       }},
      {"dataset", [](Config& c, auto&, auto& v) { c.dataset = trim(v); }},
      {"format", [](Config& c, auto&, auto& v) { c.format = parse_file_format(trim(v)); }},
      {"out", [](Config& c, auto&, auto& v) { c.out = trim(v); }},
      {"checkpoint", [](Config& c, auto&, auto& v) { c.checkpoint = trim(v); }},
      {"cutoffs", [](Config& c, auto& k, auto& v) { c.cutoffs = parse_list<std::size_t>(k, v); }},
      {"seeds", [](Config& c, auto& k, auto& v) { c.seeds = parse_list<std::uint64_t>(k, v); }},
      {"aggregator", [](Config& c, auto&, auto& v) { c.aggregator = parse_aggregator(trim(v)); }},
      {"rates", [](Config& c, auto& k, auto& v) { c.rates = parse_list<double>(k, v); }},
      {"train_ratio", [](Config& c, auto& k, auto& v) { c.train_ratio = parse_number<double>(k, v); }},
      {"split_seed", [](Config& c, auto& k, auto& v) { c.split_seed = parse_number<std::uint64_t>(k, v); }},
      {"bma_temperature", [](Config& c, auto& k, auto& v) { c.bma_temperature = parse_number<double>(k, v); }},
      {"users", [](Config& c, auto& k, auto& v) { c.users = parse_number<std::uint64_t>(k, v); }},
      {"items", [](Config& c, auto& k, auto& v) { c.items = parse_number<std::uint64_t>(k, v); }},
  };
  return table;
}

}  // namespace

void Config::validate() const {
  train.validate();
  if (cutoffs.empty()) throw ConfigError("cutoffs must not be empty");
  for (std::size_t n : cutoffs) {
    if (n == 0) throw ConfigError("cutoffs must be positive");
  }
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  for (double r : rates) {
    if (!(r >= 0.0)) throw ConfigError("noise rates must be nonnegative");
  }
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw ConfigError("train_ratio must lie in (0, 1)");
  if (!(bma_temperature > 0.0)) throw ConfigError("bma_temperature must be positive");
}

const std::vector<std::string>& setting_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, setter] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void apply_setting(Config& config, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown setting '" + key + "'");
  it->second(config, key, value);
}

void load_config_file(Config& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    apply_setting(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

}  // namespace ael::cli
