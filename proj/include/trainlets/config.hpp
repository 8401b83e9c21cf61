#pragma once

#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trainlets/base_operator.hpp"
#include "trainlets/error.hpp"
#include "trainlets/learning.hpp"
#include "trainlets/wavelet_filters.hpp"

namespace trainlets {

/// Raw key -> value text, as read from a config file or collected from flags.
using ConfigMap = std::map<std::string, std::string>;

/// Settings for one command-line run. Intensities in images are in [0, 1];
/// sigma is given on the 0..255 scale.
struct RunConfig {
  TrainerConfig training;
  std::string trainer = "osdl";  // osdl | batch | none

  std::string images;  // directory of PGM files or a single PGM
  std::string input;
  std::string dict;
  std::string out;
  std::string progress;  // optional CSV of per-batch training loss

  Index patch = 8;
  std::string base = "cropped";  // cropped | odct | periodic
  WaveletFamily family = WaveletFamily::Symlet;
  int order = 4;
  int levels = 0;
  Index atoms = 0;  // 0: one atom per base coefficient

  Index patches = 1000;  // patches sampled for training or approximation
  std::vector<Index> budgets{25, 50, 100};
  double sigma = 0.0;
  double gain = 1.15;
  double lambda = 30.0;
  bool add_noise = false;
  std::vector<Index> crop;  // row, col, height, width; empty keeps the whole image

  Index n = 64;
  Index count = 1000;
  Index terms = 5;

  BaseSpec base_spec() const {
    BaseSpec s;
    s.family = family;
    s.order = order;
    s.levels = levels;
    if (base == "cropped")
      s.kind = BaseKind::CroppedWavelet;
    else if (base == "odct")
      s.kind = BaseKind::Odct;
    else
      s.kind = BaseKind::PeriodicWavelet;
    return s;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] inline void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw Error(ErrorCode::InvalidConfig,
              std::string(key) + " = '" + std::string(value) + "': expected " + std::string(expected));
}

template <class T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) bad_value(key, value, "a number");
  return out;
}

inline Index parse_count(std::string_view key, std::string_view value, Index min) {
  const auto v = parse_number<long long>(key, value);
  if (v < min) bad_value(key, value, "an integer >= " + std::to_string(min));
  return static_cast<Index>(v);
}

inline std::vector<Index> parse_list(std::string_view key, std::string_view value) {
  std::vector<Index> out;
  while (!value.empty()) {
    const auto comma = value.find(',');
    out.push_back(parse_count(key, trim(value.substr(0, comma)), 0));
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  if (out.empty()) bad_value(key, value, "a comma-separated list of integers");
  return out;
}

inline bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value, "true or false");
}

inline std::string parse_choice(std::string_view key, std::string_view value,
                                std::initializer_list<std::string_view> allowed) {
  for (auto a : allowed)
    if (value == a) return std::string(value);
  std::string expected;
  for (auto a : allowed) expected += (expected.empty() ? "" : " | ") + std::string(a);
  bad_value(key, value, expected);
}

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view value)>;

inline const std::map<std::string, Setter, std::less<>>& config_setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"images", [](RunConfig& c, auto, auto v) { c.images = v; }},
      {"input", [](RunConfig& c, auto, auto v) { c.input = v; }},
      {"dict", [](RunConfig& c, auto, auto v) { c.dict = v; }},
      {"out", [](RunConfig& c, auto, auto v) { c.out = v; }},
      {"progress", [](RunConfig& c, auto, auto v) { c.progress = v; }},
      {"trainer", [](RunConfig& c, auto k, auto v) { c.trainer = parse_choice(k, v, {"osdl", "batch", "none"}); }},
      {"patch", [](RunConfig& c, auto k, auto v) { c.patch = parse_count(k, v, 2); }},
      {"base", [](RunConfig& c, auto k, auto v) { c.base = parse_choice(k, v, {"cropped", "odct", "periodic"}); }},
      {"family", [](RunConfig& c, auto, auto v) { c.family = parse_wavelet_family(v); }},
      {"order", [](RunConfig& c, auto k, auto v) { c.order = static_cast<int>(parse_count(k, v, 1)); }},
      {"levels", [](RunConfig& c, auto k, auto v) { c.levels = static_cast<int>(parse_count(k, v, 0)); }},
      {"atoms", [](RunConfig& c, auto k, auto v) { c.atoms = parse_count(k, v, 0); }},
      {"k", [](RunConfig& c, auto k, auto v) { c.training.atom_sparsity = parse_count(k, v, 1); }},
      {"p", [](RunConfig& c, auto k, auto v) { c.training.code_sparsity = parse_count(k, v, 1); }},
      {"batch", [](RunConfig& c, auto k, auto v) { c.training.batch_size = parse_count(k, v, 1); }},
      {"epochs", [](RunConfig& c, auto k, auto v) { c.training.epochs = static_cast<int>(parse_count(k, v, 1)); }},
      {"momentum", [](RunConfig& c, auto k, auto v) { c.training.momentum = parse_number<double>(k, v); }},
      {"decay", [](RunConfig& c, auto k, auto v) { c.training.rate_decay = parse_number<double>(k, v); }},
      {"backtrack", [](RunConfig& c, auto k, auto v) { c.training.backtrack = parse_number<double>(k, v); }},
      {"maintenance",
       [](RunConfig& c, auto k, auto v) { c.training.maintenance_period = static_cast<int>(parse_count(k, v, 0)); }},
      {"prune", [](RunConfig& c, auto k, auto v) { c.training.prune_coherence = parse_number<double>(k, v); }},
      {"unused-threshold", [](RunConfig& c, auto k, auto v) { c.training.unused_threshold = parse_count(k, v, 0); }},
      {"niht-iterations",
       [](RunConfig& c, auto k, auto v) { c.training.niht_iterations = static_cast<int>(parse_count(k, v, 1)); }},
      {"batch-iterations",
       [](RunConfig& c, auto k, auto v) { c.training.batch_iterations = static_cast<int>(parse_count(k, v, 1)); }},
      {"atom-iterations",
       [](RunConfig& c, auto k, auto v) { c.training.atom_iterations = static_cast<int>(parse_count(k, v, 1)); }},
      {"seed", [](RunConfig& c, auto k, auto v) { c.training.seed = parse_number<std::uint64_t>(k, v); }},
      {"patches", [](RunConfig& c, auto k, auto v) { c.patches = parse_count(k, v, 1); }},
      {"budgets", [](RunConfig& c, auto k, auto v) { c.budgets = parse_list(k, v); }},
      {"sigma", [](RunConfig& c, auto k, auto v) { c.sigma = parse_number<double>(k, v); }},
      {"gain", [](RunConfig& c, auto k, auto v) { c.gain = parse_number<double>(k, v); }},
      {"lambda", [](RunConfig& c, auto k, auto v) { c.lambda = parse_number<double>(k, v); }},
      {"add-noise", [](RunConfig& c, auto k, auto v) { c.add_noise = parse_bool(k, v); }},
      {"crop",
       [](RunConfig& c, auto k, auto v) {
         c.crop = parse_list(k, v);
         if (c.crop.size() != 4) bad_value(k, v, "row,col,height,width");
       }},
      {"n", [](RunConfig& c, auto k, auto v) { c.n = parse_count(k, v, 2); }},
      {"count", [](RunConfig& c, auto k, auto v) { c.count = parse_count(k, v, 1); }},
      {"terms", [](RunConfig& c, auto k, auto v) { c.terms = parse_count(k, v, 0); }},
  };
  return table;
}

}  // namespace detail

/// Every key a config file or flag may set.
inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : detail::config_setters()) keys.push_back(k);
  return keys;
}

/// Flat `key = value` text. '#' starts a comment; blank lines are ignored;
/// repeating a key is an error.
inline ConfigMap parse_config_text(std::string_view text) {
  ConfigMap out;
  int line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    detail::require(eq != std::string_view::npos, ErrorCode::InvalidConfig,
                    "line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(detail::trim(line.substr(0, eq)));
    detail::require(!key.empty(), ErrorCode::InvalidConfig, "line " + std::to_string(line_no) + ": empty key");
    detail::require(!out.contains(key), ErrorCode::InvalidConfig, "duplicate key '" + key + "'");
    out[key] = std::string(detail::trim(line.substr(eq + 1)));
  }
  return out;
}

/// Applies `file` then `overrides` on top of the defaults. Unknown keys and
/// out-of-range values throw InvalidConfig.
inline RunConfig build_run_config(const ConfigMap& file, const ConfigMap& overrides = {}) {
  ConfigMap merged = file;
  for (const auto& [k, v] : overrides) merged[k] = v;
  RunConfig cfg;
  const auto& setters = detail::config_setters();
  for (const auto& [k, v] : merged) {
    const auto it = setters.find(k);
    detail::require(it != setters.end(), ErrorCode::InvalidConfig, "unknown key '" + k + "'");
    it->second(cfg, k, v);
  }
  cfg.training.validate();
  detail::require(cfg.sigma >= 0.0, ErrorCode::InvalidConfig, "sigma must be >= 0");
  detail::require(cfg.gain > 0.0 && cfg.lambda >= 0.0, ErrorCode::InvalidConfig, "gain must be > 0 and lambda >= 0");
  for (Index b : cfg.budgets) detail::require(b >= 0, ErrorCode::InvalidConfig, "budgets must be >= 0");
  return cfg;
}

}  // namespace trainlets
