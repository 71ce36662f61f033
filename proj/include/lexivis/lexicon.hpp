#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "lexivis/errors.hpp"
#include "lexivis/perturb.hpp"
#include "lexivis/tensor.hpp"
#include "lexivis/vgg19.hpp"

namespace lexivis {

enum class ThresholdMode { quantile, relative_max };

// How a feature-map pixel qualifies as one occurrence of its kernel's word.
struct ThresholdSpec {
  ThresholdMode mode = ThresholdMode::quantile;
  double level = 0.9;
  bool inclusive = false;  // count >= threshold instead of >

  void validate() const {
    if (!(level > 0.0 && level < 1.0)) throw ArgumentError("threshold level must lie in (0, 1)");
  }

  std::string mode_name() const { return mode == ThresholdMode::quantile ? "quantile" : "relative_max"; }

  // MODE:LEVEL as accepted on the command line.
  std::string label() const {
    std::ostringstream os;
    os << mode_name() << ':' << level;
    return os.str();
  }

  static ThresholdSpec parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw ArgumentError("threshold must be MODE:LEVEL, got '" + text + "'");
    ThresholdSpec t;
    const auto mode = text.substr(0, colon);
    if (mode == "quantile") {
      t.mode = ThresholdMode::quantile;
    } else if (mode == "relative_max") {
      t.mode = ThresholdMode::relative_max;
    } else {
      throw ArgumentError("unknown threshold mode '" + mode + "' (quantile|relative_max)");
    }
    try {
      std::size_t used = 0;
      t.level = std::stod(text.substr(colon + 1), &used);
      if (used != text.size() - colon - 1) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ArgumentError("threshold level is not a number in '" + text + "'");
    }
    t.validate();
    return t;
  }
};

// Number of pixels above the threshold in one single-channel map.
inline std::uint64_t word_count(std::span<const float> map, const ThresholdSpec& t) {
  if (map.empty()) return 0;
  double threshold = 0.0;
  if (t.mode == ThresholdMode::quantile) {
    threshold = quantile_nearest_rank(map, t.level);
  } else {
    const float peak = *std::max_element(map.begin(), map.end());
    if (!(peak > 0.0f)) return 0;
    threshold = t.level * static_cast<double>(peak);
  }
  std::uint64_t n = 0;
  if (t.inclusive) {
    for (float v : map) n += static_cast<double>(v) >= threshold ? 1 : 0;
  } else {
    for (float v : map) n += static_cast<double>(v) > threshold ? 1 : 0;
  }
  return n;
}

struct WordCount {
  std::size_t layer = 1;   // 1-based conv layer
  std::size_t kernel = 0;  // 0-based output channel
  std::uint64_t count = 0;

  friend bool operator==(const WordCount&, const WordCount&) = default;
};

// The "text" of one image: one word count per (layer, kernel), ordered by
// (layer, kernel).
struct WordCountTable {
  std::vector<WordCount> entries;
  std::string image_id;
  ThresholdSpec threshold;
  std::optional<PerturbationSpec> perturbation;

  std::size_t size() const noexcept { return entries.size(); }

  // Totals for every layer present, ascending by layer index.
  std::vector<std::pair<std::size_t, std::uint64_t>> layer_totals() const {
    std::map<std::size_t, std::uint64_t> totals;
    for (const auto& e : entries) totals[e.layer] += e.count;
    return {totals.begin(), totals.end()};
  }

  std::size_t nonzero_count() const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [](const WordCount& e) { return e.count > 0; }));
  }
};

inline WordCountTable extract_lexicon(const FeatureMapSet& fms, const ThresholdSpec& t, unsigned threads = 0) {
  t.validate();
  WordCountTable table;
  table.threshold = t;
  std::vector<std::pair<std::size_t, std::size_t>> index;
  for (std::size_t l = 0; l < fms.layers.size(); ++l) {
    for (std::size_t k = 0; k < fms.layers[l].channels(); ++k) index.emplace_back(l, k);
  }
  table.entries.resize(index.size());
  detail::parallel_for(index.size(), detail::resolve_threads(threads), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto [l, k] = index[i];
      table.entries[i] = {l + 1, k, word_count(fms.layers[l].channel(k), t)};
    }
  });
  return table;
}

// ---------------------------------------------------------------------------
// Interchange: CSV `layer,kernel,count` and JSON

inline void write_counts_csv(const WordCountTable& table, std::ostream& out) {
  out << "layer,kernel,count\n";
  for (const auto& e : table.entries) out << e.layer << ',' << e.kernel << ',' << e.count << '\n';
}

namespace detail {

inline std::uint64_t parse_field(std::string_view field, const char* name, std::size_t line) {
  std::uint64_t v = 0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (field.empty() || ec != std::errc() || ptr != last) {
    throw ParseError(std::string("invalid ") + name + " '" + std::string(field) + "'", line);
  }
  return v;
}

}  // namespace detail

inline WordCountTable read_counts_csv(std::istream& in) {
  WordCountTable table;
  std::string row;
  std::size_t line = 0;
  bool header = false;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  while (std::getline(in, row)) {
    ++line;
    if (!row.empty() && row.back() == '\r') row.pop_back();
    if (!header) {
      if (row != "layer,kernel,count") throw ParseError("expected header 'layer,kernel,count'", line);
      header = true;
      continue;
    }
    if (row.empty()) continue;
    std::string_view v(row);
    const auto c1 = v.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : v.find(',', c1 + 1);
    if (c2 == std::string_view::npos || v.find(',', c2 + 1) != std::string_view::npos) {
      throw ParseError("expected 3 comma-separated fields", line);
    }
    WordCount e;
    e.layer = static_cast<std::size_t>(detail::parse_field(v.substr(0, c1), "layer", line));
    e.kernel = static_cast<std::size_t>(detail::parse_field(v.substr(c1 + 1, c2 - c1 - 1), "kernel", line));
    e.count = detail::parse_field(v.substr(c2 + 1), "count", line);
    if (e.layer == 0) throw ParseError("layer index is 1-based", line);
    if (!seen.emplace(e.layer, e.kernel).second) {
      throw ParseError("duplicate entry for layer " + std::to_string(e.layer) + " kernel " +
                           std::to_string(e.kernel),
                       line);
    }
    table.entries.push_back(e);
  }
  if (!header) throw ParseError("empty counts file", line == 0 ? 1 : line);
  std::stable_sort(table.entries.begin(), table.entries.end(), [](const WordCount& a, const WordCount& b) {
    return std::tie(a.layer, a.kernel) < std::tie(b.layer, b.kernel);
  });
  return table;
}

inline WordCountTable read_counts_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open counts file " + path.string());
  try {
    return read_counts_csv(in);
  } catch (const ParseError& e) {
    throw ParseError(e.detail(), e.line(), path.string());
  }
}

inline nlohmann::json to_json(const WordCountTable& table) {
  nlohmann::json j;
  j["image_id"] = table.image_id;
  j["threshold"] = {{"mode", table.threshold.mode_name()},
                    {"level", table.threshold.level},
                    {"inclusive", table.threshold.inclusive}};
  if (table.perturbation) {
    j["perturbation"] = {{"kind", to_string(table.perturbation->kind)},
                         {"level", table.perturbation->level},
                         {"seed", table.perturbation->seed}};
  } else {
    j["perturbation"] = nullptr;
  }
  auto& rows = j["counts"] = nlohmann::json::array();
  for (const auto& e : table.entries) rows.push_back({e.layer, e.kernel, e.count});
  return j;
}

}  // namespace lexivis
