#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "lexivis/lexicon.hpp"
#include "lexivis/statlaws.hpp"
#include "lexivis/version.hpp"

namespace lexivis {

using ojson = nlohmann::ordered_json;

// A law's result, or the reason it could not be fitted.
template <typename T>
using LawOutcome = std::variant<T, std::string>;

template <typename T>
const T* fitted(const LawOutcome<T>& o) {
  return std::get_if<T>(&o);
}

struct RoiSpec {
  std::optional<std::pair<std::size_t, std::size_t>> origin;  // (x, y); empty = center policy

  std::string label() const {
    if (!origin) return "center";
    return "roi" + std::to_string(origin->first) + "x" + std::to_string(origin->second);
  }
};

struct StageTiming {
  std::string stage;
  double ms = 0.0;
};

struct LawReport {
  std::string image_id;
  std::string source;
  std::optional<RoiSpec> roi;
  std::optional<ThresholdSpec> threshold;  // absent when counts came from a CSV
  std::optional<CaptureMode> capture;
  std::optional<PerturbationSpec> perturbation;
  std::string manifest_digest;
  std::size_t heaps_iterations = 100;
  std::uint64_t seed = 0;

  std::size_t kernels = 0;
  std::size_t nonzero_kernels = 0;
  std::uint64_t total_words = 0;

  LawOutcome<ZipfResult> zipf = std::string("not run");
  LawOutcome<HeapsResult> heaps = std::string("not run");
  LawOutcome<BenfordResult> benford = std::string("not run");

  std::vector<StageTiming> timings;

  std::optional<double> zipf_r2() const {
    if (const auto* z = fitted(zipf)) return z->fit.r_square;
    return std::nullopt;
  }
  std::optional<double> heaps_r2() const {
    if (const auto* h = fitted(heaps)) return h->fit.r_square;
    return std::nullopt;
  }
  std::optional<double> benford_r2() const {
    if (const auto* b = fitted(benford)) return b->r_square;
    return std::nullopt;
  }
};

namespace detail {

template <typename T, typename F>
LawOutcome<T> try_law(F&& f) {
  try {
    return f();
  } catch (const DegenerateFitError& e) {
    return std::string(e.what());
  }
}

}  // namespace detail

// Runs all three laws; degenerate fits become per-law markers.
inline void fit_laws(LawReport& report, const WordCountTable& table) {
  report.kernels = table.size();
  report.nonzero_kernels = table.nonzero_count();
  report.total_words = 0;
  for (const auto& e : table.entries) report.total_words += e.count;
  report.zipf = detail::try_law<ZipfResult>([&] { return zipf_analysis(table); });
  report.heaps = detail::try_law<HeapsResult>(
      [&] { return heaps_analysis(table, report.heaps_iterations, report.seed); });
  report.benford = detail::try_law<BenfordResult>([&] { return benford_analysis(table); });
}

namespace detail {

inline ojson fit_json(const FitResult& f) {
  return ojson{{"slope", f.slope}, {"intercept", f.intercept}, {"r_square", f.r_square}, {"n_points", f.n_points}};
}

inline ojson degenerate_json(const std::string& reason) {
  return ojson{{"status", "degenerate"}, {"reason", reason}};
}

}  // namespace detail

// Statistics only: no identifiers, provenance or timings, so identical
// counts produce byte-identical output.
inline ojson statistics_json(const LawReport& r) {
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["heaps_iterations"] = r.heaps_iterations;
  j["seed"] = r.seed;
  j["kernels"] = r.kernels;
  j["nonzero_kernels"] = r.nonzero_kernels;
  j["total_words"] = r.total_words;
  if (const auto* z = fitted(r.zipf)) {
    j["zipf"] = ojson{{"status", "ok"}, {"alpha", z->alpha}, {"fit", detail::fit_json(z->fit)}};
  } else {
    j["zipf"] = detail::degenerate_json(std::get<std::string>(r.zipf));
  }
  if (const auto* h = fitted(r.heaps)) {
    j["heaps"] = ojson{{"status", "ok"},
                       {"k", h->k},
                       {"beta", h->beta},
                       {"fit", detail::fit_json(h->fit)},
                       {"best_seed", h->best_seed},
                       {"iterations", h->iterations},
                       {"r_square_mean", h->r_square_mean},
                       {"r_square_std", h->r_square_std}};
  } else {
    j["heaps"] = detail::degenerate_json(std::get<std::string>(r.heaps));
  }
  if (const auto* b = fitted(r.benford)) {
    j["benford"] = ojson{{"status", "ok"},
                         {"observed", b->observed},
                         {"expected", b->expected},
                         {"r_square", b->r_square},
                         {"layer_totals", b->layer_totals}};
  } else {
    j["benford"] = detail::degenerate_json(std::get<std::string>(r.benford));
  }
  return j;
}

inline ojson report_json(const LawReport& r) {
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["engine_version"] = kEngineVersion;
  j["image_id"] = r.image_id;
  j["source"] = r.source;
  if (r.roi) {
    j["roi"] = r.roi->origin ? ojson{{"policy", "explicit"}, {"x", r.roi->origin->first}, {"y", r.roi->origin->second}}
                             : ojson{{"policy", "center"}};
  } else {
    j["roi"] = nullptr;
  }
  if (r.threshold) {
    j["threshold"] = ojson{{"spec", r.threshold->label()},
                           {"mode", r.threshold->mode_name()},
                           {"level", r.threshold->level},
                           {"inclusive", r.threshold->inclusive}};
  } else {
    j["threshold"] = nullptr;
  }
  j["capture"] = r.capture ? ojson(to_string(*r.capture)) : ojson(nullptr);
  if (r.perturbation) {
    j["perturbation"] = ojson{{"kind", to_string(r.perturbation->kind)},
                              {"level", r.perturbation->level},
                              {"seed", r.perturbation->seed}};
  } else {
    j["perturbation"] = nullptr;
  }
  j["weights_manifest_sha256"] = r.manifest_digest.empty() ? ojson(nullptr) : ojson(r.manifest_digest);
  j["statistics"] = statistics_json(r);
  ojson t = ojson::object();
  for (const auto& s : r.timings) t[s.stage] = s.ms;
  j["timings_ms"] = std::move(t);
  return j;
}

// ---------------------------------------------------------------------------
// Plot data

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline void write_zipf_csv(const LawReport& r, std::ostream& out) {
  out << "rank,count\n";
  if (const auto* z = fitted(r.zipf)) {
    for (std::size_t i = 0; i < z->ranked_counts.size(); ++i) out << i + 1 << ',' << z->ranked_counts[i] << '\n';
  }
}

inline void write_heaps_csv(const LawReport& r, std::ostream& out) {
  out << "n,V\n";
  if (const auto* h = fitted(r.heaps)) {
    for (const auto& p : h->curve) out << p.tokens << ',' << p.types << '\n';
  }
}

inline void write_benford_csv(const LawReport& r, std::ostream& out) {
  out << "position,observed,expected\n";
  if (const auto* b = fitted(r.benford)) {
    for (std::size_t d = 0; d < 9; ++d) {
      out << d + 1 << ',' << format_double(b->observed[d]) << ',' << format_double(b->expected[d]) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Sweep aggregation

// Spearman rank correlation with average ranks for ties; NaN when undefined.
inline double spearman_rho(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) return std::numeric_limits<double>::quiet_NaN();
  auto ranks = [n](std::span<const double> v) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

inline std::optional<double> median(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct SweepCell {
  std::string image;
  double level = 0.0;
  std::optional<double> zipf_r2;
  std::optional<double> heaps_r2;
  std::optional<double> benford_r2;
};

struct SweepLevelSummary {
  double level = 0.0;
  std::optional<double> zipf_median;
  std::optional<double> heaps_median;
  std::optional<double> benford_median;
  std::size_t images = 0;
};

struct SweepResult {
  PerturbationKind kind = PerturbationKind::saltpepper;
  std::vector<double> levels;
  std::vector<SweepCell> cells;
  std::vector<SweepLevelSummary> summary;
  double zipf_rho = 0.0;
  double heaps_rho = 0.0;
  double benford_rho = 0.0;

  // Medians per level and the Spearman trend of each law's median across levels.
  void summarize() {
    summary.clear();
    std::vector<double> lv;
    std::vector<double> zm;
    std::vector<double> hm;
    std::vector<double> bm;
    std::vector<double> lz;
    std::vector<double> lh;
    std::vector<double> lb;
    for (double level : levels) {
      std::vector<double> z;
      std::vector<double> h;
      std::vector<double> b;
      SweepLevelSummary s;
      s.level = level;
      for (const auto& c : cells) {
        if (c.level != level) continue;
        ++s.images;
        if (c.zipf_r2) z.push_back(*c.zipf_r2);
        if (c.heaps_r2) h.push_back(*c.heaps_r2);
        if (c.benford_r2) b.push_back(*c.benford_r2);
      }
      s.zipf_median = median(z);
      s.heaps_median = median(h);
      s.benford_median = median(b);
      if (s.zipf_median) {
        lz.push_back(level);
        zm.push_back(*s.zipf_median);
      }
      if (s.heaps_median) {
        lh.push_back(level);
        hm.push_back(*s.heaps_median);
      }
      if (s.benford_median) {
        lb.push_back(level);
        bm.push_back(*s.benford_median);
      }
      summary.push_back(s);
    }
    zipf_rho = spearman_rho(lz, zm);
    heaps_rho = spearman_rho(lh, hm);
    benford_rho = spearman_rho(lb, bm);
  }
};

namespace detail {

inline std::string csv_value(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

inline ojson json_value(double v) { return std::isnan(v) ? ojson(nullptr) : ojson(v); }

}  // namespace detail

// One row per level, one column per law (the robustness figure's axes).
inline void write_sweep_summary_csv(const SweepResult& s, std::ostream& out) {
  out << "kind,level,zipf_median_r2,heaps_median_r2,benford_median_r2,images\n";
  for (const auto& row : s.summary) {
    out << to_string(s.kind) << ',' << format_double(row.level) << ',' << detail::csv_value(row.zipf_median) << ','
        << detail::csv_value(row.heaps_median) << ',' << detail::csv_value(row.benford_median) << ','
        << row.images << '\n';
  }
}

inline void write_sweep_details_csv(const SweepResult& s, std::ostream& out) {
  out << "image,kind,level,zipf_r2,heaps_r2,benford_r2\n";
  for (const auto& c : s.cells) {
    out << c.image << ',' << to_string(s.kind) << ',' << format_double(c.level) << ','
        << detail::csv_value(c.zipf_r2) << ',' << detail::csv_value(c.heaps_r2) << ','
        << detail::csv_value(c.benford_r2) << '\n';
  }
}

inline ojson sweep_json(const SweepResult& s) {
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = to_string(s.kind);
  j["levels"] = s.levels;
  ojson rows = ojson::array();
  for (const auto& row : s.summary) {
    auto opt = [](const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); };
    rows.push_back(ojson{{"level", row.level},
                         {"zipf_median_r2", opt(row.zipf_median)},
                         {"heaps_median_r2", opt(row.heaps_median)},
                         {"benford_median_r2", opt(row.benford_median)},
                         {"images", row.images}});
  }
  j["summary"] = std::move(rows);
  j["spearman_rho"] = ojson{{"zipf", detail::json_value(s.zipf_rho)},
                            {"heaps", detail::json_value(s.heaps_rho)},
                            {"benford", detail::json_value(s.benford_rho)}};
  j["benford_non_increasing"] = !std::isnan(s.benford_rho) && s.benford_rho < 0.0;
  return j;
}

}  // namespace lexivis
