#pragma once

// Implementations behind `lexivis analyze|sweep|fit|synth-weights`.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "lexivis/image.hpp"
#include "lexivis/image_io.hpp"
#include "lexivis/lexicon.hpp"
#include "lexivis/perturb.hpp"
#include "lexivis/report.hpp"
#include "lexivis/statlaws.hpp"
#include "lexivis/vgg19.hpp"
#include "lexivis/weights.hpp"

namespace lexivis {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitFatal = 2;

struct PipelineOptions {
  fs::path weights;
  ThresholdSpec threshold;
  CaptureMode capture = CaptureMode::post_relu;
  std::size_t heaps_iterations = 100;
  std::uint64_t seed = 0;
  fs::path out = ".";
  unsigned jobs = 1;
  bool dump_rois = false;
};

struct AnalyzeOptions : PipelineOptions {
  std::vector<fs::path> images;
  std::vector<RoiSpec> rois;  // empty = center policy; otherwise one report per ROI per image
};

struct SweepOptions : PipelineOptions {
  std::vector<fs::path> images;
  std::optional<RoiSpec> roi;
  PerturbationKind kind = PerturbationKind::saltpepper;
  std::vector<double> levels;
};

struct FitOptions {
  std::vector<fs::path> counts;
  std::size_t heaps_iterations = 100;
  std::uint64_t seed = 0;
  fs::path out = ".";
};

struct CommandOutcome {
  int exit_code = kExitOk;
  std::vector<LawReport> reports;
  std::vector<std::string> failures;
};

inline std::vector<double> default_levels(PerturbationKind kind) {
  if (kind == PerturbationKind::saltpepper) return {0.05, 0.1, 0.2, 0.3, 0.4, 0.5};
  return {3, 5, 7, 9, 11};
}

namespace detail {

class StageClock {
 public:
  explicit StageClock(std::vector<StageTiming>& sink) : sink_(sink) {}
  template <typename F>
  decltype(auto) run(const std::string& stage, F&& f) {
    const auto start = std::chrono::steady_clock::now();
    struct Record {
      StageClock& self;
      const std::string& stage;
      std::chrono::steady_clock::time_point start;
      ~Record() {
        const auto end = std::chrono::steady_clock::now();
        self.sink_.push_back({stage, std::chrono::duration<double, std::milli>(end - start).count()});
      }
    } record{*this, stage, start};
    return f();
  }

 private:
  std::vector<StageTiming>& sink_;
};

// Error annotated with the pipeline stage and input that produced it.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& input, const std::string& what)
      : Error(stage + " failed for " + input + ": " + what) {}
};

template <typename F>
decltype(auto) stage(const std::string& name, const std::string& input, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, input, e.what());
  }
}

inline std::string sanitize_id(const std::string& s) {
  std::string out;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                    c == '-' || c == '_';
    out.push_back(ok ? c : '_');
  }
  return out;
}

inline std::string level_label(double level) {
  std::ostringstream os;
  os << level;
  return os.str();
}

template <typename Writer>
void write_text(const fs::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  writer(out);
  if (!out) throw IoError("write failed for " + path.string());
}

inline void write_outputs(const LawReport& report, const fs::path& dir, const WordCountTable* table) {
  const std::string& id = report.image_id;
  write_text(dir / ("report_" + id + ".json"), [&](std::ostream& o) { o << report_json(report).dump(2) << '\n'; });
  write_text(dir / ("stats_" + id + ".json"), [&](std::ostream& o) { o << statistics_json(report).dump(2) << '\n'; });
  write_text(dir / ("zipf_" + id + ".csv"), [&](std::ostream& o) { write_zipf_csv(report, o); });
  write_text(dir / ("heaps_" + id + ".csv"), [&](std::ostream& o) { write_heaps_csv(report, o); });
  write_text(dir / ("benford_" + id + ".csv"), [&](std::ostream& o) { write_benford_csv(report, o); });
  if (table) write_text(dir / ("counts_" + id + ".csv"), [&](std::ostream& o) { write_counts_csv(*table, o); });
}

inline ImageBuffer select_roi(const ImageBuffer& img, const RoiSpec& roi) {
  if (roi.origin) return crop_roi(img, roi.origin->first, roi.origin->second);
  return center_roi(img);
}

// ROI -> (perturb) -> normalize -> forward -> lexicon -> laws -> files.
inline LawReport run_roi(const Vgg19& net, const ImageBuffer& roi_image, const std::string& id,
                         const std::string& source, const RoiSpec& roi,
                         const std::optional<PerturbationSpec>& perturbation, const PipelineOptions& opts,
                         unsigned threads, std::vector<StageTiming> timings = {}) {
  LawReport report;
  report.image_id = id;
  report.source = source;
  report.roi = roi;
  report.threshold = opts.threshold;
  report.capture = opts.capture;
  report.perturbation = perturbation;
  report.manifest_digest = net.manifest().digest;
  report.heaps_iterations = opts.heaps_iterations;
  report.seed = opts.seed;
  StageClock clock(timings);

  const ImageBuffer input = perturbation ? stage("perturb", source, [&] {
    return clock.run("perturb", [&] { return apply_perturbation(roi_image, *perturbation); });
  })
                                         : roi_image;
  if (opts.dump_rois) {
    stage("dump", source, [&] { write_png(input, opts.out / ("roi_" + id + ".png")); });
  }
  const Tensor tensor = stage("normalize", source, [&] {
    return clock.run("normalize", [&] { return to_input_tensor(input, net.normalization()); });
  });
  const FeatureMapSet fms = stage("forward", source, [&] {
    return clock.run("forward", [&] { return net.forward_collect(tensor, opts.capture, threads); });
  });
  WordCountTable table = stage("lexicon", source, [&] {
    return clock.run("lexicon", [&] { return extract_lexicon(fms, opts.threshold, threads); });
  });
  table.image_id = id;
  table.perturbation = perturbation;
  stage("fit", source, [&] { clock.run("fit", [&] { fit_laws(report, table); }); });
  report.timings = std::move(timings);
  stage("write", source, [&] { write_outputs(report, opts.out, &table); });
  return report;
}

inline std::optional<Vgg19> load_network(const fs::path& weights, std::ostream& err) {
  try {
    return Vgg19(load_manifest(weights));
  } catch (const std::exception& e) {
    err << "error: load failed for " << weights.string() << ": " << e.what() << '\n';
    return std::nullopt;
  }
}

inline unsigned forward_threads(unsigned jobs) {
  const unsigned hw = resolve_threads(0);
  return std::max(1u, hw / std::max(1u, jobs));
}

// Runs f(i) for i in [0, n) on up to `jobs` workers.
template <typename F>
void run_jobs(std::size_t n, unsigned jobs, F&& f) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) f(i);
  };
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, jobs), n));
  if (workers <= 1) {
    worker();
    return;
  }
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
}

}  // namespace detail

inline CommandOutcome cmd_analyze(const AnalyzeOptions& opts, std::ostream& err = std::cerr) {
  CommandOutcome outcome;
  fs::create_directories(opts.out);
  auto net = detail::load_network(opts.weights, err);
  if (!net) {
    outcome.exit_code = kExitFatal;
    return outcome;
  }
  const std::vector<RoiSpec> rois = opts.rois.empty() ? std::vector<RoiSpec>{RoiSpec{}} : opts.rois;
  struct Item {
    std::size_t image;
    RoiSpec roi;
  };
  std::vector<Item> items;
  for (std::size_t i = 0; i < opts.images.size(); ++i) {
    for (const auto& r : rois) items.push_back({i, r});
  }
  std::vector<std::optional<LawReport>> results(items.size());
  std::mutex err_mutex;
  const unsigned threads = detail::forward_threads(opts.jobs);
  detail::run_jobs(items.size(), opts.jobs, [&](std::size_t i) {
    const auto& path = opts.images[items[i].image];
    try {
      std::vector<StageTiming> timings;
      detail::StageClock clock(timings);
      const auto image = detail::stage("decode", path.string(), [&] { return clock.run("decode", [&] { return read_image(path); }); });
      const auto roi = detail::stage("roi", path.string(), [&] { return detail::select_roi(image, items[i].roi); });
      const std::string id = detail::sanitize_id(path.stem().string() + "_" + items[i].roi.label());
      results[i] = detail::run_roi(*net, roi, id, path.string(), items[i].roi, std::nullopt, opts, threads,
                                   std::move(timings));
    } catch (const std::exception& e) {
      std::lock_guard lock(err_mutex);
      err << "error: " << e.what() << '\n';
    }
  });
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (results[i]) {
      outcome.reports.push_back(std::move(*results[i]));
    } else {
      outcome.failures.push_back(opts.images[items[i].image].string() + " (" + items[i].roi.label() + ")");
    }
  }
  if (!outcome.failures.empty()) {
    err << "failed inputs:\n";
    for (const auto& f : outcome.failures) err << "  " << f << '\n';
    outcome.exit_code = kExitPartial;
  }
  return outcome;
}

struct SweepOutcome {
  CommandOutcome command;
  SweepResult sweep;
};

// Full (image x level) cross product; the identity level is always included first.
inline SweepOutcome cmd_sweep(const SweepOptions& opts, std::ostream& err = std::cerr) {
  SweepOutcome result;
  auto& outcome = result.command;
  std::vector<double> levels{identity_level(opts.kind)};
  for (double l : opts.levels.empty() ? default_levels(opts.kind) : opts.levels) {
    if (std::find(levels.begin(), levels.end(), l) == levels.end()) levels.push_back(l);
  }
  for (double l : levels) {
    try {
      PerturbationSpec{opts.kind, l, opts.seed}.validate();
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      outcome.exit_code = kExitFatal;
      return result;
    }
  }
  fs::create_directories(opts.out);
  auto net = detail::load_network(opts.weights, err);
  if (!net) {
    outcome.exit_code = kExitFatal;
    return result;
  }
  const RoiSpec roi_spec = opts.roi.value_or(RoiSpec{});

  // Decode once per image.
  std::vector<std::optional<ImageBuffer>> rois(opts.images.size());
  for (std::size_t i = 0; i < opts.images.size(); ++i) {
    const auto& path = opts.images[i];
    try {
      const auto image = detail::stage("decode", path.string(), [&] { return read_image(path); });
      rois[i] = detail::stage("roi", path.string(), [&] { return detail::select_roi(image, roi_spec); });
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
    }
  }

  const std::size_t n = opts.images.size() * levels.size();
  std::vector<std::optional<LawReport>> reports(n);
  std::mutex err_mutex;
  const unsigned threads = detail::forward_threads(opts.jobs);
  detail::run_jobs(n, opts.jobs, [&](std::size_t idx) {
    const std::size_t img = idx / levels.size();
    const double level = levels[idx % levels.size()];
    if (!rois[img]) return;
    const auto& path = opts.images[img];
    try {
      PerturbationSpec spec{opts.kind, level, opts.seed};
      const std::string id = detail::sanitize_id(path.stem().string() + "_" + roi_spec.label() + "_" +
                                                 to_string(opts.kind) + "_" + detail::level_label(level));
      reports[idx] = detail::run_roi(*net, *rois[img], id, path.string(), roi_spec, spec, opts, threads);
    } catch (const std::exception& e) {
      std::lock_guard lock(err_mutex);
      err << "error: " << e.what() << '\n';
    }
  });

  auto& sweep = result.sweep;
  sweep.kind = opts.kind;
  sweep.levels = levels;
  for (std::size_t idx = 0; idx < n; ++idx) {
    const std::size_t img = idx / levels.size();
    const double level = levels[idx % levels.size()];
    const std::string name = opts.images[img].stem().string();
    if (!reports[idx]) {
      outcome.failures.push_back(opts.images[img].string() + " @ " + to_string(opts.kind) + ":" +
                                 detail::level_label(level));
      continue;
    }
    const auto& r = *reports[idx];
    sweep.cells.push_back({name, level, r.zipf_r2(), r.heaps_r2(), r.benford_r2()});
    outcome.reports.push_back(r);
  }
  sweep.summarize();
  try {
    detail::write_text(opts.out / "sweep_summary.csv", [&](std::ostream& o) { write_sweep_summary_csv(sweep, o); });
    detail::write_text(opts.out / "sweep_details.csv", [&](std::ostream& o) { write_sweep_details_csv(sweep, o); });
    detail::write_text(opts.out / "sweep_summary.json", [&](std::ostream& o) { o << sweep_json(sweep).dump(2) << '\n'; });
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    outcome.failures.push_back("sweep summary");
  }
  if (!outcome.failures.empty()) {
    err << "failed inputs:\n";
    for (const auto& f : outcome.failures) err << "  " << f << '\n';
    outcome.exit_code = kExitPartial;
  }
  return result;
}

// Statistics from a `layer,kernel,count` CSV without running the network.
inline CommandOutcome cmd_fit(const FitOptions& opts, std::ostream& err = std::cerr) {
  CommandOutcome outcome;
  fs::create_directories(opts.out);
  for (const auto& path : opts.counts) {
    try {
      LawReport report;
      std::string id = path.stem().string();
      if (id.rfind("counts_", 0) == 0) id = id.substr(7);
      report.image_id = detail::sanitize_id(id);
      report.source = path.string();
      report.heaps_iterations = opts.heaps_iterations;
      report.seed = opts.seed;
      detail::StageClock clock(report.timings);
      const auto table = detail::stage("parse", path.string(), [&] {
        return clock.run("parse", [&] { return read_counts_csv(path); });
      });
      clock.run("fit", [&] { fit_laws(report, table); });
      detail::stage("write", path.string(), [&] { detail::write_outputs(report, opts.out, nullptr); });
      outcome.reports.push_back(std::move(report));
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      outcome.failures.push_back(path.string());
    }
  }
  if (!outcome.failures.empty()) {
    err << "failed inputs:\n";
    for (const auto& f : outcome.failures) err << "  " << f << '\n';
    outcome.exit_code = kExitPartial;
  }
  return outcome;
}

}  // namespace lexivis
