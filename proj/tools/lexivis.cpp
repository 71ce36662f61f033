// lexivis: Zipf / Heaps / Benford statistics of CNN feature-map "texts".

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lexivis/commands.hpp"
#include "lexivis/synthetic_weights.hpp"

namespace {

using namespace lexivis;

RoiSpec parse_roi(const std::string& text) {
  if (text == "center") return {};
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ArgumentError("--roi expects X,Y or 'center', got '" + text + "'");
  try {
    std::size_t used_x = 0;
    std::size_t used_y = 0;
    const auto xs = text.substr(0, comma);
    const auto ys = text.substr(comma + 1);
    const auto x = std::stoull(xs, &used_x);
    const auto y = std::stoull(ys, &used_y);
    if (used_x != xs.size() || used_y != ys.size() || xs.front() == '-' || ys.front() == '-') {
      throw std::invalid_argument(text);
    }
    return RoiSpec{std::make_pair(static_cast<std::size_t>(x), static_cast<std::size_t>(y))};
  } catch (const std::exception&) {
    throw ArgumentError("--roi expects non-negative integers X,Y, got '" + text + "'");
  }
}

struct PipelineFlags {
  std::string weights;
  std::string threshold = "quantile:0.9";
  std::string capture = "post_relu";
  bool inclusive = false;
  std::size_t heaps_iters = 100;
  std::uint64_t seed = 0;
  std::string out = ".";
  unsigned jobs = 1;
  bool dump_rois = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--weights", weights, "weight manifest (manifest.json)")->required();
    cmd->add_option("--threshold", threshold, "word threshold MODE:LEVEL (quantile|relative_max)")
        ->capture_default_str();
    cmd->add_option("--capture", capture, "feature maps taken post_relu or pre_relu")
        ->check(CLI::IsMember({"post_relu", "pre_relu"}))
        ->capture_default_str();
    cmd->add_flag("--inclusive", inclusive, "count pixels >= threshold instead of >");
    cmd->add_option("--heaps-iters", heaps_iters, "kernel shuffles for the Heaps fit")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--seed", seed, "seed for shuffles and noise")->capture_default_str();
    cmd->add_option("--out", out, "output directory")->capture_default_str();
    cmd->add_option("--jobs", jobs, "concurrent images")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_flag("--dump-rois", dump_rois, "write the (perturbed) network input as PNG");
  }

  void fill(PipelineOptions& o) const {
    o.weights = weights;
    o.threshold = ThresholdSpec::parse(threshold);
    o.threshold.inclusive = inclusive;
    o.capture = capture == "pre_relu" ? CaptureMode::pre_relu : CaptureMode::post_relu;
    o.heaps_iterations = heaps_iters;
    o.seed = seed;
    o.out = out;
    o.jobs = jobs;
    o.dump_rois = dump_rois;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Statistical-linguistics laws in VGG-19 feature maps"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kEngineVersion);

  PipelineFlags analyze_flags;
  std::vector<std::string> analyze_images;
  std::vector<std::string> analyze_rois;
  auto* analyze = app.add_subcommand("analyze", "law reports for image ROIs");
  analyze_flags.attach(analyze);
  analyze->add_option("--image,images", analyze_images, "PNG or JPEG inputs")->required();
  analyze->add_option("--roi", analyze_rois, "ROI top-left X,Y (repeatable) or 'center'");

  PipelineFlags sweep_flags;
  std::vector<std::string> sweep_images;
  std::string sweep_roi;
  std::string perturb_kind;
  std::vector<double> sweep_levels;
  auto* sweep = app.add_subcommand("sweep", "perturbation robustness sweep");
  sweep_flags.attach(sweep);
  sweep->add_option("--image,images", sweep_images, "PNG or JPEG inputs")->required();
  sweep->add_option("--roi", sweep_roi, "ROI top-left X,Y or 'center'");
  sweep->add_option("--perturb", perturb_kind, "saltpepper|gaussian|erode|dilate")
      ->required()
      ->check(CLI::IsMember({"saltpepper", "gaussian", "erode", "dilate"}));
  sweep->add_option("--levels", sweep_levels, "level grid a,b,c")->delimiter(',');

  std::vector<std::string> fit_counts;
  std::size_t fit_iters = 100;
  std::uint64_t fit_seed = 0;
  std::string fit_out = ".";
  auto* fit = app.add_subcommand("fit", "law statistics from a layer,kernel,count CSV");
  fit->add_option("--counts,counts", fit_counts, "counts CSV files")->required();
  fit->add_option("--heaps-iters", fit_iters, "kernel shuffles for the Heaps fit")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  fit->add_option("--seed", fit_seed, "shuffle seed")->capture_default_str();
  fit->add_option("--out", fit_out, "output directory")->capture_default_str();

  std::string synth_out;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth-weights", "write deterministic synthetic VGG-19 weights");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "generator seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help / --version exit 0; usage errors share the fatal code
    return app.exit(e) == 0 ? kExitOk : kExitFatal;
  }

  try {
    if (*analyze) {
      AnalyzeOptions o;
      analyze_flags.fill(o);
      for (const auto& p : analyze_images) o.images.emplace_back(p);
      for (const auto& r : analyze_rois) o.rois.push_back(parse_roi(r));
      return cmd_analyze(o).exit_code;
    }
    if (*sweep) {
      SweepOptions o;
      sweep_flags.fill(o);
      for (const auto& p : sweep_images) o.images.emplace_back(p);
      if (!sweep_roi.empty()) o.roi = parse_roi(sweep_roi);
      o.kind = parse_perturbation_kind(perturb_kind);
      o.levels = sweep_levels;
      return cmd_sweep(o).command.exit_code;
    }
    if (*fit) {
      FitOptions o;
      for (const auto& p : fit_counts) o.counts.emplace_back(p);
      o.heaps_iterations = fit_iters;
      o.seed = fit_seed;
      o.out = fit_out;
      return cmd_fit(o).exit_code;
    }
    if (*synth) {
      std::cout << export_synthetic_vgg19(synth_out, synth_seed).string() << '\n';
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFatal;
  }
  return kExitOk;
}
