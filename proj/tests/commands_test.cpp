#include <gtest/gtest.h>

#include <sys/wait.h>

#include <nlohmann/json.hpp>
#include <sstream>

#include "lexivis/commands.hpp"
#include "test_support.hpp"

namespace lexivis {
namespace {

using testing::TempDir;
using testing::read_text;

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LEXIVIS_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_text(p)); }

fs::path chelsea() { return testing::sample_image_dir() / "chelsea.jpg"; }
fs::path coffee() { return testing::sample_image_dir() / "coffee.jpg"; }

// ---------------------------------------------------------------------------
// fit: counts CSV only, no network

TEST(Fit, TwoNonzeroKernelsAreDegenerateForEveryLaw) {
  TempDir dir;
  testing::write_text_file(dir / "counts_pair.csv", "layer,kernel,count\n1,0,5\n1,1,3\n1,2,0\n");
  FitOptions o;
  o.counts = {dir / "counts_pair.csv"};
  o.out = dir.path();
  std::ostringstream err;
  const auto r = cmd_fit(o, err);
  EXPECT_EQ(r.exit_code, kExitOk) << err.str();
  const auto stats = read_json(dir / "stats_pair.json");
  for (const char* law : {"zipf", "heaps", "benford"}) {
    EXPECT_EQ(stats[law]["status"], "degenerate") << law;
    EXPECT_FALSE(stats[law]["reason"].get<std::string>().empty());
  }
  const auto report = read_json(dir / "report_pair.json");
  EXPECT_TRUE(report["threshold"].is_null());
  EXPECT_EQ(report["statistics"], stats);
}

TEST(Fit, GoldenCountsAreByteStable) {
  TempDir a;
  TempDir b;
  for (const auto* dir : {&a, &b}) {
    FitOptions o;
    o.counts = {testing::golden_dir() / "counts.csv"};
    o.out = dir->path();
    ASSERT_EQ(cmd_fit(o).exit_code, kExitOk);
  }
  for (const char* f : {"stats_counts.json", "zipf_counts.csv", "heaps_counts.csv", "benford_counts.csv"}) {
    const auto x = read_text(a / f);
    ASSERT_FALSE(x.empty()) << f;
    EXPECT_EQ(x, read_text(b / f)) << f;
  }
}

TEST(Fit, PlotCsvShapes) {
  TempDir dir;
  FitOptions o;
  o.counts = {testing::golden_dir() / "counts.csv"};
  o.out = dir.path();
  o.heaps_iterations = 5;
  ASSERT_EQ(cmd_fit(o).exit_code, kExitOk);
  const auto golden = read_counts_csv(testing::golden_dir() / "counts.csv");
  std::istringstream zipf(read_text(dir / "zipf_counts.csv"));
  std::string line;
  std::getline(zipf, line);
  EXPECT_EQ(line, "rank,count");
  std::size_t rows = 0;
  while (std::getline(zipf, line)) ++rows;
  EXPECT_EQ(rows, golden.nonzero_count());
  std::istringstream heaps(read_text(dir / "heaps_counts.csv"));
  std::getline(heaps, line);
  EXPECT_EQ(line, "n,V");
  std::istringstream benford(read_text(dir / "benford_counts.csv"));
  std::getline(benford, line);
  EXPECT_EQ(line, "position,observed,expected");
  rows = 0;
  while (std::getline(benford, line)) ++rows;
  EXPECT_EQ(rows, 9u);
}

TEST(Fit, SyntheticZipfCountsThroughTheCommand) {
  TempDir dir;
  std::ofstream out(dir / "counts_zipf.csv");
  write_counts_csv(testing::zipf_sample_table(500, 1000000, 1.0, 21), out);
  out.close();
  FitOptions o;
  o.counts = {dir / "counts_zipf.csv"};
  o.out = dir.path();
  const auto r = cmd_fit(o);
  ASSERT_EQ(r.exit_code, kExitOk);
  const auto stats = read_json(dir / "stats_zipf.json");
  EXPECT_NEAR(stats["zipf"]["alpha"].get<double>(), 1.0, 0.05);
  EXPECT_LT(stats["heaps"]["beta"].get<double>(), 1.0);
  EXPECT_GE(stats["heaps"]["fit"]["r_square"].get<double>(), 0.98);
}

TEST(Fit, BadFileIsPartialFailure) {
  TempDir dir;
  testing::write_text_file(dir / "bad.csv", "layer,kernel,count\n1,0\n");
  FitOptions o;
  o.counts = {dir / "bad.csv", testing::golden_dir() / "counts.csv"};
  o.out = dir.path();
  o.heaps_iterations = 3;
  std::ostringstream err;
  const auto r = cmd_fit(o, err);
  EXPECT_EQ(r.exit_code, kExitPartial);
  EXPECT_EQ(r.reports.size(), 1u);
  EXPECT_NE(err.str().find("bad.csv:2:"), std::string::npos) << err.str();
}

// ---------------------------------------------------------------------------
// analyze / sweep through the CLI binary

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli(""), kExitFatal);
  EXPECT_EQ(run_cli("analyze --image x.png"), kExitFatal);
  EXPECT_EQ(run_cli("sweep --weights m.json --image x.png --perturb median"), kExitFatal);
  EXPECT_EQ(run_cli("fit --counts c.csv --heaps-iters 0"), kExitFatal);
  EXPECT_EQ(run_cli("--help"), kExitOk);
}

TEST(Cli, MissingWeightsIsFatal) {
  TempDir dir;
  EXPECT_EQ(run_cli("analyze --weights " + (dir / "nope.json").string() + " --image " + chelsea().string() +
                    " --out " + dir.path().string()),
            kExitFatal);
  EXPECT_FALSE(fs::exists(dir / "report_chelsea_center.json"));
}

TEST(Cli, BadRoiSyntaxIsFatal) {
  TempDir dir;
  EXPECT_EQ(run_cli("analyze --weights " + testing::shared_golden_manifest().string() + " --image " +
                    chelsea().string() + " --roi '1;2' --out " + dir.path().string()),
            kExitFatal);
}

TEST(Cli, FitByteStableAcrossProcesses) {
  TempDir a;
  TempDir b;
  const auto counts = (testing::golden_dir() / "counts.csv").string();
  ASSERT_EQ(run_cli("fit --counts " + counts + " --out " + a.path().string()), kExitOk);
  ASSERT_EQ(run_cli("fit --counts " + counts + " --out " + b.path().string()), kExitOk);
  EXPECT_EQ(read_text(a / "stats_counts.json"), read_text(b / "stats_counts.json"));
  EXPECT_EQ(read_text(a / "heaps_counts.csv"), read_text(b / "heaps_counts.csv"));
}

// One analyze run shared by the checks below: two ROIs of one image, plus a
// missing input that must not sink the others.
class AnalyzeRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir;
    exit_code_ = run_cli("analyze --weights " + testing::shared_golden_manifest().string() + " --image " +
                         chelsea().string() + " --image " + (dir_->path() / "missing.png").string() +
                         " --roi center --roi 10,20 --threshold quantile:0.85 --heaps-iters 20 --seed 3 --out " +
                         dir_->path().string());
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static TempDir* dir_;
  static int exit_code_;
};

TempDir* AnalyzeRun::dir_ = nullptr;
int AnalyzeRun::exit_code_ = -1;

TEST_F(AnalyzeRun, PartialFailureKeepsOtherReports) {
  EXPECT_EQ(exit_code_, kExitPartial);
  EXPECT_TRUE(fs::exists(*dir_ / "report_chelsea_center.json"));
  EXPECT_TRUE(fs::exists(*dir_ / "report_chelsea_roi10x20.json"));
}

TEST_F(AnalyzeRun, ReportRecordsConfigurationVerbatim) {
  const auto r = read_json(*dir_ / "report_chelsea_roi10x20.json");
  EXPECT_EQ(r["threshold"]["spec"], "quantile:0.85");
  EXPECT_EQ(r["threshold"]["inclusive"], false);
  EXPECT_EQ(r["roi"]["x"], 10);
  EXPECT_EQ(r["roi"]["y"], 20);
  EXPECT_EQ(r["capture"], "post_relu");
  EXPECT_EQ(r["statistics"]["heaps_iterations"], 20);
  EXPECT_EQ(r["statistics"]["seed"], 3);
  EXPECT_EQ(r["statistics"]["kernels"], 5504);
  EXPECT_EQ(r["weights_manifest_sha256"], load_manifest(testing::shared_golden_manifest()).digest);
  EXPECT_TRUE(r["timings_ms"].contains("forward"));
}

TEST_F(AnalyzeRun, DistinctRoisGiveDistinctCounts) {
  const auto a = read_counts_csv(*dir_ / "counts_chelsea_center.csv");
  const auto b = read_counts_csv(*dir_ / "counts_chelsea_roi10x20.csv");
  EXPECT_EQ(a.size(), 5504u);
  EXPECT_NE(a.entries, b.entries);
}

TEST_F(AnalyzeRun, FitOnWrittenCountsReproducesStatistics) {
  TempDir out;
  FitOptions o;
  o.counts = {*dir_ / "counts_chelsea_center.csv"};
  o.out = out.path();
  o.heaps_iterations = 20;
  o.seed = 3;
  ASSERT_EQ(cmd_fit(o).exit_code, kExitOk);
  EXPECT_EQ(read_text(out / "stats_chelsea_center.json"), read_text(*dir_ / "stats_chelsea_center.json"));
}

TEST_F(AnalyzeRun, IdentityErosionMatchesBaseline) {
  TempDir out;
  ASSERT_EQ(run_cli("sweep --weights " + testing::shared_golden_manifest().string() + " --image " +
                    chelsea().string() + " --perturb erode --levels 3 --threshold quantile:0.85 --heaps-iters 20" +
                    " --seed 3 --out " + out.path().string()),
            kExitOk);
  EXPECT_EQ(read_text(out / "stats_chelsea_center_erode_1.json"), read_text(*dir_ / "stats_chelsea_center.json"));
  EXPECT_NE(read_text(out / "stats_chelsea_center_erode_3.json"), read_text(*dir_ / "stats_chelsea_center.json"));
  const auto r = read_json(out / "report_chelsea_center_erode_3.json");
  EXPECT_EQ(r["perturbation"]["kind"], "erode");
  EXPECT_EQ(r["perturbation"]["level"], 3.0);
}

TEST(Sweep, SaltPepperGridProducesEveryCell) {
  TempDir out;
  SweepOptions o;
  o.weights = testing::shared_golden_manifest();
  o.images = {chelsea(), coffee()};
  o.kind = PerturbationKind::saltpepper;
  o.levels = {0.0, 0.1, 0.3};
  o.heaps_iterations = 10;
  o.seed = 5;
  o.out = out.path();
  o.jobs = 2;
  std::ostringstream err;
  const auto r = cmd_sweep(o, err);
  ASSERT_EQ(r.command.exit_code, kExitOk) << err.str();
  EXPECT_EQ(r.command.reports.size(), 6u);
  std::size_t reports = 0;
  for (const auto& e : fs::directory_iterator(out.path())) reports += e.path().filename().string().rfind("report_", 0) == 0;
  EXPECT_EQ(reports, 6u);
  const auto summary = read_text(out / "sweep_summary.csv");
  std::istringstream in(summary);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "kind,level,zipf_median_r2,heaps_median_r2,benford_median_r2,images");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(line.rfind("saltpepper,", 0), 0u) << line;
    EXPECT_EQ(line.substr(line.rfind(',') + 1), "2") << line;
  }
  EXPECT_EQ(rows, 3u);
  const auto j = read_json(out / "sweep_summary.json");
  EXPECT_EQ(j["summary"].size(), 3u);
  EXPECT_TRUE(j["benford_non_increasing"].is_boolean());
  // The clean level is unaffected by the seed and equals a plain analyze.
  EXPECT_EQ(read_json(out / "report_chelsea_center_saltpepper_0.json")["perturbation"]["level"], 0.0);
}

TEST(Sweep, InvalidLevelIsFatalBeforeAnyWork) {
  TempDir out;
  SweepOptions o;
  o.weights = testing::shared_golden_manifest();
  o.images = {chelsea()};
  o.kind = PerturbationKind::gaussian;
  o.levels = {3, 4};
  o.out = out.path();
  std::ostringstream err;
  EXPECT_EQ(cmd_sweep(o, err).command.exit_code, kExitFatal);
  EXPECT_FALSE(fs::exists(out / "sweep_summary.csv"));
}

TEST(Sweep, DefaultLevelGrids) {
  EXPECT_EQ(default_levels(PerturbationKind::saltpepper), (std::vector<double>{0.05, 0.1, 0.2, 0.3, 0.4, 0.5}));
  EXPECT_EQ(default_levels(PerturbationKind::dilate), (std::vector<double>{3, 5, 7, 9, 11}));
}

TEST(Spearman, Examples) {
  const std::vector<double> x{1, 2, 3, 4};
  EXPECT_NEAR(spearman_rho(x, std::vector<double>{10, 20, 30, 40}), 1.0, 1e-12);
  EXPECT_NEAR(spearman_rho(x, std::vector<double>{4, 3, 2, 1}), -1.0, 1e-12);
  EXPECT_NEAR(spearman_rho(x, std::vector<double>{1, 3, 2, 4}), 0.8, 1e-12);
}

}  // namespace
}  // namespace lexivis
