#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "lexivis/lexicon.hpp"
#include "lexivis/synthetic_weights.hpp"
#include "lexivis/weights.hpp"

namespace lexivis::testing {

namespace fs = std::filesystem;

inline fs::path fixture_dir() { return LEXIVIS_FIXTURE_DIR; }
inline fs::path golden_dir() { return fixture_dir() / "golden"; }
inline fs::path sample_image_dir() { return LEXIVIS_SAMPLE_IMAGE_DIR; }

// Seed used for the committed golden fixtures.
inline constexpr std::uint64_t kGoldenSeed = 7;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("lexivis_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

// Regenerates the golden synthetic weights and installs the committed
// manifest (with its pinned digests) next to them.
inline fs::path install_golden_weights(const fs::path& dir) {
  export_synthetic_vgg19(dir, kGoldenSeed);
  fs::copy_file(golden_dir() / "weights_manifest.json", dir / "manifest.json",
                fs::copy_options::overwrite_existing);
  return dir / "manifest.json";
}

// Process-wide copy of the golden weights.
inline const fs::path& shared_golden_manifest() {
  static TempDir dir;
  static const fs::path manifest = install_golden_weights(dir.path());
  return manifest;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

// One layer, kernels 0..n-1.
inline WordCountTable table_from_counts(const std::vector<std::uint64_t>& counts, std::size_t layer = 1) {
  WordCountTable t;
  for (std::size_t k = 0; k < counts.size(); ++k) t.entries.push_back({layer, k, counts[k]});
  return t;
}

// Token counts drawn from p(r) ~ r^-alpha over `types` ranks, by inverse CDF.
// Types that never appear keep a zero count.
inline WordCountTable zipf_sample_table(std::size_t types, std::size_t tokens, double alpha, std::uint64_t seed) {
  std::vector<double> cdf(types);
  double acc = 0.0;
  for (std::size_t r = 0; r < types; ++r) cdf[r] = acc += std::pow(static_cast<double>(r + 1), -alpha);
  for (double& c : cdf) c /= acc;
  std::mt19937_64 rng(seed);
  std::vector<std::uint64_t> counts(types, 0);
  for (std::size_t i = 0; i < tokens; ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    ++counts[std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), types - 1)];
  }
  return table_from_counts(counts);
}

}  // namespace lexivis::testing
