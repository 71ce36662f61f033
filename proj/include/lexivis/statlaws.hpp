#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lexivis/errors.hpp"
#include "lexivis/lexicon.hpp"
#include "lexivis/rng.hpp"

namespace lexivis {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r_square = 0.0;
  std::size_t n_points = 0;
};

// Ordinary least squares y = slope * x + intercept with R^2 = 1 - SS_res / SS_tot.
inline FitResult ols_fit(std::span<const Point> points) {
  const std::size_t n = points.size();
  if (n < 3) throw DegenerateFitError("straight-line fit needs at least 3 points, got " + std::to_string(n));
  double mx = 0.0;
  double my = 0.0;
  for (const auto& p : points) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (const auto& p : points) {
    const double dx = p.x - mx;
    const double dy = p.y - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw DegenerateFitError("x values have zero variance");
  if (!(syy > 0.0)) throw DegenerateFitError("y values have zero variance");
  FitResult fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (const auto& p : points) {
    const double r = p.y - (fit.slope * p.x + fit.intercept);
    ss_res += r * r;
  }
  fit.r_square = 1.0 - ss_res / syy;
  fit.n_points = n;
  return fit;
}

// ---------------------------------------------------------------------------
// Zipf

struct ZipfResult {
  double alpha = 0.0;  // -slope of log10(count) against log10(rank)
  FitResult fit;
  std::vector<std::uint64_t> ranked_counts;
};

// Nonzero counts, descending; equal counts keep (layer, kernel) order.
inline std::vector<std::uint64_t> ranked_counts(const WordCountTable& table) {
  std::vector<WordCount> words;
  for (const auto& e : table.entries) {
    if (e.count > 0) words.push_back(e);
  }
  std::stable_sort(words.begin(), words.end(), [](const WordCount& a, const WordCount& b) {
    if (a.count != b.count) return a.count > b.count;
    return std::tie(a.layer, a.kernel) < std::tie(b.layer, b.kernel);
  });
  std::vector<std::uint64_t> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(w.count);
  return out;
}

inline ZipfResult zipf_analysis(const WordCountTable& table) {
  ZipfResult z;
  z.ranked_counts = ranked_counts(table);
  if (z.ranked_counts.size() < 3) {
    throw DegenerateFitError("Zipf fit needs at least 3 nonzero counts, got " +
                             std::to_string(z.ranked_counts.size()));
  }
  std::vector<Point> pts;
  pts.reserve(z.ranked_counts.size());
  for (std::size_t r = 0; r < z.ranked_counts.size(); ++r) {
    pts.push_back({std::log10(static_cast<double>(r + 1)), std::log10(static_cast<double>(z.ranked_counts[r]))});
  }
  z.fit = ols_fit(pts);
  z.alpha = -z.fit.slope;
  return z;
}

// ---------------------------------------------------------------------------
// Heaps

struct HeapsPoint {
  std::uint64_t tokens = 0;  // n: cumulative word count
  std::uint64_t types = 0;   // V: distinct kernels so far
};

struct HeapsResult {
  double k = 0.0;     // 10^intercept
  double beta = 0.0;  // slope
  FitResult fit;
  std::uint64_t best_seed = 0;
  std::size_t iterations = 0;
  double r_square_mean = 0.0;
  double r_square_std = 0.0;
  std::vector<HeapsPoint> curve;  // growth curve of the selected ordering
};

// Independent generator seed for shuffle iteration i.
inline std::uint64_t heaps_sub_seed(std::uint64_t seed, std::size_t iteration) {
  return SplitMix64(seed + static_cast<std::uint64_t>(iteration) * 0x9E3779B97F4A7C15ULL).next();
}

namespace detail {

// Uniform in [0, n) without modulo bias.
inline std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t reject_below = (0 - n) % n;
  std::uint64_t x = rng();
  while (x < reject_below) x = rng();
  return x % n;
}

template <typename T>
void fisher_yates(std::vector<T>& items, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(bounded_draw(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

inline std::vector<HeapsPoint> heaps_curve(std::span<const std::uint64_t> order) {
  std::vector<HeapsPoint> curve;
  curve.reserve(order.size());
  std::uint64_t n = 0;
  for (std::size_t j = 0; j < order.size(); ++j) {
    n += order[j];
    curve.push_back({n, j + 1});
  }
  return curve;
}

inline FitResult fit_heaps_curve(std::span<const HeapsPoint> curve) {
  std::vector<Point> pts;
  pts.reserve(curve.size());
  for (const auto& p : curve) {
    pts.push_back({std::log10(static_cast<double>(p.tokens)), std::log10(static_cast<double>(p.types))});
  }
  return ols_fit(pts);
}

}  // namespace detail

// Kernel-level shuffles: each iteration permutes whole kernels (all of a
// kernel's tokens stay together), accumulates n and V, and fits log V against
// log n. The ordering with the highest R^2 is reported; ties go to the lowest
// sub-seed.
inline HeapsResult heaps_analysis(const WordCountTable& table, std::size_t iterations = 100,
                                  std::uint64_t seed = 0) {
  if (iterations == 0) throw ArgumentError("Heaps analysis needs at least one iteration");
  std::vector<std::uint64_t> base;
  for (const auto& e : table.entries) {
    if (e.count > 0) base.push_back(e.count);
  }
  if (base.size() < 3) {
    throw DegenerateFitError("Heaps fit needs at least 3 nonzero counts, got " + std::to_string(base.size()));
  }
  HeapsResult best;
  best.iterations = iterations;
  bool have_best = false;
  std::vector<double> r2s;
  r2s.reserve(iterations);
  for (std::size_t i = 0; i < iterations; ++i) {
    const auto sub = heaps_sub_seed(seed, i);
    auto order = base;
    detail::fisher_yates(order, sub);
    auto curve = detail::heaps_curve(order);
    const auto fit = detail::fit_heaps_curve(curve);
    r2s.push_back(fit.r_square);
    const bool better = !have_best || fit.r_square > best.fit.r_square ||
                        (fit.r_square == best.fit.r_square && sub < best.best_seed);
    if (better) {
      have_best = true;
      best.fit = fit;
      best.best_seed = sub;
      best.curve = std::move(curve);
    }
  }
  best.beta = best.fit.slope;
  best.k = std::pow(10.0, best.fit.intercept);
  const double mean = std::accumulate(r2s.begin(), r2s.end(), 0.0) / static_cast<double>(r2s.size());
  double var = 0.0;
  for (double r : r2s) var += (r - mean) * (r - mean);
  best.r_square_mean = mean;
  best.r_square_std = std::sqrt(var / static_cast<double>(r2s.size()));
  return best;
}

// ---------------------------------------------------------------------------
// Benford

inline double benford_expected(int digit) {
  if (digit < 1 || digit > 9) throw ArgumentError("Benford digit must lie in 1..9, got " + std::to_string(digit));
  return std::log10(1.0 + 1.0 / static_cast<double>(digit));
}

struct BenfordResult {
  std::array<double, 9> observed{};
  std::array<double, 9> expected{};
  double r_square = 0.0;
  std::vector<std::uint64_t> layer_totals;  // ascending layer order
};

// R^2 of 9 observed fractions against fixed expected values (no free fit).
inline double r_square_against(std::span<const double> observed, std::span<const double> expected) {
  const double mean = std::accumulate(observed.begin(), observed.end(), 0.0) / static_cast<double>(observed.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    ss_res += (observed[i] - expected[i]) * (observed[i] - expected[i]);
    ss_tot += (observed[i] - mean) * (observed[i] - mean);
  }
  if (!(ss_tot > 0.0)) throw DegenerateFitError("observed Benford fractions have zero variance");
  return 1.0 - ss_res / ss_tot;
}

// Each conv layer is one "first letter": the nine largest layer totals,
// ranked, are matched positionally to digits 1..9.
inline BenfordResult benford_analysis(const WordCountTable& table) {
  BenfordResult b;
  for (const auto& [layer, total] : table.layer_totals()) b.layer_totals.push_back(total);
  std::vector<std::uint64_t> sorted = b.layer_totals;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto positive = static_cast<std::size_t>(
      std::count_if(sorted.begin(), sorted.end(), [](std::uint64_t t) { return t > 0; }));
  if (positive < 9) {
    throw DegenerateFitError("Benford analysis needs at least 9 layers with words, got " + std::to_string(positive));
  }
  // Equal totals give equal fractions; rounding would leave a tiny nonzero variance.
  if (sorted[0] == sorted[8]) throw DegenerateFitError("the nine largest layer totals are all equal");
  double sum = 0.0;
  for (std::size_t d = 0; d < 9; ++d) sum += static_cast<double>(sorted[d]);
  for (std::size_t d = 0; d < 9; ++d) {
    b.observed[d] = static_cast<double>(sorted[d]) / sum;
    b.expected[d] = benford_expected(static_cast<int>(d + 1));
  }
  b.r_square = r_square_against(b.observed, b.expected);
  return b;
}

}  // namespace lexivis
