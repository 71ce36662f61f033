#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <sstream>

#include "lexivis/lexicon.hpp"
#include "test_support.hpp"

namespace lexivis {
namespace {

ThresholdSpec quantile(double level, bool inclusive = false) {
  return {ThresholdMode::quantile, level, inclusive};
}

ThresholdSpec relmax(double level, bool inclusive = false) {
  return {ThresholdMode::relative_max, level, inclusive};
}

TEST(WordCount, QuantileStrictAndInclusive) {
  std::vector<float> v(10);
  std::iota(v.begin(), v.end(), 0.0f);
  EXPECT_EQ(word_count(v, quantile(0.9)), 1u);
  EXPECT_EQ(word_count(v, quantile(0.9, true)), 2u);
  EXPECT_EQ(word_count(v, quantile(0.5)), 5u);
}

TEST(WordCount, ConstantMapHasNoStrictWords) {
  const std::vector<float> c(49, 2.5f);
  EXPECT_EQ(word_count(c, quantile(0.9)), 0u);
  EXPECT_EQ(word_count(c, quantile(0.9, true)), 49u);
  EXPECT_EQ(word_count(std::vector<float>(49, 0.0f), relmax(0.5)), 0u);
}

TEST(WordCount, RelativeMax) {
  const std::vector<float> v{0.0f, 1.0f, 2.0f, 4.0f};
  EXPECT_EQ(word_count(v, relmax(0.5)), 1u);
  EXPECT_EQ(word_count(v, relmax(0.5, true)), 2u);
  EXPECT_EQ(word_count(std::vector<float>{-3.0f, -1.0f}, relmax(0.5)), 0u);
}

TEST(WordCount, InvariantUnderPositiveScaleAndShift) {
  std::mt19937 rng(8);
  std::uniform_int_distribution<int> dist(-50, 50);
  for (int trial = 0; trial < 30; ++trial) {
    // Integer-valued floats keep scale and shift exact.
    std::vector<float> v(1 + rng() % 400);
    for (float& x : v) x = static_cast<float>(dist(rng));
    for (double level : {0.1, 0.5, 0.9}) {
      const auto base = word_count(v, quantile(level));
      auto scaled = v;
      for (float& x : scaled) x = 4.0f * x + 7.0f;
      EXPECT_EQ(word_count(scaled, quantile(level)), base);
      auto shuffled = v;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      EXPECT_EQ(word_count(shuffled, quantile(level)), base);
    }
  }
}

TEST(WordCount, QuantileCountBound) {
  std::mt19937 rng(9);
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<float> v(10 + rng() % 1000);
    for (float& x : v) x = dist(rng);
    const auto n = word_count(v, quantile(0.9));
    EXPECT_LE(n, v.size() - nearest_rank(v.size(), 0.9));
  }
}

TEST(Threshold, ParseAndLabel) {
  const auto t = ThresholdSpec::parse("relative_max:0.25");
  EXPECT_EQ(t.mode, ThresholdMode::relative_max);
  EXPECT_DOUBLE_EQ(t.level, 0.25);
  EXPECT_EQ(t.label(), "relative_max:0.25");
  EXPECT_EQ(ThresholdSpec{}.label(), "quantile:0.9");
  EXPECT_THROW(ThresholdSpec::parse("quantile"), ArgumentError);
  EXPECT_THROW(ThresholdSpec::parse("median:0.5"), ArgumentError);
  EXPECT_THROW(ThresholdSpec::parse("quantile:1.0"), ArgumentError);
  EXPECT_THROW(ThresholdSpec::parse("quantile:0"), ArgumentError);
  EXPECT_THROW(ThresholdSpec::parse("quantile:0.9x"), ArgumentError);
}

TEST(Lexicon, ExtractOrdersByLayerThenKernel) {
  FeatureMapSet fms;
  Tensor a(2, 2, 2, std::vector<float>{0, 1, 2, 3, 5, 5, 5, 5});
  Tensor b(3, 1, 2, std::vector<float>{1, 0, 0, 0, 9, 8});
  fms.layers = {a, b};
  const auto table = extract_lexicon(fms, quantile(0.5));
  ASSERT_EQ(table.size(), 5u);
  const std::vector<WordCount> expected{{1, 0, 2}, {1, 1, 0}, {2, 0, 1}, {2, 1, 0}, {2, 2, 1}};
  EXPECT_EQ(table.entries, expected);
  EXPECT_EQ(table.nonzero_count(), 3u);
  const auto totals = table.layer_totals();
  ASSERT_EQ(totals.size(), 2u);
  EXPECT_EQ(totals[0].second, 2u);
  EXPECT_EQ(totals[1].second, 2u);
  EXPECT_EQ(extract_lexicon(fms, quantile(0.5), 3).entries, table.entries);
}

TEST(CountsCsv, RoundTrip) {
  auto table = testing::table_from_counts({5, 0, 17}, 3);
  table.entries.push_back({4, 0, 2});
  std::stringstream ss;
  write_counts_csv(table, ss);
  EXPECT_EQ(ss.str(), "layer,kernel,count\n3,0,5\n3,1,0\n3,2,17\n4,0,2\n");
  EXPECT_EQ(read_counts_csv(ss).entries, table.entries);
}

TEST(CountsCsv, SortsAndAcceptsCrlf) {
  std::istringstream in("layer,kernel,count\r\n2,1,4\r\n1,0,9\r\n\r\n");
  const auto t = read_counts_csv(in);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.entries[0], (WordCount{1, 0, 9}));
}

void expect_parse_error(const std::string& text, std::size_t line, const std::string& fragment) {
  std::istringstream in(text);
  try {
    read_counts_csv(in);
    FAIL() << "no error for: " << text;
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), line) << e.what();
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

TEST(CountsCsv, ErrorsCarryLineNumbers) {
  expect_parse_error("", 1, "empty");
  expect_parse_error("layer,kernel,cnt\n", 1, "header");
  expect_parse_error("layer,kernel,count\n1,0,3\n1,1\n", 3, "3 comma-separated");
  expect_parse_error("layer,kernel,count\n1,0,3,4\n", 2, "3 comma-separated");
  expect_parse_error("layer,kernel,count\n1,0,-3\n", 2, "count");
  expect_parse_error("layer,kernel,count\n1,x,3\n", 2, "kernel");
  expect_parse_error("layer,kernel,count\n0,0,3\n", 2, "1-based");
  expect_parse_error("layer,kernel,count\n1,0,3\n2,0,1\n1,0,5\n", 4, "duplicate");
}

TEST(CountsCsv, FileErrorsNamePath) {
  testing::TempDir dir;
  EXPECT_THROW(read_counts_csv(dir / "none.csv"), IoError);
  testing::write_text_file(dir / "bad.csv", "layer,kernel,count\n1,0,z\n");
  try {
    read_counts_csv(dir / "bad.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.csv:2:"), std::string::npos) << e.what();
  }
}

TEST(CountsJson, Shape) {
  auto table = testing::table_from_counts({1, 2});
  table.image_id = "cat";
  const auto j = to_json(table);
  EXPECT_EQ(j["image_id"], "cat");
  EXPECT_EQ(j["threshold"]["mode"], "quantile");
  EXPECT_TRUE(j["perturbation"].is_null());
  EXPECT_EQ(j["counts"].size(), 2u);
  EXPECT_EQ(j["counts"][1][2], 2);
}

}  // namespace
}  // namespace lexivis
