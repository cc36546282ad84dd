#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "polar/metrics.hpp"

namespace m = polar::metrics;

namespace {

double pairwise_auroc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1;
      if (s[i] > s[j]) num += 1;
      else if (s[i] == s[j]) num += 0.5;
    }
  return num / pairs;
}

// Precision/recall at every distinct threshold, counting scores >= t.
double threshold_ap(const std::vector<double>& s, const std::vector<int>& y) {
  std::set<double, std::greater<>> thresholds(s.begin(), s.end());
  double P = 0;
  for (int v : y) P += v;
  double ap = 0, prev_recall = 0;
  for (double t : thresholds) {
    double tp = 0, k = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] >= t) {
        ++k;
        tp += y[i];
      }
    ap += (tp / P - prev_recall) * (tp / k);
    prev_recall = tp / P;
  }
  return ap;
}

std::vector<int> random_labels(std::mt19937_64& g, std::size_t n) {
  std::vector<int> y(n);
  for (auto& v : y) v = static_cast<int>(g() % 2);
  y[0] = 0;
  y[1] = 1;
  return y;
}

}  // namespace

TEST(Auroc, HandExample) {
  EXPECT_DOUBLE_EQ(m::auroc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}), 0.75);
}

TEST(Auroc, TrivialCases) {
  const std::vector<int> y{0, 1, 0, 1};
  EXPECT_EQ(m::auroc(std::vector<double>{0.1, 0.9, 0.2, 0.8}, y), 1.0);
  EXPECT_EQ(m::auroc(std::vector<double>{3, 3, 3, 3}, y), 0.5);
  try {
    m::auroc(std::vector<double>{1, 2}, std::vector<int>{1, 1});
    FAIL();
  } catch (const polar::Error& e) {
    EXPECT_EQ(e.kind(), polar::ErrorKind::UndefinedMetric);
  }
  EXPECT_THROW(m::auroc(std::vector<double>{1, 2}, std::vector<int>{0, 2}), polar::Error);
}

TEST(Auroc, MatchesPairwiseEnumerationWithTies) {
  std::mt19937_64 g(5);
  for (int it = 0; it < 100; ++it) {
    const std::size_t n = 2 + g() % 40;
    auto y = random_labels(g, n);
    std::vector<double> s(n);
    for (auto& v : s) v = static_cast<double>(g() % 5);  // heavy ties
    EXPECT_EQ(m::auroc(s, y), pairwise_auroc(s, y));
    std::vector<double> neg(s);
    for (auto& v : neg) v = -v;
    EXPECT_EQ(m::auroc(s, y) + m::auroc(neg, y), 1.0);
    std::vector<double> mono(s);
    for (auto& v : mono) v = std::exp(v) * 3 - 1;
    EXPECT_EQ(m::auroc(mono, y), m::auroc(s, y));
  }
}

TEST(PrAuc, HandAndTrivial) {
  // Positives at ranks 2 and 4: (1/2)(1/2) + (1/2)(2/4).
  EXPECT_DOUBLE_EQ(m::pr_auc(std::vector<double>{0.9, 0.8, 0.7, 0.6}, std::vector<int>{0, 1, 0, 1}), 0.5);
  EXPECT_EQ(m::pr_auc(std::vector<double>{0.2, 0.9, 0.1}, std::vector<int>{0, 1, 0}), 1.0);
  // Negatives on top, positives below: ranks 3 and 4.
  EXPECT_DOUBLE_EQ(m::pr_auc(std::vector<double>{4, 3, 2, 1}, std::vector<int>{0, 0, 1, 1}),
                   0.5 * (1.0 / 3.0) + 0.5 * (2.0 / 4.0));
  EXPECT_THROW(m::pr_auc(std::vector<double>{1, 2}, std::vector<int>{0, 0}), polar::Error);
}

TEST(PrAuc, MatchesThresholdEnumeration) {
  std::mt19937_64 g(17);
  for (int it = 0; it < 100; ++it) {
    const std::size_t n = 2 + g() % 30;
    auto y = random_labels(g, n);
    std::vector<double> s(n);
    for (auto& v : s) v = static_cast<double>(g() % 7);
    EXPECT_NEAR(m::pr_auc(s, y), threshold_ap(s, y), 1e-12);
  }
}

TEST(PrAuc, RandomScoresNearPrevalence) {
  std::mt19937_64 g(2);
  std::uniform_real_distribution<double> u;
  const std::size_t n = 4000;
  std::vector<double> s(n);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = u(g);
    y[i] = static_cast<int>(i % 2);
  }
  EXPECT_NEAR(m::pr_auc(s, y), 0.5, 0.03);
}

TEST(Brier, Cases) {
  EXPECT_DOUBLE_EQ(m::brier(std::vector<double>{0.9, 0.2}, std::vector<int>{1, 0}), 0.025);
  EXPECT_EQ(m::brier(std::vector<double>{1, 0, 1}, std::vector<int>{1, 0, 1}), 0.0);
  EXPECT_EQ(m::brier(std::vector<double>{0.5, 0.5}, std::vector<int>{1, 0}), 0.25);
}

TEST(Ece, BinEdgesAreRightClosed) {
  EXPECT_EQ(m::ece_bin(0.0, 4), 0u);
  EXPECT_EQ(m::ece_bin(0.25, 4), 0u);
  EXPECT_EQ(m::ece_bin(0.2500001, 4), 1u);
  EXPECT_EQ(m::ece_bin(0.5, 4), 1u);
  EXPECT_EQ(m::ece_bin(1.0, 4), 3u);
  EXPECT_EQ(m::ece_bin(0.7, 1), 0u);
}

TEST(Ece, Cases) {
  std::vector<double> p(10, 0.7);
  std::vector<int> y{1, 1, 1, 1, 1, 1, 1, 0, 0, 0};
  EXPECT_NEAR(m::ece(p, y, 1), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(m::ece(std::vector<double>(4, 1.0), std::vector<int>{1, 0, 1, 0}), 0.5);
  EXPECT_EQ(m::ece(std::vector<double>{1, 0, 0, 1}, std::vector<int>{1, 0, 0, 1}), 0.0);
  // One sample per bin: (0.1 + 0.85 + 0.2 + 0.05) / 4.
  EXPECT_NEAR(m::ece(std::vector<double>{0.1, 0.15, 0.8, 0.95}, std::vector<int>{0, 1, 1, 1}), 0.3, 1e-15);
  // Shared bin (0.5, 0.75] with 4 bins: conf 0.65, acc 0.5.
  EXPECT_NEAR(m::ece(std::vector<double>{0.6, 0.7}, std::vector<int>{1, 0}, 4), 0.15, 1e-15);
  EXPECT_THROW(m::ece(p, y, 0), polar::Error);
}

TEST(Quantile, LinearInterpolation) {
  const std::vector<double> v{1, 2, 3, 4, 5};
  EXPECT_EQ(m::quantile_sorted(v, 0.0), 1.0);
  EXPECT_EQ(m::quantile_sorted(v, 1.0), 5.0);
  EXPECT_DOUBLE_EQ(m::quantile_sorted(v, 0.125), 1.5);
  EXPECT_TRUE(std::isnan(m::quantile_sorted(std::vector<double>{}, 0.5)));
}
