#pragma once
// Discrimination and calibration metrics for binary labels (0/1).

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "polar/common.hpp"

namespace polar::metrics {

inline void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw Error(ErrorKind::InvalidInput, "scores and labels differ in length");
  for (int y : labels)
    if (y != 0 && y != 1) throw Error(ErrorKind::InvalidInput, "labels must be 0 or 1");
}

inline std::size_t count_positive(std::span<const int> labels) {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

// Mann-Whitney form: P(score+ > score-) + 0.5 P(tie), via midranks.
inline double auroc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const std::size_t n_pos = count_positive(labels);
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(ErrorKind::UndefinedMetric, "AUROC needs both classes");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of positive midranks (1-based), accumulated as 2*rank to stay integral.
  double twice_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double twice_mid = static_cast<double>(i + 1 + j);  // (i+1)+(j) = 2*midrank
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) twice_rank_sum += twice_mid;
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double u = twice_rank_sum / 2.0 - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

// Average precision with step interpolation; tied scores form one threshold.
inline double pr_auc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const std::size_t n_pos = count_positive(labels);
  if (n_pos == 0) throw Error(ErrorKind::UndefinedMetric, "PR-AUC needs a positive sample");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tp += static_cast<std::size_t>(labels[order[j]]);
      ++j;
    }
    seen = j;
    const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

inline double brier(std::span<const double> probs, std::span<const int> labels) {
  check_inputs(probs, labels);
  if (probs.empty()) throw Error(ErrorKind::UndefinedMetric, "Brier on empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double e = probs[i] - labels[i];
    acc += e * e;
  }
  return acc / static_cast<double>(probs.size());
}

// Bin index for equal-width bins: [0, 1/B], (1/B, 2/B], ..., ((B-1)/B, 1].
inline std::size_t ece_bin(double p, std::size_t bins) {
  const double scaled = std::ceil(p * static_cast<double>(bins));
  if (scaled <= 1.0) return 0;
  return std::min(bins - 1, static_cast<std::size_t>(scaled) - 1);
}

// Expected calibration error on the positive-class probability.
inline double ece(std::span<const double> probs, std::span<const int> labels, std::size_t bins = 10) {
  check_inputs(probs, labels);
  if (bins < 1) throw Error(ErrorKind::InvalidInput, "ece needs at least one bin");
  if (probs.empty()) throw Error(ErrorKind::UndefinedMetric, "ECE on empty input");
  std::vector<double> conf(bins, 0.0), acc(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const std::size_t b = ece_bin(probs[i], bins);
    conf[b] += probs[i];
    acc[b] += labels[i];
    ++count[b];
  }
  double total = 0.0;
  const double n = static_cast<double>(probs.size());
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const double c = static_cast<double>(count[b]);
    total += (c / n) * std::abs(acc[b] / c - conf[b] / c);
  }
  return total;
}

// Linear-interpolated quantile of sorted data, q in [0,1].
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) return kNaN;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace polar::metrics
