#pragma once
// Label-aware evaluation harness: stratified K-fold cross-validation of a
// logistic regression on axis scores, top-k axis selection inside each
// training fold, out-of-fold metrics, and bootstrap inference.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "polar/association.hpp"
#include "polar/common.hpp"
#include "polar/logistic.hpp"
#include "polar/metrics.hpp"
#include "polar/parallel.hpp"
#include "polar/rng.hpp"

namespace polar {

struct EvalConfig {
  std::size_t k_folds = 5;
  std::size_t top_k_axes = 0;  // 0 = sweep 1..all axes
  std::size_t n_boot = 2000;
  std::size_t ece_bins = 10;
  double l2_lambda = 1e-3;
  std::uint64_t seed = 123;
  double alpha = 0.05;  // BH level for the paired k > 1 vs k = 1 comparisons

  void validate() const {
    if (k_folds < 2) throw Error(ErrorKind::InvalidInput, "k_folds must be >= 2");
    if (ece_bins < 1) throw Error(ErrorKind::InvalidInput, "ece_bins must be >= 1");
    if (n_boot < 1) throw Error(ErrorKind::InvalidInput, "n_boot must be >= 1");
    if (l2_lambda < 0) throw Error(ErrorKind::InvalidInput, "l2_lambda must be >= 0");
  }
};

struct Interval {
  double lo = kNaN;
  double hi = kNaN;
};

struct EvalReport {
  std::string name;  // "k=2" or the axis name in single-axis mode
  std::size_t k = 0;
  std::vector<double> oof_probs;
  double auroc = kNaN;
  Interval auroc_ci;
  double pr_auc = kNaN;
  double brier = kNaN;
  double ece = kNaN;
  std::vector<std::vector<std::size_t>> selected_axes_per_fold;
};

// Fold id per sample: each class is shuffled with its own seeded stream and
// dealt round-robin, the second class continuing where the first stopped so
// fold sizes stay within one of each other.
inline std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t k,
                                                 std::uint64_t seed) {
  if (k < 2) throw Error(ErrorKind::InvalidInput, "k must be >= 2");
  std::vector<std::size_t> cls[2];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error(ErrorKind::InvalidInput, "labels must be 0 or 1");
    cls[labels[i]].push_back(i);
  }
  if (cls[0].empty() || cls[1].empty())
    throw Error(ErrorKind::Stratification, "stratification needs both classes");
  if (k > std::min(cls[0].size(), cls[1].size()))
    throw Error(ErrorKind::Stratification, "k exceeds the minority class count");
  std::vector<std::size_t> fold(labels.size(), 0);
  std::size_t next = 0;
  for (int c = 0; c < 2; ++c) {
    auto eng = rng::make_engine(seed, std::string("stratified-folds/class") + std::to_string(c));
    auto& idx = cls[c];
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng::uniform_index(eng, i)]);
    for (std::size_t i : idx) {
      fold[i] = next;
      next = (next + 1) % k;
    }
  }
  return fold;
}

inline std::vector<double> column(const RowMatrix& X, std::size_t j) {
  std::vector<double> c(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) c[i] = X(i, j);
  return c;
}

inline RowMatrix select_rows_cols(const RowMatrix& X, std::span<const std::size_t> rows,
                                  std::span<const std::size_t> cols) {
  RowMatrix out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = X(rows[i], cols[j]);
  return out;
}

// Top-k axes by orientation-agnostic univariate AUROC, max(auc, 1 - auc);
// ties go to the lexicographically smaller axis name.
inline std::vector<std::size_t> select_axes(const RowMatrix& X, std::span<const int> labels, std::size_t k,
                                            std::span<const std::string> names) {
  if (k > X.cols()) throw Error(ErrorKind::InvalidInput, "k exceeds the number of axes");
  if (names.size() != X.cols()) throw Error(ErrorKind::InvalidInput, "axis names do not match columns");
  std::vector<double> strength(X.cols());
  for (std::size_t j = 0; j < X.cols(); ++j) {
    const double a = metrics::auroc(column(X, j), labels);
    strength[j] = std::max(a, 1.0 - a);
  }
  std::vector<std::size_t> order(X.cols());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (strength[a] != strength[b]) return strength[a] > strength[b];
    return names[a] < names[b];
  });
  order.resize(k);
  return order;
}

using Metric = std::function<double(std::span<const double>, std::span<const int>)>;

inline constexpr std::size_t kBootstrapRedrawFactor = 10;

namespace detail {

// Resample indices with replacement; redraw when a class goes missing.
inline std::vector<std::size_t> resample_two_class(rng::Engine& eng, std::span<const int> labels,
                                                   std::size_t& attempts, std::size_t max_attempts) {
  const std::size_t N = labels.size();
  std::vector<std::size_t> idx(N);
  for (;;) {
    if (++attempts > max_attempts)
      throw Error(ErrorKind::UndefinedMetric, "bootstrap could not draw two-class resamples");
    std::size_t pos = 0;
    for (auto& i : idx) {
      i = rng::uniform_index(eng, N);
      pos += static_cast<std::size_t>(labels[i]);
    }
    if (pos > 0 && pos < N) return idx;
  }
}

}  // namespace detail

struct BootstrapCI {
  Interval ci;
  std::size_t redraws = 0;
};

// Percentile 95% CI over seeded resamples of (score, label) pairs.
inline BootstrapCI bootstrap_ci(const Metric& metric, std::span<const double> scores, std::span<const int> labels,
                                std::size_t n_boot, std::uint64_t seed) {
  metrics::check_inputs(scores, labels);
  if (n_boot < 1) throw Error(ErrorKind::InvalidInput, "n_boot must be >= 1");
  const std::size_t pos = metrics::count_positive(labels);
  if (pos == 0 || pos == labels.size()) throw Error(ErrorKind::UndefinedMetric, "bootstrap needs both classes");
  std::vector<double> values(n_boot);
  std::vector<std::size_t> attempts(n_boot, 0);
  const std::size_t cap = kBootstrapRedrawFactor * n_boot;
  parallel_for(n_boot, [&](std::size_t b) {
    auto eng = rng::make_engine(seed, static_cast<std::uint64_t>(b));
    const auto idx = detail::resample_two_class(eng, labels, attempts[b], cap);
    std::vector<double> s(idx.size());
    std::vector<int> y(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      s[i] = scores[idx[i]];
      y[i] = labels[idx[i]];
    }
    values[b] = metric(s, y);
  });
  const std::size_t total = std::accumulate(attempts.begin(), attempts.end(), std::size_t{0});
  if (total > cap) throw Error(ErrorKind::UndefinedMetric, "bootstrap redraw cap exceeded");
  std::sort(values.begin(), values.end());
  BootstrapCI out;
  out.ci = {metrics::quantile_sorted(values, 0.025), metrics::quantile_sorted(values, 0.975)};
  out.redraws = total - n_boot;
  return out;
}

// Two-sided paired bootstrap on delta AUROC = auroc(a) - auroc(b):
// p = 2 min(frac(delta <= 0), frac(delta >= 0)), clamped to [1/n_boot, 1].
inline double paired_bootstrap_test(std::span<const double> probs_a, std::span<const double> probs_b,
                                    std::span<const int> labels, std::size_t n_boot, std::uint64_t seed) {
  metrics::check_inputs(probs_a, labels);
  metrics::check_inputs(probs_b, labels);
  if (n_boot < 1) throw Error(ErrorKind::InvalidInput, "n_boot must be >= 1");
  std::vector<double> delta(n_boot);
  std::vector<std::size_t> attempts(n_boot, 0);
  const std::size_t cap = kBootstrapRedrawFactor * n_boot;
  parallel_for(n_boot, [&](std::size_t b) {
    auto eng = rng::make_engine(seed, static_cast<std::uint64_t>(b));
    const auto idx = detail::resample_two_class(eng, labels, attempts[b], cap);
    std::vector<double> a(idx.size()), c(idx.size());
    std::vector<int> y(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      a[i] = probs_a[idx[i]];
      c[i] = probs_b[idx[i]];
      y[i] = labels[idx[i]];
    }
    delta[b] = metrics::auroc(a, y) - metrics::auroc(c, y);
  });
  std::size_t le = 0, ge = 0;
  for (double d : delta) {
    if (d <= 0) ++le;
    if (d >= 0) ++ge;
  }
  const double nb = static_cast<double>(n_boot);
  const double p = 2.0 * std::min(le / nb, ge / nb);
  return std::clamp(p, 1.0 / nb, 1.0);
}

struct ProtocolResult {
  std::vector<std::size_t> folds;
  std::vector<EvalReport> top_k;        // index k-1
  std::vector<EvalReport> single_axis;  // one per axis, in column order
  std::vector<double> paired_p;         // k = 2..K vs k = 1
  std::vector<bool> paired_bh;          // BH decisions over paired_p
};

namespace detail {

// Out-of-fold probabilities from a per-fold model on the chosen columns.
// `choose` maps training rows to column indices.
template <typename Choose>
EvalReport cross_validate(const RowMatrix& X, std::span<const int> labels, std::span<const std::size_t> folds,
                          const EvalConfig& cfg, Choose&& choose) {
  EvalReport rep;
  rep.oof_probs.assign(X.rows(), kNaN);
  std::vector<int> predicted(X.rows(), 0);
  for (std::size_t f = 0; f < cfg.k_folds; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < X.rows(); ++i) (folds[i] == f ? test : train).push_back(i);
    std::vector<int> y_train;
    for (std::size_t i : train) y_train.push_back(labels[i]);
    const std::vector<std::size_t> cols = choose(train, y_train);
    rep.selected_axes_per_fold.push_back(cols);

    const RowMatrix X_train = select_rows_cols(X, train, cols);
    const auto scaler = Standardizer::fit(X_train);
    const auto model = fit_logistic(scaler.apply(X_train), y_train, cfg.l2_lambda);
    const RowMatrix X_test = scaler.apply(select_rows_cols(X, test, cols));
    for (std::size_t t = 0; t < test.size(); ++t) {
      if (predicted[test[t]]++ != 0) throw Error(ErrorKind::Internal, "sample predicted twice");
      rep.oof_probs[test[t]] = model.predict(X_test.row(t));
    }
    for (std::size_t i : train)
      if (folds[i] == f) throw Error(ErrorKind::Internal, "held-out sample in training set");
  }
  for (int p : predicted)
    if (p != 1) throw Error(ErrorKind::Internal, "sample without out-of-fold prediction");
  return rep;
}

inline void fill_metrics(EvalReport& rep, std::span<const int> labels, const EvalConfig& cfg,
                         std::uint64_t ci_seed) {
  rep.auroc = metrics::auroc(rep.oof_probs, labels);
  rep.pr_auc = metrics::pr_auc(rep.oof_probs, labels);
  rep.brier = metrics::brier(rep.oof_probs, labels);
  rep.ece = metrics::ece(rep.oof_probs, labels, cfg.ece_bins);
  rep.auroc_ci = bootstrap_ci(metrics::auroc, rep.oof_probs, labels, cfg.n_boot, ci_seed).ci;
}

}  // namespace detail

// Full protocol on a users x axes score table: single-axis models, top-k
// models for k = 1..K, and paired bootstrap tests of each k > 1 against k = 1.
inline ProtocolResult run_protocol(const RowMatrix& X, std::span<const int> labels,
                                   std::span<const std::string> axis_names, const EvalConfig& cfg) {
  cfg.validate();
  if (X.rows() != labels.size()) throw Error(ErrorKind::InvalidInput, "score table and labels differ in length");
  if (axis_names.size() != X.cols()) throw Error(ErrorKind::InvalidInput, "axis names do not match columns");
  if (X.cols() == 0) throw Error(ErrorKind::InvalidInput, "no axes");
  for (double v : X.data())
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidInput, "non-finite axis score");
  const std::size_t K = cfg.top_k_axes == 0 ? X.cols() : std::min(cfg.top_k_axes, X.cols());

  ProtocolResult out;
  out.folds = stratified_folds(labels, cfg.k_folds, cfg.seed);
  const std::uint64_t ci_seed = rng::stream_seed(cfg.seed, "bootstrap-ci");

  for (std::size_t j = 0; j < X.cols(); ++j) {
    auto rep = detail::cross_validate(X, labels, out.folds, cfg,
                                      [&](const auto&, const auto&) { return std::vector<std::size_t>{j}; });
    rep.name = axis_names[j];
    rep.k = 1;
    detail::fill_metrics(rep, labels, cfg, ci_seed);
    out.single_axis.push_back(std::move(rep));
  }
  for (std::size_t k = 1; k <= K; ++k) {
    auto rep = detail::cross_validate(X, labels, out.folds, cfg, [&](const auto& train, const auto& y_train) {
      std::vector<std::size_t> all(X.cols());
      std::iota(all.begin(), all.end(), 0);
      return select_axes(select_rows_cols(X, train, all), y_train, k, axis_names);
    });
    rep.name = "k=" + std::to_string(k);
    rep.k = k;
    detail::fill_metrics(rep, labels, cfg, ci_seed);
    out.top_k.push_back(std::move(rep));
  }
  const std::uint64_t paired_seed = rng::stream_seed(cfg.seed, "paired-bootstrap");
  for (std::size_t k = 2; k <= K; ++k)
    out.paired_p.push_back(paired_bootstrap_test(out.top_k[k - 1].oof_probs, out.top_k[0].oof_probs, labels,
                                                 cfg.n_boot, paired_seed));
  out.paired_bh = bh_fdr(out.paired_p, cfg.alpha);
  return out;
}

// Aggregated sentence baseline: the statistic on each post-level unit vector,
// averaged per user and pair over posts with a finite score.
// post_vectors[u][t] is post t of user u.
inline RowMatrix aggregated_sentence_scores(const std::vector<std::vector<std::vector<double>>>& post_vectors,
                                            std::span<const AttributePair> pairs) {
  RowMatrix out(post_vectors.size(), pairs.size());
  for (std::size_t u = 0; u < post_vectors.size(); ++u) {
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      double sum = 0.0;
      std::size_t n = 0;
      if (pairs[p].usable()) {
        for (const auto& v : post_vectors[u]) {
          const double nv = norm2(v);
          if (!(nv > 0.0)) continue;
          std::vector<double> unit(v);
          for (double& x : unit) x /= nv;
          const double s = effect_size(unit, pairs[p].A, pairs[p].B);
          if (std::isnan(s)) continue;
          sum += s;
          ++n;
        }
      }
      out(u, p) = n > 0 ? sum / static_cast<double>(n) : kNaN;
    }
  }
  return out;
}

}  // namespace polar
