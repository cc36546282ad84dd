#pragma once
// Per-user association statistic, Monte Carlo permutation p-values, and
// Benjamini-Hochberg decisions per attribute pair.
//
// For a unit user vector u and attribute matrices A (m x d), B (n x d):
//   d_A = A u, d_B = B u, d_all = [d_A; d_B]
//   s = (mean(d_A) - mean(d_B)) / sd_pop(d_all)
// sd_pop divides by m + n. s is NaN when d_all is constant.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "polar/common.hpp"
#include "polar/csv.hpp"
#include "polar/embedding_store.hpp"
#include "polar/lexicon.hpp"
#include "polar/parallel.hpp"
#include "polar/rng.hpp"

namespace polar {

struct PermutationConfig {
  std::size_t M = 2000;
  std::uint64_t master_seed = 123;
  double alpha = 0.05;

  void validate() const {
    if (M < 1) throw Error(ErrorKind::InvalidInput, "permutations M must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidInput, "alpha must be in (0,1)");
  }
};

// Fewer than ten attainable p-values at or below alpha.
inline bool coarse_permutations(const PermutationConfig& cfg) {
  return (1.0 + static_cast<double>(cfg.M)) * cfg.alpha < 10.0;
}

struct ScoreRow {
  std::string user_id;
  std::string pair;
  double s = kNaN;
  double p_perm = kNaN;
  std::size_t n_posts = 0;
  std::size_t n_pos_attr = 0;
  std::size_t n_neg_attr = 0;
  std::optional<std::string> label_majority;
  std::optional<std::string> targets;
  bool signif_bh = false;
};

// Similarities of u against every row of A then B.
inline std::vector<double> similarities(std::span<const double> u, const RowMatrix& A,
                                        const RowMatrix& B) {
  std::vector<double> d;
  d.reserve(A.rows() + B.rows());
  for (std::size_t i = 0; i < A.rows(); ++i) d.push_back(dot(A.row(i), u));
  for (std::size_t i = 0; i < B.rows(); ++i) d.push_back(dot(B.row(i), u));
  return d;
}

inline bool is_constant(std::span<const double> v) {
  if (v.empty()) return true;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *lo == *hi;
}

// Sums run over sorted copies so every quantity below is a symmetric
// function of its inputs: permuting items within a side, or swapping sides,
// reproduces the statistic bit for bit (up to sign).
inline double sorted_mean(std::span<const double> v) {
  std::vector<double> tmp(v.begin(), v.end());
  std::sort(tmp.begin(), tmp.end());
  return mean(tmp);
}

inline double sd_pop(std::span<const double> v) {
  std::vector<double> tmp(v.begin(), v.end());
  std::sort(tmp.begin(), tmp.end());
  const double mu = mean(tmp);
  double ss = 0.0;
  for (double x : tmp) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(tmp.size()));
}

inline double mean_difference(std::span<const double> d_all, std::size_t m) {
  return sorted_mean(d_all.first(m)) - sorted_mean(d_all.subspan(m));
}

// Statistic on pooled similarities with the first m entries labeled A.
inline double effect_from_similarities(std::span<const double> d_all, std::size_t m) {
  if (m == 0 || m >= d_all.size()) throw Error(ErrorKind::EmptySide, "both sides need at least one item");
  if (is_constant(d_all)) return kNaN;
  return mean_difference(d_all, m) / sd_pop(d_all);
}

// (a_bar - b_bar) . u, the numerator computed through the centroids.
inline double centroid_numerator(std::span<const double> u, const RowMatrix& A, const RowMatrix& B) {
  const auto a = centroid(A);
  const auto b = centroid(B);
  double acc = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) acc += (a[j] - b[j]) * u[j];
  return acc;
}

inline double effect_size(std::span<const double> u_hat, const RowMatrix& A, const RowMatrix& B) {
  if (A.rows() == 0 || B.rows() == 0)
    throw Error(ErrorKind::EmptySide, "effect_size needs m >= 1 and n >= 1");
  const auto d_all = similarities(u_hat, A, B);
  assert(std::abs(mean_difference(d_all, A.rows()) - centroid_numerator(u_hat, A, B)) <= 1e-9);
  return effect_from_similarities(d_all, A.rows());
}

namespace detail {

// Relabelings only move the numerator: sd_pop(d_all) is invariant, so
// |s_k| >= |s_obs| iff |diff_k| >= |diff_obs|. Replicates relabel a sorted
// copy of the pool and draw the smaller side, which makes the p-value
// invariant to item order and to swapping A and B. The comparison tolerance
// absorbs summation-order rounding between equal-valued labelings.
struct PermutationNull {
  std::vector<double> pool;  // sorted d_all
  std::size_t m = 0;
  std::size_t n = 0;
  double total = 0.0;
  double obs_abs = 0.0;
  double tol = 0.0;

  PermutationNull(std::span<const double> d_all, std::size_t m_)
      : pool(d_all.begin(), d_all.end()), m(m_), n(d_all.size() - m_) {
    std::sort(pool.begin(), pool.end());
    total = std::accumulate(pool.begin(), pool.end(), 0.0);
    obs_abs = std::abs(mean_difference(d_all, m));
    double scale = 0.0;
    for (double x : pool) scale = std::max(scale, std::abs(x));
    tol = 1e-12 * std::max(scale, 1e-300);
  }

  std::size_t draw_size() const { return std::min(m, n); }

  // |diff| when the drawn subset (of draw_size()) has the given sum.
  double abs_diff(double drawn_sum) const {
    const double k = static_cast<double>(draw_size());
    const double rest = static_cast<double>(m + n) - k;
    return std::abs(drawn_sum / k - (total - drawn_sum) / rest);
  }

  bool extreme(double drawn_sum) const { return abs_diff(drawn_sum) >= obs_abs - tol; }
};

}  // namespace detail

// Two-sided Monte Carlo p-value with add-one smoothing: (1 + #{|s_k| >= |s_obs|}) / (1 + M).
// Each replicate draws a uniform size-m subset of d_all as side A.
inline double permutation_p(std::span<const double> d_all, std::size_t m, const PermutationConfig& cfg,
                            std::string_view stream_key) {
  const std::size_t N = d_all.size();
  if (m < 1 || m >= N) throw Error(ErrorKind::InvalidInput, "permutation_p needs 1 <= m < m+n");
  if (cfg.M < 1) throw Error(ErrorKind::InvalidInput, "M must be >= 1");
  if (is_constant(d_all)) return kNaN;

  const detail::PermutationNull null(d_all, m);
  const std::size_t k = null.draw_size();
  std::vector<std::size_t> idx(N);
  std::iota(idx.begin(), idx.end(), 0);
  auto eng = rng::make_engine(cfg.master_seed, stream_key);
  std::size_t hits = 0;
  for (std::size_t rep = 0; rep < cfg.M; ++rep) {
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t r = j + rng::uniform_index(eng, N - j);
      std::swap(idx[j], idx[r]);
      sum += null.pool[idx[j]];
    }
    if (null.extreme(sum)) ++hits;
  }
  return (1.0 + static_cast<double>(hits)) / (1.0 + static_cast<double>(cfg.M));
}

struct ExactPermutation {
  std::size_t count = 0;   // labelings with |s_k| >= |s_obs|, identity included
  std::size_t total = 0;   // C(m+n, m)
  double tail = kNaN;      // count / total: the exact permutation p-value
  double p = kNaN;         // (1 + count) / (1 + total): add-one convention
};

inline std::optional<std::size_t> binomial_capped(std::size_t n, std::size_t k, std::size_t cap) {
  k = std::min(k, n - k);
  long double c = 1.0L;
  for (std::size_t i = 1; i <= k; ++i) {
    c = c * static_cast<long double>(n - k + i) / static_cast<long double>(i);
    if (c > static_cast<long double>(cap) + 0.5L) return std::nullopt;
  }
  return static_cast<std::size_t>(std::llround(c));
}

inline constexpr std::size_t kExactEnumerationLimit = 1'000'000;

// Enumerates every size-m labeling of d_all. Oracle for permutation_p.
inline ExactPermutation exact_permutation_p(std::span<const double> d_all, std::size_t m) {
  const std::size_t N = d_all.size();
  if (m < 1 || m >= N) throw Error(ErrorKind::InvalidInput, "exact_permutation_p needs 1 <= m < m+n");
  const auto total = binomial_capped(N, m, kExactEnumerationLimit);
  if (!total)
    throw Error(ErrorKind::TooLarge, "C(" + std::to_string(N) + "," + std::to_string(m) +
                                         ") exceeds " + std::to_string(kExactEnumerationLimit));
  ExactPermutation out;
  out.total = *total;
  if (is_constant(d_all)) return out;

  // Enumerate subsets of A's size; |diff| is symmetric in which side is drawn.
  const detail::PermutationNull null(d_all, m);
  const std::size_t k = null.draw_size();
  std::vector<std::size_t> comb(k);
  std::iota(comb.begin(), comb.end(), 0);
  for (;;) {
    double sum = 0.0;
    for (std::size_t i : comb) sum += null.pool[i];
    if (null.extreme(sum)) ++out.count;
    std::size_t i = k;
    while (i > 0 && comb[i - 1] == N - k + i - 1) --i;
    if (i == 0) break;
    ++comb[i - 1];
    for (std::size_t j = i; j < k; ++j) comb[j] = comb[j - 1] + 1;
  }
  out.tail = static_cast<double>(out.count) / static_cast<double>(out.total);
  out.p = (1.0 + static_cast<double>(out.count)) / (1.0 + static_cast<double>(out.total));
  return out;
}

// Benjamini-Hochberg step-up over the non-NaN entries; NaN is never rejected.
inline std::vector<bool> bh_fdr(std::span<const double> p_values, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidInput, "alpha must be in (0,1)");
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < p_values.size(); ++i)
    if (!std::isnan(p_values[i])) order.push_back(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  const double n = static_cast<double>(order.size());
  std::size_t cutoff = 0;  // number of rejections
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (p_values[order[r]] <= static_cast<double>(r + 1) * alpha / n) cutoff = r + 1;
  }
  std::vector<bool> reject(p_values.size(), false);
  for (std::size_t r = 0; r < cutoff; ++r) reject[order[r]] = true;
  return reject;
}

struct CellScore {
  double s = kNaN;
  double p = kNaN;
};

inline std::string cell_stream_key(std::string_view user_id, std::string_view pair) {
  std::string key(user_id);
  key += '/';
  key += pair;
  return key;
}

// Statistic and p-value for one unit vector against one usable pair.
inline CellScore score_vector(std::span<const double> u_hat, const AttributePair& pair,
                              const PermutationConfig& cfg, std::string_view stream_key) {
  if (!pair.usable()) return {};
  const auto d_all = similarities(u_hat, pair.A, pair.B);
  CellScore out;
  out.s = effect_from_similarities(d_all, pair.m());
  if (std::isnan(out.s)) return out;
  out.p = permutation_p(d_all, pair.m(), cfg, stream_key);
  return out;
}

struct ScoreResult {
  std::vector<ScoreRow> rows;
  std::vector<std::string> skipped_missing_token;
  std::vector<std::string> degenerate_users;  // zero-norm user rows
  std::size_t nan_cells = 0;
};

// Scores every (user, pair) cell, rows ordered by user then pair, then applies
// BH per pair across users. Users without a token row are skipped and listed.
inline ScoreResult score_all(const EmbeddingTable& table, std::span<const UserRecord> users,
                             std::span<const AttributePair> pairs, const PermutationConfig& cfg) {
  cfg.validate();
  if (users.empty() || pairs.empty())
    throw Error(ErrorKind::InvalidInput, "score_all needs at least one user and one pair");

  ScoreResult out;
  struct Resolved {
    const UserRecord* rec;
    std::optional<std::vector<double>> vec;
  };
  std::vector<Resolved> resolved;
  for (const auto& u : users) {
    if (u.vector) {
      resolved.push_back({&u, u.vector});
      continue;
    }
    try {
      resolved.push_back({&u, user_vector(table, u)});
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::MissingUserToken) {
        out.skipped_missing_token.push_back(u.user_id);
      } else if (e.kind() == ErrorKind::DegenerateVector) {
        out.degenerate_users.push_back(u.user_id);
        resolved.push_back({&u, std::nullopt});
      } else {
        throw;
      }
    }
  }

  const std::size_t P = pairs.size();
  out.rows.resize(resolved.size() * P);
  parallel_for(out.rows.size(), [&](std::size_t cell) {
    const auto& r = resolved[cell / P];
    const auto& pair = pairs[cell % P];
    ScoreRow row;
    row.user_id = r.rec->user_id;
    row.pair = pair.name;
    row.n_posts = r.rec->n_posts;
    row.n_pos_attr = pair.m();
    row.n_neg_attr = pair.n();
    row.label_majority = r.rec->label_majority;
    row.targets = r.rec->targets;
    if (r.vec) {
      const auto sc = score_vector(*r.vec, pair, cfg, cell_stream_key(row.user_id, row.pair));
      row.s = sc.s;
      row.p_perm = sc.p;
    }
    out.rows[cell] = std::move(row);
  });

  for (std::size_t p = 0; p < P; ++p) {
    std::vector<double> pv;
    pv.reserve(resolved.size());
    for (std::size_t u = 0; u < resolved.size(); ++u) pv.push_back(out.rows[u * P + p].p_perm);
    const auto rej = bh_fdr(pv, cfg.alpha);
    for (std::size_t u = 0; u < resolved.size(); ++u) out.rows[u * P + p].signif_bh = rej[u];
  }
  for (const auto& row : out.rows)
    if (std::isnan(row.s)) ++out.nan_cells;
  return out;
}

struct AxisDescriptive {
  std::string pair;
  std::size_t n_users = 0;
  std::size_t n_nan = 0;
  double mean_s = kNaN;
  double frac_signif = kNaN;
};

// Per-axis mean s over finite cells and share of users significant after BH.
inline std::vector<AxisDescriptive> describe_axes(std::span<const ScoreRow> rows,
                                                  std::span<const std::string> pair_order) {
  std::vector<AxisDescriptive> out;
  for (const auto& name : pair_order) {
    AxisDescriptive d;
    d.pair = name;
    double sum = 0.0;
    std::size_t finite = 0, sig = 0;
    for (const auto& r : rows) {
      if (r.pair != name) continue;
      ++d.n_users;
      if (std::isnan(r.s)) {
        ++d.n_nan;
        continue;
      }
      sum += r.s;
      ++finite;
      if (r.signif_bh) ++sig;
    }
    if (finite > 0) d.mean_s = sum / static_cast<double>(finite);
    if (d.n_users > 0) d.frac_signif = static_cast<double>(sig) / static_cast<double>(d.n_users);
    out.push_back(std::move(d));
  }
  return out;
}

// Significance column name carries the BH level, e.g. signif_bh_fdr_0.05.
inline std::string signif_column(double alpha) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "signif_bh_fdr_%g", alpha);
  return buf;
}

inline csv::Row score_columns(double alpha = 0.05) {
  return {"user_id",    "pair",           "s",       "p_perm", "n_posts", "n_pos_attr",
          "n_neg_attr", "label_majority", "targets", signif_column(alpha)};
}

inline void write_scores_csv(std::ostream& os, std::span<const ScoreRow> rows, double alpha = 0.05) {
  csv::write_row(os, score_columns(alpha));
  for (const auto& r : rows) {
    csv::write_row(os, {r.user_id, r.pair, csv::format_double(r.s), csv::format_double(r.p_perm),
                        std::to_string(r.n_posts), std::to_string(r.n_pos_attr),
                        std::to_string(r.n_neg_attr), r.label_majority.value_or(""),
                        r.targets.value_or(""), r.signif_bh ? "true" : "false"});
  }
}

inline void write_users_csv(std::ostream& os, std::span<const UserRecord> users) {
  csv::write_row(os, {"user_id", "n_posts", "token", "label_majority", "targets"});
  for (const auto& u : users)
    csv::write_row(os, {u.user_id, std::to_string(u.n_posts), u.token, u.label_majority.value_or(""),
                        u.targets.value_or("")});
}

}  // namespace polar
