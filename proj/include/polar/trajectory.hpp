#pragma once
// Cumulative per-user association: s_t recomputed after each successive post.
//
// Without per-prefix retrained user rows, the user vector for a prefix is the
// label-free proxy the user-token training objective pulls E[t_u] toward: the
// mean over posts of each post's mean token embedding. Snapshot mode takes
// externally supplied per-step vectors instead.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "polar/association.hpp"
#include "polar/common.hpp"
#include "polar/embedding_store.hpp"
#include "polar/parallel.hpp"
#include "polar/rng.hpp"

namespace polar {

struct Post {
  long long t_index = 0;
  std::vector<std::size_t> token_ids;  // vocabulary rows, user token excluded
};

struct PostSequence {
  std::string user_id;
  std::vector<Post> posts;  // t_index strictly increasing
};

struct TrajectoryRow {
  std::string user_id;
  std::string pair;
  std::size_t t = 0;  // prefix length, 1-based
  double s = kNaN;
  double p = kNaN;
  double jitter = 0.0;
};

// Mean embedding of one post's tokens; nullopt for an empty post.
inline std::optional<std::vector<double>> post_centroid(const EmbeddingTable& table, const Post& post) {
  if (post.token_ids.empty()) return std::nullopt;
  std::vector<double> c(table.dim(), 0.0);
  for (std::size_t id : post.token_ids) {
    auto r = table.row(id);
    for (std::size_t j = 0; j < c.size(); ++j) c[j] += r[j];
  }
  for (double& x : c) x /= static_cast<double>(post.token_ids.size());
  return c;
}

inline std::optional<std::vector<double>> normalized(std::vector<double> v) {
  const double n = norm2(v);
  if (!(n > 0.0) || !std::isfinite(n)) return std::nullopt;
  for (double& x : v) x /= n;
  return v;
}

// Batch proxy: normalized mean over non-empty posts of their token centroids.
inline std::optional<std::vector<double>> proxy_user_vector(const EmbeddingTable& table,
                                                            std::span<const Post> posts) {
  if (posts.empty()) throw Error(ErrorKind::InvalidInput, "proxy_user_vector needs at least one post");
  std::vector<double> sum(table.dim(), 0.0);
  std::size_t used = 0;
  for (const auto& post : posts) {
    auto c = post_centroid(table, post);
    if (!c) continue;
    for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += (*c)[j];
    ++used;
  }
  if (used == 0) return std::nullopt;
  for (double& x : sum) x /= static_cast<double>(used);
  return normalized(std::move(sum));
}

// Incremental proxies for every prefix t = 1..T via a running sum.
inline std::vector<std::optional<std::vector<double>>> prefix_proxies(const EmbeddingTable& table,
                                                                      const PostSequence& seq) {
  std::vector<std::optional<std::vector<double>>> out;
  std::vector<double> sum(table.dim(), 0.0);
  std::size_t used = 0;
  for (const auto& post : seq.posts) {
    if (auto c = post_centroid(table, post)) {
      for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += (*c)[j];
      ++used;
    }
    if (used == 0) {
      out.emplace_back(std::nullopt);
      continue;
    }
    std::vector<double> m(sum);
    for (double& x : m) x /= static_cast<double>(used);
    out.push_back(normalized(std::move(m)));
  }
  return out;
}

inline double trajectory_jitter(std::uint64_t seed, std::string_view user_id, std::string_view pair, std::size_t t) {
  auto eng = rng::make_engine(seed, "jitter/" + cell_stream_key(user_id, pair) + "/" + std::to_string(t));
  return rng::uniform01(eng) - 0.5;
}

// Snapshot mode: one (possibly missing) unit vector per step.
inline std::vector<TrajectoryRow> cumulative_scores_from_vectors(
    std::string_view user_id, std::span<const std::optional<std::vector<double>>> step_vectors,
    std::span<const AttributePair> pairs, const PermutationConfig& cfg) {
  std::vector<TrajectoryRow> rows;
  for (std::size_t t = 1; t <= step_vectors.size(); ++t) {
    for (const auto& pair : pairs) {
      TrajectoryRow row;
      row.user_id = std::string(user_id);
      row.pair = pair.name;
      row.t = t;
      const std::string key = cell_stream_key(user_id, pair.name) + "/t" + std::to_string(t);
      if (const auto& v = step_vectors[t - 1]) {
        const auto sc = score_vector(*v, pair, cfg, key);
        row.s = sc.s;
        row.p = sc.p;
      }
      row.jitter = trajectory_jitter(cfg.master_seed, user_id, pair.name, t);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

inline std::vector<TrajectoryRow> cumulative_scores(const EmbeddingTable& table, const PostSequence& seq,
                                                    std::span<const AttributePair> pairs,
                                                    const PermutationConfig& cfg) {
  if (seq.posts.size() < 2) throw Error(ErrorKind::InvalidInput, "trajectory needs at least two posts");
  const auto proxies = prefix_proxies(table, seq);
  return cumulative_scores_from_vectors(seq.user_id, proxies, pairs, cfg);
}

// Trajectories for many users, parallel across users, gathered in input order.
inline std::vector<TrajectoryRow> cumulative_scores_all(const EmbeddingTable& table,
                                                        std::span<const PostSequence> seqs,
                                                        std::span<const AttributePair> pairs,
                                                        const PermutationConfig& cfg) {
  std::vector<std::vector<TrajectoryRow>> per_user(seqs.size());
  parallel_for(seqs.size(), [&](std::size_t i) { per_user[i] = cumulative_scores(table, seqs[i], pairs, cfg); });
  std::vector<TrajectoryRow> rows;
  for (auto& v : per_user) rows.insert(rows.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  return rows;
}

// Ordinary least-squares slope of y on x over finite points; NaN with < 2.
inline double ols_slope(std::span<const double> x, std::span<const double> y) {
  double sx = 0, sy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::isfinite(y[i])) {
      sx += x[i];
      sy += y[i];
      ++n;
    }
  if (n < 2) return kNaN;
  const double mx = sx / n, my = sy / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::isfinite(y[i])) {
      sxy += (x[i] - mx) * (y[i] - my);
      sxx += (x[i] - mx) * (x[i] - mx);
    }
  return sxx > 0 ? sxy / sxx : kNaN;
}

struct DriftEntry {
  std::string user_id;
  double slope = kNaN;    // mean over designated axes of the s_t vs t slope
  double final_s = kNaN;  // mean over designated axes of s_T
};

struct DriftReport {
  std::vector<DriftEntry> users;           // sorted by slope, descending
  std::vector<std::string> flagged;        // top quantile by slope
  std::vector<std::string> least_aligned;  // lowest final s_T, same count
  std::vector<std::string> most_aligned;   // highest final s_T, same count
};

// Ranks users by drift toward side A. `axes` empty means every pair present.
inline DriftReport flag_drifters(std::span<const TrajectoryRow> rows, double top_q,
                                 std::span<const std::string> axes = {}) {
  if (!(top_q > 0.0 && top_q <= 1.0)) throw Error(ErrorKind::InvalidInput, "top_q must be in (0, 1]");
  auto designated = [&](const std::string& pair) {
    return axes.empty() || std::find(axes.begin(), axes.end(), pair) != axes.end();
  };
  // user -> pair -> (t, s)
  std::map<std::string, std::map<std::string, std::vector<std::pair<double, double>>>> series;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (!designated(r.pair)) continue;
    if (!series.contains(r.user_id)) order.push_back(r.user_id);
    series[r.user_id][r.pair].emplace_back(static_cast<double>(r.t), r.s);
  }
  DriftReport rep;
  for (const auto& uid : order) {
    double slope_sum = 0, final_sum = 0;
    std::size_t ns = 0, nf = 0;
    for (auto& [pair, pts] : series[uid]) {
      std::sort(pts.begin(), pts.end());
      std::vector<double> x, y;
      for (auto [t, s] : pts) {
        x.push_back(t);
        y.push_back(s);
      }
      const double b = ols_slope(x, y);
      if (std::isfinite(b)) {
        slope_sum += b;
        ++ns;
      }
      if (!pts.empty() && std::isfinite(pts.back().second)) {
        final_sum += pts.back().second;
        ++nf;
      }
    }
    rep.users.push_back({uid, ns ? slope_sum / ns : kNaN, nf ? final_sum / nf : kNaN});
  }
  auto finite_desc = [](double a, double b) {
    if (std::isnan(a)) return false;
    if (std::isnan(b)) return true;
    return a > b;
  };
  std::stable_sort(rep.users.begin(), rep.users.end(), [&](const DriftEntry& a, const DriftEntry& b) {
    if (a.slope != b.slope) return finite_desc(a.slope, b.slope);
    return a.user_id < b.user_id;
  });
  const auto count = std::min(rep.users.size(),
                              static_cast<std::size_t>(std::ceil(top_q * static_cast<double>(rep.users.size()) - 1e-9)));
  for (std::size_t i = 0; i < count; ++i)
    if (std::isfinite(rep.users[i].slope)) rep.flagged.push_back(rep.users[i].user_id);

  std::vector<DriftEntry> by_final = rep.users;
  std::stable_sort(by_final.begin(), by_final.end(), [&](const DriftEntry& a, const DriftEntry& b) {
    if (a.final_s != b.final_s) return finite_desc(a.final_s, b.final_s);
    return a.user_id < b.user_id;
  });
  std::vector<DriftEntry> finite_final;
  for (auto& e : by_final)
    if (std::isfinite(e.final_s)) finite_final.push_back(e);
  const std::size_t c = std::min(count, finite_final.size());
  for (std::size_t i = 0; i < c; ++i) {
    rep.most_aligned.push_back(finite_final[i].user_id);
    rep.least_aligned.push_back(finite_final[finite_final.size() - 1 - i].user_id);
  }
  return rep;
}

inline void write_trajectories_csv(std::ostream& os, std::span<const TrajectoryRow> rows) {
  csv::write_row(os, {"user_id", "pair", "t", "s_t", "p_t", "jitter"});
  for (const auto& r : rows)
    csv::write_row(os, {r.user_id, r.pair, std::to_string(r.t), csv::format_double(r.s), csv::format_double(r.p),
                        csv::format_double(r.jitter)});
}

}  // namespace polar
