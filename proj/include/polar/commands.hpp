#pragma once
// Bodies of the polar subcommands. Each builds its artifacts in memory;
// commit_outputs writes them only after the whole command has succeeded.

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "polar/association.hpp"
#include "polar/csv.hpp"
#include "polar/evaluation.hpp"
#include "polar/ingestion.hpp"
#include "polar/lexicon.hpp"
#include "polar/pca.hpp"
#include "polar/plot.hpp"
#include "polar/synthetic.hpp"
#include "polar/trajectory.hpp"

namespace polar::cmd {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

struct OutputFile {
  std::string name;
  std::string content;
};
using Outputs = std::vector<OutputFile>;

// Refuses to clobber existing files unless `overwrite`; on a failed write the
// files written so far are removed.
inline void commit_outputs(const fs::path& dir, const Outputs& outs, bool overwrite) {
  if (!overwrite)
    for (const auto& o : outs)
      if (fs::exists(dir / o.name))
        throw Error(ErrorKind::InvalidInput, (dir / o.name).string() + " exists (pass --overwrite to replace)");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Load, "cannot create " + dir.string() + ": " + ec.message());
  std::vector<fs::path> written;
  try {
    for (const auto& o : outs) {
      const auto tmp = dir / (o.name + ".partial");
      {
        std::ofstream f(tmp, std::ios::binary);
        f << o.content;
        f.close();
        if (!f) throw Error(ErrorKind::Load, "cannot write " + tmp.string());
      }
      fs::rename(tmp, dir / o.name);
      written.push_back(dir / o.name);
    }
  } catch (...) {
    for (const auto& o : outs) fs::remove(dir / (o.name + ".partial"), ec);
    for (const auto& p : written) fs::remove(p, ec);
    throw;
  }
}

inline std::string dump(const ojson& j) { return j.dump(2) + "\n"; }

// NaN-safe JSON number.
inline ojson jnum(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

inline void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) throw Error(ErrorKind::Load, std::string(what) + " not found: " + p.string());
}

// ---------------------------------------------------------------- score / traj

struct CorpusOptions {
  fs::path model_dir;
  fs::path posts;
  fs::path lexicon;
  PermutationConfig perm;
  std::size_t min_posts = 2;
  std::optional<std::size_t> post_cap;
};

struct Inputs {
  EmbeddingTable table;
  TokenizerConfig tok;
  std::vector<AttributePair> pairs;
  Corpus corpus;
};

inline Inputs load_inputs(const CorpusOptions& opt) {
  opt.perm.validate();
  if (opt.min_posts < 1) throw Error(ErrorKind::InvalidInput, "--min-posts must be >= 1");
  if (opt.post_cap && *opt.post_cap < 1) throw Error(ErrorKind::InvalidInput, "--post-cap must be >= 1");
  require_file(opt.lexicon, "lexicon");
  require_file(opt.posts, "posts file");
  if (!fs::is_directory(opt.model_dir)) throw Error(ErrorKind::Load, "model dir not found: " + opt.model_dir.string());
  Inputs in;
  in.table = load_table(opt.model_dir);
  in.tok = TokenizerConfig::from_table(in.table);
  for (const auto& e : load_lexicon(opt.lexicon)) in.pairs.push_back(try_build_pair(in.table, in.tok, e.name, e.A, e.B));
  if (in.pairs.empty()) throw Error(ErrorKind::InvalidInput, opt.lexicon.string() + ": no attribute pairs");
  in.corpus = load_corpus(opt.posts.string(), in.tok, {opt.min_posts, in.table.meta().usr_prefix});
  in.corpus = optional_post_cap(std::move(in.corpus), opt.post_cap, opt.perm.master_seed);
  if (in.corpus.users.empty())
    throw Error(ErrorKind::InvalidInput, opt.posts.string() + ": no user has at least " +
                                             std::to_string(opt.min_posts) + " posts");
  return in;
}

inline ojson corpus_json(const Corpus& c) {
  ojson j;
  j["input_rows"] = c.input_rows;
  j["malformed_rows"] = c.malformed_rows;
  j["retained_posts"] = c.retained_posts;
  j["dropped_posts"] = c.dropped_posts;
  j["dropped_under_min"] = c.dropped_under_min;
  j["retained_users"] = c.users.size();
  j["label_ties"] = c.label_ties;
  return j;
}

inline ojson pair_diagnostics(const AttributePair& p) {
  auto dropped = [](const std::vector<std::string>& all, const std::vector<std::string>& kept) {
    std::set<std::string> k(kept.begin(), kept.end());
    std::vector<std::string> out;
    for (const auto& s : all)
      if (!k.contains(s)) out.push_back(s);
    return out;
  };
  ojson j;
  j["pair"] = p.name;
  j["n_items_A"] = p.items_A.size();
  j["n_items_B"] = p.items_B.size();
  j["n_pos_attr"] = p.m();
  j["n_neg_attr"] = p.n();
  j["dropped_A"] = dropped(p.items_A, p.kept_A);
  j["dropped_B"] = dropped(p.items_B, p.kept_B);
  j["centroid_cos"] = jnum(p.centroid_cos);
  j["usable"] = p.usable();
  j["warnings"] = p.warnings;
  return j;
}

inline ojson run_meta(const std::string& command, const CorpusOptions& opt, const Inputs& in) {
  ojson j;
  j["command"] = command;
  j["model_dir"] = opt.model_dir.string();
  j["posts"] = opt.posts.string();
  j["lexicon"] = opt.lexicon.string();
  j["usr_prefix"] = in.table.meta().usr_prefix;
  j["user_token_hash"] = in.table.meta().hash;
  j["min_posts_per_user"] = opt.min_posts;
  j["post_cap"] = opt.post_cap ? ojson(*opt.post_cap) : ojson(nullptr);
  j["permutations"] = opt.perm.M;
  j["seed"] = opt.perm.master_seed;
  j["alpha"] = opt.perm.alpha;
  j["p_value"] = "two-sided Monte Carlo permutation, (1 + b) / (1 + M)";
  j["multiple_testing"] = "Benjamini-Hochberg per pair across users";
  j["vocab_size"] = in.table.size();
  j["dim"] = in.table.dim();
  ojson names = ojson::array();
  for (const auto& p : in.pairs) names.push_back(p.name);
  j["pairs"] = names;
  return j;
}

struct ScoreRun {
  Outputs outputs;
  ScoreResult result;
  std::vector<std::string> warnings;
};

inline ScoreRun run_score(const CorpusOptions& opt) {
  auto in = load_inputs(opt);
  ScoreRun run;
  run.result = score_all(in.table, in.corpus.users, in.pairs, opt.perm);

  std::ostringstream scores, users, table3;
  write_scores_csv(scores, run.result.rows, opt.perm.alpha);
  write_users_csv(users, in.corpus.users);

  std::vector<std::string> order;
  for (const auto& p : in.pairs) order.push_back(p.name);
  csv::write_row(table3, {"axis", "mean_s", "sig_bh", "n_users", "n_nan"}, '\t');
  for (const auto& d : describe_axes(run.result.rows, order))
    csv::write_row(table3, {d.pair, csv::format_double(d.mean_s), csv::format_double(d.frac_signif),
                            std::to_string(d.n_users), std::to_string(d.n_nan)},
                   '\t');

  ojson diag;
  diag["corpus"] = corpus_json(in.corpus);
  diag["skipped_missing_token"] = {{"count", run.result.skipped_missing_token.size()},
                                   {"users", run.result.skipped_missing_token}};
  diag["degenerate_users"] = {{"count", run.result.degenerate_users.size()}, {"users", run.result.degenerate_users}};
  diag["nan_cells"] = run.result.nan_cells;
  diag["pairs"] = ojson::array();
  for (const auto& p : in.pairs) {
    diag["pairs"].push_back(pair_diagnostics(p));
    for (const auto& w : p.warnings) run.warnings.push_back(p.name + ": " + w);
  }
  if (!run.result.skipped_missing_token.empty())
    run.warnings.push_back(std::to_string(run.result.skipped_missing_token.size()) +
                           " users skipped: token not in vocabulary");
  if (in.corpus.malformed_rows)
    run.warnings.push_back(std::to_string(in.corpus.malformed_rows) + " malformed rows skipped");
  if (coarse_permutations(opt.perm))
    run.warnings.push_back("--permutations " + std::to_string(opt.perm.M) + " gives fewer than 10 attainable p-values <= alpha");

  auto meta = run_meta("score", opt, in);
  meta["n_users_scored"] = run.result.rows.size() / in.pairs.size();
  run.outputs = {{"per_user_scores.csv", scores.str()},
                 {"users.csv", users.str()},
                 {"meta.json", dump(meta)},
                 {"diagnostics.json", dump(diag)},
                 {"table3_axis_descriptives.tsv", table3.str()}};
  return run;
}

struct TrajOptions {
  CorpusOptions corpus;
  double top_q = 0.1;
  std::vector<std::string> axes;  // empty: all pairs
  std::vector<fs::path> snapshots;  // model dirs, one per step; empty: proxy mode
};

// Step t of a user's trajectory reads the user's row from snapshot t; steps
// stop at min(posts, snapshots). Missing or zero rows give NaN at that step.
inline std::vector<TrajectoryRow> snapshot_trajectories(const std::vector<EmbeddingTable>& snaps,
                                                        std::span<const PostSequence> seqs,
                                                        std::span<const UserRecord> users,
                                                        std::span<const AttributePair> pairs,
                                                        const PermutationConfig& cfg) {
  std::map<std::string, const UserRecord*> by_id;
  for (const auto& u : users) by_id[u.user_id] = &u;
  std::vector<std::vector<TrajectoryRow>> per_user(seqs.size());
  parallel_for(seqs.size(), [&](std::size_t i) {
    const auto& rec = *by_id.at(seqs[i].user_id);
    const std::size_t steps = std::min(seqs[i].posts.size(), snaps.size());
    std::vector<std::optional<std::vector<double>>> vecs(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      if (const auto r = snaps[t].find(rec.token)) {
        try {
          vecs[t] = normalized_row(snaps[t], *r);
        } catch (const Error&) {
        }
      }
    }
    per_user[i] = cumulative_scores_from_vectors(rec.user_id, vecs, pairs, cfg);
  });
  std::vector<TrajectoryRow> rows;
  for (auto& v : per_user) rows.insert(rows.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  return rows;
}

inline Outputs run_traj(const TrajOptions& opt) {
  auto in = load_inputs(opt.corpus);
  for (const auto& a : opt.axes)
    if (std::none_of(in.pairs.begin(), in.pairs.end(), [&](const auto& p) { return p.name == a; }))
      throw Error(ErrorKind::InvalidInput, "unknown axis '" + a + "'");
  if (!(opt.top_q > 0.0 && opt.top_q <= 1.0)) throw Error(ErrorKind::InvalidInput, "--top-q must be in (0, 1]");
  std::vector<PostSequence> seqs;
  std::vector<std::string> short_users;
  for (const auto& u : in.corpus.users) {
    const auto& seq = in.corpus.posts_by_user.at(u.user_id);
    if (seq.posts.size() < 2) short_users.push_back(u.user_id);
    else seqs.push_back(seq);
  }
  if (seqs.empty()) throw Error(ErrorKind::InvalidInput, "no user has two or more posts");
  std::vector<TrajectoryRow> rows;
  if (opt.snapshots.empty()) {
    rows = cumulative_scores_all(in.table, seqs, in.pairs, opt.corpus.perm);
  } else {
    if (opt.snapshots.size() < 2) throw Error(ErrorKind::InvalidInput, "--snapshots needs at least two model dirs");
    std::vector<EmbeddingTable> snaps;
    for (const auto& dir : opt.snapshots) {
      if (!fs::is_directory(dir)) throw Error(ErrorKind::Load, "snapshot model dir not found: " + dir.string());
      snaps.push_back(load_table(dir));
      if (snaps.back().dim() != in.table.dim())
        throw Error(ErrorKind::InvalidInput, dir.string() + ": dim " + std::to_string(snaps.back().dim()) +
                                                 " differs from model dir dim " + std::to_string(in.table.dim()));
    }
    rows = snapshot_trajectories(snaps, seqs, in.corpus.users, in.pairs, opt.corpus.perm);
  }
  const auto rep = flag_drifters(rows, opt.top_q, opt.axes);

  std::ostringstream traj;
  write_trajectories_csv(traj, rows);
  ojson j;
  j["config"] = run_meta("traj", opt.corpus, in);
  j["config"]["top_q"] = opt.top_q;
  j["config"]["axes"] = opt.axes;
  if (opt.snapshots.empty()) {
    j["config"]["user_vector"] = "proxy: normalized mean over posts of mean token embedding";
  } else {
    j["config"]["user_vector"] = "snapshot: user row from the model dir of each step";
    j["config"]["snapshots"] = ojson::array();
    for (const auto& d : opt.snapshots) j["config"]["snapshots"].push_back(d.string());
  }
  j["skipped_single_post"] = short_users;
  j["flagged"] = rep.flagged;
  j["most_aligned"] = rep.most_aligned;
  j["least_aligned"] = rep.least_aligned;
  j["users"] = ojson::array();
  for (const auto& e : rep.users)
    j["users"].push_back({{"user_id", e.user_id}, {"slope", jnum(e.slope)}, {"final_s", jnum(e.final_s)}});
  return {{"trajectories.csv", traj.str()}, {"drifters.json", dump(j)}};
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
  fs::path scores;
  bool wide = false;
  std::optional<std::string> positive_label;
  EvalConfig cfg;
};

struct ScoreTable {
  std::vector<std::string> users;
  std::vector<std::string> labels;  // raw, may be empty
  std::vector<std::string> axes;
  RowMatrix X;                      // NaN where missing
};

inline ScoreTable read_long_scores(const fs::path& path) {
  const auto t = csv::read(path.string());
  const auto cu = t.column("user_id"), cp = t.column("pair"), cs = t.column("s"), cl = t.column("label_majority");
  if (!cu || !cp || !cs || !cl)
    throw Error(ErrorKind::InvalidInput, path.string() + ": needs user_id, pair, s and label_majority columns");
  ScoreTable st;
  std::map<std::string, std::size_t> uidx, aidx;
  std::vector<std::tuple<std::size_t, std::size_t, double>> cells;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (row.size() != t.header.size())
      throw Error(ErrorKind::InvalidInput, path.string() + ":" + std::to_string(t.line_numbers[r]) + ": wrong field count");
    const auto s = csv::parse_double(row[*cs]);
    if (!s) throw Error(ErrorKind::InvalidInput, path.string() + ":" + std::to_string(t.line_numbers[r]) + ": bad s");
    auto [ui, un] = uidx.try_emplace(row[*cu], st.users.size());
    if (un) {
      st.users.push_back(row[*cu]);
      st.labels.push_back(row[*cl]);
    }
    auto [ai, an] = aidx.try_emplace(row[*cp], st.axes.size());
    if (an) st.axes.push_back(row[*cp]);
    cells.emplace_back(ui->second, ai->second, *s);
  }
  st.X = RowMatrix(st.users.size(), st.axes.size());
  for (std::size_t u = 0; u < st.users.size(); ++u)
    for (double& v : st.X.row(u)) v = kNaN;
  for (auto [u, a, s] : cells) st.X(u, a) = s;
  return st;
}

inline ScoreTable read_wide_scores(const fs::path& path) {
  const auto t = csv::read(path.string());
  const auto cu = t.column("user_id"), cl = t.column("label");
  if (!cu || !cl) throw Error(ErrorKind::InvalidInput, path.string() + ": needs user_id and label columns");
  ScoreTable st;
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (c != *cu && c != *cl) {
      cols.push_back(c);
      st.axes.push_back(t.header[c]);
    }
  st.X = RowMatrix(t.rows.size(), cols.size());
  std::set<std::string> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path.string() + ":" + std::to_string(t.line_numbers[r]);
    if (row.size() != t.header.size()) throw Error(ErrorKind::InvalidInput, where + ": wrong field count");
    if (!seen.insert(row[*cu]).second) throw Error(ErrorKind::InvalidInput, where + ": duplicate user_id");
    st.users.push_back(row[*cu]);
    st.labels.push_back(row[*cl]);
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const auto v = csv::parse_double(row[cols[j]]);
      if (!v) throw Error(ErrorKind::InvalidInput, where + ": bad score in column " + st.axes[j]);
      st.X(r, j) = *v;
    }
  }
  return st;
}

// Binary labels: an explicit positive label, or labels already spelled 0/1.
inline std::vector<std::optional<int>> binarize(const std::vector<std::string>& raw,
                                                const std::optional<std::string>& positive) {
  std::set<std::string> distinct;
  for (const auto& l : raw)
    if (!l.empty()) distinct.insert(l);
  if (positive && !distinct.contains(*positive))
    throw Error(ErrorKind::InvalidInput, "positive label '" + *positive + "' does not occur");
  const std::set<std::string> zero_one{"0", "1"};
  if (!positive && !std::includes(zero_one.begin(), zero_one.end(), distinct.begin(), distinct.end())) {
    std::string list;
    for (const auto& l : distinct) list += (list.empty() ? "" : ", ") + l;
    throw Error(ErrorKind::InvalidInput, "labels {" + list + "} are not 0/1; pass --positive-label");
  }
  std::vector<std::optional<int>> y;
  for (const auto& l : raw) {
    if (l.empty()) y.emplace_back(std::nullopt);
    else y.emplace_back(positive ? int(l == *positive) : int(l == "1"));
  }
  return y;
}

inline Outputs run_eval(const EvalOptions& opt) {
  opt.cfg.validate();
  require_file(opt.scores, "scores file");
  const auto st = opt.wide ? read_wide_scores(opt.scores) : read_long_scores(opt.scores);
  if (st.axes.empty()) throw Error(ErrorKind::InvalidInput, opt.scores.string() + ": no axis columns");
  const auto ybin = binarize(st.labels, opt.positive_label);

  std::vector<std::size_t> keep;
  std::size_t unlabeled = 0, incomplete = 0;
  for (std::size_t u = 0; u < st.users.size(); ++u) {
    if (!ybin[u]) {
      ++unlabeled;
      continue;
    }
    bool finite = true;
    for (std::size_t a = 0; a < st.axes.size(); ++a) finite = finite && std::isfinite(st.X(u, a));
    if (!finite) {
      ++incomplete;
      continue;
    }
    keep.push_back(u);
  }
  std::vector<std::size_t> all_axes(st.axes.size());
  for (std::size_t a = 0; a < all_axes.size(); ++a) all_axes[a] = a;
  const RowMatrix X = select_rows_cols(st.X, keep, all_axes);
  std::vector<int> y;
  for (std::size_t u : keep) y.push_back(*ybin[u]);

  const auto res = run_protocol(X, y, st.axes, opt.cfg);

  ojson rep;
  rep["config"] = {{"scores", opt.scores.string()},
                   {"format", opt.wide ? "wide" : "long"},
                   {"positive_label", opt.positive_label ? ojson(*opt.positive_label) : ojson("1")},
                   {"k_folds", opt.cfg.k_folds},
                   {"top_k", res.top_k.size()},
                   {"n_boot", opt.cfg.n_boot},
                   {"ece_bins", opt.cfg.ece_bins},
                   {"l2_lambda", opt.cfg.l2_lambda},
                   {"seed", opt.cfg.seed},
                   {"alpha", opt.cfg.alpha},
                   {"ci", "percentile bootstrap, 95%"},
                   {"model", "logistic regression, features z-scored on training folds"},
                   {"axis_ranking", "max(AUROC, 1 - AUROC) on training fold"}};
  rep["n_users"] = keep.size();
  rep["n_positive"] = std::count(y.begin(), y.end(), 1);
  rep["dropped_unlabeled"] = unlabeled;
  rep["dropped_nonfinite"] = incomplete;
  rep["axes"] = st.axes;
  auto metrics_json = [&](const EvalReport& r) {
    ojson j;
    j["auroc"] = jnum(r.auroc);
    j["auroc_ci"] = {jnum(r.auroc_ci.lo), jnum(r.auroc_ci.hi)};
    j["pr_auc"] = jnum(r.pr_auc);
    j["brier"] = jnum(r.brier);
    j["ece"] = jnum(r.ece);
    return j;
  };
  rep["single_axis"] = ojson::array();
  for (const auto& r : res.single_axis) {
    ojson j{{"axis", r.name}};
    j.update(metrics_json(r));
    rep["single_axis"].push_back(j);
  }
  rep["top_k"] = ojson::array();
  for (const auto& r : res.top_k) {
    ojson j{{"k", r.k}};
    j.update(metrics_json(r));
    ojson folds = ojson::array();
    for (const auto& sel : r.selected_axes_per_fold) {
      ojson names = ojson::array();
      for (std::size_t a : sel) names.push_back(st.axes[a]);
      folds.push_back(names);
    }
    j["selected_axes_per_fold"] = folds;
    if (r.k >= 2) {
      j["paired_p_vs_k1"] = jnum(res.paired_p[r.k - 2]);
      j["bh_significant"] = static_cast<bool>(res.paired_bh[r.k - 2]);
    }
    rep["top_k"].push_back(j);
  }

  std::ostringstream oof, t1, t2, fig2, fig3;
  csv::Row head{"user_id", "label", "fold"};
  for (const auto& r : res.top_k) head.push_back("k=" + std::to_string(r.k));
  for (const auto& r : res.single_axis) head.push_back("axis:" + r.name);
  csv::write_row(oof, head);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    csv::Row row{st.users[keep[i]], std::to_string(y[i]), std::to_string(res.folds[i])};
    for (const auto& r : res.top_k) row.push_back(csv::format_double(r.oof_probs[i]));
    for (const auto& r : res.single_axis) row.push_back(csv::format_double(r.oof_probs[i]));
    csv::write_row(oof, row);
  }

  auto f = [](double v) { return csv::format_double(v); };
  csv::write_row(t1, {"axis", "auroc", "pr_auc", "brier", "ece"}, '\t');
  for (const auto& r : res.single_axis) csv::write_row(t1, {r.name, f(r.auroc), f(r.pr_auc), f(r.brier), f(r.ece)}, '\t');
  csv::write_row(t2, {"features", "auroc", "auroc_ci_lo", "auroc_ci_hi", "pr_auc", "brier", "ece", "paired_p_vs_k1",
                      "bh_significant"},
                 '\t');
  for (const auto& r : res.top_k) {
    const bool base = r.k == 1;
    csv::write_row(t2, {"k=" + std::to_string(r.k), f(r.auroc), f(r.auroc_ci.lo), f(r.auroc_ci.hi), f(r.pr_auc),
                        f(r.brier), f(r.ece), base ? "" : f(res.paired_p[r.k - 2]),
                        base ? "" : (res.paired_bh[r.k - 2] ? "true" : "false")},
                   '\t');
  }

  const auto pca = pca_2d(X);
  csv::write_row(fig2, {"user_id", "label", "pc1", "pc2", "dominant_axis"}, '\t');
  for (std::size_t i = 0; i < keep.size(); ++i) {
    std::size_t dom = 0;
    for (std::size_t a = 1; a < st.axes.size(); ++a)
      if (std::abs(X(i, a)) > std::abs(X(i, dom))) dom = a;
    csv::write_row(fig2, {st.users[keep[i]], st.labels[keep[i]], f(pca.coords(i, 0)), f(pca.coords(i, 1)), st.axes[dom]},
                   '\t');
  }
  rep["pca"] = {{"variance", {pca.variance[0], pca.variance[1]}}};

  csv::write_row(fig3, {"axis", "user_id", "label", "s"}, '\t');
  for (std::size_t a = 0; a < st.axes.size(); ++a)
    for (std::size_t i = 0; i < keep.size(); ++i)
      csv::write_row(fig3, {st.axes[a], st.users[keep[i]], st.labels[keep[i]], f(X(i, a))}, '\t');

  return {{"eval_report.json", dump(rep)},
          {"oof_predictions.csv", oof.str()},
          {"table1_single_axis.tsv", t1.str()},
          {"table2_topk.tsv", t2.str()},
          {"fig2_pca.tsv", fig2.str()},
          {"fig3_scores.tsv", fig3.str()}};
}

// ---------------------------------------------------------------- sim

struct SimOptions {
  fs::path spec;
  PermutationConfig perm;
};

inline Outputs run_sim(const SimOptions& opt) {
  opt.perm.validate();
  require_file(opt.spec, "synthetic spec");
  nlohmann::json j;
  try {
    std::ifstream in(opt.spec);
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidInput, opt.spec.string() + ": " + e.what());
  }
  const auto spec = synth_spec_from_json(j);
  const auto world = generate_world(spec);
  const auto rep = calibration_report(world, opt.perm);

  ojson r;
  r["spec"] = synth_spec_to_json(spec);
  r["permutations"] = opt.perm.M;
  r["seed"] = opt.perm.master_seed;
  r["alpha"] = opt.perm.alpha;
  r["n_null"] = rep.n_null;
  r["n_alt"] = rep.n_alt;
  r["n_rejections"] = rep.n_rejections;
  r["ks_stat"] = jnum(rep.ks_stat);
  r["ks_lattice_stat"] = jnum(rep.ks_lattice_stat);
  r["rej_rate_at_alpha"] = jnum(rep.rej_rate_at_alpha);
  r["empirical_fdp"] = jnum(rep.empirical_fdp);
  r["power"] = jnum(rep.power);
  r["coarse_m_warning"] = rep.coarse_m_warning;

  std::ostringstream tsv;
  csv::write_row(tsv, {"user_id", "pair", "planted", "s", "p_perm", "signif_bh"}, '\t');
  const std::size_t P = world.pairs.size();
  for (std::size_t c = 0; c < rep.scores.rows.size(); ++c) {
    const auto& row = rep.scores.rows[c];
    csv::write_row(tsv, {row.user_id, row.pair, world.truth[c / P][c % P] ? "true" : "false",
                         csv::format_double(row.s), csv::format_double(row.p_perm), row.signif_bh ? "true" : "false"},
                   '\t');
  }
  return {{"sim_report.json", dump(r)}, {"sim_pvalues.tsv", tsv.str()}};
}

// ---------------------------------------------------------------- plot

struct PlotOptions {
  fs::path scores;
  std::optional<fs::path> trajectories;
  std::optional<fs::path> pca;
};

inline std::string unique_stem(const std::string& base, std::set<std::string>& used) {
  std::string s = plot::slug(base);
  for (int i = 2; used.contains(s); ++i) s = plot::slug(base) + "_" + std::to_string(i);
  used.insert(s);
  return s;
}

inline Outputs run_plot(const PlotOptions& opt) {
  require_file(opt.scores, "scores file");
  if (opt.trajectories) require_file(*opt.trajectories, "trajectories file");
  if (opt.pca) require_file(*opt.pca, "PCA table");
  Outputs out;

  const auto t = csv::read(opt.scores.string());
  const auto cu = t.column("user_id"), cp = t.column("pair"), cs = t.column("s"), cl = t.column("label_majority");
  if (!cu || !cp || !cs) throw Error(ErrorKind::InvalidInput, opt.scores.string() + ": needs user_id, pair, s");
  std::vector<std::string> axes;
  std::map<std::string, std::vector<plot::Point>> by_axis;
  std::map<std::string, std::string> group_of;
  std::ostringstream pts;
  csv::write_row(pts, {"axis", "user_id", "group", "s"}, '\t');
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size()) continue;
    const auto s = csv::parse_double(row[*cs]);
    if (!s || !std::isfinite(*s)) continue;
    if (!by_axis.contains(row[*cp])) axes.push_back(row[*cp]);
    const std::string group = cl ? row[*cl] : "";
    group_of.emplace(row[*cu], group);
    by_axis[row[*cp]].push_back({row[*cu], group, *s, 0.0, ""});
    csv::write_row(pts, {row[*cp], row[*cu], group, csv::format_double(*s)}, '\t');
  }
  std::set<std::string> used;
  for (const auto& a : axes)
    out.push_back({"fig3_" + unique_stem(a, used) + ".svg", plot::box_swarm(a, by_axis[a])});
  out.push_back({"fig3_points.tsv", pts.str()});

  if (opt.trajectories) {
    const auto tt = csv::read(opt.trajectories->string());
    const auto tu = tt.column("user_id"), tp = tt.column("pair"), tn = tt.column("t"), ts = tt.column("s_t"),
               tj = tt.column("jitter");
    if (!tu || !tp || !tn || !ts || !tj)
      throw Error(ErrorKind::InvalidInput, opt.trajectories->string() + ": needs user_id, pair, t, s_t, jitter");
    std::vector<std::string> taxes;
    std::map<std::string, std::vector<plot::Point>> tp_by_axis;
    std::ostringstream tpts;
    csv::write_row(tpts, {"axis", "user_id", "t", "s_t", "jitter"}, '\t');
    for (const auto& row : tt.rows) {
      if (row.size() != tt.header.size()) continue;
      const auto s = csv::parse_double(row[*ts]);
      const auto jv = csv::parse_double(row[*tj]);
      if (!s || !jv || !std::isfinite(*s)) continue;
      if (!tp_by_axis.contains(row[*tp])) taxes.push_back(row[*tp]);
      const auto g = group_of.find(row[*tu]);
      tp_by_axis[row[*tp]].push_back({row[*tu], g == group_of.end() ? "" : g->second, *s, *jv, row[*tn]});
      csv::write_row(tpts, {row[*tp], row[*tu], row[*tn], row[*ts], row[*tj]}, '\t');
    }
    std::set<std::string> tused;
    for (const auto& a : taxes)
      out.push_back({"fig5_" + unique_stem(a, tused) + ".svg",
                     plot::scatter(a, tp_by_axis[a], "cumulative s_t", "jitter", true)});
    out.push_back({"fig5_points.tsv", tpts.str()});
  }

  if (opt.pca) {
    std::size_t bad = 0;
    std::string text = csv::read_file(opt.pca->string());
    for (char& c : text)
      if (c == '\t') c = ',';
    const auto pt = csv::parse(text, &bad);
    const auto pu = pt.column("user_id"), pl = pt.column("label"), p1 = pt.column("pc1"), p2 = pt.column("pc2");
    if (!pu || !p1 || !p2) throw Error(ErrorKind::InvalidInput, opt.pca->string() + ": needs user_id, pc1, pc2");
    std::vector<plot::Point> pp;
    for (const auto& row : pt.rows) {
      if (row.size() != pt.header.size()) continue;
      const auto x = csv::parse_double(row[*p1]), y = csv::parse_double(row[*p2]);
      if (!x || !y) continue;
      pp.push_back({row[*pu], pl ? row[*pl] : "", *x, *y, ""});
    }
    out.push_back({"fig2_pca.svg", plot::scatter("PCA of axis scores", pp, "PC1", "PC2", false)});
  }
  return out;
}

// ---------------------------------------------------------------- export-check

inline std::string sha256_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::Load, "cannot open " + p.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

struct ExportCheck {
  bool ok = false;
  ojson report;
};

// Validates a model_dir: loadable table, user-token count, and, when the
// exporter's manifest.json is present, its counts and embeddings checksum.
inline ExportCheck run_export_check(const fs::path& model_dir) {
  ExportCheck out;
  auto& r = out.report;
  r["model_dir"] = model_dir.string();
  std::vector<std::string> problems;
  std::optional<EmbeddingTable> table;
  try {
    table = load_table(model_dir);
  } catch (const Error& e) {
    problems.push_back(e.what());
  }
  if (table) {
    std::size_t users = 0;
    for (const auto& tok : table->vocab())
      if (tok.starts_with(table->meta().usr_prefix)) ++users;
    r["vocab_size"] = table->size();
    r["dim"] = table->dim();
    r["usr_prefix"] = table->meta().usr_prefix;
    r["user_token_count"] = users;
    if (users == 0) r["warning"] = "no user tokens: every user will be skipped";
    if (!table->find("[UNK]")) problems.push_back("vocabulary lacks [UNK]");
  }
  const auto manifest_path = model_dir / "manifest.json";
  if (fs::exists(manifest_path)) {
    try {
      std::ifstream in(manifest_path);
      const auto m = nlohmann::json::parse(in);
      const auto want = m.at("checksum").get<std::string>();
      const auto got = "sha256:" + sha256_file(model_dir / "embeddings.f32");
      r["checksum"] = got;
      if (want != got) problems.push_back("embeddings.f32 checksum " + got + " does not match manifest " + want);
      if (table && m.contains("vocab_size") && m.at("vocab_size").get<std::size_t>() != table->size())
        problems.push_back("manifest vocab_size differs from vocab.txt");
      if (table && m.contains("dim") && m.at("dim").get<std::size_t>() != table->dim())
        problems.push_back("manifest dim differs from meta.json");
      if (table && m.contains("user_token_count") &&
          m.at("user_token_count").get<std::size_t>() != r["user_token_count"].get<std::size_t>())
        problems.push_back("manifest user_token_count differs from vocab.txt");
    } catch (const nlohmann::json::exception& e) {
      problems.push_back(manifest_path.string() + ": " + e.what());
    } catch (const Error& e) {
      problems.push_back(e.what());
    }
    r["manifest"] = true;
  } else {
    r["manifest"] = false;
  }
  r["problems"] = problems;
  out.ok = problems.empty();
  r["ok"] = out.ok;
  return out;
}

}  // namespace polar::cmd
