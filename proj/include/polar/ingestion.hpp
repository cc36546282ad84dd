#pragma once
// posts.csv ingestion: per-user post sequences, majority labels, and the
// minimum-posts inclusion rule.
//
// posts.csv: header with user_id, text; optional label, t_index, targets.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "polar/common.hpp"
#include "polar/csv.hpp"
#include "polar/embedding_store.hpp"
#include "polar/rng.hpp"
#include "polar/trajectory.hpp"
#include "polar/wordpiece.hpp"

namespace polar {

struct CorpusConfig {
  std::size_t min_posts = 2;
  std::string usr_prefix = "usr";
};

struct Corpus {
  std::vector<UserRecord> users;                     // retained, first-appearance order
  std::map<std::string, PostSequence> posts_by_user;  // retained users only
  std::size_t input_rows = 0;
  std::size_t malformed_rows = 0;
  std::size_t retained_posts = 0;
  std::size_t dropped_posts = 0;       // posts of users under min_posts
  std::size_t dropped_under_min = 0;   // users under min_posts
  std::size_t label_ties = 0;          // users whose majority label needed the tie-break
  std::size_t skipped_missing_token = 0;
};

// Most frequent label; ties go to the lexicographically smallest.
inline std::optional<std::string> majority_label(const std::vector<std::string>& labels, bool* tied = nullptr) {
  std::map<std::string, std::size_t> counts;
  for (const auto& l : labels)
    if (!l.empty()) ++counts[l];
  if (counts.empty()) return std::nullopt;
  std::size_t best = 0;
  for (const auto& [l, c] : counts) best = std::max(best, c);
  std::optional<std::string> out;
  std::size_t at_best = 0;
  for (const auto& [l, c] : counts) {
    if (c != best) continue;
    if (!out) out = l;
    ++at_best;
  }
  if (tied) *tied = at_best > 1;
  return out;
}

inline Corpus build_corpus(const csv::Table& table, const TokenizerConfig& tok, const CorpusConfig& cfg,
                           std::size_t parse_bad_rows = 0) {
  Corpus corpus;
  corpus.malformed_rows = parse_bad_rows;
  corpus.input_rows = table.rows.size() + parse_bad_rows;
  if (table.header.empty() && table.rows.empty()) return corpus;

  const auto c_user = table.column("user_id");
  const auto c_text = table.column("text");
  if (!c_user || !c_text) throw Error(ErrorKind::InvalidInput, "posts file needs user_id and text columns");
  const auto c_label = table.column("label");
  const auto c_t = table.column("t_index");
  const auto c_targets = table.column("targets");

  struct Pending {
    std::vector<std::pair<long long, std::string>> posts;  // (t_index, text)
    std::vector<std::string> labels;
    std::optional<std::string> targets;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, Pending> pending;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size() || row[*c_user].empty()) {
      ++corpus.malformed_rows;
      continue;
    }
    long long t = static_cast<long long>(r);
    if (c_t && !row[*c_t].empty()) {
      try {
        std::size_t used = 0;
        t = std::stoll(row[*c_t], &used);
        if (used != row[*c_t].size()) throw std::invalid_argument("trailing");
      } catch (...) {
        ++corpus.malformed_rows;
        continue;
      }
    }
    const auto& uid = row[*c_user];
    auto [it, fresh] = pending.try_emplace(uid);
    if (fresh) order.push_back(uid);
    auto& p = it->second;
    p.posts.emplace_back(t, row[*c_text]);
    if (c_label) p.labels.push_back(row[*c_label]);
    if (c_targets && !p.targets && !row[*c_targets].empty()) p.targets = row[*c_targets];
  }

  for (const auto& uid : order) {
    auto& p = pending[uid];
    std::stable_sort(p.posts.begin(), p.posts.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    // Duplicate t_index within a user: keep the first, count the rest as malformed.
    std::vector<std::pair<long long, std::string>> uniq;
    for (auto& post : p.posts) {
      if (!uniq.empty() && uniq.back().first == post.first) {
        ++corpus.malformed_rows;
        continue;
      }
      uniq.push_back(std::move(post));
    }
    if (uniq.size() < cfg.min_posts) {
      ++corpus.dropped_under_min;
      corpus.dropped_posts += uniq.size();
      continue;
    }
    UserRecord rec;
    rec.user_id = uid;
    rec.token = user_token(uid, cfg.usr_prefix);
    rec.n_posts = uniq.size();
    bool tied = false;
    rec.label_majority = majority_label(p.labels, &tied);
    if (tied) ++corpus.label_ties;
    rec.targets = p.targets;

    PostSequence seq;
    seq.user_id = uid;
    const auto own = tok.find(rec.token);
    for (const auto& [t, text] : uniq) {
      Post post;
      post.t_index = t;
      for (std::size_t id : phrase_ids(tok, text))
        if (!own || id != *own) post.token_ids.push_back(id);
      seq.posts.push_back(std::move(post));
    }
    corpus.retained_posts += seq.posts.size();
    corpus.posts_by_user.emplace(uid, std::move(seq));
    corpus.users.push_back(std::move(rec));
  }
  assign_user_tokens(corpus.users, cfg.usr_prefix);
  return corpus;
}

inline Corpus load_corpus(const std::string& posts_path, const TokenizerConfig& tok, const CorpusConfig& cfg) {
  std::size_t bad = 0;
  const auto table = csv::read(posts_path, &bad);
  return build_corpus(table, tok, cfg, bad);
}

// Uniformly subsamples each user's posts to at most `cap`, keeping order.
inline Corpus optional_post_cap(Corpus corpus, std::optional<std::size_t> cap, std::uint64_t seed) {
  if (!cap) return corpus;
  for (auto& [uid, seq] : corpus.posts_by_user) {
    if (seq.posts.size() <= *cap) continue;
    auto eng = rng::make_engine(seed, "post-cap/" + uid);
    std::vector<std::size_t> idx(seq.posts.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t j = 0; j < *cap; ++j) std::swap(idx[j], idx[j + rng::uniform_index(eng, idx.size() - j)]);
    idx.resize(*cap);
    std::sort(idx.begin(), idx.end());
    std::vector<Post> kept;
    for (std::size_t i : idx) kept.push_back(std::move(seq.posts[i]));
    seq.posts = std::move(kept);
  }
  return corpus;
}

}  // namespace polar
