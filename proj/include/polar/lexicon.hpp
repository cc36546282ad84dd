#pragma once
// Attribute pairs: two lists of lexical items embedded by subword averaging.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "polar/common.hpp"
#include "polar/embedding_store.hpp"
#include "polar/wordpiece.hpp"

namespace polar {

inline constexpr double kSeparabilityWarnCos = 0.95;
inline constexpr double kCoverageWarnLossFrac = 0.5;

struct AttributePair {
  std::string name;
  std::vector<std::string> items_A;  // after exact dedup
  std::vector<std::string> items_B;
  RowMatrix A;                       // one unit row per kept item
  RowMatrix B;
  std::vector<std::string> kept_A;
  std::vector<std::string> kept_B;
  double centroid_cos = kNaN;
  std::vector<std::string> warnings;

  std::size_t m() const noexcept { return A.rows(); }
  std::size_t n() const noexcept { return B.rows(); }
  bool usable() const noexcept { return m() > 0 && n() > 0; }
};

struct LexiconEntry {
  std::string name;
  std::vector<std::string> A;
  std::vector<std::string> B;
};

inline std::vector<double> centroid(const RowMatrix& rows) {
  std::vector<double> c(rows.cols(), 0.0);
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    auto r = rows.row(i);
    for (std::size_t j = 0; j < c.size(); ++j) c[j] += r[j];
  }
  for (double& x : c) x /= static_cast<double>(rows.rows());
  return c;
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = norm2(a), nb = norm2(b);
  if (!(na > 0.0) || !(nb > 0.0)) return kNaN;
  return dot(a, b) / (na * nb);
}

// phi(item): normalized mean of the item's subword rows; nullopt when no
// subword survives or the mean vanishes.
inline std::optional<std::vector<double>> embed_item(const EmbeddingTable& table,
                                                     const TokenizerConfig& cfg,
                                                     std::string_view item) {
  const auto ids = phrase_ids(cfg, item);
  if (ids.empty()) return std::nullopt;
  std::vector<double> v(table.dim(), 0.0);
  for (std::size_t id : ids) {
    auto r = table.row(id);
    for (std::size_t j = 0; j < v.size(); ++j) v[j] += r[j];
  }
  for (double& x : v) x /= static_cast<double>(ids.size());
  const double n = norm2(v);
  if (!(n > 0.0)) return std::nullopt;
  for (double& x : v) x /= n;
  return v;
}

namespace detail {

inline std::vector<std::string> dedup_items(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& it : items) {
    std::string key = ascii_lower(trim(it));
    if (key.empty() || !seen.insert(key).second) continue;
    out.push_back(std::move(key));
  }
  return out;
}

}  // namespace detail

// Fills in centroid cosine and the separability / coverage warnings.
inline void finalize_pair(AttributePair& pair) {
  pair.warnings.clear();
  if (!pair.usable()) {
    pair.centroid_cos = kNaN;
    pair.warnings.push_back("empty side after tokenization");
    return;
  }
  pair.centroid_cos = cosine(centroid(pair.A), centroid(pair.B));
  if (pair.centroid_cos > kSeparabilityWarnCos)
    pair.warnings.push_back("poorly separated axis: centroid cosine " +
                            std::to_string(pair.centroid_cos));
  auto lost = [](std::size_t total, std::size_t kept) {
    return total > 0 && static_cast<double>(total - kept) > kCoverageWarnLossFrac * total;
  };
  if (lost(pair.items_A.size(), pair.kept_A.size()))
    pair.warnings.push_back("side A lost more than half its items to tokenization");
  if (lost(pair.items_B.size(), pair.kept_B.size()))
    pair.warnings.push_back("side B lost more than half its items to tokenization");
}

// Like build_pair, but returns an unusable pair instead of throwing when a
// side is empty, so callers can emit NaN rows for it.
inline AttributePair try_build_pair(const EmbeddingTable& table, const TokenizerConfig& cfg,
                                    std::string name, const std::vector<std::string>& items_A,
                                    const std::vector<std::string>& items_B) {
  if (items_A.empty() || items_B.empty())
    throw Error(ErrorKind::InvalidInput, "pair '" + name + "' has an empty item list");
  AttributePair pair;
  pair.name = std::move(name);
  pair.items_A = detail::dedup_items(items_A);
  pair.items_B = detail::dedup_items(items_B);
  pair.A = RowMatrix(0, table.dim());
  pair.B = RowMatrix(0, table.dim());
  for (const auto& item : pair.items_A) {
    if (auto v = embed_item(table, cfg, item)) {
      pair.A.push_row(*v);
      pair.kept_A.push_back(item);
    }
  }
  for (const auto& item : pair.items_B) {
    if (auto v = embed_item(table, cfg, item)) {
      pair.B.push_row(*v);
      pair.kept_B.push_back(item);
    }
  }
  finalize_pair(pair);
  return pair;
}

inline AttributePair build_pair(const EmbeddingTable& table, const TokenizerConfig& cfg,
                                std::string name, const std::vector<std::string>& items_A,
                                const std::vector<std::string>& items_B) {
  auto pair = try_build_pair(table, cfg, std::move(name), items_A, items_B);
  if (!pair.usable())
    throw Error(ErrorKind::EmptySide, "pair '" + pair.name + "': side " +
                                          (pair.m() == 0 ? "A" : "B") +
                                          " has no item surviving tokenization");
  return pair;
}

// Pair from raw attribute rows (synthetic worlds); rows are normalized here.
inline AttributePair pair_from_rows(std::string name, const RowMatrix& A, const RowMatrix& B) {
  AttributePair pair;
  pair.name = std::move(name);
  auto add = [](const RowMatrix& src, RowMatrix& dst, std::vector<std::string>& items,
                std::vector<std::string>& kept, const char* side) {
    dst = RowMatrix(0, src.cols());
    for (std::size_t i = 0; i < src.rows(); ++i) {
      std::vector<double> v(src.row(i).begin(), src.row(i).end());
      const double n = norm2(v);
      if (!(n > 0.0)) throw Error(ErrorKind::DegenerateVector, "zero attribute row");
      for (double& x : v) x /= n;
      dst.push_row(v);
      items.push_back(std::string(side) + std::to_string(i));
      kept.push_back(items.back());
    }
  };
  add(A, pair.A, pair.items_A, pair.kept_A, "a");
  add(B, pair.B, pair.items_B, pair.kept_B, "b");
  finalize_pair(pair);
  return pair;
}

// Lexicon file: JSON array of {"name": str, "A": [str...], "B": [str...]}.
inline std::vector<LexiconEntry> parse_lexicon(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorKind::InvalidInput, "lexicon must be a JSON array");
  std::vector<LexiconEntry> out;
  std::unordered_set<std::string> names;
  for (const auto& e : j) {
    try {
      LexiconEntry entry{e.at("name").get<std::string>(), e.at("A").get<std::vector<std::string>>(),
                         e.at("B").get<std::vector<std::string>>()};
      if (entry.name.empty()) throw Error(ErrorKind::InvalidInput, "lexicon entry with empty name");
      if (!names.insert(entry.name).second)
        throw Error(ErrorKind::InvalidInput, "duplicate pair name '" + entry.name + "'");
      out.push_back(std::move(entry));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorKind::InvalidInput, std::string("malformed lexicon entry: ") + ex.what());
    }
  }
  return out;
}

inline std::vector<LexiconEntry> load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Load, "cannot open lexicon " + path.string());
  try {
    return parse_lexicon(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::InvalidInput, path.string() + ": " + ex.what());
  }
}

}  // namespace polar
