#pragma once
// Wordpiece segmentation over a trained vocabulary (greedy longest match
// first, BERT conventions) plus the basic pre-tokenizer that feeds it.

#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "polar/common.hpp"
#include "polar/embedding_store.hpp"

namespace polar {

struct TokenizerConfig {
  std::unordered_map<std::string, std::size_t> vocab_index;
  std::string continuation_prefix = "##";
  std::string unk_token = "[UNK]";
  bool lowercase = true;
  std::size_t max_chars_per_word = 100;

  static TokenizerConfig from_table(const EmbeddingTable& table) {
    TokenizerConfig cfg;
    cfg.vocab_index = table.index();
    cfg.lowercase = table.meta().lowercase;
    cfg.validate();
    return cfg;
  }

  void validate() const {
    if (!vocab_index.contains(unk_token))
      throw Error(ErrorKind::InvalidInput, "unk token '" + unk_token + "' missing from vocabulary");
    if (max_chars_per_word == 0) throw Error(ErrorKind::InvalidInput, "max_chars_per_word must be > 0");
  }

  std::optional<std::size_t> find(const std::string& token) const {
    auto it = vocab_index.find(token);
    if (it == vocab_index.end()) return std::nullopt;
    return it->second;
  }
};

namespace detail {

inline bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

inline bool is_ascii_punct(unsigned char c) { return c < 0x80 && std::ispunct(c); }

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Byte offsets of UTF-8 code point starts, plus s.size() as sentinel.
inline std::vector<std::size_t> codepoint_bounds(std::string_view s) {
  std::vector<std::size_t> b;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) b.push_back(i);
  }
  b.push_back(s.size());
  return b;
}

}  // namespace detail

// Lowercase (when configured), split on whitespace, and split each ASCII
// punctuation character into its own word.
inline std::vector<std::string> pre_tokenize(const TokenizerConfig& cfg, std::string_view text) {
  const std::string norm = cfg.lowercase ? detail::ascii_lower(text) : std::string(text);
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) words.push_back(std::move(cur));
    cur.clear();
  };
  for (unsigned char c : norm) {
    if (detail::is_space(c)) {
      flush();
    } else if (detail::is_ascii_punct(c)) {
      flush();
      words.emplace_back(1, static_cast<char>(c));
    } else {
      cur.push_back(static_cast<char>(c));
    }
  }
  flush();
  return words;
}

// Greedy longest-match-first segmentation of a single word. nullopt is the
// unknown marker: some position had no matching piece, or the word is too long.
inline std::optional<std::vector<std::string>> tokenize_word(const TokenizerConfig& cfg,
                                                             std::string_view word) {
  const std::string w =
      cfg.lowercase ? detail::ascii_lower(detail::trim(word)) : std::string(detail::trim(word));
  if (w.empty()) return std::nullopt;
  const auto bounds = detail::codepoint_bounds(w);
  const std::size_t n_chars = bounds.size() - 1;
  if (n_chars > cfg.max_chars_per_word) return std::nullopt;

  std::vector<std::string> pieces;
  std::size_t start = 0;
  while (start < n_chars) {
    std::optional<std::string> hit;
    std::size_t hit_end = start;
    for (std::size_t end = n_chars; end > start; --end) {
      std::string cand = w.substr(bounds[start], bounds[end] - bounds[start]);
      if (start > 0) {
        cand = cfg.continuation_prefix + cand;
      } else if (cand.starts_with(cfg.continuation_prefix)) {
        continue;
      }
      if (cfg.vocab_index.contains(cand)) {
        hit = std::move(cand);
        hit_end = end;
        break;
      }
    }
    if (!hit) return std::nullopt;
    pieces.push_back(std::move(*hit));
    start = hit_end;
  }
  return pieces;
}

// Segments every word of a phrase; unknown words are dropped and counted.
inline std::vector<std::string> tokenize_phrase(const TokenizerConfig& cfg, std::string_view phrase,
                                                std::size_t* unknown_words = nullptr) {
  std::vector<std::string> out;
  for (const auto& word : pre_tokenize(cfg, phrase)) {
    auto pieces = tokenize_word(cfg, word);
    if (!pieces) {
      if (unknown_words) ++*unknown_words;
      continue;
    }
    for (auto& p : *pieces) out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<std::size_t> phrase_ids(const TokenizerConfig& cfg, std::string_view phrase,
                                           std::size_t* unknown_words = nullptr) {
  std::vector<std::size_t> ids;
  for (const auto& tok : tokenize_phrase(cfg, phrase, unknown_words)) ids.push_back(cfg.vocab_index.at(tok));
  return ids;
}

}  // namespace polar
