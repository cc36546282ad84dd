#pragma once
// Shared embedding space: vocabulary-indexed float32 matrix, deterministic
// user tokens, and unit user vectors.
//
// On-disk model directory:
//   vocab.txt       one token per line, line i <-> row i
//   embeddings.f32  little-endian float32, row-major V x d
//   meta.json       {dim, vocab_size, usr_prefix, hash: "sha1-hex-10", lowercase}

#include <openssl/sha.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "polar/common.hpp"

namespace polar {

static_assert(std::endian::native == std::endian::little, "embeddings.f32 is read in native order");

inline constexpr std::string_view kHashScheme = "sha1-hex-10";
inline constexpr std::size_t kUserHashChars = 10;

struct TableMeta {
  std::string usr_prefix = "usr";
  std::string hash = std::string(kHashScheme);
  bool lowercase = true;
};

class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  // Validates the vocabulary (no duplicates, size match) and values (finite).
  EmbeddingTable(std::vector<std::string> vocab, std::vector<float> matrix, std::size_t dim,
                 TableMeta meta = {})
      : vocab_(std::move(vocab)), matrix_(std::move(matrix)), dim_(dim), meta_(std::move(meta)) {
    if (dim_ == 0) throw Error(ErrorKind::Load, "dim must be >= 1");
    if (matrix_.size() != vocab_.size() * dim_)
      throw Error(ErrorKind::Load, "size mismatch: " + std::to_string(matrix_.size()) +
                                       " values for " + std::to_string(vocab_.size()) + " x " +
                                       std::to_string(dim_));
    index_.reserve(vocab_.size());
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
      if (!index_.emplace(vocab_[i], i).second)
        throw Error(ErrorKind::Load,
                    "duplicate token '" + vocab_[i] + "' at row " + std::to_string(i));
    }
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
      for (float x : row(i)) {
        if (!std::isfinite(x))
          throw Error(ErrorKind::Load,
                      "non-finite value in row " + std::to_string(i) + " ('" + vocab_[i] + "')");
      }
    }
  }

  std::size_t size() const noexcept { return vocab_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<std::string>& vocab() const noexcept { return vocab_; }
  const std::vector<float>& matrix() const noexcept { return matrix_; }
  const TableMeta& meta() const noexcept { return meta_; }

  std::span<const float> row(std::size_t i) const { return {matrix_.data() + i * dim_, dim_}; }

  std::optional<std::size_t> find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::unordered_map<std::string, std::size_t>& index() const noexcept { return index_; }

 private:
  std::vector<std::string> vocab_;
  std::vector<float> matrix_;
  std::size_t dim_ = 0;
  TableMeta meta_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct UserRecord {
  std::string user_id;
  std::string token;
  std::size_t n_posts = 0;
  std::optional<std::string> label_majority;
  std::optional<std::string> targets;
  std::optional<std::vector<double>> vector;
};

// usr_prefix ++ first 10 lowercase hex chars of SHA-1 over the raw UTF-8 bytes.
inline std::string user_token(std::string_view user_id, std::string_view usr_prefix) {
  if (user_id.empty()) throw Error(ErrorKind::InvalidInput, "empty user_id");
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(user_id.data()), user_id.size(), digest);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(usr_prefix);
  for (std::size_t i = 0; i < kUserHashChars / 2; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

// Fills in each record's token; aborts if two distinct ids share a token.
inline void assign_user_tokens(std::span<UserRecord> users, std::string_view usr_prefix) {
  std::unordered_map<std::string, std::string> seen;
  for (auto& u : users) {
    u.token = user_token(u.user_id, usr_prefix);
    auto [it, inserted] = seen.emplace(u.token, u.user_id);
    if (!inserted && it->second != u.user_id)
      throw Error(ErrorKind::TokenCollision, "users '" + it->second + "' and '" + u.user_id +
                                                 "' both map to token " + u.token);
  }
}

// E[t_u] / ||E[t_u]||_2 in double precision.
inline std::vector<double> normalized_row(const EmbeddingTable& table, std::size_t r) {
  auto src = table.row(r);
  std::vector<double> v(src.begin(), src.end());
  const double n = norm2(v);
  if (!(n > 0.0))
    throw Error(ErrorKind::DegenerateVector, "zero-norm row " + std::to_string(r) + " ('" +
                                                 table.vocab()[r] + "')");
  for (double& x : v) x /= n;
  return v;
}

inline std::vector<double> user_vector(const EmbeddingTable& table, const UserRecord& rec) {
  auto r = table.find(rec.token);
  if (!r)
    throw Error(ErrorKind::MissingUserToken,
                "token " + rec.token + " for user '" + rec.user_id + "' not in vocabulary");
  return normalized_row(table, *r);
}

inline EmbeddingTable load_table(const std::filesystem::path& model_dir) {
  namespace fs = std::filesystem;
  const auto vocab_path = model_dir / "vocab.txt";
  const auto emb_path = model_dir / "embeddings.f32";
  const auto meta_path = model_dir / "meta.json";
  for (const auto& p : {vocab_path, emb_path, meta_path})
    if (!fs::exists(p)) throw Error(ErrorKind::Load, "missing " + p.string());

  std::vector<std::string> vocab;
  {
    std::ifstream in(vocab_path, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      vocab.push_back(std::move(line));
    }
  }

  nlohmann::json meta_json;
  try {
    std::ifstream in(meta_path);
    meta_json = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Load, meta_path.string() + ": " + e.what());
  }
  TableMeta meta;
  std::size_t dim = 0;
  try {
    dim = meta_json.at("dim").get<std::size_t>();
    const auto vsize = meta_json.at("vocab_size").get<std::size_t>();
    if (vsize != vocab.size())
      throw Error(ErrorKind::Load, "meta.json vocab_size " + std::to_string(vsize) +
                                       " but vocab.txt has " + std::to_string(vocab.size()) +
                                       " lines");
    meta.usr_prefix = meta_json.value("usr_prefix", meta.usr_prefix);
    meta.hash = meta_json.value("hash", meta.hash);
    meta.lowercase = meta_json.value("lowercase", meta.lowercase);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Load, meta_path.string() + ": " + e.what());
  }
  if (meta.hash != kHashScheme)
    throw Error(ErrorKind::Load, "unsupported hash scheme '" + meta.hash + "'");
  if (dim == 0) throw Error(ErrorKind::Load, "meta.json dim must be >= 1");

  const auto bytes = fs::file_size(emb_path);
  const auto expected = static_cast<std::uintmax_t>(vocab.size()) * dim * sizeof(float);
  if (bytes != expected)
    throw Error(ErrorKind::Load, "size mismatch: embeddings.f32 has " + std::to_string(bytes) +
                                     " bytes, expected " + std::to_string(expected) + " (V=" +
                                     std::to_string(vocab.size()) + ", d=" + std::to_string(dim) +
                                     ")");
  std::vector<float> matrix(vocab.size() * dim);
  {
    std::ifstream in(emb_path, std::ios::binary);
    in.read(reinterpret_cast<char*>(matrix.data()), static_cast<std::streamsize>(expected));
    if (!in) throw Error(ErrorKind::Load, "short read on " + emb_path.string());
  }
  return EmbeddingTable(std::move(vocab), std::move(matrix), dim, std::move(meta));
}

inline void save_table(const EmbeddingTable& table, const std::filesystem::path& model_dir) {
  std::filesystem::create_directories(model_dir);
  {
    std::ofstream out(model_dir / "vocab.txt", std::ios::binary);
    for (const auto& t : table.vocab()) out << t << '\n';
  }
  {
    std::ofstream out(model_dir / "embeddings.f32", std::ios::binary);
    out.write(reinterpret_cast<const char*>(table.matrix().data()),
              static_cast<std::streamsize>(table.matrix().size() * sizeof(float)));
  }
  nlohmann::ordered_json meta;
  meta["dim"] = table.dim();
  meta["vocab_size"] = table.size();
  meta["usr_prefix"] = table.meta().usr_prefix;
  meta["hash"] = table.meta().hash;
  meta["lowercase"] = table.meta().lowercase;
  std::ofstream(model_dir / "meta.json") << meta.dump(2) << '\n';
}

}  // namespace polar
