#pragma once
// A small deterministic bot/human world on disk: model dir, lexicon and posts.
// Bots lean toward the finance and newswire sides, humans toward the other
// sides; the remaining two axes carry no class signal.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "polar/embedding_store.hpp"
#include "polar/rng.hpp"

namespace polar::demo {

struct DemoSpec {
  std::size_t n_users = 60;  // half bots, half humans
  std::size_t dim = 16;
  std::size_t posts_per_user = 4;
  std::uint64_t seed = 7;
};

struct Axis {
  std::string name;
  std::vector<std::string> A;
  std::vector<std::string> B;
  double bot_shift;  // user-row shift along this axis for bots (humans get the negative)
};

inline std::vector<Axis> demo_axes() {
  return {{"Scam/Finance vs Daily Life", {"airdrop", "seed phrase", "crypto", "giveaway"},
           {"movie night", "weekend", "dinner", "family"}, 1.6},
          {"Newswire vs Personal", {"court", "officials", "reported", "statement"}, {"tbh", "lol", "honestly", "my day"}, 0.9},
          {"Promo/CTA vs Hedges", {"offer", "discount", "subscribe"}, {"i think", "not sure", "maybe"}, 0.0},
          {"Toxicity vs Civility", {"idiot", "garbage", "stupid"}, {"thank you", "empathy", "kind"}, 0.0}};
}

inline std::vector<std::string> words_of(const std::string& phrase) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : phrase) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline std::vector<double> gaussian(rng::Engine& eng, std::size_t d) {
  std::vector<double> v(d);
  for (double& x : v) x = rng::standard_normal(eng);
  return v;
}

inline std::string demo_user_id(std::size_t u) {
  const std::string n = std::to_string(u);
  return "acct" + std::string(3 - std::min<std::size_t>(3, n.size()), '0') + n;
}

// Writes <dir>/model/{vocab.txt,embeddings.f32,meta.json}, <dir>/lexicon.json
// and <dir>/posts.csv.
inline void write_demo(const std::filesystem::path& dir, const DemoSpec& spec = {}) {
  const std::size_t d = spec.dim;
  const auto axes = demo_axes();
  std::vector<std::vector<double>> dirs;
  for (std::size_t a = 0; a < axes.size(); ++a) {
    auto eng = rng::make_engine(spec.seed, "demo/axis" + std::to_string(a));
    auto v = gaussian(eng, d);
    const double n = norm2(v);
    for (double& x : v) x /= n;
    dirs.push_back(v);
  }

  std::vector<std::string> vocab{"[UNK]"};
  std::vector<float> matrix;
  auto push = [&](const std::string& tok, const std::vector<double>& v) {
    vocab.push_back(tok);
    for (double x : v) matrix.push_back(static_cast<float>(x));
  };
  {
    auto eng = rng::make_engine(spec.seed, "demo/unk");
    const auto v = gaussian(eng, d);
    for (double x : v) matrix.push_back(static_cast<float>(x));
  }
  for (std::size_t a = 0; a < axes.size(); ++a) {
    for (int side = 0; side < 2; ++side) {
      for (const auto& item : side == 0 ? axes[a].A : axes[a].B) {
        for (const auto& w : words_of(item)) {
          if (std::find(vocab.begin(), vocab.end(), w) != vocab.end()) continue;
          auto eng = rng::make_engine(spec.seed, "demo/word/" + w);
          auto v = gaussian(eng, d);
          for (std::size_t j = 0; j < d; ++j) v[j] = 0.5 * v[j] + (side == 0 ? 2.0 : -2.0) * dirs[a][j];
          push(w, v);
        }
      }
    }
  }
  const std::vector<std::string> filler{"the", "a", "today", "is", "great", "new", "check", "this", "out", "we"};
  for (const auto& w : filler) {
    auto eng = rng::make_engine(spec.seed, "demo/word/" + w);
    push(w, gaussian(eng, d));
  }
  push("##s", [&] {
    auto eng = rng::make_engine(spec.seed, "demo/word/##s");
    return gaussian(eng, d);
  }());

  std::ofstream posts_out;
  std::filesystem::create_directories(dir);
  posts_out.open(dir / "posts.csv", std::ios::binary);
  posts_out << "user_id,text,label,t_index,targets\n";
  for (std::size_t u = 0; u < spec.n_users; ++u) {
    const bool bot = u % 2 == 0;
    const std::string uid = demo_user_id(u);
    auto eng = rng::make_engine(spec.seed, "demo/user/" + uid);
    auto v = gaussian(eng, d);
    for (double& x : v) x *= 0.35;
    for (std::size_t a = 0; a < axes.size(); ++a)
      for (std::size_t j = 0; j < d; ++j) v[j] += (bot ? 1.0 : -1.0) * axes[a].bot_shift * dirs[a][j];
    push(user_token(uid, "usr"), v);

    const auto& lean = bot ? axes[0].A : axes[0].B;
    for (std::size_t t = 0; t < spec.posts_per_user; ++t) {
      std::string text = filler[rng::uniform_index(eng, filler.size())] + " " + lean[rng::uniform_index(eng, lean.size())] +
                         " " + filler[rng::uniform_index(eng, filler.size())];
      if (t == 0) text = user_token(uid, "usr") + " " + text;
      posts_out << uid << ",\"" << text << "\"," << (bot ? "bot" : "human") << ',' << t << ','
                << (bot ? "finance" : "") << '\n';
    }
  }
  // One author below the post minimum and one without a vocabulary row.
  posts_out << "solo,\"the weekend is great\",human,0,\n";
  posts_out << "ghost,\"crypto giveaway\",bot,0,\n";
  posts_out << "ghost,\"check this out\",bot,1,\n";

  EmbeddingTable table(std::move(vocab), std::move(matrix), d);
  save_table(table, dir / "model");

  nlohmann::ordered_json lex = nlohmann::ordered_json::array();
  for (const auto& a : axes) lex.push_back({{"name", a.name}, {"A", a.A}, {"B", a.B}});
  std::ofstream(dir / "lexicon.json") << lex.dump(2) << '\n';
}

}  // namespace polar::demo
