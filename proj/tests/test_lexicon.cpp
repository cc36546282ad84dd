#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "polar/lexicon.hpp"
#include "test_util.hpp"

using polar::testing::make_table;

namespace {

const polar::EmbeddingTable& fixture() {
  static const auto t = make_table({
      {"[UNK]", {0, 0, 1}},
      {"air", {1, 0, 0}},
      {"##drop", {0, 1, 0}},
      {"seed", {1, 1, 0}},
      {"phrase", {2, 0, 1}},
      {"movie", {0, 1, 1}},
      {"night", {0, 2, 0}},
      {"weekend", {1, 0, 3}},
      {"solo", {0, 2, 0}},
      {"zero", {0, 0, 0}},
  });
  return t;
}

polar::TokenizerConfig tok() { return polar::TokenizerConfig::from_table(fixture()); }

}  // namespace

TEST(EmbedItem, SingleTokenNormalized) {
  const auto v = polar::embed_item(fixture(), tok(), "solo");
  ASSERT_TRUE(v);
  EXPECT_EQ(*v, (std::vector<double>{0, 1, 0}));
}

TEST(EmbedItem, TwoTokensAveraged) {
  const auto v = polar::embed_item(fixture(), tok(), "airdrop");
  ASSERT_TRUE(v);
  EXPECT_NEAR((*v)[0], std::sqrt(2.0) / 2, 1e-15);
  EXPECT_NEAR((*v)[1], std::sqrt(2.0) / 2, 1e-15);
  EXPECT_EQ((*v)[2], 0.0);
}

TEST(EmbedItem, UnknownOrZeroIsNone) {
  EXPECT_FALSE(polar::embed_item(fixture(), tok(), "qqq zzz"));
  EXPECT_FALSE(polar::embed_item(fixture(), tok(), "zero"));
}

TEST(BuildPair, IdenticalSidesWarnSeparability) {
  const auto p = polar::build_pair(fixture(), tok(), "same", {"seed", "movie"}, {"seed", "movie"});
  EXPECT_NEAR(p.centroid_cos, 1.0, 1e-12);
  ASSERT_FALSE(p.warnings.empty());
  EXPECT_NE(p.warnings[0].find("poorly separated"), std::string::npos);
}

TEST(BuildPair, ScamFinanceVsDailyLifeCoverage) {
  const auto p = polar::build_pair(fixture(), tok(), "Scam/Finance vs. Daily Life",
                                   {"airdrop", "seed phrase", "crypto giveaway"},
                                   {"movie night", "weekend"});
  EXPECT_EQ(p.m(), 2u);
  EXPECT_EQ(p.n(), 2u);
  EXPECT_EQ(p.kept_A, (std::vector<std::string>{"airdrop", "seed phrase"}));
  EXPECT_EQ(p.kept_B, (std::vector<std::string>{"movie night", "weekend"}));
  for (std::size_t i = 0; i < p.m(); ++i) EXPECT_NEAR(polar::norm2(p.A.row(i)), 1.0, 1e-12);
}

TEST(BuildPair, EmptySideError) {
  try {
    polar::build_pair(fixture(), tok(), "bad", {"qqq", "zzz"}, {"movie"});
    FAIL();
  } catch (const polar::Error& e) {
    EXPECT_EQ(e.kind(), polar::ErrorKind::EmptySide);
  }
  const auto p = polar::try_build_pair(fixture(), tok(), "bad", {"qqq"}, {"movie"});
  EXPECT_FALSE(p.usable());
  EXPECT_TRUE(std::isnan(p.centroid_cos));
}

TEST(BuildPair, CoverageLossWarning) {
  const auto p = polar::build_pair(fixture(), tok(), "lossy", {"seed", "qqq", "rrr"}, {"movie"});
  EXPECT_TRUE(std::any_of(p.warnings.begin(), p.warnings.end(),
                          [](const std::string& w) { return w.find("side A lost") != std::string::npos; }));
}

TEST(BuildPair, DeduplicationMatchesUniqueInput) {
  const auto dup = polar::build_pair(fixture(), tok(), "p", {"seed", "Seed", "seed ", "airdrop"}, {"movie", "movie"});
  const auto uniq = polar::build_pair(fixture(), tok(), "p", {"seed", "airdrop"}, {"movie"});
  EXPECT_EQ(dup.kept_A, uniq.kept_A);
  EXPECT_EQ(dup.kept_B, uniq.kept_B);
  EXPECT_EQ(dup.A.data(), uniq.A.data());
}

TEST(BuildPair, CentroidCosineMatchesRecomputation) {
  std::mt19937_64 gen(5);
  std::normal_distribution<float> nd;
  std::vector<std::pair<std::string, std::vector<float>>> rows{{"[UNK]", {1, 0, 0, 0, 0, 0}}};
  std::vector<std::string> words;
  for (int i = 0; i < 20; ++i) {
    std::vector<float> r(6);
    for (auto& x : r) x = nd(gen);
    words.push_back("w" + std::to_string(i));
    rows.emplace_back(words.back(), r);
  }
  const auto t = make_table(rows);
  const auto cfg = polar::TokenizerConfig::from_table(t);
  const auto p = polar::build_pair(t, cfg, "rand", {words.begin(), words.begin() + 9}, {words.begin() + 9, words.end()});
  // Independent: sum rows column by column, then cosine.
  std::vector<double> a(6, 0), b(6, 0);
  for (std::size_t i = 0; i < p.m(); ++i)
    for (int j = 0; j < 6; ++j) a[j] += p.A(i, j);
  for (std::size_t i = 0; i < p.n(); ++i)
    for (int j = 0; j < 6; ++j) b[j] += p.B(i, j);
  double ab = 0, aa = 0, bb = 0;
  for (int j = 0; j < 6; ++j) {
    ab += a[j] * b[j];
    aa += a[j] * a[j];
    bb += b[j] * b[j];
  }
  EXPECT_NEAR(p.centroid_cos, ab / std::sqrt(aa * bb), 1e-9);
}

TEST(Lexicon, ParsesAndRejectsMalformed) {
  const auto ok = polar::parse_lexicon(nlohmann::json::parse(R"([{"name":"x","A":["a"],"B":["b","c"]}])"));
  ASSERT_EQ(ok.size(), 1u);
  EXPECT_EQ(ok[0].B.size(), 2u);
  EXPECT_THROW(polar::parse_lexicon(nlohmann::json::parse(R"({"name":"x"})")), polar::Error);
  EXPECT_THROW(polar::parse_lexicon(nlohmann::json::parse(R"([{"name":"x","A":["a"]}])")), polar::Error);
  EXPECT_THROW(polar::parse_lexicon(nlohmann::json::parse(
                   R"([{"name":"x","A":["a"],"B":["b"]},{"name":"x","A":["a"],"B":["b"]}])")),
               polar::Error);
  EXPECT_THROW(polar::load_lexicon("/nonexistent/lexicon.json"), polar::Error);
}
