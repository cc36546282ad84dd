#pragma once
// Synthetic embedding worlds with known ground truth, used to check null
// calibration, FDR control, and power of the permutation test.
//
// Attribute and user rows are isotropic Gaussian draws normalized to the unit
// sphere. A planted (user, pair) cell adds effect_delta along the pair's unit
// axis (a_bar - b_bar) / |a_bar - b_bar| before the user row is normalized.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "polar/association.hpp"
#include "polar/common.hpp"
#include "polar/embedding_store.hpp"
#include "polar/lexicon.hpp"
#include "polar/rng.hpp"

namespace polar {

struct SynthSpec {
  std::size_t n_users = 200;
  std::size_t dim = 32;
  std::vector<std::pair<std::size_t, std::size_t>> pairs = {{8, 8}};
  double effect_frac = 0.0;
  double effect_delta = 0.0;
  std::uint64_t seed = 123;

  std::size_t n_planted() const {
    return static_cast<std::size_t>(std::floor(effect_frac * static_cast<double>(n_users) + 1e-9));
  }

  void validate() const {
    if (dim < 2) throw Error(ErrorKind::InvalidInput, "synthetic dim must be >= 2");
    if (n_users == 0) throw Error(ErrorKind::InvalidInput, "synthetic world needs users");
    if (pairs.empty()) throw Error(ErrorKind::InvalidInput, "synthetic world needs pairs");
    for (auto [m, n] : pairs)
      if (m == 0 || n == 0) throw Error(ErrorKind::InvalidInput, "synthetic pair sides must be nonempty");
    if (!(effect_frac >= 0.0 && effect_frac <= 1.0)) throw Error(ErrorKind::InvalidInput, "effect_frac must be in [0,1]");
    if (!(effect_delta >= 0.0)) throw Error(ErrorKind::InvalidInput, "effect_delta must be >= 0");
  }
};

inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec s;
  if (!j.is_object()) throw Error(ErrorKind::InvalidInput, "synthetic spec: expected a JSON object");
  for (const auto& [key, _] : j.items())
    if (key != "n_users" && key != "dim" && key != "pairs" && key != "effect_frac" && key != "effect_delta" &&
        key != "seed")
      throw Error(ErrorKind::InvalidInput, "synthetic spec: unknown key '" + key + "'");
  try {
    s.n_users = j.value("n_users", s.n_users);
    s.dim = j.value("dim", s.dim);
    if (j.contains("pairs")) {
      s.pairs.clear();
      for (const auto& p : j.at("pairs")) s.pairs.emplace_back(p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>());
    }
    s.effect_frac = j.value("effect_frac", s.effect_frac);
    s.effect_delta = j.value("effect_delta", s.effect_delta);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidInput, std::string("synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

inline nlohmann::ordered_json synth_spec_to_json(const SynthSpec& s) {
  nlohmann::ordered_json j;
  j["n_users"] = s.n_users;
  j["dim"] = s.dim;
  j["pairs"] = nlohmann::ordered_json::array();
  for (auto [m, n] : s.pairs) j["pairs"].push_back({m, n});
  j["effect_frac"] = s.effect_frac;
  j["effect_delta"] = s.effect_delta;
  j["seed"] = s.seed;
  return j;
}

struct World {
  SynthSpec spec;
  EmbeddingTable table;
  std::vector<UserRecord> users;
  std::vector<AttributePair> pairs;
  std::vector<std::vector<bool>> truth;  // truth[user][pair]: planted alternative
};

namespace detail {

inline std::vector<double> unit_gaussian(rng::Engine& eng, std::size_t dim) {
  std::vector<double> v(dim);
  for (;;) {
    for (double& x : v) x = rng::standard_normal(eng);
    const double n = norm2(v);
    if (n > 0.0) {
      for (double& x : v) x /= n;
      return v;
    }
  }
}

}  // namespace detail

inline World generate_world(const SynthSpec& spec) {
  spec.validate();
  World w;
  w.spec = spec;
  const std::size_t d = spec.dim;
  std::vector<std::string> vocab{"[UNK]"};
  std::vector<float> matrix(d, 0.0f);
  matrix[0] = 1.0f;
  auto append = [&](std::string tok, std::span<const double> v) {
    vocab.push_back(std::move(tok));
    for (double x : v) matrix.push_back(static_cast<float>(x));
  };

  std::vector<std::vector<double>> axes;
  for (std::size_t p = 0; p < spec.pairs.size(); ++p) {
    auto eng = rng::make_engine(spec.seed, "world/pair" + std::to_string(p));
    const auto [m, n] = spec.pairs[p];
    RowMatrix A(0, d), B(0, d);
    for (std::size_t i = 0; i < m; ++i) A.push_row(detail::unit_gaussian(eng, d));
    for (std::size_t i = 0; i < n; ++i) B.push_row(detail::unit_gaussian(eng, d));
    auto pair = pair_from_rows("pair" + std::to_string(p), A, B);
    for (std::size_t i = 0; i < m; ++i) append("p" + std::to_string(p) + "_a" + std::to_string(i), pair.A.row(i));
    for (std::size_t i = 0; i < n; ++i) append("p" + std::to_string(p) + "_b" + std::to_string(i), pair.B.row(i));
    const auto a = centroid(pair.A), b = centroid(pair.B);
    std::vector<double> axis(d);
    for (std::size_t j = 0; j < d; ++j) axis[j] = a[j] - b[j];
    const double an = norm2(axis);
    for (double& x : axis) x = an > 0 ? x / an : 0.0;
    axes.push_back(std::move(axis));
    w.pairs.push_back(std::move(pair));
  }

  w.truth.assign(spec.n_users, std::vector<bool>(spec.pairs.size(), false));
  const std::size_t planted = spec.n_planted();
  for (std::size_t p = 0; p < spec.pairs.size(); ++p) {
    auto eng = rng::make_engine(spec.seed, "world/planted" + std::to_string(p));
    std::vector<std::size_t> idx(spec.n_users);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t j = 0; j < planted; ++j) std::swap(idx[j], idx[j + rng::uniform_index(eng, idx.size() - j)]);
    for (std::size_t j = 0; j < planted; ++j) w.truth[idx[j]][p] = true;
  }

  const std::size_t width = std::to_string(spec.n_users).size();
  for (std::size_t u = 0; u < spec.n_users; ++u) {
    auto eng = rng::make_engine(spec.seed, "world/user" + std::to_string(u));
    auto v = detail::unit_gaussian(eng, d);
    for (std::size_t p = 0; p < spec.pairs.size(); ++p)
      if (w.truth[u][p])
        for (std::size_t j = 0; j < d; ++j) v[j] += spec.effect_delta * axes[p][j];
    UserRecord rec;
    std::string num = std::to_string(u);
    rec.user_id = "u" + std::string(width - num.size(), '0') + num;
    rec.n_posts = 2;
    w.users.push_back(std::move(rec));
    append("", v);  // token filled below
  }
  assign_user_tokens(w.users, "usr");
  for (std::size_t u = 0; u < spec.n_users; ++u) vocab[vocab.size() - spec.n_users + u] = w.users[u].token;
  w.table = EmbeddingTable(std::move(vocab), std::move(matrix), d);
  return w;
}

// One-sample Kolmogorov-Smirnov distance of samples to Uniform(0,1).
inline double ks_uniform(std::vector<double> p) {
  if (p.empty()) return kNaN;
  std::sort(p.begin(), p.end());
  const double n = static_cast<double>(p.size());
  double D = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double x = std::clamp(p[i], 0.0, 1.0);
    D = std::max({D, (i + 1) / n - x, x - i / n});
  }
  return D;
}

// max |F_n(x) - x| over the distinct observed values x only. For p-values on a
// coarse lattice (tiny m, n) this measures calibration at attainable levels,
// where the continuous KS distance is dominated by the lattice gaps.
inline double ks_lattice(std::vector<double> p) {
  if (p.empty()) return kNaN;
  std::sort(p.begin(), p.end());
  const double n = static_cast<double>(p.size());
  double D = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i + 1 < p.size() && p[i + 1] == p[i]) continue;
    D = std::max(D, std::abs((i + 1) / n - p[i]));
  }
  return D;
}

struct CalibrationReport {
  std::size_t n_null = 0;
  std::size_t n_alt = 0;
  std::size_t n_rejections = 0;
  double ks_stat = kNaN;          // null p-values vs Uniform(0,1)
  double ks_lattice_stat = kNaN;
  double rej_rate_at_alpha = kNaN;  // raw p <= alpha among nulls
  double empirical_fdp = kNaN;      // false / total BH rejections (0 when none)
  double power = kNaN;              // true BH rejections / alternatives
  bool coarse_m_warning = false;
  ScoreResult scores;
};

inline CalibrationReport calibration_report(const World& world, const PermutationConfig& cfg) {
  CalibrationReport rep;
  rep.scores = score_all(world.table, world.users, world.pairs, cfg);
  const std::size_t P = world.pairs.size();
  std::vector<double> null_p;
  std::size_t null_rej = 0, false_disc = 0, true_disc = 0;
  for (std::size_t c = 0; c < rep.scores.rows.size(); ++c) {
    const auto& row = rep.scores.rows[c];
    const bool alt = world.truth[c / P][c % P];
    (alt ? rep.n_alt : rep.n_null)++;
    if (row.signif_bh) {
      ++rep.n_rejections;
      (alt ? true_disc : false_disc)++;
    }
    if (!alt && !std::isnan(row.p_perm)) {
      null_p.push_back(row.p_perm);
      if (row.p_perm <= cfg.alpha) ++null_rej;
    }
  }
  rep.ks_stat = ks_uniform(null_p);
  rep.ks_lattice_stat = ks_lattice(null_p);
  if (!null_p.empty()) rep.rej_rate_at_alpha = static_cast<double>(null_rej) / null_p.size();
  rep.empirical_fdp = rep.n_rejections ? static_cast<double>(false_disc) / rep.n_rejections : 0.0;
  if (rep.n_alt) rep.power = static_cast<double>(true_disc) / rep.n_alt;
  rep.coarse_m_warning = coarse_permutations(cfg);
  return rep;
}

}  // namespace polar
