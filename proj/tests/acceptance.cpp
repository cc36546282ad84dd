// Acceptance run: one PASS/FAIL line per criterion. Exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "polar/commands.hpp"
#include "polar/demo.hpp"
#include "polar/evaluation.hpp"
#include "polar/metrics.hpp"
#include "polar/synthetic.hpp"
#include "polar/trajectory.hpp"

namespace fs = std::filesystem;
using polar::RowMatrix;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::vector<double> unit(std::vector<double> v) {
  const double n = polar::norm2(v);
  for (double& x : v) x /= n;
  return v;
}

RowMatrix random_rows(std::mt19937_64& g, std::size_t k, std::size_t d) {
  std::normal_distribution<double> nd;
  RowMatrix m(0, d);
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> r(d);
    for (double& x : r) x = nd(g);
    m.push_row(unit(r));
  }
  return m;
}

// Effect size from explicit cosines and E[x^2] - E[x]^2.
double brute_effect(const std::vector<double>& u, const RowMatrix& A, const RowMatrix& B) {
  auto cos = [&](std::span<const double> r) {
    double num = 0, nr = 0, nu = 0;
    for (std::size_t j = 0; j < u.size(); ++j) {
      num += r[j] * u[j];
      nr += r[j] * r[j];
      nu += u[j] * u[j];
    }
    return num / std::sqrt(nr * nu);
  };
  double sa = 0, sb = 0, s2 = 0;
  for (std::size_t i = 0; i < A.rows(); ++i) {
    const double c = cos(A.row(i));
    sa += c;
    s2 += c * c;
  }
  for (std::size_t i = 0; i < B.rows(); ++i) {
    const double c = cos(B.row(i));
    sb += c;
    s2 += c * c;
  }
  const double N = static_cast<double>(A.rows() + B.rows());
  const double mu = (sa + sb) / N;
  return (sa / A.rows() - sb / B.rows()) / std::sqrt(s2 / N - mu * mu);
}

Outcome statistic_oracle() {
  std::mt19937_64 g(1);
  double worst_s = 0, worst_num = 0;
  for (int it = 0; it < 200; ++it) {
    const std::size_t d = 2 + g() % 7, m = 1 + g() % 4, n = 1 + g() % 4;
    const auto A = random_rows(g, m, d), B = random_rows(g, n, d);
    const auto uh = random_rows(g, 1, d);
    const std::vector<double> u(uh.row(0).begin(), uh.row(0).end());
    worst_s = std::max(worst_s, std::abs(polar::effect_size(u, A, B) - brute_effect(u, A, B)));
    double num = 0;
    for (std::size_t j = 0; j < d; ++j) {
      double a = 0, b = 0;
      for (std::size_t i = 0; i < m; ++i) a += A(i, j) / m;
      for (std::size_t i = 0; i < n; ++i) b += B(i, j) / n;
      num += (a - b) * u[j];
    }
    worst_num = std::max(worst_num, std::abs(polar::centroid_numerator(u, A, B) - num));
  }
  return {worst_s <= 1e-9 && worst_num <= 1e-9, fmt("max |s err| %.2e, max |numerator err| %.2e", worst_s, worst_num)};
}

Outcome exact_vs_monte_carlo() {
  std::mt19937_64 g(2);
  std::normal_distribution<double> nd;
  polar::PermutationConfig cfg;
  cfg.M = 2000;
  int inside = 0;
  const int total = 500;
  for (int it = 0; it < total; ++it) {
    const std::size_t m = 1 + g() % 5;
    const std::size_t n = 1 + g() % std::min<std::size_t>(5, 10 - m);
    std::vector<double> d(m + n);
    for (double& x : d) x = nd(g);
    const auto ex = polar::exact_permutation_p(d, m);
    const double p = polar::permutation_p(d, m, cfg, "acceptance/" + std::to_string(it));
    const double se = std::sqrt(ex.tail * (1 - ex.tail) / cfg.M);
    if (std::abs(p - ex.tail) <= 3 * se) ++inside;
  }
  const double frac = static_cast<double>(inside) / total;
  return {frac >= 0.99, fmt("%.1f%% of 500 within 3 SE of the exact tail", 100 * frac)};
}

Outcome null_calibration() {
  polar::SynthSpec spec;
  spec.n_users = 200;
  spec.dim = 32;
  spec.pairs.assign(10, {8, 8});
  spec.seed = 123;
  polar::PermutationConfig cfg;
  cfg.M = 2000;
  cfg.master_seed = 123;
  const auto rep = polar::calibration_report(polar::generate_world(spec), cfg);
  const bool ok = rep.rej_rate_at_alpha >= 0.03 && rep.rej_rate_at_alpha <= 0.07 && rep.ks_stat < 0.08;
  return {ok, fmt("%.0f null p-values, rejection rate %.4f, KS %.4f", static_cast<double>(rep.n_null),
                  rep.rej_rate_at_alpha, rep.ks_stat)};
}

Outcome fdr_control() {
  double fdp = 0, power = 0, planted_s = 0;
  std::size_t planted_cells = 0;
  const int seeds = 20;
  for (int sd = 0; sd < seeds; ++sd) {
    polar::SynthSpec spec;
    spec.n_users = 200;
    spec.dim = 64;
    spec.pairs = {{16, 16}};
    spec.effect_frac = 0.1;
    spec.effect_delta = 3.0;
    spec.seed = 1000 + static_cast<std::uint64_t>(sd);
    const auto world = polar::generate_world(spec);
    polar::PermutationConfig cfg;
    cfg.M = 2000;
    const auto rep = polar::calibration_report(world, cfg);
    fdp += rep.empirical_fdp / seeds;
    power += rep.power / seeds;
    for (std::size_t c = 0; c < rep.scores.rows.size(); ++c)
      if (world.truth[c][0]) {
        planted_s += rep.scores.rows[c].s;
        ++planted_cells;
      }
  }
  planted_s /= static_cast<double>(planted_cells);
  const bool ok = planted_s >= 1.0 && fdp <= 0.10 && power >= 0.8;
  return {ok, fmt("planted mean s %.3f, mean FDP %.4f, mean power %.4f over 20 seeds", planted_s, fdp, power)};
}

double pairwise_auroc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1;
      num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  return num / pairs;
}

Outcome metric_oracles() {
  namespace m = polar::metrics;
  std::mt19937_64 g(5);
  int auroc_ok = 0;
  for (int it = 0; it < 100; ++it) {
    const std::size_t n = 4 + g() % 40;
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = i < 2 ? static_cast<int>(i) : static_cast<int>(g() % 2);
    std::vector<double> s(n);
    for (auto& v : s) v = static_cast<double>(g() % 5);
    if (m::auroc(s, y) == pairwise_auroc(s, y)) ++auroc_ok;
  }
  using V = std::vector<double>;
  using L = std::vector<int>;
  // Brier: (0.01 + 0.04 + 0.04 + 0.01) / 4. PR-AUC: positives at ranks 2 and 4.
  // ECE: bin 0.1 has accuracy 1/2 (gap 0.4), bin 0.9 has accuracy 1 (gap 0.1), each half the mass.
  const bool fixtures = std::abs(m::brier(V{0.9, 0.2, 0.8, 0.1}, L{1, 0, 1, 0}) - 0.025) < 1e-12 &&
                        std::abs(m::pr_auc(V{0.9, 0.8, 0.7, 0.6}, L{0, 1, 0, 1}) - 0.5) < 1e-12 &&
                        std::abs(m::ece(V{0.1, 0.1, 0.9, 0.9}, L{0, 1, 1, 1}, 10) - 0.25) < 1e-12;
  const bool trivial = m::auroc(V{0.1, 0.2, 0.8, 0.9}, L{0, 0, 1, 1}) == 1.0 &&
                       m::brier(V{0.0, 1.0}, L{0, 1}) == 0.0 && m::ece(V{0.0, 1.0}, L{0, 1}, 10) == 0.0 &&
                       m::pr_auc(V{0.1, 0.9}, L{0, 1}) == 1.0;
  return {auroc_ok == 100 && fixtures && trivial,
          fmt("AUROC exact on %.0f/100 tied instances", auroc_ok) + ", fixtures " + (fixtures ? "match" : "MISMATCH") +
              ", trivial cases " + (trivial ? "exact" : "MISMATCH")};
}

Outcome protocol_profile() {
  std::mt19937_64 g(21);
  std::normal_distribution<double> nd;
  const std::size_t n = 200;
  RowMatrix X(n, 4);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 2);
    X(i, 0) = 4.0 * y[i] + nd(g);
    for (std::size_t j = 1; j < 4; ++j) X(i, j) = nd(g);
  }
  const std::vector<std::string> names{"signal", "noise1", "noise2", "noise3"};
  const auto r = polar::run_protocol(X, y, names, polar::EvalConfig{});
  double spread = 0;
  for (const auto& rep : r.top_k) spread = std::max(spread, std::abs(rep.auroc - r.top_k[0].auroc));
  const bool none = std::none_of(r.paired_bh.begin(), r.paired_bh.end(), [](bool b) { return b; });
  std::ostringstream os;
  os << "max |AUROC_k - AUROC_1| " << fmt("%.4f", spread) << ", BH rejections vs k=1: "
     << std::count(r.paired_bh.begin(), r.paired_bh.end(), true);
  return {r.top_k.size() == 4 && spread < 0.02 && none, os.str()};
}

std::string join_outputs(const polar::cmd::Outputs& outs) {
  std::string s;
  for (const auto& o : outs) s += "== " + o.name + "\n" + o.content;
  return s;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "polar_acceptance_determinism";
  fs::remove_all(root);
  polar::demo::write_demo(root);
  polar::cmd::CorpusOptions co;
  co.model_dir = root / "model";
  co.posts = root / "posts.csv";
  co.lexicon = root / "lexicon.json";

  std::vector<std::string> score_runs, eval_runs;
  for (const char* threads : {"1", "1", "4"}) {
    setenv("POLAR_THREADS", threads, 1);
    const auto sc = polar::cmd::run_score(co);
    score_runs.push_back(join_outputs(sc.outputs));
    const fs::path dir = root / ("run_" + std::to_string(score_runs.size()));
    polar::cmd::commit_outputs(dir, sc.outputs, true);
    polar::cmd::EvalOptions eo;
    eo.scores = dir / "per_user_scores.csv";
    eo.positive_label = "bot";
    eval_runs.push_back(join_outputs(polar::cmd::run_eval(eo)));
  }
  unsetenv("POLAR_THREADS");
  const bool same_score = score_runs[0] == score_runs[1] && score_runs[0] == score_runs[2];
  // eval_report.json names the scores path, which differs by run directory.
  auto strip_path = [&](std::string s, std::size_t run) {
    const std::string p = (root / ("run_" + std::to_string(run)) / "per_user_scores.csv").string();
    for (auto pos = s.find(p); pos != std::string::npos; pos = s.find(p)) s.replace(pos, p.size(), "<scores>");
    return s;
  };
  const bool same_eval =
      strip_path(eval_runs[0], 1) == strip_path(eval_runs[1], 2) && strip_path(eval_runs[0], 1) == strip_path(eval_runs[2], 3);
  fs::remove_all(root);
  return {same_score && same_eval, std::string("score runs ") + (same_score ? "identical" : "DIFFER") + ", eval runs " +
                                       (same_eval ? "identical" : "DIFFER") + " across reruns and POLAR_THREADS 1/4"};
}

Outcome degeneracy() {
  // Attribute rows live in the first three coordinates; the flat users point
  // along the fourth, so every cosine is 0.
  std::mt19937_64 g(8);
  std::normal_distribution<double> nd;
  const std::size_t d = 4;
  polar::AttributePair pair;
  pair.name = "ax";
  pair.A = RowMatrix(0, d);
  pair.B = RowMatrix(0, d);
  for (int i = 0; i < 8; ++i) {
    pair.A.push_row(unit({1.0 + 0.2 * nd(g), 0.2 * nd(g), 0.2 * nd(g), 0.0}));
    pair.B.push_row(unit({0.2 * nd(g), 1.0 + 0.2 * nd(g), 0.2 * nd(g), 0.0}));
  }
  polar::EmbeddingTable table({"[UNK]"}, {0, 0, 0, 1}, d);
  std::vector<polar::UserRecord> users;
  for (int u = 0; u < 40; ++u) {
    polar::UserRecord r;
    r.user_id = "u" + std::to_string(u);
    r.n_posts = 2;
    if (u % 10 == 3) r.vector = std::vector<double>{0, 0, 0, 1};
    else if (u < 10) r.vector = unit({1, 0.05 * nd(g), 0.05 * nd(g), 0.1});  // strongly A-aligned
    else r.vector = unit({nd(g), nd(g), nd(g), nd(g)});
    users.push_back(r);
  }
  polar::PermutationConfig cfg;
  cfg.M = 500;
  const std::vector<polar::AttributePair> pairs{pair};
  const auto res = polar::score_all(table, users, pairs, cfg);
  std::size_t nan_cells = 0;
  bool nan_ok = true;
  std::vector<double> finite_p;
  std::vector<std::size_t> finite_idx;
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    const auto& r = res.rows[i];
    if (std::isnan(r.s) || std::isnan(r.p_perm)) {
      ++nan_cells;
      nan_ok &= std::isnan(r.s) && std::isnan(r.p_perm) && !r.signif_bh;
    } else {
      finite_p.push_back(r.p_perm);
      finite_idx.push_back(i);
    }
  }
  const auto bh = polar::bh_fdr(finite_p, cfg.alpha);
  bool bh_ok = true;
  std::size_t rejections = 0;
  for (std::size_t k = 0; k < finite_idx.size(); ++k) {
    bh_ok &= res.rows[finite_idx[k]].signif_bh == bh[k];
    rejections += bh[k];
  }
  return {nan_cells == 4 && nan_ok && bh_ok && rejections > 0,
          fmt("%.0f NaN cells, none significant; BH over the %.0f finite cells matches (%.0f rejections)",
              static_cast<double>(nan_cells), static_cast<double>(finite_p.size()), static_cast<double>(rejections))};
}

Outcome trajectory() {
  // Tokens a0..a2 near e0 (side A), b0..b2 near e1 (side B), n0..n2 noise.
  polar::EmbeddingTable table({"a0", "a1", "a2", "b0", "b1", "b2", "n0", "n1", "n2", "[UNK]"},
                              {1, 0.1f, 0, 0, 1, 0, 0.1f, 0, 0.9f, 0, 0, 0.2f, 0.1f, 1, 0, 0, 0, 1, 0.1f, 0,
                               0, 0.9f, 0, 0.2f, 0.2f, 0.2f, 1, 0, 0.1f, 0.3f, 0, 1, 0.3f, 0.1f, 0.7f, 0.7f, 0, 0, 0, 1},
                              4);
  const auto tcfg = polar::TokenizerConfig::from_table(table);
  const std::vector<polar::AttributePair> pairs{
      polar::build_pair(table, tcfg, "ax", {"a0", "a1", "a2"}, {"b0", "b1", "b2"})};
  std::mt19937_64 g(12);
  std::vector<polar::PostSequence> seqs;
  const std::size_t T = 8;
  for (int u = 0; u < 19; ++u) {
    // Flat users repeat one mixed post.
    polar::PostSequence s{"flat" + std::to_string(u), {}};
    const std::vector<std::size_t> ids{g() % 3, 3 + g() % 3, 6 + g() % 3};
    for (std::size_t t = 0; t < T; ++t) s.posts.push_back({static_cast<long long>(t), ids});
    seqs.push_back(s);
  }
  polar::PostSequence drifter{"drifter", {}};
  drifter.posts.push_back({0, {3, 4, 6}});
  for (std::size_t t = 1; t < T; ++t) drifter.posts.push_back({static_cast<long long>(t), {t % 3, 6 + t % 3}});
  seqs.push_back(drifter);

  polar::PermutationConfig cfg;
  cfg.M = 200;
  const auto rows = polar::cumulative_scores_all(table, seqs, pairs, cfg);
  const auto rep = polar::flag_drifters(rows, 0.05);
  const bool flagged = rep.flagged == std::vector<std::string>{"drifter"};

  double worst = 0;
  for (const auto& seq : seqs) {
    const auto full = polar::cumulative_scores(table, seq, pairs, cfg);
    for (std::size_t cut = 2; cut < T; ++cut) {
      polar::PostSequence head{seq.user_id, {seq.posts.begin(), seq.posts.begin() + static_cast<long>(cut)}};
      const auto part = polar::cumulative_scores(table, head, pairs, cfg);
      for (std::size_t i = 0; i < part.size(); ++i) {
        if (std::isnan(part[i].s) != std::isnan(full[i].s)) worst = 1e300;
        else if (!std::isnan(part[i].s)) worst = std::max(worst, std::abs(part[i].s - full[i].s));
      }
    }
  }
  return {flagged && worst <= 1e-9, std::string("flagged {") + (rep.flagged.empty() ? "" : rep.flagged[0]) +
                                        (rep.flagged.size() > 1 ? ", ..." : "") + "}, " +
                                        fmt("max prefix deviation %.2e", worst)};
}

Outcome schema() {
  const std::string want =
      "user_id,pair,s,p_perm,n_posts,n_pos_attr,n_neg_attr,label_majority,targets,signif_bh_fdr_0.05";
  std::ostringstream os;
  polar::write_scores_csv(os, std::vector<polar::ScoreRow>{});
  const std::string got = os.str().substr(0, os.str().find('\n'));
  return {got == want, "header: " + got};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"statistic oracle", 5, statistic_oracle},
      {"exact vs Monte Carlo", 60, exact_vs_monte_carlo},
      {"null calibration", 120, null_calibration},
      {"FDR control", 300, fdr_control},
      {"metric oracles", 0, metric_oracles},
      {"protocol flat k-profile", 0, protocol_profile},
      {"determinism", 0, determinism},
      {"degeneracy", 0, degeneracy},
      {"trajectory", 0, trajectory},
      {"schema conformance", 0, schema},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.limit_s == 0 || secs < c.limit_s;
    const bool pass = out.pass && in_time;
    failures += !pass;
    std::printf("%s  %-24s %s (%.2fs%s)\n", pass ? "PASS" : "FAIL", c.name, out.detail.c_str(), secs,
                in_time ? "" : ", over time limit");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
