// polar: per-user lexical association scoring, evaluation and diagnostics.
//
// Exit codes: 0 success, 2 usage or input error, 3 internal invariant violation.

#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "polar/commands.hpp"

namespace {

namespace cmd = polar::cmd;

constexpr int kExitInput = 2;
constexpr int kExitInternal = 3;

struct Common {
  std::string out;
  bool overwrite = false;
};

void add_out(CLI::App* sub, Common& c) {
  sub->add_option("--out", c.out, "Output directory (created if absent)")->required();
  sub->add_flag("--overwrite", c.overwrite, "Replace existing output files");
}

void add_corpus(CLI::App* sub, cmd::CorpusOptions& o, std::string& model_dir, std::string& posts,
                std::string& lexicon, std::size_t& post_cap) {
  sub->add_option("--model-dir", model_dir, "Directory with vocab.txt, embeddings.f32, meta.json")->required();
  sub->add_option("--posts", posts, "Posts CSV: user_id, text[, label][, t_index][, targets]")->required();
  sub->add_option("--lexicon", lexicon, "Attribute pairs JSON")->required();
  sub->add_option("--permutations", o.perm.M, "Monte Carlo permutations M")->capture_default_str();
  sub->add_option("--seed", o.perm.master_seed, "Master seed")->capture_default_str();
  sub->add_option("--alpha", o.perm.alpha, "BH-FDR level")->capture_default_str();
  sub->add_option("--min-posts", o.min_posts, "Minimum posts per retained user")->capture_default_str();
  sub->add_option("--post-cap", post_cap, "Subsample each user's posts to at most this many");
}

void finish_corpus(cmd::CorpusOptions& o, const std::string& model_dir, const std::string& posts,
                   const std::string& lexicon, CLI::App* sub, std::size_t post_cap) {
  o.model_dir = model_dir;
  o.posts = posts;
  o.lexicon = lexicon;
  if (sub->count("--post-cap")) o.post_cap = post_cap;
}

void warn(const std::vector<std::string>& lines) {
  for (const auto& l : lines) std::cerr << "warning: " << l << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polar: per-user lexical association tests in embedding space"};
  app.require_subcommand(1);
  Common common;

  cmd::CorpusOptions score_opt;
  std::string s_model, s_posts, s_lex;
  std::size_t s_cap = 0;
  auto* score = app.add_subcommand("score", "Score every user against every attribute pair");
  add_corpus(score, score_opt, s_model, s_posts, s_lex, s_cap);
  add_out(score, common);

  cmd::EvalOptions eval_opt;
  std::string e_scores, e_wide, e_pos;
  auto* eval = app.add_subcommand("eval", "Cross-validated logistic regression on axis scores");
  auto* e_long_opt = eval->add_option("--scores", e_scores, "Long per_user_scores.csv from `polar score`");
  auto* e_wide_opt = eval->add_option("--wide", e_wide, "Wide CSV: user_id, one column per axis, label");
  e_long_opt->excludes(e_wide_opt);
  eval->add_option("--positive-label", e_pos, "Label treated as the positive class");
  eval->add_option("--k-folds", eval_opt.cfg.k_folds, "Stratified folds")->capture_default_str();
  eval->add_option("--top-k", eval_opt.cfg.top_k_axes, "Largest k in the top-k sweep (0 = all axes)")
      ->capture_default_str();
  eval->add_option("--n-boot", eval_opt.cfg.n_boot, "Bootstrap resamples")->capture_default_str();
  eval->add_option("--ece-bins", eval_opt.cfg.ece_bins, "Equal-width ECE bins")->capture_default_str();
  eval->add_option("--l2", eval_opt.cfg.l2_lambda, "L2 penalty on weights")->capture_default_str();
  eval->add_option("--seed", eval_opt.cfg.seed, "Seed")->capture_default_str();
  eval->add_option("--alpha", eval_opt.cfg.alpha, "BH level for paired comparisons")->capture_default_str();
  add_out(eval, common);

  cmd::TrajOptions traj_opt;
  std::string t_model, t_posts, t_lex;
  std::size_t t_cap = 0;
  auto* traj = app.add_subcommand("traj", "Cumulative per-post trajectories and drift ranking");
  add_corpus(traj, traj_opt.corpus, t_model, t_posts, t_lex, t_cap);
  traj->add_option("--top-q", traj_opt.top_q, "Fraction of users flagged as fastest drifters")->capture_default_str();
  traj->add_option("--axes", traj_opt.axes, "Axes used for drift ranking (default: all)")->delimiter(',');
  std::vector<std::string> t_snaps;
  traj->add_option("--snapshots", t_snaps, "Per-step model dirs (snapshot mode); default is the post-mean proxy")
      ->delimiter(',');
  add_out(traj, common);

  cmd::SimOptions sim_opt;
  std::string m_spec;
  auto* sim = app.add_subcommand("sim", "Calibration report on a synthetic world");
  sim->add_option("--spec", m_spec, "Synthetic world spec JSON")->required();
  sim->add_option("--permutations", sim_opt.perm.M, "Monte Carlo permutations M")->capture_default_str();
  sim->add_option("--seed", sim_opt.perm.master_seed, "Permutation master seed")->capture_default_str();
  sim->add_option("--alpha", sim_opt.perm.alpha, "BH-FDR level")->capture_default_str();
  add_out(sim, common);

  std::string p_scores, p_traj, p_pca;
  auto* plot = app.add_subcommand("plot", "Render SVG figures from earlier outputs");
  plot->add_option("--scores", p_scores, "per_user_scores.csv")->required();
  plot->add_option("--trajectories", p_traj, "trajectories.csv");
  plot->add_option("--pca", p_pca, "fig2_pca.tsv from `polar eval`");
  add_out(plot, common);

  std::string x_model;
  auto* check = app.add_subcommand("export-check", "Validate a model directory");
  check->add_option("--model-dir", x_model, "Directory to validate")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    cmd::Outputs outs;
    if (*score) {
      finish_corpus(score_opt, s_model, s_posts, s_lex, score, s_cap);
      auto run = cmd::run_score(score_opt);
      warn(run.warnings);
      outs = std::move(run.outputs);
    } else if (*eval) {
      if (e_scores.empty() == e_wide.empty()) {
        std::cerr << "error: eval needs exactly one of --scores or --wide\n";
        return kExitInput;
      }
      eval_opt.scores = e_scores.empty() ? e_wide : e_scores;
      eval_opt.wide = !e_wide.empty();
      if (eval->count("--positive-label")) eval_opt.positive_label = e_pos;
      outs = cmd::run_eval(eval_opt);
    } else if (*traj) {
      finish_corpus(traj_opt.corpus, t_model, t_posts, t_lex, traj, t_cap);
      traj_opt.snapshots.assign(t_snaps.begin(), t_snaps.end());
      outs = cmd::run_traj(traj_opt);
    } else if (*sim) {
      sim_opt.spec = m_spec;
      outs = cmd::run_sim(sim_opt);
    } else if (*plot) {
      cmd::PlotOptions po;
      po.scores = p_scores;
      if (!p_traj.empty()) po.trajectories = p_traj;
      if (!p_pca.empty()) po.pca = p_pca;
      outs = cmd::run_plot(po);
    } else if (*check) {
      const auto res = cmd::run_export_check(x_model);
      std::cout << res.report.dump(2) << '\n';
      return res.ok ? 0 : kExitInput;
    }
    cmd::commit_outputs(common.out, outs, common.overwrite);
    for (const auto& o : outs) std::cerr << "wrote " << (std::filesystem::path(common.out) / o.name).string() << '\n';
    return 0;
  } catch (const polar::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == polar::ErrorKind::Internal ? kExitInternal : kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}
