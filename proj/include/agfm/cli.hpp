#pragma once

#include "agfm/checkpoint.hpp"
#include "agfm/graph_io.hpp"
#include "agfm/inference.hpp"
#include "agfm/metrics.hpp"
#include "agfm/pretrain.hpp"
#include "agfm/prompt.hpp"
#include "agfm/synth.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace agfm::cli {

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parses a --beta value: "auto" or a finite non-negative number.
inline std::optional<double> parse_beta(const std::string& text) {
  if (text == "auto") return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v) || v < 0.0) {
    throw CliError("--beta must be 'auto' or a non-negative number, got '" + text + "'");
  }
  return v;
}

/// Thread cap from AGFM_THREADS; unset or 0 means sequential.
inline std::size_t threads_from_env() {
  const char* env = std::getenv("AGFM_THREADS");
  if (!env || !*env) return 0;
  std::size_t v = 0;
  const std::string_view s(env);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw CliError("AGFM_THREADS must be a non-negative integer, got '" + std::string(s) + "'");
  }
  return v;
}

/// One node id per line; blank lines and lines starting with '#' are skipped.
inline std::vector<NodeId> read_id_file(const std::filesystem::path& path, std::size_t num_nodes) {
  const std::string text = detail::read_text(path);
  std::vector<NodeId> ids;
  const auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (line.empty() || line.front() == '#') continue;
    const auto v = detail::parse_number<std::uint64_t>(line, path, i + 1);
    if (v >= num_nodes) {
      throw CliError("node id " + std::to_string(v) + " >= N=" + std::to_string(num_nodes) +
                     " at " + detail::where(path, i + 1));
    }
    ids.push_back(static_cast<NodeId>(v));
  }
  if (ids.empty()) throw CliError(path.string() + " lists no node ids");
  return ids;
}

inline std::string format_score(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

/// scores.csv: one comment line with the run's scoring metadata, then
/// "node,score,excluded" and one row per node.
inline void write_scores_csv(const ScoreVector& sv, const std::filesystem::path& path) {
  std::string buf = "# mode=" + std::string(to_string(sv.mode)) +
                    " beta_used=" + format_score(sv.beta_used) +
                    " clipped=" + std::to_string(sv.clipped) + "\n";
  buf += "node,score,excluded\n";
  for (std::size_t i = 0; i < sv.scores.size(); ++i) {
    buf += std::to_string(i);
    buf += ',';
    buf += format_score(sv.scores[i]);
    buf += ',';
    buf += sv.excluded[i] ? '1' : '0';
    buf += '\n';
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CliError("cannot write " + path.string());
  out << buf;
  if (!out) throw CliError("write failed: " + path.string());
}

struct ScoresFile {
  std::vector<double> scores;
  std::vector<std::uint8_t> excluded;
};

inline ScoresFile read_scores_csv(const std::filesystem::path& path) {
  const std::string text = detail::read_text(path);
  const auto lines = detail::split_lines(text);
  std::size_t i = 0;
  while (i < lines.size() && !lines[i].empty() && lines[i].front() == '#') ++i;
  if (i >= lines.size() || lines[i] != "node,score,excluded") {
    throw CliError(path.string() + ": expected header 'node,score,excluded'");
  }
  ScoresFile f;
  for (++i; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = detail::split_fields(lines[i]);
    if (fields.size() != 3) throw CliError("expected 3 fields at " + detail::where(path, i + 1));
    const auto node = detail::parse_number<std::uint64_t>(fields[0], path, i + 1);
    if (node != f.scores.size()) {
      throw CliError("node ids must be 0..N-1 in order at " + detail::where(path, i + 1));
    }
    f.scores.push_back(detail::parse_number<double>(fields[1], path, i + 1));
    const auto ex = detail::parse_number<int>(fields[2], path, i + 1);
    if (ex != 0 && ex != 1) throw CliError("excluded must be 0 or 1 at " + detail::where(path, i + 1));
    f.excluded.push_back(static_cast<std::uint8_t>(ex));
  }
  return f;
}

/// labels.csv ("node,label") for a graph of `num_nodes` nodes.
inline std::vector<std::uint8_t> read_labels_csv(const std::filesystem::path& path,
                                                 std::size_t num_nodes) {
  const std::string text = detail::read_text(path);
  const auto lines = detail::split_lines(text);
  if (lines.empty() || lines[0] != "node,label") {
    throw CliError(path.string() + ": expected header 'node,label'");
  }
  std::vector<int> seen(num_nodes, -1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = detail::split_fields(lines[i]);
    if (fields.size() != 2) throw CliError("expected 2 fields at " + detail::where(path, i + 1));
    const auto node = detail::parse_number<std::uint64_t>(fields[0], path, i + 1);
    const auto label = detail::parse_number<int>(fields[1], path, i + 1);
    if (node >= num_nodes) {
      throw CliError("node " + std::to_string(node) + " is not in the scores file at " +
                     detail::where(path, i + 1));
    }
    if (label != 0 && label != 1) throw CliError("label not in {0,1} at " + detail::where(path, i + 1));
    seen[node] = label;
  }
  std::vector<std::uint8_t> labels(num_nodes);
  for (std::size_t i = 0; i < num_nodes; ++i) {
    if (seen[i] < 0) throw CliError(path.string() + " has no label for node " + std::to_string(i));
    labels[i] = static_cast<std::uint8_t>(seen[i]);
  }
  return labels;
}

inline std::string format_eval(const EvalResult& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "auroc=%.6f auprc=%.6f n_pos=%zu n_neg=%zu", r.auroc, r.auprc,
                r.n_pos, r.n_neg);
  return buf;
}

namespace detail {

// Re-reads a written scores file and checks it matches what was scored.
inline void verify_scores(const ScoreVector& sv, const std::filesystem::path& path) {
  const ScoresFile f = read_scores_csv(path);
  if (f.scores.size() != sv.scores.size() || f.excluded != sv.excluded) {
    throw CliError("verification of " + path.string() + " failed");
  }
}

inline void finish_scores(const ScoreVector& sv, const AttributedGraph& g,
                          const std::filesystem::path& out, std::ostream& os) {
  write_scores_csv(sv, out);
  verify_scores(sv, out);
  os << "mode=" << to_string(sv.mode) << " beta_used=" << format_score(sv.beta_used)
     << " clipped=" << sv.clipped << "\n";
  if (sv.clipped > 0) {
    std::cerr << "warning: " << sv.clipped << " node(s) hit the exp-argument clamp of +-"
              << kScoreExpClip << "\n";
  }
  if (g.labels) {
    std::size_t pos = 0, neg = 0;
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
      if (sv.excluded[i]) continue;
      ((*g.labels)[i] ? pos : neg) += 1;
    }
    if (pos > 0 && neg > 0) os << format_eval(evaluate(sv.scores, *g.labels, sv.excluded)) << "\n";
  }
}

}  // namespace detail

/// Runs one command line; returns the process exit code. Regular output goes
/// to `os`, diagnostics to stderr.
inline int run(int argc, const char* const* argv, std::ostream& os = std::cout) {
  CLI::App app{"Graph anomaly detection with residual prototypes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "agfm 1.0");

  std::string graph_dir, out_path, model_path, prompt_path, report_path, beta_text = "auto";
  std::string normals_path, targets_path, scores_path, labels_path, target_text = "normal";
  std::uint64_t seed = 0;

  TrainConfig tc;
  auto* pretrain = app.add_subcommand("pretrain", "Pretrain on a labeled graph");
  pretrain->add_option("--graph", graph_dir, "Training graph directory")->required();
  pretrain->add_option("--out", out_path, "Model checkpoint to write")->required();
  pretrain->add_option("--epochs", tc.epochs)->capture_default_str();
  pretrain->add_option("--lr", tc.lr)->capture_default_str();
  pretrain->add_option("--alpha", tc.alpha)->capture_default_str();
  pretrain->add_option("--hidden", tc.hidden)->capture_default_str();
  pretrain->add_option("--proto-dim", tc.proto_dim)->capture_default_str();
  pretrain->add_option("--dprime", tc.dprime)->capture_default_str();
  pretrain->add_option("--mu", tc.mu)->capture_default_str();
  pretrain->add_option("--sigma", tc.sigma)->capture_default_str();
  pretrain->add_option("--seed", seed)->capture_default_str();
  pretrain->add_option("--report", report_path, "Per-epoch loss CSV to write");

  auto* score = app.add_subcommand("score", "Zero-shot scoring of an unseen graph");
  score->add_option("--model", model_path)->required();
  score->add_option("--graph", graph_dir)->required();
  score->add_option("--out", out_path)->required();
  score->add_option("--beta", beta_text, "auto or a number")->capture_default_str();
  score->add_option("--seed", seed)->capture_default_str();

  TuneConfig tune_cfg;
  std::size_t shots = 0;
  auto* tune = app.add_subcommand("tune", "Few-shot prompt tuning on a target graph");
  tune->add_option("--model", model_path)->required();
  tune->add_option("--graph", graph_dir)->required();
  tune->add_option("--out", out_path, "Prompt file to write")->required();
  auto* shots_opt = tune->add_option("--shots", shots, "Sample K labeled shots");
  auto* normals_opt = tune->add_option("--normals", normals_path, "File of shot node ids");
  shots_opt->excludes(normals_opt);
  tune->add_option("--target", target_text)
      ->check(CLI::IsMember({"normal", "abnormal"}))
      ->capture_default_str();
  tune->add_option("--epochs", tune_cfg.epochs)->capture_default_str();
  tune->add_option("--lr", tune_cfg.lr)->capture_default_str();
  tune->add_option("--seed", seed)->capture_default_str();

  auto* score_few = app.add_subcommand("score-few", "Scoring with a tuned prompt");
  score_few->add_option("--model", model_path)->required();
  score_few->add_option("--prompt", prompt_path)->required();
  score_few->add_option("--graph", graph_dir)->required();
  score_few->add_option("--out", out_path)->required();
  score_few->add_option("--beta", beta_text)->capture_default_str();

  std::size_t size = 5;
  auto* score_sub = app.add_subcommand("score-subgraph", "Scoring from random-walk subgraphs");
  score_sub->add_option("--model", model_path)->required();
  score_sub->add_option("--graph", graph_dir)->required();
  score_sub->add_option("--out", out_path)->required();
  score_sub->add_option("--size", size)->capture_default_str();
  score_sub->add_option("--beta", beta_text)->capture_default_str();
  score_sub->add_option("--seed", seed)->capture_default_str();
  score_sub->add_option("--targets", targets_path, "File of target node ids");

  SynthConfig sc;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled graph");
  synth->add_option("--out", out_path, "Output graph directory")->required();
  synth->add_option("--nodes", sc.nodes)->required();
  synth->add_option("--rate", sc.anomaly_rate)->required();
  synth->add_option("--dim", sc.dim)->capture_default_str();
  synth->add_option("--blocks", sc.blocks)->capture_default_str();
  synth->add_option("--homophily", sc.homophily)->capture_default_str();
  synth->add_option("--seed", seed)->capture_default_str();

  auto* sim = app.add_subcommand("sim", "Global average edge similarity");
  sim->add_option("--graph", graph_dir)->required();

  auto* eval = app.add_subcommand("eval", "AUROC and AUPRC of a scores file");
  eval->add_option("--scores", scores_path)->required();
  eval->add_option("--labels", labels_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, os, std::cerr);
  }

  try {
    if (pretrain->parsed()) {
      tc.seed = seed;
      const AttributedGraph g = load_graph(graph_dir);
      const PretrainResult res = agfm::pretrain(g, tc);
      const std::string hash = save_model(out_path, res.model, to_json(tc));
      if (!identical(load_model(out_path).model, res.model)) {
        throw CliError("verification of " + out_path + " failed");
      }
      if (!report_path.empty()) write_report_csv(res.report, report_path);
      if (!res.report.epochs.empty()) {
        const EpochLosses& last = res.report.epochs.back();
        const double n = static_cast<double>(g.num_nodes);
        char buf[200];
        std::snprintf(buf, sizeof(buf),
                      "epoch=%zu l_bce=%.6g l_align=%.6g l_total=%.6g (per node %.6g)", last.epoch,
                      last.bce, last.align, last.total, last.total / n);
        os << buf << "\n";
      }
      os << "model=" << hash << "\n";
    } else if (score->parsed()) {
      const ModelCheckpoint ck = load_model(model_path);
      const AttributedGraph g = load_graph(graph_dir);
      ScoreOptions opt;
      opt.beta = parse_beta(beta_text);
      opt.seed = seed;
      const ScoreVector sv = score_zero_shot(ck.model, g, opt);
      detail::finish_scores(sv, g, out_path, os);
    } else if (tune->parsed()) {
      if (!shots_opt->count() && !normals_opt->count()) {
        throw CliError("tune needs --shots K or --normals FILE");
      }
      const ModelCheckpoint ck = load_model(model_path);
      const AttributedGraph g = load_graph(graph_dir);
      const PromptTarget target = parse_prompt_target(target_text);
      tune_cfg.seed = seed;
      const std::vector<NodeId> labeled =
          normals_opt->count()
              ? read_id_file(normals_path, g.num_nodes)
              : sample_shots(g, target == PromptTarget::normal ? 0 : 1, shots, seed);
      const TuneResult res = tune_prompt(ck.model, g, labeled, target, tune_cfg, ck.hash);
      save_prompt(out_path, res.prompt);
      (void)load_prompt(out_path, ck.hash);
      char buf[120];
      std::snprintf(buf, sizeof(buf), "target=%s shots=%zu l_pt=%.6g", to_string(target),
                    labeled.size(), res.final_loss);
      os << buf << "\n";
    } else if (score_few->parsed()) {
      const ModelCheckpoint ck = load_model(model_path);
      const PromptParameters prompt = load_prompt(prompt_path, ck.hash);
      const AttributedGraph g = load_graph(graph_dir);
      const ScoreVector sv = score_few_shot(ck.model, prompt, g, parse_beta(beta_text), ck.hash);
      detail::finish_scores(sv, g, out_path, os);
    } else if (score_sub->parsed()) {
      const ModelCheckpoint ck = load_model(model_path);
      const AttributedGraph g = load_graph(graph_dir);
      std::vector<NodeId> targets;
      if (!targets_path.empty()) targets = read_id_file(targets_path, g.num_nodes);
      ScoreOptions opt;
      opt.beta = parse_beta(beta_text);
      opt.seed = seed;
      opt.threads = threads_from_env();
      const ScoreVector sv = score_subgraph(ck.model, g, targets, size, opt);
      detail::finish_scores(sv, g, out_path, os);
    } else if (synth->parsed()) {
      sc.seed = seed;
      const AttributedGraph g = synth_graph(sc);
      save_graph(g, out_path);
      const AttributedGraph back = load_graph(out_path);
      if (back.num_nodes != g.num_nodes || back.col_indices != g.col_indices ||
          back.labels != g.labels) {
        throw CliError("verification of " + out_path + " failed");
      }
      std::size_t anomalies = 0;
      for (auto y : *g.labels) anomalies += y;
      os << "nodes=" << g.num_nodes << " edges=" << g.num_undirected_edges()
         << " anomalies=" << anomalies << "\n";
    } else if (sim->parsed()) {
      const AttributedGraph g = load_graph(graph_dir);
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.6f", global_edge_similarity(g));
      os << buf << "\n";
    } else if (eval->parsed()) {
      const ScoresFile f = read_scores_csv(scores_path);
      const std::vector<std::uint8_t> labels = read_labels_csv(labels_path, f.scores.size());
      os << format_eval(evaluate(f.scores, labels, f.excluded)) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace agfm::cli
