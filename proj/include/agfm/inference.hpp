#pragma once

#include "agfm/graph.hpp"
#include "agfm/model.hpp"
#include "agfm/pretrain.hpp"
#include "agfm/prompt.hpp"
#include "agfm/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace agfm {

enum class ScoreMode { zero_shot, few_shot, subgraph };

inline const char* to_string(ScoreMode m) {
  switch (m) {
    case ScoreMode::zero_shot: return "zero_shot";
    case ScoreMode::few_shot: return "few_shot";
    case ScoreMode::subgraph: return "subgraph";
  }
  return "?";
}

/// Per-node anomaly scores; higher means more anomalous. Nodes flagged in
/// `excluded` (labeled shots, non-targets) carry a score but are not part of
/// the evaluation set.
struct ScoreVector {
  std::vector<double> scores;
  std::vector<std::uint8_t> excluded;
  double beta_used = 0.0;
  ScoreMode mode = ScoreMode::zero_shot;
  std::size_t clipped = 0;  // nodes whose exp argument hit the +-30 clamp
};

/// Inner products are clamped to this range before exponentiation.
inline constexpr double kScoreExpClip = 30.0;

/// Scoring weight of the normal-prototype term, chosen from the global edge
/// similarity: graphs with similar neighboring features lean on the abnormal
/// prototype alone (zero-shot) or mostly (few-shot).
inline double select_beta(double similarity, ScoreMode mode) {
  if (!std::isfinite(similarity)) throw std::invalid_argument("select_beta: non-finite similarity");
  const bool high = similarity > 0.5;
  switch (mode) {
    case ScoreMode::few_shot: return high ? 0.5 : 4.0;
    default: return high ? 0.0 : 4.0;
  }
}

/// s = exp(r . p_a) + beta * exp(-r . p_n), inner products clamped to [-30, 30].
/// Returns whether clamping fired.
inline double anomaly_score(const Vector<float>& residual, const Vector<float>& p_abnormal,
                            const Vector<float>& p_normal, double beta, bool* clipped = nullptr) {
  const double da = residual.cast<double>().dot(p_abnormal.cast<double>());
  const double dn = residual.cast<double>().dot(p_normal.cast<double>());
  const double ca = std::clamp(da, -kScoreExpClip, kScoreExpClip);
  const double cn = std::clamp(dn, -kScoreExpClip, kScoreExpClip);
  if (clipped) *clipped = (ca != da) || (cn != dn);
  return std::exp(ca) + beta * std::exp(-cn);
}

struct ScoreOptions {
  std::optional<double> beta;          // nullopt = select from edge similarity
  std::uint64_t seed = 0;              // projection substream, see svd_seed()
  std::optional<std::size_t> dprime;   // must match the model when given
  std::size_t threads = 0;             // subgraph scoring only; 0 = sequential
};

namespace detail {

inline double resolve_beta(const std::optional<double>& beta, const AttributedGraph& g,
                           ScoreMode mode) {
  if (beta) {
    if (!(*beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
    return *beta;
  }
  return select_beta(global_edge_similarity(g), mode);
}

inline void check_dprime(const ModelParameters<float>& model, const std::optional<std::size_t>& d) {
  if (d && *d != model.dims.input) {
    throw std::invalid_argument("requested d'=" + std::to_string(*d) +
                                " but the checkpoint was trained with d'=" +
                                std::to_string(model.dims.input));
  }
}

inline ScoreVector score_residuals(const Matrix<float>& residual, const Vector<float>& p_abnormal,
                                   const Vector<float>& p_normal, double beta, ScoreMode mode) {
  ScoreVector out;
  out.mode = mode;
  out.beta_used = beta;
  out.scores.resize(static_cast<std::size_t>(residual.rows()));
  out.excluded.assign(out.scores.size(), 0);
  for (Eigen::Index i = 0; i < residual.rows(); ++i) {
    bool clipped = false;
    out.scores[static_cast<std::size_t>(i)] =
        anomaly_score(residual.row(i).transpose(), p_abnormal, p_normal, beta, &clipped);
    out.clipped += clipped;
  }
  return out;
}

}  // namespace detail

/// Scores every node of an unseen graph with the frozen model. Features are
/// projected with a fresh decomposition of this graph.
inline ScoreVector score_zero_shot(const ModelParameters<float>& model, const AttributedGraph& g,
                                   const ScoreOptions& opt = {}) {
  detail::check_dprime(model, opt.dprime);
  const double beta = detail::resolve_beta(opt.beta, g, ScoreMode::zero_shot);
  const GraphEmbedding<float> emb = embed_graph(model, g, svd_seed(opt.seed));
  const PrototypePair<float> protos = prototypes(model);
  return detail::score_residuals(emb.residual, protos.abnormal, protos.normal, beta,
                                 ScoreMode::zero_shot);
}

/// Scores with a tuned prompt. A normal-target prompt replaces p_n by p'_n,
/// an abnormal-target prompt replaces p_a by p'_a. The prompt's shot nodes
/// are flagged excluded.
inline ScoreVector score_few_shot(const ModelParameters<float>& model, const PromptParameters& prompt,
                                  const AttributedGraph& g, std::optional<double> beta = std::nullopt,
                                  const std::string& model_hash = {}) {
  if (!prompt.model_hash.empty() && !model_hash.empty() && prompt.model_hash != model_hash) {
    throw std::invalid_argument("prompt was tuned on model " + prompt.model_hash +
                                " but the supplied model hashes to " + model_hash);
  }
  const double b = detail::resolve_beta(beta, g, ScoreMode::few_shot);
  const GraphEmbedding<float> emb = embed_graph(model, g, prompt.svd_seed);
  const PrototypePair<float> protos = prototypes(model);
  const Vector<float> refined = refined_prototype(protos, prompt);
  const bool normal = prompt.target == PromptTarget::normal;
  ScoreVector out = detail::score_residuals(emb.residual, normal ? protos.abnormal : refined,
                                            normal ? refined : protos.normal, b,
                                            ScoreMode::few_shot);
  for (NodeId v : prompt.shots) {
    if (v >= g.num_nodes) throw std::invalid_argument("prompt shot node is outside the graph");
    out.excluded[v] = 1;
  }
  return out;
}

/// Scores each target from its random-walk subgraph alone: the model runs on
/// the subgraph induced by {v} + S(v) and the residual is h_v minus the mean
/// over S(v). Node features are projected once for the whole graph (a
/// feature-only step); no adjacency outside the sampled subgraph is read.
/// Non-targets are flagged excluded. Each target draws its walk from its own
/// substream (seed, "walk", v), so results do not depend on threading.
inline ScoreVector score_subgraph(const ModelParameters<float>& model, const AttributedGraph& g,
                                  std::span<const NodeId> targets, std::size_t size,
                                  const ScoreOptions& opt = {}) {
  if (size < 1) throw std::invalid_argument("score_subgraph: size must be >= 1");
  detail::check_dprime(model, opt.dprime);
  const double beta = detail::resolve_beta(opt.beta, g, ScoreMode::zero_shot);
  const Matrix<float> unified =
      unify_features(g.features, model.dims.input, svd_seed(opt.seed));
  const PrototypePair<float> protos = prototypes(model);

  std::vector<NodeId> unique_targets(targets.begin(), targets.end());
  if (unique_targets.empty()) {
    unique_targets.resize(g.num_nodes);
    for (std::size_t i = 0; i < g.num_nodes; ++i) unique_targets[i] = static_cast<NodeId>(i);
  }
  std::sort(unique_targets.begin(), unique_targets.end());
  unique_targets.erase(std::unique(unique_targets.begin(), unique_targets.end()),
                       unique_targets.end());
  targets = unique_targets;

  ScoreVector out;
  out.mode = ScoreMode::subgraph;
  out.beta_used = beta;
  out.scores.assign(g.num_nodes, 0.0);
  out.excluded.assign(g.num_nodes, 1);
  std::vector<std::uint8_t> clipped(g.num_nodes, 0);

  auto score_one = [&](NodeId v) {
    Rng rng(derive_seed(opt.seed, "walk", v));
    const SubgraphSample sample = random_walk_subgraph(g, v, size, rng);
    std::vector<NodeId> nodes{v};
    nodes.insert(nodes.end(), sample.members.begin(), sample.members.end());
    const AttributedGraph sub = induced_subgraph(g, nodes);
    Matrix<float> x(static_cast<Eigen::Index>(nodes.size()), unified.cols());
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      x.row(static_cast<Eigen::Index>(k)) = unified.row(nodes[k]);
    }
    const Matrix<float> h = forward(model, normalize_adjacency<float>(sub), x);
    const Vector<float> r = residual_subgraph<float>(
        h.row(0).transpose(), h.bottomRows(h.rows() - 1));
    bool c = false;
    out.scores[v] = anomaly_score(r, protos.abnormal, protos.normal, beta, &c);
    out.excluded[v] = 0;
    clipped[v] = c;
  };

  for (NodeId v : targets) {
    if (v >= g.num_nodes) throw std::invalid_argument("score_subgraph: target outside the graph");
  }
  if (opt.threads <= 1) {
    for (NodeId v : targets) score_one(v);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < opt.threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < targets.size(); k = next++) score_one(targets[k]);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto c : clipped) out.clipped += c;
  return out;
}

}  // namespace agfm
