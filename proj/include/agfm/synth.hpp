#pragma once

#include "agfm/graph.hpp"
#include "agfm/rng.hpp"

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace agfm {

struct SynthConfig {
  std::size_t nodes = 1000;
  std::size_t dim = 32;
  std::size_t blocks = 4;
  double anomaly_rate = 0.05;
  double homophily = 0.9;  // fraction of edges kept inside a block
  double avg_degree = 10.0;
  std::uint64_t seed = 0;
};

/// Per-coordinate standard deviation of node features around their block mean.
inline constexpr double kSynthFeatureNoise = 0.25;
/// Degree of a structural anomaly relative to the average degree.
inline constexpr double kSynthStructuralDegreeFactor = 2.0;

enum class AnomalyKind : std::uint8_t { none = 0, structural = 1, contextual = 2 };

/// Contextual stochastic block model with injected anomalies.
///
/// Normal node i in block b gets features mu_b + noise, mu_b ~ N(0, I).
/// round(nodes * anomaly_rate) anomalies are split evenly:
///   structural: all edges removed, then rewired to 2 * avg_degree uniformly
///     random nodes outside its block;
///   contextual: features resampled from N(mu_b + delta, noise^2 I) with a
///     single graph-wide shift delta ~ N(0, I).
inline AttributedGraph synth_graph(const SynthConfig& cfg,
                                   std::vector<AnomalyKind>* kinds = nullptr) {
  if (cfg.nodes < 10) throw GraphError("synth_graph: nodes must be >= 10");
  if (!(cfg.anomaly_rate >= 0.0 && cfg.anomaly_rate < 0.5)) {
    throw GraphError("synth_graph: anomaly_rate must be in [0, 0.5)");
  }
  if (!(cfg.homophily >= 0.0 && cfg.homophily <= 1.0)) {
    throw GraphError("synth_graph: homophily must be in [0, 1]");
  }
  if (cfg.blocks < 1 || cfg.blocks > cfg.nodes) throw GraphError("synth_graph: invalid blocks");
  if (cfg.dim < 1) throw GraphError("synth_graph: dim must be >= 1");
  if (!(cfg.avg_degree > 0.0)) throw GraphError("synth_graph: avg_degree must be > 0");

  Rng rng(derive_seed(cfg.seed, "synth"));
  const std::size_t n = cfg.nodes;
  const std::size_t nb = cfg.blocks;

  // Balanced block assignment, shuffled.
  std::vector<std::size_t> block(n);
  for (std::size_t i = 0; i < n; ++i) block[i] = i % nb;
  for (std::size_t i = n - 1; i > 0; --i) std::swap(block[i], block[rng.below(i + 1)]);
  std::vector<std::vector<NodeId>> members(nb);
  for (std::size_t i = 0; i < n; ++i) members[block[i]].push_back(static_cast<NodeId>(i));

  const auto dim = static_cast<Eigen::Index>(cfg.dim);
  Matrix<double> means(static_cast<Eigen::Index>(nb), dim);
  for (Eigen::Index b = 0; b < means.rows(); ++b)
    for (Eigen::Index k = 0; k < dim; ++k) means(b, k) = rng.normal();
  Matrix<float> features(static_cast<Eigen::Index>(n), dim);
  for (std::size_t i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < dim; ++k)
      features(static_cast<Eigen::Index>(i), k) = static_cast<float>(
          means(static_cast<Eigen::Index>(block[i]), k) + kSynthFeatureNoise * rng.normal());

  // Node drawn uniformly from outside block b (falls back to any node when
  // there is a single block).
  auto outside_block = [&](std::size_t b) -> NodeId {
    if (nb == 1) return static_cast<NodeId>(rng.below(n));
    while (true) {
      const auto v = static_cast<NodeId>(rng.below(n));
      if (block[v] != b) return v;
    }
  };

  const auto target_edges = static_cast<std::size_t>(std::llround(cfg.avg_degree * n / 2.0));
  std::set<std::pair<NodeId, NodeId>> edge_set;
  std::size_t attempts = 0;
  while (edge_set.size() < target_edges && attempts < 50 * target_edges) {
    ++attempts;
    const auto u = static_cast<NodeId>(rng.below(n));
    const std::size_t b = block[u];
    NodeId v;
    if (rng.uniform() < cfg.homophily) {
      v = members[b][rng.below(members[b].size())];
    } else {
      v = outside_block(b);
    }
    if (u == v) continue;
    edge_set.emplace(std::min(u, v), std::max(u, v));
  }

  const auto num_anomalies = static_cast<std::size_t>(std::llround(n * cfg.anomaly_rate));
  std::vector<NodeId> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<NodeId>(i);
  for (std::size_t i = 0; i < num_anomalies; ++i) {
    std::swap(order[i], order[i + rng.below(n - i)]);
  }
  std::vector<std::uint8_t> labels(n, 0);
  const std::size_t num_structural = num_anomalies / 2;

  std::vector<std::uint8_t> rewired(n, 0);
  for (std::size_t a = 0; a < num_structural; ++a) rewired[order[a]] = 1;
  for (auto it = edge_set.begin(); it != edge_set.end();) {
    if (rewired[it->first] || rewired[it->second]) {
      it = edge_set.erase(it);
    } else {
      ++it;
    }
  }
  const auto structural_degree = static_cast<std::size_t>(
      std::llround(kSynthStructuralDegreeFactor * cfg.avg_degree));
  for (std::size_t a = 0; a < num_structural; ++a) {
    const NodeId u = order[a];
    labels[u] = 1;
    std::size_t added = 0;
    for (std::size_t tries = 0; added < structural_degree && tries < 50 * structural_degree;
         ++tries) {
      const NodeId v = outside_block(block[u]);
      if (v == u) continue;
      if (edge_set.emplace(std::min(u, v), std::max(u, v)).second) ++added;
    }
  }

  Vector<double> shift(dim);
  for (Eigen::Index k = 0; k < dim; ++k) shift(k) = rng.normal();
  for (std::size_t a = num_structural; a < num_anomalies; ++a) {
    const NodeId u = order[a];
    labels[u] = 1;
    for (Eigen::Index k = 0; k < dim; ++k) {
      features(u, k) = static_cast<float>(means(static_cast<Eigen::Index>(block[u]), k) +
                                          shift(k) + kSynthFeatureNoise * rng.normal());
    }
  }

  if (kinds) {
    kinds->assign(n, AnomalyKind::none);
    for (std::size_t a = 0; a < num_anomalies; ++a) {
      (*kinds)[order[a]] = a < num_structural ? AnomalyKind::structural : AnomalyKind::contextual;
    }
  }
  std::vector<std::pair<NodeId, NodeId>> edges(edge_set.begin(), edge_set.end());
  return build_graph(n, edges, std::move(features), std::move(labels),
                     "synth-" + std::to_string(cfg.seed));
}

}  // namespace agfm
