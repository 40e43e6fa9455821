#pragma once

#include "agfm/rng.hpp"
#include "agfm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace agfm {

using NodeId = std::uint32_t;

struct GraphError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Undirected attributed graph in CSR form.
///
/// Every undirected edge {i, j} is stored twice, as (i, j) and (j, i). Column
/// indices within a row are sorted ascending and self-loops are never stored;
/// self-loops only appear later through adjacency normalization. Labels, when
/// present, follow the GAD convention 1 = anomaly.
struct AttributedGraph {
  std::string name;
  std::size_t num_nodes = 0;
  std::vector<std::uint64_t> row_offsets{0};
  std::vector<NodeId> col_indices;
  Matrix<float> features;
  std::optional<std::vector<std::uint8_t>> labels;

  std::span<const NodeId> neighbors(std::size_t v) const {
    return {col_indices.data() + row_offsets[v],
            static_cast<std::size_t>(row_offsets[v + 1] - row_offsets[v])};
  }
  std::size_t degree(std::size_t v) const {
    return static_cast<std::size_t>(row_offsets[v + 1] - row_offsets[v]);
  }
  std::size_t feature_dim() const { return static_cast<std::size_t>(features.cols()); }
  std::size_t num_undirected_edges() const { return col_indices.size() / 2; }
  bool has_labels() const { return labels.has_value(); }

  bool has_edge(std::size_t u, std::size_t v) const {
    const auto nb = neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), static_cast<NodeId>(v));
  }
};

/// Center node plus the distinct nodes a random walk reached from it.
struct SubgraphSample {
  NodeId center = 0;
  std::vector<NodeId> members;  // excludes center, in discovery order
  std::size_t requested_size = 0;
};

/// Builds a canonical graph from an edge list. Edges may be given in either
/// or both directions; duplicates are merged and self-loops dropped (their
/// count is reported through `dropped_self_loops`).
inline AttributedGraph build_graph(std::size_t num_nodes,
                                   std::span<const std::pair<NodeId, NodeId>> edges,
                                   Matrix<float> features,
                                   std::optional<std::vector<std::uint8_t>> labels = std::nullopt,
                                   std::string name = {},
                                   std::size_t* dropped_self_loops = nullptr) {
  if (static_cast<std::size_t>(features.rows()) != num_nodes) {
    throw GraphError("feature row count " + std::to_string(features.rows()) +
                     " does not match num_nodes " + std::to_string(num_nodes));
  }
  if (labels) {
    if (labels->size() != num_nodes) {
      throw GraphError("label count " + std::to_string(labels->size()) +
                       " does not match num_nodes " + std::to_string(num_nodes));
    }
    for (std::size_t i = 0; i < num_nodes; ++i) {
      if ((*labels)[i] > 1) {
        throw GraphError("label of node " + std::to_string(i) + " is not in {0,1}");
      }
    }
  }

  std::vector<std::pair<NodeId, NodeId>> directed;
  directed.reserve(edges.size() * 2);
  std::size_t loops = 0;
  for (const auto& [u, v] : edges) {
    if (u >= num_nodes || v >= num_nodes) {
      throw GraphError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                       ") references a node >= num_nodes " + std::to_string(num_nodes));
    }
    if (u == v) {
      ++loops;
      continue;
    }
    directed.emplace_back(u, v);
    directed.emplace_back(v, u);
  }
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());
  if (dropped_self_loops) *dropped_self_loops = loops;

  AttributedGraph g;
  g.name = std::move(name);
  g.num_nodes = num_nodes;
  g.row_offsets.assign(num_nodes + 1, 0);
  g.col_indices.reserve(directed.size());
  for (const auto& [u, v] : directed) {
    ++g.row_offsets[u + 1];
    g.col_indices.push_back(v);
  }
  for (std::size_t i = 0; i < num_nodes; ++i) g.row_offsets[i + 1] += g.row_offsets[i];
  g.features = std::move(features);
  g.labels = std::move(labels);
  return g;
}

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks every structural invariant of AttributedGraph without throwing.
inline ValidationReport validate(const AttributedGraph& g) {
  ValidationReport report;
  auto fail = [&](std::string msg) { report.violations.push_back(std::move(msg)); };
  const std::size_t n = g.num_nodes;

  if (g.row_offsets.size() != n + 1) {
    fail("row_offsets has length " + std::to_string(g.row_offsets.size()) + ", expected " +
         std::to_string(n + 1));
    return report;
  }
  if (g.row_offsets.front() != 0) fail("row_offsets[0] is not 0");
  for (std::size_t i = 0; i < n; ++i) {
    if (g.row_offsets[i + 1] < g.row_offsets[i]) {
      fail("row_offsets decreases at row " + std::to_string(i));
      return report;
    }
  }
  if (g.row_offsets.back() != g.col_indices.size()) {
    fail("row_offsets[N] = " + std::to_string(g.row_offsets.back()) +
         " but col_indices has length " + std::to_string(g.col_indices.size()));
    return report;
  }

  bool indices_ok = true;
  for (std::size_t i = 0; i < n; ++i) {
    const auto nb = g.neighbors(i);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      if (nb[k] >= n) {
        fail("col index " + std::to_string(nb[k]) + " in row " + std::to_string(i) +
             " is >= N");
        indices_ok = false;
      } else if (nb[k] == i) {
        fail("self-loop stored at row " + std::to_string(i));
      }
      if (k > 0 && nb[k] == nb[k - 1]) {
        fail("duplicate entry (" + std::to_string(i) + "," + std::to_string(nb[k]) + ")");
      } else if (k > 0 && nb[k] < nb[k - 1]) {
        fail("row " + std::to_string(i) + " is not sorted");
        indices_ok = false;
      }
    }
  }
  if (indices_ok) {
    for (std::size_t i = 0; i < n; ++i) {
      for (NodeId j : g.neighbors(i)) {
        if (!g.has_edge(j, i)) {
          fail("asymmetric entry (" + std::to_string(i) + "," + std::to_string(j) + ")");
        }
      }
    }
  }

  if (static_cast<std::size_t>(g.features.rows()) != n) {
    fail("features have " + std::to_string(g.features.rows()) + " rows, expected " +
         std::to_string(n));
  }
  if (g.labels) {
    if (g.labels->size() != n) {
      fail("labels have length " + std::to_string(g.labels->size()) + ", expected " +
           std::to_string(n));
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        if ((*g.labels)[i] > 1) fail("label of node " + std::to_string(i) + " is not in {0,1}");
      }
    }
  }
  return report;
}

/// Mean cosine similarity of raw feature vectors over undirected edges.
/// Edges touching an all-zero feature vector contribute 0.
inline double global_edge_similarity(const AttributedGraph& g) {
  if (g.num_undirected_edges() == 0) {
    throw GraphError("undefined similarity: graph has no edges");
  }
  std::vector<double> norms(g.num_nodes);
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    norms[i] = g.features.row(static_cast<Eigen::Index>(i)).cast<double>().norm();
  }
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    for (NodeId j : g.neighbors(i)) {
      if (j <= i) continue;
      ++count;
      const double denom = norms[i] * norms[j];
      if (denom == 0.0) continue;
      const double dot = g.features.row(static_cast<Eigen::Index>(i))
                             .cast<double>()
                             .dot(g.features.row(j).cast<double>());
      total += dot / denom;
    }
  }
  return total / static_cast<double>(count);
}

/// Probability that a walk step jumps back to the center before moving.
inline constexpr double kWalkRestartProbability = 0.5;
/// Walk steps allowed per requested member.
inline constexpr std::size_t kWalkStepBudgetFactor = 50;

/// Random walk with restart from `v`, collecting up to `size` distinct nodes
/// other than `v`. Stops early once the step budget (50 * size) runs out, so
/// small components yield fewer members; an isolated center yields none.
inline SubgraphSample random_walk_subgraph(const AttributedGraph& g, NodeId v, std::size_t size,
                                           Rng& rng) {
  if (v >= g.num_nodes) throw GraphError("walk center " + std::to_string(v) + " is >= N");
  if (size == 0) throw GraphError("subgraph size must be >= 1");
  SubgraphSample sample{v, {}, size};
  if (g.degree(v) == 0) return sample;

  std::unordered_set<NodeId> seen;
  NodeId current = v;
  const std::size_t budget = kWalkStepBudgetFactor * size;
  for (std::size_t step = 0; step < budget && sample.members.size() < size; ++step) {
    const auto nb = g.neighbors(current);
    const NodeId next = nb[rng.below(nb.size())];
    if (next != v && seen.insert(next).second) sample.members.push_back(next);
    current = rng.uniform() < kWalkRestartProbability ? v : next;
  }
  return sample;
}

/// Subgraph induced by `nodes`; local id k corresponds to nodes[k].
inline AttributedGraph induced_subgraph(const AttributedGraph& g, std::span<const NodeId> nodes) {
  const std::size_t k = nodes.size();
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      if (g.has_edge(nodes[a], nodes[b])) {
        edges.emplace_back(static_cast<NodeId>(a), static_cast<NodeId>(b));
      }
    }
  }
  Matrix<float> features(static_cast<Eigen::Index>(k), g.features.cols());
  std::optional<std::vector<std::uint8_t>> labels;
  if (g.labels) labels.emplace(k);
  for (std::size_t a = 0; a < k; ++a) {
    features.row(static_cast<Eigen::Index>(a)) = g.features.row(nodes[a]);
    if (labels) (*labels)[a] = (*g.labels)[nodes[a]];
  }
  return build_graph(k, edges, std::move(features), std::move(labels), g.name + "/induced");
}

}  // namespace agfm
