#pragma once

#include "agfm/graph.hpp"
#include "agfm/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace agfm {

/// Symmetrically normalized adjacency with self-loops,
/// D^{-1/2} (A + I) D^{-1/2} with D the degree of A + I, stored as CSR.
template <typename T>
struct NormalizedAdjacency {
  std::size_t num_nodes = 0;
  std::vector<std::uint64_t> row_offsets{0};
  std::vector<NodeId> col_indices;
  std::vector<T> values;

  Matrix<T> to_dense() const {
    const auto n = static_cast<Eigen::Index>(num_nodes);
    Matrix<T> dense = Matrix<T>::Zero(n, n);
    for (std::size_t i = 0; i < num_nodes; ++i)
      for (auto k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
        dense(static_cast<Eigen::Index>(i), col_indices[k]) = values[k];
    return dense;
  }
};

template <typename T = float>
NormalizedAdjacency<T> normalize_adjacency(const AttributedGraph& g) {
  NormalizedAdjacency<T> adj;
  const std::size_t n = g.num_nodes;
  adj.num_nodes = n;
  adj.row_offsets.assign(n + 1, 0);
  adj.col_indices.reserve(g.col_indices.size() + n);
  adj.values.reserve(g.col_indices.size() + n);

  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(g.degree(i) + 1));
  }
  for (std::size_t i = 0; i < n; ++i) {
    bool diagonal_done = false;
    auto push = [&](std::size_t j) {
      adj.col_indices.push_back(static_cast<NodeId>(j));
      adj.values.push_back(static_cast<T>(inv_sqrt[i] * inv_sqrt[j]));
    };
    for (NodeId j : g.neighbors(i)) {
      if (!diagonal_done && j > i) {
        push(i);
        diagonal_done = true;
      }
      push(j);
    }
    if (!diagonal_done) push(i);
    adj.row_offsets[i + 1] = adj.col_indices.size();
  }
  return adj;
}

/// Sparse-dense product into `out`, which is resized as needed. Rows are
/// reduced sequentially in CSR order, so the result is bit-reproducible.
template <typename T>
void spmm_into(const NormalizedAdjacency<T>& adj, const Matrix<T>& dense, Matrix<T>& out) {
  if (static_cast<std::size_t>(dense.rows()) != adj.num_nodes) {
    throw std::invalid_argument("spmm: adjacency has " + std::to_string(adj.num_nodes) +
                                " columns but dense operand has " +
                                std::to_string(dense.rows()) + " rows");
  }
  const Eigen::Index cols = dense.cols();
  out.setZero(dense.rows(), cols);
  for (std::size_t i = 0; i < adj.num_nodes; ++i) {
    T* row = out.data() + static_cast<Eigen::Index>(i) * cols;
    for (auto k = adj.row_offsets[i]; k < adj.row_offsets[i + 1]; ++k) {
      const T w = adj.values[k];
      const T* src = dense.data() + static_cast<Eigen::Index>(adj.col_indices[k]) * cols;
      for (Eigen::Index c = 0; c < cols; ++c) row[c] += w * src[c];
    }
  }
}

template <typename T>
Matrix<T> spmm(const NormalizedAdjacency<T>& adj, const Matrix<T>& dense) {
  Matrix<T> out;
  spmm_into(adj, dense, out);
  return out;
}

/// Row i becomes the mean of rows j over the raw neighbors of i (self
/// excluded); isolated nodes get a zero row.
template <typename T>
void neighbor_mean_into(const AttributedGraph& g, const Matrix<T>& h, Matrix<T>& out) {
  const Eigen::Index cols = h.cols();
  out.setZero(h.rows(), cols);
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    const auto nb = g.neighbors(i);
    if (nb.empty()) continue;
    T* row = out.data() + static_cast<Eigen::Index>(i) * cols;
    for (NodeId j : nb) {
      const T* src = h.data() + static_cast<Eigen::Index>(j) * cols;
      for (Eigen::Index c = 0; c < cols; ++c) row[c] += src[c];
    }
    const T inv = T(1) / static_cast<T>(nb.size());
    for (Eigen::Index c = 0; c < cols; ++c) row[c] *= inv;
  }
}

template <typename T>
Matrix<T> neighbor_mean(const AttributedGraph& g, const Matrix<T>& h) {
  Matrix<T> out;
  neighbor_mean_into(g, h, out);
  return out;
}

/// Adjoint of neighbor_mean: row j collects grad_i / |N(i)| from each neighbor i.
/// `scaled` is scratch space.
template <typename T>
void neighbor_mean_adjoint_into(const AttributedGraph& g, const Matrix<T>& grad, Matrix<T>& out,
                                Matrix<T>& scaled) {
  const Eigen::Index cols = grad.cols();
  scaled.resize(grad.rows(), cols);
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const std::size_t deg = g.degree(i);
    if (deg == 0) {
      scaled.row(r).setZero();
    } else {
      scaled.row(r) = grad.row(r) * (T(1) / static_cast<T>(deg));
    }
  }
  out.setZero(grad.rows(), cols);
  for (std::size_t j = 0; j < g.num_nodes; ++j) {
    T* row = out.data() + static_cast<Eigen::Index>(j) * cols;
    for (NodeId i : g.neighbors(j)) {
      const T* src = scaled.data() + static_cast<Eigen::Index>(i) * cols;
      for (Eigen::Index c = 0; c < cols; ++c) row[c] += src[c];
    }
  }
}

template <typename T>
Matrix<T> neighbor_mean_adjoint(const AttributedGraph& g, const Matrix<T>& grad) {
  Matrix<T> out, scaled;
  neighbor_mean_adjoint_into(g, grad, out, scaled);
  return out;
}

}  // namespace agfm
