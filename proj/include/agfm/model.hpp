#pragma once

#include "agfm/graph.hpp"
#include "agfm/linalg.hpp"
#include "agfm/rng.hpp"
#include "agfm/svd.hpp"
#include "agfm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace agfm {

/// Layer widths. The prototype dimension always equals `repr`, and so does
/// the classifier's hidden width.
struct ModelDims {
  std::size_t input = 10;    // d', unified feature width
  std::size_t hidden = 300;  // h, first GCN layer
  std::size_t repr = 300;    // d, node representation (= prototype dim T)

  std::size_t proto() const { return repr; }
  std::size_t classifier_hidden() const { return repr; }
  bool operator==(const ModelDims&) const = default;
};

inline constexpr double kProbabilityClip = 1e-7;

/// Complete trainable state plus the frozen Gaussian prototype bases.
///
/// GCN layers carry no bias. The classifier is
/// sigmoid(relu(h * clf_w1 + clf_b1) . clf_w2 + clf_b2), and each prototype
/// is one affine map of its base vector: p = theta_w * z + theta_b.
template <typename T>
struct ModelParameters {
  ModelDims dims;
  Matrix<T> w1;  // d' x h
  Matrix<T> w2;  // h x d
  Matrix<T> clf_w1;  // d x c
  Vector<T> clf_b1;  // c
  Vector<T> clf_w2;  // c (a c x 1 matrix)
  Vector<T> clf_b2;  // 1
  Vector<T> z_normal;    // T, frozen
  Vector<T> z_abnormal;  // T, frozen
  Matrix<T> theta_normal_w;  // T x T
  Vector<T> theta_normal_b;
  Matrix<T> theta_abnormal_w;
  Vector<T> theta_abnormal_b;

  /// Tensors in checkpoint manifest order.
  std::vector<TensorView<T>> tensors() {
    const std::size_t d0 = dims.input, h = dims.hidden, d = dims.repr,
                      c = dims.classifier_hidden(), t = dims.proto();
    return {{"gcn.w1", {d0, h}, as_span(w1)},
            {"gcn.w2", {h, d}, as_span(w2)},
            {"classifier.w1", {d, c}, as_span(clf_w1)},
            {"classifier.b1", {c}, as_span(clf_b1)},
            {"classifier.w2", {c, 1}, as_span(clf_w2)},
            {"classifier.b2", {1}, as_span(clf_b2)},
            {"prototype.z_normal", {t}, as_span(z_normal)},
            {"prototype.z_abnormal", {t}, as_span(z_abnormal)},
            {"prototype.theta_normal.w", {t, t}, as_span(theta_normal_w)},
            {"prototype.theta_normal.b", {t}, as_span(theta_normal_b)},
            {"prototype.theta_abnormal.w", {t, t}, as_span(theta_abnormal_w)},
            {"prototype.theta_abnormal.b", {t}, as_span(theta_abnormal_b)}};
  }

  /// Everything except the frozen bases, in a fixed order shared with the
  /// gradient struct.
  std::vector<std::span<T>> trainable() {
    return {as_span(w1),           as_span(w2),
            as_span(clf_w1),       as_span(clf_b1),
            as_span(clf_w2),       as_span(clf_b2),
            as_span(theta_normal_w), as_span(theta_normal_b),
            as_span(theta_abnormal_w), as_span(theta_abnormal_b)};
  }
  std::vector<std::span<const T>> trainable() const {
    auto& self = const_cast<ModelParameters&>(*this);
    std::vector<std::span<const T>> out;
    for (auto s : self.trainable()) out.emplace_back(s.data(), s.size());
    return out;
  }

  template <typename U>
  ModelParameters<U> cast() const {
    ModelParameters<U> out;
    out.dims = dims;
    out.w1 = w1.template cast<U>();
    out.w2 = w2.template cast<U>();
    out.clf_w1 = clf_w1.template cast<U>();
    out.clf_b1 = clf_b1.template cast<U>();
    out.clf_w2 = clf_w2.template cast<U>();
    out.clf_b2 = clf_b2.template cast<U>();
    out.z_normal = z_normal.template cast<U>();
    out.z_abnormal = z_abnormal.template cast<U>();
    out.theta_normal_w = theta_normal_w.template cast<U>();
    out.theta_normal_b = theta_normal_b.template cast<U>();
    out.theta_abnormal_w = theta_abnormal_w.template cast<U>();
    out.theta_abnormal_b = theta_abnormal_b.template cast<U>();
    return out;
  }
};

/// True when both models have the same dims and bit-identical tensors.
template <typename T>
bool identical(const ModelParameters<T>& a, const ModelParameters<T>& b) {
  if (!(a.dims == b.dims)) return false;
  auto ta = const_cast<ModelParameters<T>&>(a).tensors();
  auto tb = const_cast<ModelParameters<T>&>(b).tensors();
  for (std::size_t k = 0; k < ta.size(); ++k) {
    if (ta[k].data.size() != tb[k].data.size()) return false;
    if (!std::equal(ta[k].data.begin(), ta[k].data.end(), tb[k].data.begin(),
                    [](T x, T y) { return std::memcmp(&x, &y, sizeof(T)) == 0; })) {
      return false;
    }
  }
  return true;
}

template <typename T>
struct PrototypePair {
  Vector<T> normal;
  Vector<T> abnormal;
};

namespace detail {

template <typename T>
Matrix<T> glorot_uniform(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix<T> m(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<T>(rng.uniform(-limit, limit));
  return m;
}

}  // namespace detail

/// Glorot-uniform weights, zero biases, and z_normal, z_abnormal drawn
/// i.i.d. from N(mu, sigma^2). Draw order is fixed, so a seed fully
/// determines the result.
template <typename T>
ModelParameters<T> init_model(const ModelDims& dims, double mu, double sigma, std::uint64_t seed) {
  if (!(sigma > 0.0)) throw std::invalid_argument("init_model: sigma must be > 0");
  if (dims.input == 0 || dims.hidden == 0 || dims.repr == 0) {
    throw std::invalid_argument("init_model: dimensions must be positive");
  }
  Rng rng(seed);
  const std::size_t c = dims.classifier_hidden(), t = dims.proto();
  ModelParameters<T> p;
  p.dims = dims;
  p.w1 = detail::glorot_uniform<T>(rng, dims.input, dims.hidden);
  p.w2 = detail::glorot_uniform<T>(rng, dims.hidden, dims.repr);
  p.clf_w1 = detail::glorot_uniform<T>(rng, dims.repr, c);
  p.clf_b1 = Vector<T>::Zero(static_cast<Eigen::Index>(c));
  p.clf_w2 = detail::glorot_uniform<T>(rng, c, 1).col(0);
  p.clf_b2 = Vector<T>::Zero(1);
  p.theta_normal_w = detail::glorot_uniform<T>(rng, t, t);
  p.theta_normal_b = Vector<T>::Zero(static_cast<Eigen::Index>(t));
  p.theta_abnormal_w = detail::glorot_uniform<T>(rng, t, t);
  p.theta_abnormal_b = Vector<T>::Zero(static_cast<Eigen::Index>(t));
  p.z_normal.resize(static_cast<Eigen::Index>(t));
  p.z_abnormal.resize(static_cast<Eigen::Index>(t));
  for (Eigen::Index i = 0; i < p.z_normal.size(); ++i) p.z_normal(i) = static_cast<T>(rng.normal(mu, sigma));
  for (Eigen::Index i = 0; i < p.z_abnormal.size(); ++i) p.z_abnormal(i) = static_cast<T>(rng.normal(mu, sigma));
  return p;
}

/// Intermediate activations of the two-layer GCN, kept for backprop.
template <typename T>
struct ForwardTrace {
  Matrix<T> agg1;    // adj * (x * w1), pre-activation
  Matrix<T> hidden;  // relu(agg1)
  Matrix<T> agg2;    // adj * (hidden * w2), pre-activation
  Matrix<T> repr;    // relu(agg2) = H
};

/// Fills `tr` in place; `tmp` holds the pre-aggregation products.
template <typename T>
void forward_trace_into(const ModelParameters<T>& p, const NormalizedAdjacency<T>& adj,
                        const Matrix<T>& x, ForwardTrace<T>& tr, Matrix<T>& tmp) {
  if (static_cast<std::size_t>(x.cols()) != p.dims.input) {
    throw std::invalid_argument("forward: feature width " + std::to_string(x.cols()) +
                                " does not match model input dim " +
                                std::to_string(p.dims.input));
  }
  if (static_cast<std::size_t>(x.rows()) != adj.num_nodes) {
    throw std::invalid_argument("forward: feature rows do not match adjacency size");
  }
  // Linear transform first, then aggregation, then ReLU, in both layers.
  tmp.noalias() = x * p.w1;
  spmm_into(adj, tmp, tr.agg1);
  tr.hidden = tr.agg1.cwiseMax(T(0));
  tmp.noalias() = tr.hidden * p.w2;
  spmm_into(adj, tmp, tr.agg2);
  tr.repr = tr.agg2.cwiseMax(T(0));
}

template <typename T>
ForwardTrace<T> forward_trace(const ModelParameters<T>& p, const NormalizedAdjacency<T>& adj,
                              const Matrix<T>& x) {
  ForwardTrace<T> tr;
  Matrix<T> tmp;
  forward_trace_into(p, adj, x, tr, tmp);
  return tr;
}

/// Node representations H = relu(adj * relu(adj * x * w1) * w2).
template <typename T>
Matrix<T> forward(const ModelParameters<T>& p, const NormalizedAdjacency<T>& adj,
                  const Matrix<T>& x) {
  return forward_trace(p, adj, x).repr;
}

/// r_i = h_i - mean of h_j over raw neighbors j of i; isolated nodes keep h_i.
template <typename T>
Matrix<T> residuals(const Matrix<T>& h, const AttributedGraph& g) {
  if (static_cast<std::size_t>(h.rows()) != g.num_nodes) {
    throw std::invalid_argument("residuals: representation rows do not match graph size");
  }
  return h - neighbor_mean(g, h);
}

/// Residual of a center against an explicit member set; an empty set leaves
/// the center unchanged.
template <typename T>
Vector<T> residual_subgraph(const Vector<T>& center, const Matrix<T>& members) {
  if (members.rows() == 0) return center;
  return center - members.colwise().mean().transpose();
}

template <typename T>
PrototypePair<T> prototypes(const ModelParameters<T>& p) {
  return {p.theta_normal_w * p.z_normal + p.theta_normal_b,
          p.theta_abnormal_w * p.z_abnormal + p.theta_abnormal_b};
}

/// Classifier logits (pre-sigmoid), one per node.
template <typename T>
Vector<T> classifier_logits(const ModelParameters<T>& p, const Matrix<T>& h) {
  Matrix<T> z = h * p.clf_w1;
  z.rowwise() += p.clf_b1.transpose();
  return z.cwiseMax(T(0)) * p.clf_w2 + Vector<T>::Constant(h.rows(), p.clf_b2(0));
}

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double clip_probability(double p) {
  return std::clamp(p, kProbabilityClip, 1.0 - kProbabilityClip);
}

/// Anomaly probabilities, clipped to [1e-7, 1 - 1e-7].
template <typename T>
Vector<T> classify(const ModelParameters<T>& p, const Matrix<T>& h) {
  const Vector<T> logits = classifier_logits(p, h);
  Vector<T> probs(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    probs(i) = static_cast<T>(clip_probability(sigmoid(static_cast<double>(logits(i)))));
  }
  return probs;
}

/// Graph-level pipeline shared by training, tuning and scoring: unified
/// features, normalized adjacency, representations and residuals.
template <typename T>
struct GraphEmbedding {
  Matrix<T> features;
  Matrix<T> repr;
  Matrix<T> residual;
};

template <typename T>
GraphEmbedding<T> embed_graph(const ModelParameters<T>& p, const AttributedGraph& g,
                              std::uint64_t svd_seed) {
  GraphEmbedding<T> e;
  e.features = unify_features(Matrix<T>(g.features.template cast<T>()), p.dims.input, svd_seed);
  e.repr = forward(p, normalize_adjacency<T>(g), e.features);
  e.residual = residuals(e.repr, g);
  return e;
}

}  // namespace agfm
