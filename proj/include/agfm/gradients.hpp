#pragma once

#include "agfm/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace agfm {

template <typename T>
struct GradientResult {
  // Same layout as the model; the frozen bases z_normal and z_abnormal are
  // left empty since they never receive gradients.
  ModelParameters<T> grads;
  LossBreakdown loss;
};

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw std::domain_error(std::string("non-finite ") + what);
}

}  // namespace detail

/// Loss of the full pretraining objective without gradients.
template <typename T>
LossBreakdown compute_losses(const ModelParameters<T>& p, const NormalizedAdjacency<T>& adj,
                             const Matrix<T>& x, const AttributedGraph& g, double alpha) {
  if (!g.labels) throw std::invalid_argument("compute_losses: graph has no labels");
  const Matrix<T> h = forward(p, adj, x);
  const Matrix<T> r = residuals(h, g);
  LossBreakdown loss;
  loss.bce = loss_bce(classify(p, h), *g.labels);
  loss.align = loss_alignment(r, *g.labels, prototypes(p));
  loss.total = loss_total(loss.bce, loss.align, alpha);
  return loss;
}

/// Buffers reused across gradient evaluations of the same problem size.
template <typename T>
struct GradientWorkspace {
  ForwardTrace<T> trace;
  Matrix<T> tmp, scratch, neighbor, r, clf_pre, clf_hidden, dclf_pre, dh, diff, dr, dagg, du;
  Vector<T> logits, dlogit;
  GradientResult<T> result;
};

/// Reverse-mode gradients of L_bce + alpha * L_align with respect to every
/// trainable tensor. The returned reference points into `ws`.
template <typename T>
const GradientResult<T>& grad_total(const ModelParameters<T>& p, const NormalizedAdjacency<T>& adj,
                                    const Matrix<T>& x, const AttributedGraph& g, double alpha,
                                    GradientWorkspace<T>& ws) {
  if (!g.labels) throw std::invalid_argument("grad_total: graph has no labels");
  const auto& y = *g.labels;
  const Eigen::Index n = x.rows();

  // forward
  forward_trace_into(p, adj, x, ws.trace, ws.tmp);
  const ForwardTrace<T>& tr = ws.trace;
  const Matrix<T>& h = tr.repr;
  neighbor_mean_into(g, h, ws.neighbor);
  ws.r.noalias() = h - ws.neighbor;
  ws.clf_pre.noalias() = h * p.clf_w1;
  ws.clf_pre.rowwise() += p.clf_b1.transpose();
  ws.clf_hidden = ws.clf_pre.cwiseMax(T(0));
  ws.logits.setConstant(n, p.clf_b2(0));
  ws.logits.noalias() += ws.clf_hidden * p.clf_w2;
  const PrototypePair<T> protos = prototypes(p);
  detail::require_finite(h, "representation");
  detail::require_finite(ws.logits, "classifier logit");

  GradientResult<T>& out = ws.result;
  auto& gr = out.grads;
  gr.dims = p.dims;

  // BCE on clipped probabilities; the clip is flat, so clipped nodes pass no
  // gradient.
  Vector<T>& dlogit = ws.dlogit;
  dlogit.resize(n);
  double bce = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = sigmoid(static_cast<double>(ws.logits(i)));
    const double prob = clip_probability(s);
    const bool positive = y[static_cast<std::size_t>(i)] != 0;
    bce -= positive ? std::log(prob) : std::log(1.0 - prob);
    const bool clipped = s < kProbabilityClip || s > 1.0 - kProbabilityClip;
    dlogit(i) = clipped ? T(0) : static_cast<T>(s - (positive ? 1.0 : 0.0));
  }
  gr.clf_w2.noalias() = ws.clf_hidden.transpose() * dlogit;
  gr.clf_b2 = Vector<T>::Constant(1, dlogit.sum());
  ws.dclf_pre.resize(n, ws.clf_pre.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    ws.dclf_pre.row(i) = (ws.clf_pre.row(i).array() > T(0))
                             .select(dlogit(i) * p.clf_w2.transpose().array(), T(0));
  }
  gr.clf_w1 = h.transpose() * ws.dclf_pre;
  gr.clf_b1 = ws.dclf_pre.colwise().sum().transpose();
  ws.dh.noalias() = ws.dclf_pre * p.clf_w1.transpose();

  // alignment
  ws.diff = ws.r;
  double align = 0.0;
  Vector<T> grad_pn = Vector<T>::Zero(protos.normal.size());
  Vector<T> grad_pa = Vector<T>::Zero(protos.abnormal.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool positive = y[static_cast<std::size_t>(i)] != 0;
    const Vector<T>& proto = positive ? protos.abnormal : protos.normal;
    ws.diff.row(i) -= proto.transpose();
    align += ws.diff.row(i).template cast<double>().squaredNorm();
    (positive ? grad_pa : grad_pn) -= T(2 * alpha) * ws.diff.row(i).transpose();
  }
  ws.dr.noalias() = T(2 * alpha) * ws.diff;
  neighbor_mean_adjoint_into(g, ws.dr, ws.neighbor, ws.scratch);
  ws.dh += ws.dr - ws.neighbor;

  gr.theta_normal_w.noalias() = grad_pn * p.z_normal.transpose();
  gr.theta_normal_b = grad_pn;
  gr.theta_abnormal_w.noalias() = grad_pa * p.z_abnormal.transpose();
  gr.theta_abnormal_b = grad_pa;

  // GCN; the normalized adjacency is symmetric, so it is its own adjoint.
  ws.dagg = (tr.agg2.array() > T(0)).select(ws.dh.array(), T(0));
  spmm_into(adj, ws.dagg, ws.du);
  gr.w2 = tr.hidden.transpose() * ws.du;
  ws.tmp.noalias() = ws.du * p.w2.transpose();
  ws.dagg = (tr.agg1.array() > T(0)).select(ws.tmp.array(), T(0));
  spmm_into(adj, ws.dagg, ws.du);
  gr.w1 = x.transpose() * ws.du;

  out.loss.bce = bce;
  out.loss.align = align;
  out.loss.total = loss_total(bce, align, alpha);
  for (auto t : const_cast<const ModelParameters<T>&>(gr).trainable()) {
    for (T v : t) {
      if (!std::isfinite(static_cast<double>(v))) throw std::domain_error("non-finite gradient");
    }
  }
  return out;
}

template <typename T>
GradientResult<T> grad_total(const ModelParameters<T>& p, const NormalizedAdjacency<T>& adj,
                             const Matrix<T>& x, const AttributedGraph& g, double alpha) {
  GradientWorkspace<T> ws;
  return grad_total(p, adj, x, g, alpha, ws);
}

}  // namespace agfm
