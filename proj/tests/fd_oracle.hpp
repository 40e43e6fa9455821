#pragma once

#include "agfm/gradients.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace agfm::test {

// Central finite differences against grad_total, in double. The loss is
// piecewise smooth: ReLU gates and the probability clip switch it between
// smooth pieces. A stencil whose endpoints fall in different pieces than its
// center measures a jump rather than a slope, so the step is halved until
// the activation pattern is the same at x - h, x and x + h.
struct FdReport {
  double worst_rel = 0.0;      // max |a - n| / max(|a|, |n|, 1e-6)
  std::size_t checked = 0;     // entries compared
  std::size_t refined = 0;     // entries that needed a smaller step
  std::size_t unresolved = 0;  // entries with no kink-free stencil down to 1e-9
};

inline std::vector<std::uint8_t> activation_pattern(const ModelParameters<double>& p,
                                                    const NormalizedAdjacency<double>& adj,
                                                    const Matrix<double>& x) {
  const ForwardTrace<double> tr = forward_trace(p, adj, x);
  Matrix<double> pre = tr.repr * p.clf_w1;
  pre.rowwise() += p.clf_b1.transpose();
  const Vector<double> logits = classifier_logits(p, tr.repr);
  std::vector<std::uint8_t> mask;
  mask.reserve(static_cast<std::size_t>(tr.agg1.size() + tr.agg2.size() + pre.size() + logits.size()));
  for (Eigen::Index i = 0; i < tr.agg1.size(); ++i) mask.push_back(tr.agg1.data()[i] > 0);
  for (Eigen::Index i = 0; i < tr.agg2.size(); ++i) mask.push_back(tr.agg2.data()[i] > 0);
  for (Eigen::Index i = 0; i < pre.size(); ++i) mask.push_back(pre.data()[i] > 0);
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double s = sigmoid(logits(i));
    mask.push_back(s < kProbabilityClip ? 0 : s > 1.0 - kProbabilityClip ? 2 : 1);
  }
  return mask;
}

inline FdReport finite_difference_check(std::uint64_t seed, double alpha = 1.0) {
  const AttributedGraph g = random_graph(20, 6, 0.2, seed);
  const Matrix<double> x = unify_features(Matrix<double>(g.features.cast<double>()), 6, seed);
  const NormalizedAdjacency<double> adj = normalize_adjacency<double>(g);
  ModelParameters<double> p = init_model<double>({6, 8, 8}, 0.0, 1.0, seed);
  const GradientResult<double> analytic = grad_total(p, adj, x, g, alpha);
  const auto params = p.trainable();
  const auto grads = std::as_const(analytic.grads).trainable();

  FdReport rep;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      const double orig = params[k][i];
      const auto center = activation_pattern(p, adj, x);
      double h = 1e-3;
      bool resolved = false;
      for (; h >= 1e-9; h *= 0.5) {
        params[k][i] = orig + h;
        const bool same_plus = activation_pattern(p, adj, x) == center;
        params[k][i] = orig - h;
        const bool same_minus = activation_pattern(p, adj, x) == center;
        params[k][i] = orig;
        if (same_plus && same_minus) {
          resolved = true;
          break;
        }
      }
      if (!resolved) {
        ++rep.unresolved;
        continue;
      }
      if (h < 1e-3) ++rep.refined;
      params[k][i] = orig + h;
      const double lp = compute_losses(p, adj, x, g, alpha).total;
      params[k][i] = orig - h;
      const double lm = compute_losses(p, adj, x, g, alpha).total;
      params[k][i] = orig;
      const double numeric = (lp - lm) / (2.0 * h);
      const double a = grads[k][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      rep.worst_rel = std::max(rep.worst_rel, rel);
      ++rep.checked;
    }
  }
  return rep;
}

}  // namespace agfm::test
