#pragma once

#include "agfm/model.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace agfm {

/// Sum over nodes of the squared distance between each residual and its
/// class prototype (normal for label 0, abnormal for label 1). Unnormalized.
template <typename T>
double loss_alignment(const Matrix<T>& residual, std::span<const std::uint8_t> labels,
                      const PrototypePair<T>& protos) {
  if (static_cast<std::size_t>(residual.rows()) != labels.size()) {
    throw std::invalid_argument("loss_alignment: label count does not match residual rows");
  }
  const Vector<double> pn = protos.normal.template cast<double>();
  const Vector<double> pa = protos.abnormal.template cast<double>();
  double total = 0.0;
  for (Eigen::Index i = 0; i < residual.rows(); ++i) {
    const auto& proto = labels[static_cast<std::size_t>(i)] ? pa : pn;
    total += (residual.row(i).template cast<double>().transpose() - proto).squaredNorm();
  }
  return total;
}

/// Binary cross-entropy, -sum[y ln p + (1 - y) ln(1 - p)], over clipped
/// probabilities.
template <typename T>
double loss_bce(const Vector<T>& probs, std::span<const std::uint8_t> labels) {
  if (static_cast<std::size_t>(probs.size()) != labels.size()) {
    throw std::invalid_argument("loss_bce: label count does not match probabilities");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double p = static_cast<double>(probs(i));
    total -= labels[static_cast<std::size_t>(i)] ? std::log(p) : std::log(1.0 - p);
  }
  return total;
}

inline double loss_total(double bce, double align, double alpha) { return bce + alpha * align; }

struct LossBreakdown {
  double bce = 0.0;
  double align = 0.0;
  double total = 0.0;
};

}  // namespace agfm
