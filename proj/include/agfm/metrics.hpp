#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace agfm {

struct EvalResult {
  double auroc = 0.0;
  double auprc = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

namespace detail {

inline void check_metric_input(std::span<const double> scores,
                               std::span<const std::uint8_t> labels, std::size_t& n_pos,
                               std::size_t& n_neg) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("metric: scores and labels differ in length");
  }
  n_pos = 0;
  for (auto y : labels) n_pos += (y != 0);
  n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw std::invalid_argument("metric: both classes must be present");
  }
}

// Indices sorted by descending score.
inline std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace detail

/// P(score_pos > score_neg) + 0.5 * P(tie), via the rank-sum identity with
/// midranks for tied groups.
inline double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  std::size_t n_pos, n_neg;
  detail::check_metric_input(scores, labels, n_pos, n_neg);
  const auto order = detail::descending_order(scores);
  // Walk from the top; within a tie group every negative below counts as
  // beaten, and pairs inside the group count half.
  double wins = 0.0;
  std::size_t neg_above = 0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    std::size_t pos = 0, neg = 0;
    while (end < order.size() && scores[order[end]] == scores[order[start]]) {
      (labels[order[end]] ? pos : neg) += 1;
      ++end;
    }
    const std::size_t neg_below = n_neg - neg_above - neg;
    wins += static_cast<double>(pos) * (static_cast<double>(neg_below) + 0.5 * static_cast<double>(neg));
    neg_above += neg;
    start = end;
  }
  return wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// Average precision: sum over descending thresholds of
/// (recall_k - recall_{k-1}) * precision_k, each tie group one threshold.
inline double auprc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  std::size_t n_pos, n_neg;
  detail::check_metric_input(scores, labels, n_pos, n_neg);
  const auto order = detail::descending_order(scores);
  double ap = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    std::size_t pos = 0;
    while (end < order.size() && scores[order[end]] == scores[order[start]]) {
      pos += labels[order[end]] ? 1 : 0;
      ++end;
    }
    tp += pos;
    seen += end - start;
    if (pos > 0) {
      ap += (static_cast<double>(pos) / static_cast<double>(n_pos)) *
            (static_cast<double>(tp) / static_cast<double>(seen));
    }
    start = end;
  }
  return ap;
}

/// Both metrics over the nodes whose `excluded` flag is 0 (all nodes when
/// the mask is empty).
inline EvalResult evaluate(std::span<const double> scores, std::span<const std::uint8_t> labels,
                           std::span<const std::uint8_t> excluded = {}) {
  std::vector<double> s;
  std::vector<std::uint8_t> y;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!excluded.empty() && excluded[i]) continue;
    s.push_back(scores[i]);
    y.push_back(labels[i]);
  }
  EvalResult r;
  r.auroc = auroc(s, y);
  r.auprc = auprc(s, y);
  for (auto v : y) (v ? r.n_pos : r.n_neg) += 1;
  return r;
}

}  // namespace agfm
