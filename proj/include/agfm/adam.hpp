#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace agfm {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment estimates for a fixed list of parameter tensors.
template <typename T>
struct AdamState {
  AdamConfig config;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::uint64_t t = 0;

  AdamState() = default;
  AdamState(AdamConfig cfg, const std::vector<std::size_t>& sizes) : config(cfg) {
    for (std::size_t s : sizes) {
      m.emplace_back(s, T(0));
      v.emplace_back(s, T(0));
    }
  }
};

/// One bias-corrected Adam update. Gradients are checked for finiteness
/// before anything is modified.
template <typename T>
void adam_step(const std::vector<std::span<T>>& params,
               const std::vector<std::span<const T>>& grads, AdamState<T>& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: tensor count mismatch");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].size() != grads[k].size() || params[k].size() != state.m[k].size()) {
      throw std::invalid_argument("adam_step: shape mismatch in tensor " + std::to_string(k));
    }
    for (T g : grads[k]) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw std::domain_error("adam_step: non-finite gradient in tensor " + std::to_string(k));
      }
    }
  }

  const auto& c = state.config;
  state.t += 1;
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      const double g = static_cast<double>(grads[k][i]);
      const double mi = c.beta1 * static_cast<double>(m[i]) + (1.0 - c.beta1) * g;
      const double vi = c.beta2 * static_cast<double>(v[i]) + (1.0 - c.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double step = c.lr * (mi / correction1) / (std::sqrt(vi / correction2) + c.eps);
      params[k][i] = static_cast<T>(static_cast<double>(params[k][i]) - step);
    }
  }
}

}  // namespace agfm
