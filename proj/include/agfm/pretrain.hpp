#pragma once

#include "agfm/adam.hpp"
#include "agfm/gradients.hpp"
#include "agfm/model.hpp"
#include "agfm/rng.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace agfm {

struct TrainConfig {
  std::size_t epochs = 300;
  double lr = 1e-4;
  double alpha = 1.0;
  std::size_t hidden = 300;
  std::size_t proto_dim = 300;  // also the representation width d
  std::size_t dprime = 10;
  double mu = 0.0;
  double sigma = 1.0;
  std::uint64_t seed = 0;

  ModelDims dims() const { return {dprime, hidden, proto_dim}; }

  void check() const {
    if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be > 0");
    if (!(alpha >= 0.0)) throw std::invalid_argument("TrainConfig: alpha must be >= 0");
    if (!(sigma > 0.0)) throw std::invalid_argument("TrainConfig: sigma must be > 0");
    if (hidden == 0 || proto_dim == 0 || dprime == 0) {
      throw std::invalid_argument("TrainConfig: dimensions must be positive");
    }
  }
};

struct EpochLosses {
  std::size_t epoch = 0;  // 1-based
  double bce = 0.0;
  double align = 0.0;
  double total = 0.0;
};

struct TrainReport {
  std::vector<EpochLosses> epochs;
};

struct TrainingDiverged : std::runtime_error {
  std::size_t epoch;
  TrainingDiverged(std::size_t e, const std::string& what)
      : std::runtime_error("training diverged at epoch " + std::to_string(e) + ": " + what),
        epoch(e) {}
};

struct PretrainResult {
  ModelParameters<float> model;
  TrainReport report;
};

/// Seeds of the training substreams.
inline std::uint64_t init_seed(std::uint64_t seed) { return derive_seed(seed, "init"); }
inline std::uint64_t svd_seed(std::uint64_t seed) { return derive_seed(seed, "svd"); }

/// Full-batch pretraining on one labeled auxiliary graph. Each epoch is one
/// forward pass, one gradient evaluation and one Adam step over every
/// trainable tensor; the Gaussian prototype bases stay frozen. The reported
/// losses are those of the parameters before the epoch's step.
inline PretrainResult pretrain(const AttributedGraph& g, const TrainConfig& cfg,
                               const std::function<void(const EpochLosses&)>& on_epoch = {}) {
  cfg.check();
  if (!g.labels) throw std::invalid_argument("pretrain: training graph has no labels");
  std::size_t positives = 0;
  for (auto v : *g.labels) positives += v;
  if (positives == 0 || positives == g.num_nodes) {
    throw std::invalid_argument("pretrain: labels must contain both classes");
  }

  const Matrix<float> x = unify_features(g.features, cfg.dprime, svd_seed(cfg.seed));
  const NormalizedAdjacency<float> adj = normalize_adjacency<float>(g);

  PretrainResult result;
  result.model = init_model<float>(cfg.dims(), cfg.mu, cfg.sigma, init_seed(cfg.seed));
  auto& model = result.model;

  std::vector<std::size_t> sizes;
  for (auto t : model.trainable()) sizes.push_back(t.size());
  AdamState<float> adam(AdamConfig{.lr = cfg.lr}, sizes);

  GradientWorkspace<float> ws;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const GradientResult<float>* computed = nullptr;
    try {
      computed = &grad_total(model, adj, x, g, cfg.alpha, ws);
    } catch (const std::domain_error& e) {
      throw TrainingDiverged(epoch, e.what());
    }
    const GradientResult<float>& step = *computed;
    if (!std::isfinite(step.loss.total)) throw TrainingDiverged(epoch, "non-finite loss");
    const EpochLosses losses{epoch, step.loss.bce, step.loss.align, step.loss.total};
    result.report.epochs.push_back(losses);
    if (on_epoch) on_epoch(losses);
    adam_step(model.trainable(), std::as_const(step.grads).trainable(), adam);
  }
  return result;
}

inline void write_report_csv(const TrainReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,l_bce,l_align,l_total\n";
  char line[128];
  for (const auto& e : report.epochs) {
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%.17g\n", e.epoch, e.bce, e.align, e.total);
    out << line;
  }
}

}  // namespace agfm
