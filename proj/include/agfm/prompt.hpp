#pragma once

#include "agfm/adam.hpp"
#include "agfm/model.hpp"
#include "agfm/pretrain.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace agfm {

enum class PromptTarget { normal, abnormal };

inline const char* to_string(PromptTarget t) {
  return t == PromptTarget::normal ? "normal" : "abnormal";
}

inline PromptTarget parse_prompt_target(const std::string& s) {
  if (s == "normal") return PromptTarget::normal;
  if (s == "abnormal") return PromptTarget::abnormal;
  throw std::invalid_argument("prompt target must be 'normal' or 'abnormal', got '" + s + "'");
}

/// Few-shot refinement of one pretrained prototype:
///   p' = p + (phi_w * p + phi_b) + psi.
/// Also records what the refinement is tied to: the labeled shots, the
/// projection seed used when computing their residuals, and the content
/// hash of the frozen model.
struct PromptParameters {
  PromptTarget target = PromptTarget::normal;
  Matrix<float> phi_w;
  Vector<float> phi_b;
  Vector<float> psi;
  std::size_t tune_epochs = 0;
  double tune_lr = 0.0;
  std::uint64_t svd_seed = 0;
  std::vector<NodeId> shots;
  std::string model_hash;

  std::size_t dim() const { return static_cast<std::size_t>(psi.size()); }

  std::vector<TensorView<float>> tensors() {
    const std::size_t d = dim();
    return {{"prompt.phi.w", {d, d}, as_span(phi_w)},
            {"prompt.phi.b", {d}, as_span(phi_b)},
            {"prompt.psi", {d}, as_span(psi)}};
  }
};

inline PromptParameters zero_prompt(std::size_t d, PromptTarget target) {
  PromptParameters pr;
  pr.target = target;
  pr.phi_w = Matrix<float>::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  pr.phi_b = Vector<float>::Zero(static_cast<Eigen::Index>(d));
  pr.psi = Vector<float>::Zero(static_cast<Eigen::Index>(d));
  return pr;
}

/// The refined prototype for the prompt's target class.
inline Vector<float> refined_prototype(const PrototypePair<float>& protos,
                                       const PromptParameters& pr) {
  const Vector<float>& base = pr.target == PromptTarget::normal ? protos.normal : protos.abnormal;
  if (base.size() != pr.psi.size() || pr.phi_w.rows() != base.size() ||
      pr.phi_w.cols() != base.size() || pr.phi_b.size() != base.size()) {
    throw std::invalid_argument("refined_prototype: prompt dim " + std::to_string(pr.psi.size()) +
                                " does not match prototype dim " + std::to_string(base.size()));
  }
  const Vector<float> adapted = pr.phi_w * base + pr.phi_b;
  return base + adapted + pr.psi;
}

struct TuneConfig {
  std::size_t epochs = 100;
  double lr = 1e-3;
  std::uint64_t seed = 0;  // projection substream, see svd_seed()
};

struct TuneResult {
  PromptParameters prompt;
  std::vector<double> loss_history;  // L_pt before each step
  double final_loss = 0.0;           // L_pt after the last step
};

namespace detail {

inline double prompt_loss(const Matrix<float>& shot_residuals, const Vector<float>& refined) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < shot_residuals.rows(); ++i) {
    total += (shot_residuals.row(i).transpose() - refined).cast<double>().squaredNorm();
  }
  return total;
}

}  // namespace detail

/// One-class prompt tuning. Residuals of the labeled nodes are computed once
/// with the frozen model over the whole target graph; Adam then minimizes
/// sum_i ||r_i - p'||^2 over (phi, psi) only, starting from zero.
inline TuneResult tune_prompt(const ModelParameters<float>& model, const AttributedGraph& g,
                              std::span<const NodeId> labeled, PromptTarget target,
                              const TuneConfig& cfg, const std::string& model_hash = {}) {
  if (labeled.empty()) throw std::invalid_argument("tune: the labeled shot set is empty");
  for (NodeId v : labeled) {
    if (v >= g.num_nodes) {
      throw std::invalid_argument("tune: shot node " + std::to_string(v) + " is >= N");
    }
  }
  if (!(cfg.lr > 0.0)) throw std::invalid_argument("tune: lr must be > 0");

  const std::uint64_t projection_seed = svd_seed(cfg.seed);
  const GraphEmbedding<float> emb = embed_graph(model, g, projection_seed);
  Matrix<float> shot_res(static_cast<Eigen::Index>(labeled.size()), emb.residual.cols());
  for (std::size_t k = 0; k < labeled.size(); ++k) {
    shot_res.row(static_cast<Eigen::Index>(k)) = emb.residual.row(labeled[k]);
  }
  const PrototypePair<float> protos = prototypes(model);
  const Vector<float>& base = target == PromptTarget::normal ? protos.normal : protos.abnormal;

  TuneResult result;
  result.prompt = zero_prompt(static_cast<std::size_t>(base.size()), target);
  auto& pr = result.prompt;
  pr.tune_epochs = cfg.epochs;
  pr.tune_lr = cfg.lr;
  pr.svd_seed = projection_seed;
  pr.shots.assign(labeled.begin(), labeled.end());
  pr.model_hash = model_hash;

  const Vector<float> residual_sum = shot_res.colwise().sum().transpose();
  const auto shots = static_cast<float>(labeled.size());
  AdamState<float> adam(AdamConfig{.lr = cfg.lr},
                        {static_cast<std::size_t>(pr.phi_w.size()),
                         static_cast<std::size_t>(pr.phi_b.size()),
                         static_cast<std::size_t>(pr.psi.size())});
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Vector<float> refined = refined_prototype(protos, pr);
    result.loss_history.push_back(detail::prompt_loss(shot_res, refined));
    // dL/dp' = 2 * (K p' - sum_i r_i)
    const Vector<float> grad_refined = 2.0f * (shots * refined - residual_sum);
    const Matrix<float> grad_w = grad_refined * base.transpose();
    adam_step<float>({as_span(pr.phi_w), as_span(pr.phi_b), as_span(pr.psi)},
                     {as_span(grad_w), as_span(grad_refined), as_span(grad_refined)}, adam);
  }
  result.final_loss = detail::prompt_loss(shot_res, refined_prototype(protos, pr));
  return result;
}

inline TuneResult tune_normal(const ModelParameters<float>& model, const AttributedGraph& g,
                              std::span<const NodeId> labeled_normals, const TuneConfig& cfg,
                              const std::string& model_hash = {}) {
  return tune_prompt(model, g, labeled_normals, PromptTarget::normal, cfg, model_hash);
}

inline TuneResult tune_abnormal(const ModelParameters<float>& model, const AttributedGraph& g,
                                std::span<const NodeId> labeled_anomalies, const TuneConfig& cfg,
                                const std::string& model_hash = {}) {
  return tune_prompt(model, g, labeled_anomalies, PromptTarget::abnormal, cfg, model_hash);
}

/// K distinct nodes with the given label, sampled without replacement.
inline std::vector<NodeId> sample_shots(const AttributedGraph& g, std::uint8_t label,
                                        std::size_t k, std::uint64_t seed) {
  if (!g.labels) throw std::invalid_argument("sample_shots: graph has no labels");
  std::vector<NodeId> pool;
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    if ((*g.labels)[i] == label) pool.push_back(static_cast<NodeId>(i));
  }
  if (k == 0 || k > pool.size()) {
    throw std::invalid_argument("sample_shots: requested " + std::to_string(k) + " shots but " +
                                std::to_string(pool.size()) + " nodes carry label " +
                                std::to_string(label));
  }
  Rng rng(derive_seed(seed, "shots"));
  for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
  pool.resize(k);
  return pool;
}

}  // namespace agfm
