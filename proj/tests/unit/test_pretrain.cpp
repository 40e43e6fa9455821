#include "agfm/checkpoint.hpp"
#include "agfm/pretrain.hpp"
#include "agfm/synth.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>

using namespace agfm;
using test::random_graph;

namespace {

TrainConfig small_config(std::size_t epochs, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.hidden = 16;
  cfg.proto_dim = 12;
  cfg.dprime = 4;
  cfg.lr = 1e-3;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST(Pretrain, ZeroEpochsReturnsInit) {
  const auto g = random_graph(30, 5, 0.2, 1);
  const auto cfg = small_config(0, 7);
  const auto res = pretrain(g, cfg);
  EXPECT_TRUE(identical(res.model, init_model<float>(cfg.dims(), cfg.mu, cfg.sigma, init_seed(7))));
  EXPECT_TRUE(res.report.epochs.empty());
}

TEST(Pretrain, Deterministic) {
  const auto g = random_graph(40, 5, 0.15, 2);
  const auto cfg = small_config(20, 3);
  const auto a = pretrain(g, cfg);
  const auto b = pretrain(g, cfg);
  ASSERT_EQ(a.report.epochs.size(), 20u);
  for (std::size_t e = 0; e < 20; ++e) {
    EXPECT_EQ(a.report.epochs[e].total, b.report.epochs[e].total);
    EXPECT_EQ(a.report.epochs[e].bce, b.report.epochs[e].bce);
  }
  EXPECT_EQ(encode_model(a.model, to_json(cfg)), encode_model(b.model, to_json(cfg)));
}

TEST(Pretrain, ReportIsConsistent) {
  const auto g = random_graph(40, 5, 0.15, 4);
  auto cfg = small_config(5, 1);
  cfg.alpha = 0.5;
  std::vector<std::size_t> seen;
  const auto res = pretrain(g, cfg, [&](const EpochLosses& e) { seen.push_back(e.epoch); });
  EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2, 3, 4, 5}));
  for (const auto& e : res.report.epochs) {
    EXPECT_NEAR(e.total, e.bce + 0.5 * e.align, 1e-9 * e.total);
    EXPECT_GE(e.bce, 0.0);
    EXPECT_GE(e.align, 0.0);
  }
}

TEST(Pretrain, RejectsBadInput) {
  auto g = random_graph(20, 3, 0.2, 5);
  std::fill(g.labels->begin(), g.labels->end(), 0);
  EXPECT_THROW(pretrain(g, small_config(1, 0)), std::invalid_argument);
  g.labels.reset();
  EXPECT_THROW(pretrain(g, small_config(1, 0)), std::invalid_argument);
  auto bad = small_config(1, 0);
  bad.lr = 0.0;
  EXPECT_THROW(pretrain(random_graph(20, 3, 0.2, 5), bad), std::invalid_argument);
}

TEST(Pretrain, PrototypeBasesStayFrozen) {
  const auto g = random_graph(40, 5, 0.15, 6);
  const auto cfg = small_config(30, 2);
  const auto init = init_model<float>(cfg.dims(), cfg.mu, cfg.sigma, init_seed(cfg.seed));
  const auto res = pretrain(g, cfg);
  EXPECT_EQ(0, std::memcmp(init.z_normal.data(), res.model.z_normal.data(), 12 * sizeof(float)));
  EXPECT_EQ(0, std::memcmp(init.z_abnormal.data(), res.model.z_abnormal.data(), 12 * sizeof(float)));
  EXPECT_FALSE(identical(init, res.model));
}

TEST(Pretrain, WriteReportCsv) {
  test::TempDir t;
  const auto res = pretrain(random_graph(20, 3, 0.2, 7), small_config(3, 0));
  write_report_csv(res.report, t / "r.csv");
  const std::string text = test::slurp(t / "r.csv");
  EXPECT_EQ(text.rfind("epoch,l_bce,l_align,l_total\n1,", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
}

TEST(Pretrain, DefaultConfigReducesLoss) {
  const auto g = synth_graph({.nodes = 2000, .anomaly_rate = 0.05, .homophily = 0.9, .seed = 1});
  const auto res = pretrain(g, TrainConfig{});
  const auto& ep = res.report.epochs;
  ASSERT_EQ(ep.size(), 300u);
  EXPECT_LT(ep[49].total, ep[0].total);
  const double lowest =
      std::min_element(ep.begin(), ep.end(), [](auto& a, auto& b) { return a.total < b.total; })->total;
  EXPECT_LT(lowest, 0.5 * ep[0].total);
}

TEST(Pretrain, NormalResidualsAlignWithNormalPrototype) {
  int consistent = 0;
  const auto g = synth_graph({.nodes = 600, .anomaly_rate = 0.05, .homophily = 0.9, .seed = 1});
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.hidden = 64;
    cfg.proto_dim = 64;
    const auto res = pretrain(g, cfg);
    const auto emb = embed_graph(res.model, g, svd_seed(seed));
    const auto protos = prototypes(res.model);
    double to_normal = 0.0, to_abnormal = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
      if ((*g.labels)[i]) continue;
      const Vector<float> r = emb.residual.row(static_cast<Eigen::Index>(i)).transpose();
      to_normal += (r - protos.normal).norm();
      to_abnormal += (r - protos.abnormal).norm();
      ++n;
    }
    consistent += to_normal / n < to_abnormal / n;
  }
  EXPECT_GE(consistent, 4);
}
