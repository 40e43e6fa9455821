#include "agfm/cli.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace agfm;
using test::slurp;
using test::TempDir;
using test::write_text;

namespace {

struct Result {
  int code;
  std::string out;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "agfm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream os;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), os);
  return {code, os.str()};
}

std::string p(const TempDir& t, const std::string& name) { return (t / name).string(); }

// Small, fast pretraining flags.
std::vector<std::string> pretrain_args(const TempDir& t, const std::string& graph, const std::string& out) {
  return {"pretrain", "--graph", p(t, graph), "--out", p(t, out), "--epochs", "3", "--hidden", "8",
          "--proto-dim", "6", "--dprime", "4", "--seed", "5"};
}

}  // namespace

TEST(CliHelpers, ParseBeta) {
  EXPECT_FALSE(cli::parse_beta("auto").has_value());
  EXPECT_EQ(cli::parse_beta("0.5"), 0.5);
  EXPECT_EQ(cli::parse_beta("4"), 4.0);
  EXPECT_THROW(cli::parse_beta("-1"), cli::CliError);
  EXPECT_THROW(cli::parse_beta("inf"), cli::CliError);
  EXPECT_THROW(cli::parse_beta("x"), cli::CliError);
}

TEST(CliHelpers, ReadIdFile) {
  TempDir t;
  write_text(t / "ids", "# shots\n3\n\n7\n");
  EXPECT_EQ(cli::read_id_file(t / "ids", 10), (std::vector<NodeId>{3, 7}));
  EXPECT_THROW(cli::read_id_file(t / "ids", 5), std::exception);
  write_text(t / "empty", "# nothing\n");
  EXPECT_THROW(cli::read_id_file(t / "empty", 5), std::exception);
}

TEST(CliHelpers, ScoresCsvRoundTrip) {
  TempDir t;
  ScoreVector sv;
  sv.scores = {1.5, 2.0000000001, 1e-300};
  sv.excluded = {0, 1, 0};
  sv.beta_used = 4.0;
  sv.mode = ScoreMode::few_shot;
  cli::write_scores_csv(sv, t / "s.csv");
  const std::string text = slurp(t / "s.csv");
  EXPECT_EQ(text.rfind("# mode=few_shot beta_used=4 clipped=0\nnode,score,excluded\n0,1.5,0\n1,2,1\n", 0), 0u);
  const auto f = cli::read_scores_csv(t / "s.csv");
  EXPECT_EQ(f.excluded, sv.excluded);
  EXPECT_EQ(f.scores[0], 1.5);
}

TEST(Cli, SynthSimAndEval) {
  TempDir t;
  auto r = run_cli({"synth", "--out", p(t, "g"), "--nodes", "200", "--rate", "0.1", "--seed", "3"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("nodes=200 ", 0), 0u);
  EXPECT_NE(r.out.find("anomalies=20"), std::string::npos);
  r = run_cli({"sim", "--graph", p(t, "g")});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.size(), 9u);

  write_text(t / "s.csv", "node,score,excluded\n0,3,0\n1,1,0\n2,2,1\n3,0,0\n");
  write_text(t / "l.csv", "node,label\n0,1\n1,0\n2,1\n3,0\n");
  r = run_cli({"eval", "--scores", p(t, "s.csv"), "--labels", p(t, "l.csv")});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "auroc=1.000000 auprc=1.000000 n_pos=1 n_neg=2\n");
}

TEST(Cli, SimOfIdenticalFeaturesIsOne) {
  TempDir t;
  write_text(t / "meta.json", R"({"name": "same", "num_nodes": 3, "feature_dim": 2})");
  write_text(t / "edges.csv", "src,dst\n0,1\n1,2\n");
  write_text(t / "features.csv", "1,2\n1,2\n1,2\n");
  const auto r = run_cli({"sim", "--graph", t.path().string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "1.000000\n");
}

TEST(Cli, LowSimilarityGraphSelectsBetaFour) {
  TempDir t;
  ASSERT_EQ(run_cli({"synth", "--out", p(t, "g"), "--nodes", "120", "--rate", "0.1", "--homophily", "0.0",
                     "--blocks", "8", "--seed", "1"}).code, 0);
  const auto sim = run_cli({"sim", "--graph", p(t, "g")});
  ASSERT_LT(std::stod(sim.out), 0.5);
  ASSERT_EQ(run_cli(pretrain_args(t, "g", "m.agfm")).code, 0);
  const auto r = run_cli({"score", "--model", p(t, "m.agfm"), "--graph", p(t, "g"), "--out", p(t, "s.csv")});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("mode=zero_shot beta_used=4 ", 0), 0u);
  EXPECT_NE(r.out.find("auroc="), std::string::npos);
  EXPECT_EQ(slurp(t / "s.csv").rfind("# mode=zero_shot beta_used=4 ", 0), 0u);
}

TEST(Cli, PretrainZeroEpochsWritesInit) {
  TempDir t;
  ASSERT_EQ(run_cli({"synth", "--out", p(t, "g"), "--nodes", "100", "--rate", "0.1"}).code, 0);
  auto args = pretrain_args(t, "g", "m.agfm");
  args[6] = "0";
  const auto r = run_cli(args);
  ASSERT_EQ(r.code, 0);
  const auto ck = load_model(t / "m.agfm");
  EXPECT_TRUE(identical(ck.model, init_model<float>({4, 8, 6}, 0.0, 1.0, init_seed(5))));
  EXPECT_EQ(r.out, "model=" + ck.hash + "\n");
}

TEST(Cli, FullPipelineIsByteReproducible) {
  TempDir t;
  auto all = [&](const std::string& tag) {
    EXPECT_EQ(run_cli({"synth", "--out", p(t, "a" + tag), "--nodes", "150", "--rate", "0.1", "--seed", "1"}).code, 0);
    EXPECT_EQ(run_cli({"synth", "--out", p(t, "b" + tag), "--nodes", "150", "--rate", "0.1", "--seed", "2"}).code, 0);
    auto pa = pretrain_args(t, "a" + tag, "m" + tag);
    pa.insert(pa.end(), {"--report", p(t, "r" + tag)});
    EXPECT_EQ(run_cli(pa).code, 0);
    EXPECT_EQ(run_cli({"score", "--model", p(t, "m" + tag), "--graph", p(t, "b" + tag), "--out", p(t, "z" + tag)}).code, 0);
    EXPECT_EQ(run_cli({"tune", "--model", p(t, "m" + tag), "--graph", p(t, "b" + tag), "--out", p(t, "pr" + tag),
                       "--shots", "5", "--seed", "2"}).code, 0);
    EXPECT_EQ(run_cli({"score-few", "--model", p(t, "m" + tag), "--prompt", p(t, "pr" + tag), "--graph",
                       p(t, "b" + tag), "--out", p(t, "f" + tag)}).code, 0);
    EXPECT_EQ(run_cli({"score-subgraph", "--model", p(t, "m" + tag), "--graph", p(t, "b" + tag), "--out",
                       p(t, "sg" + tag), "--size", "4", "--seed", "3"}).code, 0);
  };
  all("1");
  all("2");
  for (const char* f : {"m", "r", "z", "pr", "f", "sg"}) {
    const std::string a = slurp(t / (std::string(f) + "1")), b = slurp(t / (std::string(f) + "2"));
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, b) << f;
  }
  for (const char* f : {"meta.json", "edges.csv", "features.csv", "labels.csv"}) {
    EXPECT_EQ(slurp(t / "b1" / f), slurp(t / "b2" / f)) << f;
  }
  const auto prompt = load_prompt(t / "pr1");
  EXPECT_EQ(prompt.shots.size(), 5u);
  EXPECT_EQ(prompt.model_hash, load_model(t / "m1").hash);
  const auto few = cli::read_scores_csv(t / "f1");
  for (NodeId v : prompt.shots) EXPECT_EQ(few.excluded[v], 1);
}

TEST(Cli, TuneWithNormalsFileAndAbnormalTarget) {
  TempDir t;
  ASSERT_EQ(run_cli({"synth", "--out", p(t, "g"), "--nodes", "100", "--rate", "0.1", "--seed", "4"}).code, 0);
  ASSERT_EQ(run_cli(pretrain_args(t, "g", "m")).code, 0);
  write_text(t / "ids", "1\n2\n");
  auto r = run_cli({"tune", "--model", p(t, "m"), "--graph", p(t, "g"), "--out", p(t, "pr"), "--normals", p(t, "ids")});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("target=normal shots=2 ", 0), 0u);
  r = run_cli({"tune", "--model", p(t, "m"), "--graph", p(t, "g"), "--out", p(t, "pa"), "--shots", "3",
               "--target", "abnormal"});
  ASSERT_EQ(r.code, 0);
  const auto pa = load_prompt(t / "pa");
  EXPECT_EQ(pa.target, PromptTarget::abnormal);
  const auto labels = load_graph(t / "g").labels.value();
  for (NodeId v : pa.shots) EXPECT_EQ(labels[v], 1);
}

TEST(Cli, SubgraphTargetsFile) {
  TempDir t;
  ASSERT_EQ(run_cli({"synth", "--out", p(t, "g"), "--nodes", "100", "--rate", "0.1"}).code, 0);
  ASSERT_EQ(run_cli(pretrain_args(t, "g", "m")).code, 0);
  write_text(t / "ids", "4\n9\n");
  ASSERT_EQ(run_cli({"score-subgraph", "--model", p(t, "m"), "--graph", p(t, "g"), "--out", p(t, "s"),
                     "--targets", p(t, "ids"), "--beta", "1"}).code, 0);
  const auto f = cli::read_scores_csv(t / "s");
  std::size_t included = 0;
  for (auto e : f.excluded) included += e == 0;
  EXPECT_EQ(included, 2u);
  EXPECT_EQ(f.excluded[4], 0);
  EXPECT_EQ(f.excluded[9], 0);
}

TEST(Cli, Errors) {
  TempDir t;
  EXPECT_NE(run_cli({}).code, 0);
  EXPECT_NE(run_cli({"bogus"}).code, 0);
  EXPECT_EQ(run_cli({"sim", "--graph", p(t, "missing")}).code, 1);
  ASSERT_EQ(run_cli({"synth", "--out", p(t, "g"), "--nodes", "100", "--rate", "0.1"}).code, 0);
  EXPECT_NE(run_cli({"score", "--model", p(t, "nope"), "--graph", p(t, "g"), "--out", p(t, "s")}).code, 0);
  ASSERT_EQ(run_cli(pretrain_args(t, "g", "m")).code, 0);
  EXPECT_NE(run_cli({"score", "--model", p(t, "m"), "--graph", p(t, "g"), "--out", p(t, "s"), "--beta", "-2"}).code, 0);
  EXPECT_NE(run_cli({"tune", "--model", p(t, "m"), "--graph", p(t, "g"), "--out", p(t, "pr")}).code, 0);
  EXPECT_NE(run_cli({"tune", "--model", p(t, "m"), "--graph", p(t, "g"), "--out", p(t, "pr"), "--shots", "2",
                     "--normals", p(t, "x")}).code, 0);
  EXPECT_NE(run_cli({"tune", "--model", p(t, "m"), "--graph", p(t, "g"), "--out", p(t, "pr"), "--shots", "2",
                     "--target", "weird"}).code, 0);
  EXPECT_NE(run_cli({"score-subgraph", "--model", p(t, "m"), "--graph", p(t, "g"), "--out", p(t, "s"),
                     "--size", "0"}).code, 0);

  // A prompt tuned against one model is refused for another.
  ASSERT_EQ(run_cli({"tune", "--model", p(t, "m"), "--graph", p(t, "g"), "--out", p(t, "pr"), "--shots", "2"}).code, 0);
  auto other = pretrain_args(t, "g", "m2");
  other.back() = "6";
  ASSERT_EQ(run_cli(other).code, 0);
  EXPECT_EQ(run_cli({"score-few", "--model", p(t, "m2"), "--prompt", p(t, "pr"), "--graph", p(t, "g"), "--out",
                     p(t, "f")}).code, 1);
}
