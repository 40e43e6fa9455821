#include "agfm/linalg.hpp"
#include "test_util.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <cmath>

using namespace agfm;
using test::random_graph;

namespace {

AttributedGraph path3() {
  const std::vector<std::pair<NodeId, NodeId>> e{{0, 1}, {1, 2}};
  return build_graph(3, e, Matrix<float>::Zero(3, 1));
}

Matrix<double> dense_normalized(const AttributedGraph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes);
  Matrix<double> a = Matrix<double>::Identity(n, n);
  for (std::size_t i = 0; i < g.num_nodes; ++i)
    for (NodeId j : g.neighbors(i)) a(static_cast<Eigen::Index>(i), j) = 1.0;
  const Vector<double> d = a.rowwise().sum().cwiseSqrt().cwiseInverse();
  return d.asDiagonal() * a * d.asDiagonal();
}

Matrix<float> random_dense(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix<float> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.normal());
  return m;
}

}  // namespace

TEST(NormalizeAdjacency, SingleNode) {
  const auto g = build_graph(1, {}, Matrix<float>::Zero(1, 1));
  const auto a = normalize_adjacency<double>(g).to_dense();
  ASSERT_EQ(a.rows(), 1);
  EXPECT_DOUBLE_EQ(a(0, 0), 1.0);
}

TEST(NormalizeAdjacency, SingleEdgeIsAllHalf) {
  const std::vector<std::pair<NodeId, NodeId>> e{{0, 1}};
  const auto a = normalize_adjacency<double>(build_graph(2, e, Matrix<float>::Zero(2, 1))).to_dense();
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(a.data()[i], 0.5, 1e-15);
}

TEST(NormalizeAdjacency, PathGraph) {
  const auto a = normalize_adjacency<double>(path3()).to_dense();
  EXPECT_NEAR(a(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(a(1, 1), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(a(2, 2), 0.5, 1e-15);
  EXPECT_NEAR(a(0, 1), 1.0 / std::sqrt(6.0), 1e-15);
  EXPECT_NEAR(a(1, 2), 1.0 / std::sqrt(6.0), 1e-15);
  EXPECT_EQ(a(0, 2), 0.0);
}

TEST(NormalizeAdjacency, MatchesDenseOracleAndIsSymmetric) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = random_graph(15, 2, 0.25, seed);
    const auto adj = normalize_adjacency<double>(g);
    const auto a = adj.to_dense();
    EXPECT_LT((a - dense_normalized(g)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_EQ(a, a.transpose());
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
      for (auto k = adj.row_offsets[i] + 1; k < adj.row_offsets[i + 1]; ++k)
        EXPECT_LT(adj.col_indices[k - 1], adj.col_indices[k]);
    }
  }
}

TEST(NormalizeAdjacency, SpectrumWithinUnitInterval) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 2 + seed % 7;
    const auto g = random_graph(n, 1, 0.5, seed);
    const Eigen::MatrixXd a = normalize_adjacency<double>(g).to_dense();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1.0 - 1e-12);
    EXPECT_LE(es.eigenvalues().maxCoeff(), 1.0 + 1e-12);
  }
}

TEST(Spmm, IdentityAndZero) {
  const auto g = build_graph(4, {}, Matrix<float>::Zero(4, 1));
  const auto adj = normalize_adjacency<float>(g);
  const Matrix<float> x = random_dense(4, 3, 1);
  EXPECT_EQ(spmm(adj, x), x);
  const auto h = random_graph(10, 1, 0.3, 2);
  EXPECT_TRUE(spmm(normalize_adjacency<float>(h), Matrix<float>(Matrix<float>::Zero(10, 5))).isZero());
}

TEST(Spmm, MatchesDenseProduct) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = random_graph(40, 1, 0.1, seed);
    const auto adj = normalize_adjacency<float>(g);
    const Matrix<float> x = random_dense(40, 6, seed + 100);
    const Matrix<double> expected = dense_normalized(g) * x.cast<double>();
    EXPECT_LT((spmm(adj, x).cast<double>() - expected).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Spmm, IsLinear) {
  const auto g = random_graph(30, 1, 0.2, 3);
  const auto adj = normalize_adjacency<float>(g);
  const Matrix<float> x = random_dense(30, 4, 4);
  const Matrix<float> y = random_dense(30, 4, 5);
  const float a = 0.7f, b = -1.3f;
  const Matrix<float> lhs = spmm(adj, Matrix<float>(a * x + b * y));
  const Matrix<float> rhs = a * spmm(adj, x) + b * spmm(adj, y);
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Spmm, RejectsShapeMismatch) {
  const auto adj = normalize_adjacency<float>(path3());
  EXPECT_THROW(spmm(adj, Matrix<float>(Matrix<float>::Zero(4, 2))), std::invalid_argument);
}

TEST(NeighborMean, Examples) {
  const std::vector<std::pair<NodeId, NodeId>> e{{0, 1}, {0, 2}};
  const auto g = build_graph(4, e, Matrix<float>::Zero(4, 1));
  Matrix<double> h(4, 2);
  h << 1, 2, 3, 4, 5, 6, 7, 8;
  const Matrix<double> m = neighbor_mean(g, h);
  EXPECT_EQ(m.row(0), (Eigen::RowVector2d(4, 5)));
  EXPECT_EQ(m.row(1), (Eigen::RowVector2d(1, 2)));
  EXPECT_EQ(m.row(2), (Eigen::RowVector2d(1, 2)));
  EXPECT_TRUE(m.row(3).isZero());
}

TEST(NeighborMean, AdjointIdentity) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = random_graph(25, 1, 0.15, seed);
    const Matrix<double> x = random_dense(25, 3, seed + 7).cast<double>();
    const Matrix<double> y = random_dense(25, 3, seed + 8).cast<double>();
    const double lhs = (neighbor_mean(g, x).cwiseProduct(y)).sum();
    const double rhs = (x.cwiseProduct(neighbor_mean_adjoint(g, y))).sum();
    EXPECT_NEAR(lhs, rhs, 1e-12 * (1.0 + std::abs(lhs)));
  }
}
