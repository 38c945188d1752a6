#include "bilevel_ag/graph.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace bilevel_ag;

namespace {

void expect_error(ErrorCode code, const std::function<void()>& f) {
  try {
    f();
    FAIL() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace

TEST(Metropolis, TwoNodes) {
  const auto g = build_metropolis(2, {{1, 2}});
  EXPECT_NEAR(g.weights(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(g.weights(0, 1), 0.5, 1e-15);
  const auto s = spectral_bounds(g);
  EXPECT_NEAR(s.eigenvalues(0), 0.0, 1e-12);
  EXPECT_NEAR(s.eigenvalues(1), 1.0, 1e-12);
  EXPECT_NEAR(s.lambda2, 1.0, 1e-12);
  EXPECT_NEAR(s.lambdaN, 1.0, 1e-12);
}

TEST(Metropolis, PathOfThree) {
  const auto g = build_metropolis(3, {{1, 2}, {2, 3}});
  Mat expected(3, 3);
  expected << 2.0 / 3, 1.0 / 3, 0, 1.0 / 3, 1.0 / 3, 1.0 / 3, 0, 1.0 / 3, 2.0 / 3;
  EXPECT_LT((g.weights - expected).cwiseAbs().maxCoeff(), 1e-15);
  const auto s = spectral_bounds(g);
  EXPECT_NEAR(s.eigenvalues(0), 0.0, 1e-12);
  EXPECT_NEAR(s.eigenvalues(1), 1.0 / 3, 1e-12);
  EXPECT_NEAR(s.eigenvalues(2), 1.0, 1e-12);
}

TEST(Metropolis, UniformRingFromWeights) {
  const Mat A = Mat::Constant(3, 3, 1.0 / 3);
  const auto g = from_weights(A);
  const auto s = spectral_bounds(g);
  EXPECT_NEAR(s.eigenvalues(0), 0.0, 1e-12);
  EXPECT_NEAR(s.lambda2, 1.0, 1e-12);
  EXPECT_NEAR(s.lambdaN, 1.0, 1e-12);
}

TEST(Metropolis, SingleNode) {
  const auto g = build_metropolis(1, {});
  EXPECT_DOUBLE_EQ(g.weights(0, 0), 1.0);
  const auto s = spectral_bounds(g);
  EXPECT_EQ(s.lambda2, 0.0);
  EXPECT_NEAR(s.lambdaN, 0.0, 1e-15);
}

TEST(Metropolis, Errors) {
  expect_error(ErrorCode::DisconnectedGraph, [] { build_metropolis(4, {{1, 2}, {3, 4}}); });
  expect_error(ErrorCode::DisconnectedGraph, [] { build_metropolis(2, {}); });
  expect_error(ErrorCode::InvalidEdge, [] { build_metropolis(3, {{1, 4}}); });
  expect_error(ErrorCode::InvalidEdge, [] { build_metropolis(3, {{0, 1}}); });
  expect_error(ErrorCode::InvalidEdge, [] { build_metropolis(3, {{2, 2}}); });
}

TEST(FromWeights, RejectsBadMatrices) {
  Mat asym(2, 2);
  asym << 0.4, 0.6, 0.5, 0.5;
  expect_error(ErrorCode::InvalidWeights, [&] { from_weights(asym); });
  Mat rows(2, 2);
  rows << 0.5, 0.4, 0.4, 0.5;
  expect_error(ErrorCode::InvalidWeights, [&] { from_weights(rows); });
  Mat neg(2, 2);
  neg << 1.5, -0.5, -0.5, 1.5;
  expect_error(ErrorCode::InvalidWeights, [&] { from_weights(neg); });
  expect_error(ErrorCode::DisconnectedGraph, [] { from_weights(Mat::Identity(3, 3)); });
}

TEST(Mix, MatchesMatrixProduct) {
  const auto g = testing_support::ladder(10);
  std::vector<double> v(10);
  for (int i = 0; i < 10; ++i) v[i] = i * i - 3.0;
  const Vec vv = Eigen::Map<Vec>(v.data(), 10);
  const Vec expected = g.weights * vv;
  for (int i = 0; i < 10; ++i) EXPECT_NEAR(g.mix(i, v), expected(i), 1e-13);
}

TEST(MetropolisProperty, RandomConnectedGraphs) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 19);
    const auto g = build_metropolis(n, testing_support::random_connected_edges(n, rng));
    for (int i = 0; i < n; ++i) {
      EXPECT_NEAR(g.weights.row(i).sum(), 1.0, 1e-12);
      for (int j = 0; j < n; ++j) {
        EXPECT_EQ(g.weights(i, j), g.weights(j, i));
        EXPECT_GE(g.weights(i, j), 0.0);
      }
    }
    const auto s = spectral_bounds(g);
    EXPECT_GT(s.lambda2, 0.0);
    EXPECT_LE(s.lambda2, s.lambdaN + 1e-12);
    EXPECT_LE(s.lambdaN, 2.0 + 1e-12);
    const Mat B = Mat::Identity(n, n) - g.weights;
    for (int k = 0; k < n; ++k) {
      const Vec r = B * s.eigenvectors.col(k) - s.eigenvalues(k) * s.eigenvectors.col(k);
      EXPECT_LT(r.norm(), 1e-8);
    }
  }
}

TEST(Ladder, TenNodeFixture) {
  const auto g = testing_support::ladder(10);
  for (int i = 0; i < 10; ++i) {
    EXPECT_EQ(g.neighbors[i].size(), 3u);
    EXPECT_NEAR(g.weights(i, i), 0.25, 1e-15);
  }
  const auto s = spectral_bounds(g);
  EXPECT_GT(s.lambda2, 0.0);
  EXPECT_LE(s.lambdaN, 2.0);
}
