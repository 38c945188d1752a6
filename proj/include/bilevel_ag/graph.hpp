#pragma once

// Communication graph: doubly stochastic weights A and the spectrum of B = I - A.

#include "bilevel_ag/core.hpp"

#include <algorithm>
#include <queue>
#include <utility>
#include <vector>

namespace bilevel_ag {

/// Undirected weighted graph. Nodes are 0-based internally; edge lists given to
/// the builders use 1-based endpoints.
struct GraphTopology {
  int n = 0;
  std::vector<std::pair<int, int>> edges;  // 0-based, i < j
  Mat weights;                             // A, symmetric, rows sum to 1
  std::vector<std::vector<int>> neighbors; // positive off-diagonal entries

  /// a_ii v_i + sum_{j in N_i} a_ij v_j, summed in ascending neighbor order.
  template <class T>
  T mix(int i, const std::vector<T>& values) const {
    T acc = weights(i, i) * values[i];
    for (int j : neighbors[i]) acc += weights(i, j) * values[j];
    return acc;
  }
};

struct SpectralInfo {
  double lambda2 = 0.0;  // second-smallest eigenvalue of B (0 when n == 1)
  double lambdaN = 0.0;  // largest eigenvalue of B
  Vec eigenvalues;       // ascending
  Mat eigenvectors;      // columns match eigenvalues
};

namespace detail {

inline bool connected(int n, const std::vector<std::vector<int>>& adj) {
  if (n <= 1) return true;
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int count = 1;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        q.push(v);
      }
  }
  return count == n;
}

inline std::vector<std::vector<int>> neighbors_of(const Mat& A) {
  const int n = static_cast<int>(A.rows());
  std::vector<std::vector<int>> nb(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && A(i, j) > 0.0) nb[i].push_back(j);
  return nb;
}

}  // namespace detail

/// Checks symmetry, stochasticity, entry range and connectivity.
inline void validate(const GraphTopology& g) {
  const Mat& A = g.weights;
  if (g.n < 1 || A.rows() != g.n || A.cols() != g.n)
    throw Error(ErrorCode::InvalidWeights, "weight matrix must be n x n with n >= 1");
  constexpr double tol = 1e-12;
  for (int i = 0; i < g.n; ++i) {
    if (std::abs(A.row(i).sum() - 1.0) > tol)
      throw Error(ErrorCode::InvalidWeights, "row " + std::to_string(i + 1) + " does not sum to 1");
    for (int j = 0; j < g.n; ++j) {
      if (!(A(i, j) >= -tol && A(i, j) <= 1.0 + tol))
        throw Error(ErrorCode::InvalidWeights, "entry outside [0,1]");
      if (std::abs(A(i, j) - A(j, i)) > tol) throw Error(ErrorCode::InvalidWeights, "matrix is not symmetric");
    }
  }
  if (!detail::connected(g.n, g.neighbors)) throw Error(ErrorCode::DisconnectedGraph, "graph is not connected");
}

/// Metropolis-Hastings weights: a_ij = 1 / (1 + max(deg_i, deg_j)) on edges,
/// a_ii = 1 - sum_{j != i} a_ij.
inline GraphTopology build_metropolis(int n, const std::vector<std::pair<int, int>>& edges_one_based) {
  if (n < 1) throw Error(ErrorCode::InvalidEdge, "n must be >= 1");
  std::vector<std::pair<int, int>> edges;
  for (auto [u, v] : edges_one_based) {
    if (u < 1 || u > n || v < 1 || v > n)
      throw Error(ErrorCode::InvalidEdge,
                  "endpoint out of range in edge (" + std::to_string(u) + "," + std::to_string(v) + ")");
    if (u == v) throw Error(ErrorCode::InvalidEdge, "self-loop at node " + std::to_string(u));
    edges.emplace_back(std::min(u, v) - 1, std::max(u, v) - 1);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  std::vector<int> deg(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (auto [u, v] : edges) {
    ++deg[u];
    ++deg[v];
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  if (!detail::connected(n, adj)) throw Error(ErrorCode::DisconnectedGraph, "graph is not connected");

  GraphTopology g;
  g.n = n;
  g.edges = edges;
  g.weights = Mat::Zero(n, n);
  for (auto [u, v] : edges) {
    const double w = 1.0 / (1.0 + std::max(deg[u], deg[v]));
    g.weights(u, v) = w;
    g.weights(v, u) = w;
  }
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    for (int j = 0; j < n; ++j)
      if (j != i) off += g.weights(i, j);
    g.weights(i, i) = 1.0 - off;
  }
  g.neighbors = detail::neighbors_of(g.weights);
  validate(g);
  return g;
}

/// Accepts a user-supplied weight matrix after validation.
inline GraphTopology from_weights(const Mat& A) {
  GraphTopology g;
  g.n = static_cast<int>(A.rows());
  g.weights = A;
  if (A.rows() != A.cols()) throw Error(ErrorCode::InvalidWeights, "weight matrix must be square");
  g.neighbors = detail::neighbors_of(A);
  for (int i = 0; i < g.n; ++i)
    for (int j : g.neighbors[i])
      if (i < j) g.edges.emplace_back(i, j);
  validate(g);
  return g;
}

inline SpectralInfo spectral_bounds(const GraphTopology& g) {
  const Mat B = Mat::Identity(g.n, g.n) - g.weights;
  Eigen::SelfAdjointEigenSolver<Mat> es(B);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::NumericalFailure, "eigendecomposition did not converge");
  SpectralInfo s;
  s.eigenvalues = es.eigenvalues();
  s.eigenvectors = es.eigenvectors();
  s.lambdaN = s.eigenvalues(g.n - 1);
  s.lambda2 = g.n >= 2 ? s.eigenvalues(1) : 0.0;
  return s;
}

}  // namespace bilevel_ag
