#pragma once

// Test-only reference routines. Nothing here calls into the code paths it is
// used to check (finite differences, hand generators, fixture graphs).

#include "bilevel_ag/benchmarks.hpp"
#include "bilevel_ag/graph.hpp"

#include <random>

namespace testing_support {

using namespace bilevel_ag;

/// Ring 1-2-...-n-1 plus diameters (i, i + n/2): the 10-node fixture graph.
inline std::vector<std::pair<int, int>> ladder_edges(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 1; i <= n; ++i) e.emplace_back(i, i % n + 1);
  for (int i = 1; i <= n / 2; ++i) e.emplace_back(i, i + n / 2);
  return e;
}

inline GraphTopology ladder(int n) { return build_metropolis(n, ladder_edges(n)); }

inline GraphTopology complete(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 1; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j) e.emplace_back(i, j);
  return build_metropolis(n, e);
}

/// Random connected graph: random spanning tree plus extra edges.
template <class Rng>
std::vector<std::pair<int, int>> random_connected_edges(int n, Rng& rng, double extra_p = 0.2) {
  std::vector<std::pair<int, int>> e;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int v = 2; v <= n; ++v) {
    std::uniform_int_distribution<int> parent(1, v - 1);
    e.emplace_back(parent(rng), v);
  }
  for (int i = 1; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j)
      if (u(rng) < extra_p) e.emplace_back(i, j);
  return e;
}

/// Central differences of a vector-valued map of one vector argument.
template <class F>
Mat fd_jacobian(F&& f, const Vec& at, double h = 1e-6) {
  const Vec f0 = f(at);
  Mat J(f0.size(), at.size());
  for (Eigen::Index c = 0; c < at.size(); ++c) {
    Vec p = at, m = at;
    p(c) += h;
    m(c) -= h;
    J.col(c) = (f(p) - f(m)) / (2.0 * h);
  }
  return J;
}

/// sigma(x) by plain gradient descent on sum g_i: independent of the Newton
/// solver. Only for games with constant inner Hessians bounded by `hmax`.
inline Vec sigma_by_descent(const GameSpec& spec, const Profile& x, double hmax, int iters = 20000) {
  Vec y = Vec::Zero(spec.m2);
  const double step = 1.0 / hmax;
  for (int it = 0; it < iters; ++it) {
    Vec r = Vec::Zero(spec.m2);
    for (int i = 0; i < spec.n; ++i) r += spec.grad2_g(i, x[i], y);
    if (r.norm() < 1e-14) break;
    y -= step * r;
  }
  return y;
}

/// n players, g = cosh(y - x) + y^2 / 2, J = (x - 0.3)^2 / 2 + y^2 / 2 on
/// [-1, 1]. The inner Hessian depends on (x, y).
inline GameSpec cosh_game(int n) {
  GameSpec s;
  s.name = "cosh";
  s.n = n;
  s.m1 = s.m2 = 1;
  auto c = [](const Vec& x, const Vec& y) { return y(0) - x(0); };
  s.g = [c](int, const Vec& x, const Vec& y) { return std::cosh(c(x, y)) + 0.5 * y(0) * y(0); };
  s.grad1_g = [c](int, const Vec& x, const Vec& y) -> Vec { return Vec::Constant(1, -std::sinh(c(x, y))); };
  s.grad2_g = [c](int, const Vec& x, const Vec& y) -> Vec { return Vec::Constant(1, std::sinh(c(x, y)) + y(0)); };
  s.jac21_g = [c](int, const Vec& x, const Vec& y) -> Mat { return Mat::Constant(1, 1, -std::cosh(c(x, y))); };
  s.hess22_g = [c](int, const Vec& x, const Vec& y) -> Mat { return Mat::Constant(1, 1, std::cosh(c(x, y)) + 1.0); };
  s.J = [](int, const Vec& x, const Vec& y) { return 0.5 * std::pow(x(0) - 0.3, 2) + 0.5 * y(0) * y(0); };
  s.grad1_J = [](int, const Vec& x, const Vec&) -> Vec { return Vec::Constant(1, x(0) - 0.3); };
  s.grad2_J = [](int, const Vec&, const Vec& y) -> Vec { return y; };
  s.action_sets.assign(static_cast<std::size_t>(n), ActionSet::box(1, -1.0, 1.0));
  return s;
}

inline Profile scalar_profile(std::initializer_list<double> v) {
  Profile x;
  for (double e : v) x.push_back(Vec::Constant(1, e));
  return x;
}

/// Minimum-norm solution of B lambda = -G per coordinate, B = I - A.
inline Profile kkt_duals(const GraphTopology& g, const Profile& G) {
  const int n = g.n, m = static_cast<int>(G[0].size());
  const Mat B = Mat::Identity(n, n) - g.weights;
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(B);
  Profile lam(static_cast<std::size_t>(n), Vec::Zero(m));
  for (int c = 0; c < m; ++c) {
    Vec rhs(n);
    for (int i = 0; i < n; ++i) rhs(i) = -G[i](c);
    const Vec sol = cod.solve(rhs);
    for (int i = 0; i < n; ++i) lam[i](c) = sol(i);
  }
  return lam;
}

inline double rel_err(const Vec& a, const Vec& b) { return (a - b).norm() / std::max(1.0, b.norm()); }
inline double rel_err(const Mat& a, const Mat& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

}  // namespace testing_support
