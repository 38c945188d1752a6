#pragma once

// Distributed primal-dual iterations for the aggregation estimates (y, lambda)
// and for the pairwise perturbed estimates (w, u) of the first-order method.
// Every node only reads its neighbors' values through GraphTopology::mix.

#include "bilevel_ag/game.hpp"
#include "bilevel_ag/graph.hpp"

#include <limits>

namespace bilevel_ag {

struct ConsensusState {
  Profile y;       // y_i: node i's estimate of sigma(x)
  Profile lambda;  // dual variables, start at 0
};

/// w[i][k]: node k's estimate of y_i(delta_i, x); u[i][k] its dual.
struct PairwiseConsensusState {
  std::vector<Profile> w;
  std::vector<Profile> u;
};

inline ConsensusState make_consensus_state(int n, int m2, const Profile* y0 = nullptr) {
  ConsensusState s;
  s.y = y0 ? *y0 : detail::zeros(n, m2);
  s.lambda = detail::zeros(n, m2);
  return s;
}

/// w_ik starts at node k's aggregation estimate y_k; u = 0.
inline PairwiseConsensusState make_pairwise_state(const Profile& y0) {
  const int n = static_cast<int>(y0.size());
  PairwiseConsensusState s;
  s.w.assign(static_cast<std::size_t>(n), y0);
  s.u.assign(static_cast<std::size_t>(n), detail::zeros(n, static_cast<int>(y0.front().size())));
  return s;
}

/// One synchronous round:
///   y_i  <- y_i + kappa (sum_j a_ij lambda_j - lambda_i - grad2_g_i(x_i, y_i))
///   lam_i <- lam_i - kappa (sum_j a_ij y_j^+ - y_i^+)
/// The dual half-step reads the already updated y.
inline ConsensusState pd_step(const ConsensusState& s, const Profile& x, const GameSpec& spec,
                              const GraphTopology& g, double kappa) {
  const int n = g.n;
  ConsensusState out;
  out.y.resize(static_cast<std::size_t>(n));
  out.lambda.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out.y[i] = s.y[i] + kappa * (g.mix(i, s.lambda) - s.lambda[i] - spec.grad2_g(i, x[i], s.y[i]));
  for (int i = 0; i < n; ++i) out.lambda[i] = s.lambda[i] - kappa * (g.mix(i, out.y) - out.y[i]);
  if (!detail::all_finite(out.y) || !detail::all_finite(out.lambda))
    throw Error(ErrorCode::NonFiniteState, "primal-dual aggregation estimates diverged");
  return out;
}

struct InnerSolveResult {
  ConsensusState state;
  int iterations = 0;
  bool converged = false;
  double last_change = std::numeric_limits<double>::infinity();
  double spread = 0.0;  // max_i ||y_i - y_1||
};

/// Repeats pd_step with x frozen until max_i ||y_i^+ - y_i|| <= tol.
inline InnerSolveResult solve_inner(const Profile& x, const GameSpec& spec, const GraphTopology& g, double kappa,
                                    double tol, int max_iter, const ConsensusState* init = nullptr) {
  InnerSolveResult r;
  r.state = init ? *init : make_consensus_state(g.n, spec.m2);
  double change = std::numeric_limits<double>::infinity();
  while (!(change <= tol) && r.iterations < max_iter) {
    ConsensusState next = pd_step(r.state, x, spec, g, kappa);
    change = 0.0;
    for (int i = 0; i < g.n; ++i) change = std::max(change, (next.y[i] - r.state.y[i]).norm());
    r.state = std::move(next);
    ++r.iterations;
  }
  r.converged = change <= tol;
  r.last_change = change;
  for (int i = 0; i < g.n; ++i) r.spread = std::max(r.spread, (r.state.y[i] - r.state.y[0]).norm());
  return r;
}

/// One synchronous round for every target player i at every node k:
///   w_ik <- w_ik + beta_i (sum_j a_kj u_ij - u_ik - grad2_g_k(x_k, w_ik)
///                          - [i == k] delta_i grad2_J_i(x_i, w_ii))
///   u_ik <- u_ik - beta_i (sum_j a_kj w_ij^+ - w_ik^+)
inline PairwiseConsensusState fogd_pd_step(const PairwiseConsensusState& s, const Profile& x, const GameSpec& spec,
                                           const GraphTopology& g, const Vec& beta, const Vec& delta) {
  const int n = g.n;
  if (beta.size() != n || delta.size() != n)
    throw Error(ErrorCode::DimensionMismatch, "beta and delta need one entry per player");
  PairwiseConsensusState out;
  out.w.resize(static_cast<std::size_t>(n));
  out.u.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Profile& w = s.w[i];
    const Profile& u = s.u[i];
    Profile& wn = out.w[i];
    wn.resize(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      Vec dir = g.mix(k, u) - u[k] - spec.grad2_g(k, x[k], w[k]);
      if (k == i) dir -= delta(i) * spec.grad2_J(i, x[i], w[i]);
      wn[k] = w[k] + beta(i) * dir;
    }
    Profile& un = out.u[i];
    un.resize(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) un[k] = u[k] - beta(i) * (g.mix(k, wn) - wn[k]);
    if (!detail::all_finite(wn) || !detail::all_finite(un))
      throw Error(ErrorCode::NonFiniteState, "pairwise estimates for player " + std::to_string(i + 1) + " diverged");
  }
  return out;
}

}  // namespace bilevel_ag
