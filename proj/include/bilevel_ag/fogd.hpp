#pragma once

// First-order distributed method: the Hessian-inverse product is replaced by
// a two-point difference between the aggregation estimate and the estimate of
// a delta-perturbed inner solution.

#include "bilevel_ag/sogd.hpp"

namespace bilevel_ag {

struct FogdOptions {
  bool delta_decay = false;               // delta_{i,t} = delta_i a / (t + a), a = eta_a
  bool strict_printed_estimator = false;  // second-argument difference; needs m1 == m2
};

struct FogdState {
  long t = 0;
  Profile x;
  ConsensusState consensus;
  PairwiseConsensusState pairwise;
  Profile d;  // estimates used in the most recent round
};

/// d_i = (grad1_g_i(x_i, w_ii) - grad1_g_i(x_i, y_i)) / delta_i. With
/// `strict_printed` the second-argument gradient is differenced instead, which
/// only type-checks for m1 == m2 and does not recover grad sigma * grad2_J.
inline Vec two_point_estimate(int i, const Vec& x_i, const Vec& w_ii, const Vec& y_i, double delta_i,
                              const GameSpec& spec, bool strict_printed = false) {
  if (!(delta_i > 0.0)) throw Error(ErrorCode::InvalidParams, "delta must be positive");
  if (strict_printed) {
    if (spec.m1 != spec.m2)
      throw Error(ErrorCode::DimensionMismatch, "strict printed estimator requires m1 == m2");
    return (spec.grad2_g(i, x_i, w_ii) - spec.grad2_g(i, x_i, y_i)) / delta_i;
  }
  return (spec.grad1_g(i, x_i, w_ii) - spec.grad1_g(i, x_i, y_i)) / delta_i;
}

inline Vec effective_delta(const StepSizes& st, const FogdOptions& fo, long t) {
  if (!fo.delta_decay) return st.delta;
  return st.delta * (st.eta_a / (static_cast<double>(t) + st.eta_a));
}

inline FogdState fogd_init(const GameSpec& spec, const GraphTopology& g, const StepSizes& st,
                           const EngineOptions& opt = {}) {
  validate(spec);
  if (g.n != spec.n) throw Error(ErrorCode::DimensionMismatch, "graph and game disagree on n");
  if (st.delta.size() != spec.n || st.beta.size() != spec.n)
    throw Error(ErrorCode::DimensionMismatch, "FOGD needs per-player delta and beta");
  std::mt19937_64 rng(opt.seed);
  FogdState s;
  s.x = sample_profile(spec, rng);
  const Profile y0 = detail::initial_y(spec, opt, rng);
  s.consensus = make_consensus_state(spec.n, spec.m2, &y0);
  s.pairwise = make_pairwise_state(y0);
  s.d = detail::zeros(spec.n, spec.m1);
  return s;
}

inline FogdState fogd_iterate(const FogdState& s, const GameSpec& spec, const GraphTopology& g, const StepSizes& st,
                              const FogdOptions& fo = {}, const EngineOptions& opt = {}) {
  const int n = spec.n;
  const Vec delta = effective_delta(st, fo, s.t);
  FogdState out;
  out.t = s.t + 1;

  out.consensus = pd_step(s.consensus, s.x, spec, g, st.kappa);
  detail::check_y_bound(out.consensus.y, opt.y_bound, "aggregation estimate");
  out.pairwise = fogd_pd_step(s.pairwise, s.x, spec, g, st.beta, delta);
  for (int i = 0; i < n; ++i) detail::check_y_bound(out.pairwise.w[i], opt.y_bound, "perturbed estimate");

  const Profile& y = s.consensus.y;
  const double eta = st.eta(s.t);
  out.d.resize(static_cast<std::size_t>(n));
  out.x.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    out.d[i] = two_point_estimate(i, s.x[i], s.pairwise.w[i][i], y[i], delta(i), spec, fo.strict_printed_estimator);
    const Vec F_hat = spec.grad1_J(i, s.x[i], y[i]) + out.d[i];
    const Vec target = spec.action_sets[i].project(s.x[i] - st.k * F_hat);
    out.x[i] = (1.0 - eta) * s.x[i] + eta * target;
  }
  if (!detail::all_finite(out.x))
    throw Error(ErrorCode::NonFiniteState, "FOGD actions became non-finite at t = " + std::to_string(out.t));
  return out;
}

}  // namespace bilevel_ag
