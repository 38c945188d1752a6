#pragma once

// Second-order distributed method: primal-dual aggregation estimates,
// dynamic average tracking of the inner Hessians, gradient descent on the
// Hessian-inverse product, and a Krasnoselskii-Mann projected gradient step.

#include "bilevel_ag/consensus.hpp"
#include "bilevel_ag/constants.hpp"

#include <random>

namespace bilevel_ag {

struct EngineOptions {
  double y_bound = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 1;
  // y_{i,0} uniform in [y0_low, y0_high]^m2 when y0_random, else 0.
  bool y0_random = false;
  double y0_low = 0.0;
  double y0_high = 0.0;
};

struct SogdState {
  long t = 0;
  Profile x;
  ConsensusState consensus;
  std::vector<Mat> v;  // tracked Hessian average per node
  Profile z;           // estimate of -(sum hess22_g)^{-1} grad2_J_i
};

namespace detail {

template <class Rng>
Profile initial_y(const GameSpec& spec, const EngineOptions& opt, Rng& rng) {
  Profile y = zeros(spec.n, spec.m2);
  if (opt.y0_random) {
    std::uniform_real_distribution<double> u(opt.y0_low, opt.y0_high);
    for (auto& v : y)
      for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = u(rng);
  }
  return y;
}

inline void check_y_bound(const Profile& y, double bound, const char* what) {
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i].norm() > bound)
      throw Error(ErrorCode::YBoundViolated, std::string(what) + " of node " + std::to_string(i + 1) +
                                                 " has norm " + std::to_string(y[i].norm()) + " > y_bound " +
                                                 std::to_string(bound));
}

}  // namespace detail

inline SogdState sogd_init(const GameSpec& spec, const GraphTopology& g, const StepSizes&,
                           const EngineOptions& opt = {}) {
  validate(spec);
  if (g.n != spec.n) throw Error(ErrorCode::DimensionMismatch, "graph and game disagree on n");
  std::mt19937_64 rng(opt.seed);
  SogdState s;
  s.x = sample_profile(spec, rng);
  const Profile y0 = detail::initial_y(spec, opt, rng);
  s.consensus = make_consensus_state(spec.n, spec.m2, &y0);
  s.z = detail::zeros(spec.n, spec.m2);
  s.v.resize(static_cast<std::size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) s.v[i] = spec.hess22_g(i, s.x[i], y0[i]);
  return s;
}

/// One round. Every right-hand side reads time-t values except the tracking
/// increment, which uses (x_{t+1}, y_{t+1}); the action update is therefore
/// computed before the tracking step.
inline SogdState sogd_iterate(const SogdState& s, const GameSpec& spec, const GraphTopology& g, const StepSizes& st,
                              const EngineOptions& opt = {}) {
  const int n = spec.n;
  SogdState out;
  out.t = s.t + 1;

  // Aggregation estimates.
  out.consensus = pd_step(s.consensus, s.x, spec, g, st.kappa);
  detail::check_y_bound(out.consensus.y, opt.y_bound, "aggregation estimate");

  const Profile& y = s.consensus.y;
  const double eta = st.eta(s.t);

  // Action update from time-t quantities.
  out.x.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Vec F_hat = spec.grad1_J(i, s.x[i], y[i]) + spec.jac21_g(i, s.x[i], y[i]) * s.z[i];
    const Vec target = spec.action_sets[i].project(s.x[i] - st.k * F_hat);
    out.x[i] = (1.0 - eta) * s.x[i] + eta * target;
  }

  // Hessian average tracking.
  out.v.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out.v[i] = g.mix(i, s.v) + spec.hess22_g(i, out.x[i], out.consensus.y[i]) - spec.hess22_g(i, s.x[i], y[i]);

  // Descent on 1/2 z'(n v_i) z + z' grad2_J_i.
  out.z.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out.z[i] = s.z[i] - st.alpha * (double(n) * s.v[i] * s.z[i] + spec.grad2_J(i, s.x[i], y[i]));

  if (!detail::all_finite(out.x) || !detail::all_finite(out.z) || !detail::all_finite(out.v))
    throw Error(ErrorCode::NonFiniteState, "SOGD state became non-finite at t = " + std::to_string(out.t));
  return out;
}

}  // namespace bilevel_ag
