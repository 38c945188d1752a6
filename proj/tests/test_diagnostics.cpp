#include "bilevel_ag/engines.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace bilevel_ag;
using testing_support::scalar_profile;

namespace {

double envelope(long t) { return std::sqrt(std::log(double(t)) / double(t)); }

std::vector<TraceRecord> synthetic_trace(const std::function<double(long)>& err, long T, long stride) {
  std::vector<TraceRecord> tr;
  for (long t = stride; t <= T; t += stride) {
    TraceRecord r;
    r.t = t;
    r.err_x = err(t);
    tr.push_back(r);
  }
  return tr;
}

}  // namespace

TEST(Envelope, ExactEnvelope) {
  const auto f = rate_envelope_fit(synthetic_trace(envelope, 100000, 100), 1000);
  EXPECT_NEAR(f.C_fit, 1.0, 1e-12);
  EXPECT_NEAR(f.C_half, 1.0, 1e-12);
  EXPECT_EQ(f.violation_fraction, 0.0);
}

TEST(Envelope, FasterDecay) {
  const auto f = rate_envelope_fit(synthetic_trace([](long t) { return 1.0 / t; }, 100000, 100), 1000);
  EXPECT_EQ(f.violation_fraction, 0.0);
  EXPECT_NEAR(f.C_fit, (1.0 / 1000) / envelope(1000), 1e-12);
}

TEST(Envelope, SlowerDecayIsFlagged) {
  const auto f = rate_envelope_fit(synthetic_trace([](long t) { return 1.0 / std::log(double(t)); }, 100000, 100), 1000);
  EXPECT_GT(f.violation_fraction, 0.9);
  EXPECT_GT(f.C_fit, f.C_half);
}

TEST(Envelope, EmptyTrace) {
  try {
    rate_envelope_fit(synthetic_trace(envelope, 500, 100), 1000);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyTrace);
  }
  EXPECT_THROW(rate_envelope_fit({}, 10), Error);
}

TEST(Snapshot, ExactEquilibriumSogd) {
  const GameSpec s = synthetic_quadratic_game(4, 2);
  const auto g = testing_support::complete(4);
  const auto st = admissible_steps(constants_for(s), spectral_bounds(g), 4, 0.9);
  const Profile& x = *s.recorded_se;
  const auto o = pseudo_gradient(x, s);
  SogdState state;
  state.x = x;
  state.consensus = make_consensus_state(4, 2);
  state.consensus.y.assign(4, o.sigma);
  state.v.assign(4, o.gbar);
  state.z = o.h;
  const auto r = snapshot(state, s, st, ReferenceSolution{x, o.sigma});
  EXPECT_LE(r.err_x, 1e-9);
  EXPECT_LE(r.err_y_star, 1e-9);
  EXPECT_LE(r.err_y_track, 1e-9);
  EXPECT_LE(*r.err_v, 1e-9);
  EXPECT_LE(*r.err_z, 1e-9);
  EXPECT_FALSE(r.err_w || r.err_d);
}

TEST(Snapshot, ExactEquilibriumFogd) {
  const GameSpec s = synthetic_quadratic_game(3, 3);
  const auto g = testing_support::complete(3);
  const auto st = admissible_steps(constants_for(s), spectral_bounds(g), 3, 0.9, Vec::Constant(3, 1e-3));
  const Profile& x = *s.recorded_se;
  const Vec sigma = solve_sigma(x, s);
  FogdState state;
  state.x = x;
  state.consensus = make_consensus_state(3, 2);
  state.consensus.y.assign(3, sigma);
  state.pairwise = make_pairwise_state(state.consensus.y);
  for (int i = 0; i < 3; ++i) state.pairwise.w[i].assign(3, solve_perturbed_inner(i, x, 1e-3, s));
  const auto r = snapshot(state, s, st, FogdOptions{}, ReferenceSolution{x, sigma});
  EXPECT_LE(r.err_x, 1e-9);
  EXPECT_LE(*r.err_w, 1e-9);
  // d carries only the O(delta) estimator bias.
  EXPECT_LE(*r.err_d, 1e-2);
  EXPECT_FALSE(r.err_v || r.err_z);
}

TEST(Snapshot, PowerAllocationInitialTracking) {
  const GameSpec s = power_allocation_game(PowerAllocationParams::defaults());
  const auto g = testing_support::ladder(10);
  const auto st = admissible_steps(constants_for(s), spectral_bounds(g), 10, 0.9);
  const auto state = sogd_init(s, g, st);
  const auto se = solve_se(s);
  const auto r = snapshot(state, s, st, ReferenceSolution{se.x, se.y});
  EXPECT_LE(*r.err_v, 1e-15);
}

TEST(Snapshot, FogdEstimateWithoutPerturbation) {
  const GameSpec s = synthetic_quadratic_game(3, 4);
  const auto g = testing_support::complete(3);
  const auto st = admissible_steps(constants_for(s), spectral_bounds(g), 3, 0.9, Vec::Constant(3, 0.1));
  std::mt19937_64 rng(1);
  FogdState state;
  state.x = sample_profile(s, rng);
  const Vec sigma = solve_sigma(state.x, s);
  state.consensus = make_consensus_state(3, 2);
  state.consensus.y.assign(3, sigma);
  state.pairwise = make_pairwise_state(state.consensus.y);  // w_ii = y_i, so d = 0
  const auto o = pseudo_gradient(state.x, s);
  double expected = 0;
  for (int i = 0; i < 3; ++i)
    expected = std::max(expected, (o.grad_sigma[i] * s.grad2_J(i, state.x[i], sigma)).norm());
  const auto r = snapshot(state, s, st, FogdOptions{}, ReferenceSolution{*s.recorded_se, sigma});
  EXPECT_NEAR(*r.err_d, expected, 1e-12);
}

TEST(SnapshotProperty, TriangleInequality) {
  const GameSpec s = power_allocation_game(PowerAllocationParams::defaults());
  const auto g = testing_support::ladder(10);
  const auto c = constants_for(s);
  const auto st = admissible_steps(c, spectral_bounds(g), 10, 0.9);
  const auto se = solve_se(s);
  const ReferenceSolution ref{se.x, se.y};
  const auto r = sogd_run(s, g, st, 2000, 20, &ref);
  ASSERT_EQ(r.trace.size(), 100u);
  for (const auto& rec : r.trace) {
    EXPECT_LE(rec.err_y_star, rec.err_y_track + c.ell * rec.err_x + 1e-9) << rec.t;
    for (double v : {rec.err_x, rec.err_y_star, rec.err_y_track, *rec.err_v, *rec.err_z}) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GE(v, 0.0);
    }
  }
}

TEST(Csv, HeaderOrderAndEmptyCells) {
  TraceRecord a;
  a.t = 10;
  a.eta_t = 0.1;
  a.err_x = 1.0 / 3.0;
  a.err_y_star = 2.0;
  a.err_y_track = 0.0;
  a.err_v = 1e-300;
  a.err_z = 5.0;
  TraceRecord b = a;
  b.err_v.reset();
  b.err_z.reset();
  b.err_w = 0.25;
  b.err_d = 0.5;
  std::ostringstream os;
  write_trace_csv(os, {a, b});
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,eta_t,err_x,err_y_star,err_y_track,err_v,err_z,err_w,err_d");
  std::getline(in, line);
  EXPECT_EQ(line, "10,0.10000000000000001,0.33333333333333331,2,0,1e-300,5,,");
  std::getline(in, line);
  EXPECT_EQ(line, "10,0.10000000000000001,0.33333333333333331,2,0,,,0.25,0.5");
  // %.17g round-trips doubles exactly.
  EXPECT_EQ(std::stod("0.33333333333333331"), 1.0 / 3.0);
}
