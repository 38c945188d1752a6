#include "bilevel_ag/benchmarks.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace bilevel_ag;
using testing_support::scalar_profile;
using testing_support::fd_jacobian;

namespace {

std::vector<GameSpec> shipped_games() {
  return {toy_t1(), toy_t1_linear_cost(), toy_t2(), power_allocation_game(PowerAllocationParams::defaults()),
          synthetic_quadratic_game(4, 1), synthetic_quadratic_game(3, 2, 3, 2)};
}

}  // namespace

TEST(PowerAllocation, SigmaExamples) {
  const auto p = PowerAllocationParams::defaults();
  EXPECT_DOUBLE_EQ(power_allocation_sigma(p, Profile(10, Vec::Zero(1)))(0), 0.0);
  Profile e3(10, Vec::Zero(1));
  e3[2](0) = 1.0;
  EXPECT_DOUBLE_EQ(power_allocation_sigma(p, e3)(0), 0.5);
  EXPECT_NEAR(power_allocation_sigma(p, published_power_allocation_se())(0), 3.425, 1e-12);
}

TEST(PowerAllocation, RejectsBadParameters) {
  auto p = PowerAllocationParams::defaults();
  p.a(3) = 0.0;
  EXPECT_THROW(power_allocation_game(p), Error);
  auto q = PowerAllocationParams::defaults();
  q.P0.resize(3);
  EXPECT_THROW(power_allocation_game(q), Error);
}

TEST(PowerAllocation, InteriorFormulaSinglePlayer) {
  PowerAllocationParams p;
  p.a = Vec::Constant(1, 2.0);
  p.b = Vec::Constant(1, 1.0);
  p.c = Vec::Constant(1, 1.0);
  p.P0 = Vec::Constant(1, 10.0);
  const auto cand = interior_se_formula(p);
  EXPECT_TRUE(cand.valid);
  EXPECT_NEAR(cand.x(0), 0.25, 1e-15);
  EXPECT_NEAR(cand.sigma, 0.25, 1e-15);
}

TEST(PowerAllocation, InteriorFormulaInvalidAtDefaults) {
  const auto cand = interior_se_formula(PowerAllocationParams::defaults());
  EXPECT_FALSE(cand.valid);
  EXPECT_NEAR(cand.sigma, 77.15 / 11.0, 1e-12);
}

TEST(PowerAllocationProperty, InteriorFormulaIsARootOfF) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(1.0, 2.0);
  int checked = 0;
  for (int trial = 0; trial < 2000 && checked < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 3);
    PowerAllocationParams p;
    p.a.resize(n);
    p.b.resize(n);
    for (int i = 0; i < n; ++i) {
      p.a(i) = u(rng);
      p.b(i) = u(rng);
    }
    p.c = p.b;
    p.P0 = Vec::Constant(n, 100.0);
    const auto cand = interior_se_formula(p);
    if (!cand.valid) continue;
    ++checked;
    Profile x;
    for (int i = 0; i < n; ++i) x.push_back(Vec::Constant(1, cand.x(i)));
    const GameSpec s = power_allocation_game(p);
    const auto F = pseudo_gradient_only(x, s);
    for (int i = 0; i < n; ++i) EXPECT_NEAR(F[i](0), 0.0, 1e-9);
    EXPECT_NEAR(power_allocation_sigma(p, x)(0), cand.sigma, 1e-12);
  }
  EXPECT_GE(checked, 10);
}

TEST(PowerAllocation, ClosedFormPseudoGradient) {
  const auto p = PowerAllocationParams::defaults();
  const GameSpec s = power_allocation_game(p);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Profile x = sample_profile(s, rng);
    const auto r = pseudo_gradient(x, s);
    const double sigma = power_allocation_sigma(p, x)(0);
    EXPECT_NEAR(r.sigma(0), sigma, 1e-10);
    for (int i = 0; i < 10; ++i) {
      const double expected = p.a(i) * sigma + p.a(i) * p.a(i) * x[i](0) / 2.0 - p.b(i) * p.c(i);
      EXPECT_NEAR(r.F[i](0), expected, 1e-10);
      EXPECT_NEAR(r.grad_sigma[i](0, 0), p.a(i) / 2.0, 1e-12);
    }
  }
  const auto F0 = pseudo_gradient_only(Profile(10, Vec::Zero(1)), s);
  for (int i = 0; i < 10; ++i) EXPECT_NEAR(F0[i](0), -p.b(i) * p.c(i), 1e-12);
}

TEST(PowerAllocation, PublishedVectorIsLoggedNotTrusted) {
  const GameSpec s = power_allocation_game(PowerAllocationParams::defaults());
  ASSERT_TRUE(s.published_se.has_value());
  const auto F = pseudo_gradient_only(*s.published_se, s);
  EXPECT_GT(fixed_point_residual(*s.published_se, F, s, 0.1), 1e-3);
}

TEST(Toys, SeAndPseudoGradients) {
  const GameSpec t1 = toy_t1();
  for (double x : {0.0, 0.3, 0.9}) {
    const auto r = pseudo_gradient(scalar_profile({x}), t1);
    EXPECT_NEAR(r.sigma(0), x, 1e-12);
    EXPECT_NEAR(r.F[0](0), x - 0.5, 1e-12);
    EXPECT_NEAR(r.grad_sigma[0](0, 0), 1.0, 1e-15);
  }
  const GameSpec t2 = toy_t2();
  const auto r = pseudo_gradient(scalar_profile({0.3, -0.7}), t2);
  EXPECT_NEAR(r.sigma(0), 0.3 - 0.7, 1e-12);
  EXPECT_NEAR(r.F[0](0), 2 * 0.3 + 0.3 - 0.7, 1e-12);
  EXPECT_NEAR(r.F[1](0), 2 * -0.7 + 0.3 - 0.7, 1e-12);
}

TEST(Synthetic, DeterministicAndAtEquilibrium) {
  const GameSpec a = synthetic_quadratic_game(5, 9);
  const GameSpec b = synthetic_quadratic_game(5, 9);
  ASSERT_TRUE(a.recorded_se && b.recorded_se);
  for (int i = 0; i < 5; ++i) EXPECT_EQ((*a.recorded_se)[i], (*b.recorded_se)[i]);
  const auto F = pseudo_gradient_only(*a.recorded_se, a);
  EXPECT_LE(fixed_point_residual(*a.recorded_se, F, a, 0.1), 1e-12);
  const GameSpec c = synthetic_quadratic_game(5, 10);
  EXPECT_NE((*a.recorded_se)[0], (*c.recorded_se)[0]);
}

TEST(Synthetic, SigmaIsSumOfLinearTerms) {
  const GameSpec s = synthetic_quadratic_game(4, 3);
  std::mt19937_64 rng(8);
  const Profile x = sample_profile(s, rng);
  const Vec expected = testing_support::sigma_by_descent(s, x, 1.0);
  EXPECT_LT((solve_sigma(x, s) - expected).norm(), 1e-10);
}

// Finite-difference consistency of every evaluator at 100 probes per game.
TEST(GameSpecProperty, DerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (const GameSpec& s : shipped_games()) {
    for (int probe = 0; probe < 100; ++probe) {
      const Profile x = sample_profile(s, rng);
      const int i = static_cast<int>(rng() % s.n);
      Vec y(s.m2);
      for (int k = 0; k < s.m2; ++k) y(k) = 2.0 * nd(rng);
      const Vec xi = x[i];
      auto as_vec = [](double d) { return Vec::Constant(1, d); };
      const Mat gJ1 = fd_jacobian([&](const Vec& v) { return as_vec(s.J(i, v, y)); }, xi);
      const Mat gJ2 = fd_jacobian([&](const Vec& v) { return as_vec(s.J(i, xi, v)); }, y);
      const Mat gg1 = fd_jacobian([&](const Vec& v) { return as_vec(s.g(i, v, y)); }, xi);
      const Mat gg2 = fd_jacobian([&](const Vec& v) { return as_vec(s.g(i, xi, v)); }, y);
      EXPECT_LT(testing_support::rel_err(Vec(gJ1.transpose()), s.grad1_J(i, xi, y)), 1e-6) << s.name;
      EXPECT_LT(testing_support::rel_err(Vec(gJ2.transpose()), s.grad2_J(i, xi, y)), 1e-6) << s.name;
      EXPECT_LT(testing_support::rel_err(Vec(gg1.transpose()), s.grad1_g(i, xi, y)), 1e-6) << s.name;
      EXPECT_LT(testing_support::rel_err(Vec(gg2.transpose()), s.grad2_g(i, xi, y)), 1e-6) << s.name;
      // d/dx grad2_g is m2 x m1; jac21_g is its transpose.
      const Mat d21 = fd_jacobian([&](const Vec& v) { return s.grad2_g(i, v, y); }, xi);
      EXPECT_LT(testing_support::rel_err(Mat(d21.transpose()), s.jac21_g(i, xi, y)), 1e-6) << s.name;
      const Mat d22 = fd_jacobian([&](const Vec& v) { return s.grad2_g(i, xi, v); }, y);
      EXPECT_LT(testing_support::rel_err(d22, s.hess22_g(i, xi, y)), 1e-6) << s.name;
      const Mat dJ22 = fd_jacobian([&](const Vec& v) { return s.grad2_J(i, xi, v); }, y);
      EXPECT_LT(testing_support::rel_err(dJ22, hess22_J(s, i, xi, y)), 1e-6) << s.name;
    }
  }
}
