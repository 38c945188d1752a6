#pragma once

// Problem constants (moduli, Lipschitz and norm bounds) and the step sizes
// they admit.

#include "bilevel_ag/graph.hpp"
#include "bilevel_ag/oracle.hpp"

#include <algorithm>
#include <random>
#include <string>

namespace bilevel_ag {

/// mu is the strong-convexity modulus of sum_i g_i(x_i, .) in y; L is a common
/// Lipschitz constant of grad1_J, grad2_J, grad2_g, jac21_g, hess22_g; theta the
/// strong-monotonicity modulus of F; K bounds ||x_i|| over Omega_i; K0..K3 bound
/// ||hess22_g||_F, ||grad2_J||, ||grad2_g||, ||jac21_g||_F; hbar bounds
/// ||hess22_J||_F; ell and L0 are the Lipschitz constants of sigma and F.
struct ProblemConstants {
  double mu = 0, L = 0, theta = 0, K = 0;
  double K0 = 0, K1 = 0, K2 = 0, K3 = 0, hbar = 0;
  double ell = 0, L0 = 0;
  double y_bound = 0;
};

/// ell = sqrt(n) K3 / mu: each block of grad sigma is bounded by K3 / mu.
inline double aggregation_lipschitz(int n, double K3, double mu) { return std::sqrt(double(n)) * K3 / mu; }

inline double pseudo_gradient_lipschitz(int n, double L, double K2, double K3, double mu, double ell) {
  return n * L * (K2 * (K3 + mu + K3 * ell + mu * ell) + (K3 * mu + mu * mu) * (1.0 + ell)) / (mu * mu);
}

struct DeriveOptions {
  int sample_budget = 200;
  std::optional<double> y_bound;  // default: 10 x max sampled ||sigma(x)||, at least 1
  double margin = 1.25;
  unsigned seed = 7;
  double floor = 1e-12;           // minimum for bounds that sample to zero
};

namespace detail {

/// Min eigenvalue of the symmetrized finite-difference Jacobian of F at x.
inline double monotonicity_at(const GameSpec& spec, const Profile& x) {
  const int dim = spec.n * spec.m1;
  Mat Jac(dim, dim);
  const double h = 1e-5;
  const Vec base = stack(x);
  for (int c = 0; c < dim; ++c) {
    Vec xp = base, xm = base;
    xp(c) += h;
    xm(c) -= h;
    const Vec Fp = stack(pseudo_gradient_only(unstack(xp, spec.n, spec.m1), spec));
    const Vec Fm = stack(pseudo_gradient_only(unstack(xm, spec.n, spec.m1), spec));
    Jac.col(c) = (Fp - Fm) / (2.0 * h);
  }
  const Mat S = 0.5 * (Jac + Jac.transpose());
  return Eigen::SelfAdjointEigenSolver<Mat>(S, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

inline double fro(const Mat& m) { return m.norm(); }

}  // namespace detail

/// Estimates every constant by sampling Omega x ball(y_bound) and fills in
/// ell and L0 from their formulas. Values present in `overrides` win.
inline ProblemConstants derive_constants(const GameSpec& spec, const DeriveOptions& opt = {},
                                         const ConstantOverrides& overrides = {}) {
  validate(spec);
  std::mt19937_64 rng(opt.seed);
  const int budget = std::max(opt.sample_budget, 1);
  ProblemConstants c;

  double y_bound = 0.0;
  if (overrides.y_bound) y_bound = *overrides.y_bound;
  else if (opt.y_bound) y_bound = *opt.y_bound;
  else {
    double smax = 0.0;
    for (int s = 0; s < budget; ++s) smax = std::max(smax, solve_sigma(sample_profile(spec, rng), spec).norm());
    y_bound = std::max(10.0 * smax, 1.0);
  }
  c.y_bound = y_bound;

  double mu_min = std::numeric_limits<double>::infinity();
  double K0 = 0, K1 = 0, K2 = 0, K3 = 0, hbar = 0, L = 0;
  auto quotient = [&](const auto& f, int i, const Vec& x, const Vec& y, const Vec& x2, const Vec& y2) {
    const double den = (x - x2).norm() + (y - y2).norm();
    if (den <= 0.0) return 0.0;
    return detail::fro(Mat(f(i, x, y)) - Mat(f(i, x2, y2))) / den;
  };
  for (int s = 0; s < budget; ++s) {
    const Profile x = sample_profile(spec, rng);
    const Vec y = ActionSet::sample_ball(rng, spec.m2, y_bound);
    Mat Hsum = Mat::Zero(spec.m2, spec.m2);
    for (int i = 0; i < spec.n; ++i) {
      const Mat H = spec.hess22_g(i, x[i], y);
      Hsum += H;
      K0 = std::max(K0, H.norm());
      K1 = std::max(K1, spec.grad2_J(i, x[i], y).norm());
      K2 = std::max(K2, spec.grad2_g(i, x[i], y).norm());
      K3 = std::max(K3, spec.jac21_g(i, x[i], y).norm());
      hbar = std::max(hbar, hess22_J(spec, i, x[i], y).norm());

      // Lipschitz quotients, perturbing each argument separately.
      const Vec x2 = spec.action_sets[i].sample(rng);
      const Vec y2 = ActionSet::sample_ball(rng, spec.m2, y_bound);
      for (const auto& [xa, ya] : {std::pair<Vec, Vec>{x2, y}, std::pair<Vec, Vec>{x[i], y2}}) {
        L = std::max(L, quotient(spec.grad1_J, i, x[i], y, xa, ya));
        L = std::max(L, quotient(spec.grad2_J, i, x[i], y, xa, ya));
        L = std::max(L, quotient(spec.grad2_g, i, x[i], y, xa, ya));
        L = std::max(L, quotient(spec.jac21_g, i, x[i], y, xa, ya));
        L = std::max(L, quotient(spec.hess22_g, i, x[i], y, xa, ya));
      }
    }
    mu_min = std::min(mu_min, Eigen::SelfAdjointEigenSolver<Mat>(Hsum, Eigen::EigenvaluesOnly).eigenvalues()(0));
  }

  auto bound = [&](std::optional<double> o, double sampled) {
    return o ? *o : std::max(sampled * opt.margin, opt.floor);
  };
  c.mu = overrides.mu ? *overrides.mu : mu_min / opt.margin;
  if (!(c.mu > 0.0))
    throw Error(ErrorCode::NonPositiveModulus,
                "sampled strong-convexity modulus of sum g_i is " + std::to_string(mu_min));
  c.K0 = bound(overrides.K0, K0);
  c.K1 = bound(overrides.K1, K1);
  c.K2 = bound(overrides.K2, K2);
  c.K3 = bound(overrides.K3, K3);
  c.hbar = bound(overrides.hbar, hbar);
  c.L = bound(overrides.L, L);

  double K = 0.0;
  for (const auto& s : spec.action_sets) K = std::max(K, s.radius());
  c.K = overrides.K ? *overrides.K : std::max(K, opt.floor);

  if (overrides.theta) {
    c.theta = *overrides.theta;
  } else {
    double th = std::numeric_limits<double>::infinity();
    const int probes = std::max(1, std::min(budget, 20));
    for (int s = 0; s < probes; ++s) th = std::min(th, detail::monotonicity_at(spec, sample_profile(spec, rng)));
    c.theta = th / opt.margin;
  }
  if (!(c.theta > 0.0))
    throw Error(ErrorCode::NonPositiveModulus, "sampled strong-monotonicity modulus is " + std::to_string(c.theta));

  c.ell = overrides.ell ? *overrides.ell : aggregation_lipschitz(spec.n, c.K3, c.mu);
  c.L0 = overrides.L0 ? *overrides.L0 : pseudo_gradient_lipschitz(spec.n, c.L, c.K2, c.K3, c.mu, c.ell);
  return c;
}

/// Uses spec.analytic for every constant it provides and samples the rest.
inline ProblemConstants constants_for(const GameSpec& spec, const DeriveOptions& opt = {},
                                      const ConstantOverrides& extra = {}) {
  ConstantOverrides o = spec.analytic;
  auto take = [](std::optional<double>& dst, const std::optional<double>& src) {
    if (src) dst = src;
  };
  take(o.mu, extra.mu);
  take(o.L, extra.L);
  take(o.theta, extra.theta);
  take(o.K, extra.K);
  take(o.K0, extra.K0);
  take(o.K1, extra.K1);
  take(o.K2, extra.K2);
  take(o.K3, extra.K3);
  take(o.hbar, extra.hbar);
  take(o.ell, extra.ell);
  take(o.L0, extra.L0);
  take(o.y_bound, extra.y_bound);
  return derive_constants(spec, opt, o);
}

struct StepSizes {
  double kappa = 0;   // inner primal-dual step
  double alpha = 0;   // z-descent step
  double k = 0;       // outer projected-gradient step
  double eta_a = 1;   // eta_t = eta_b / (t + eta_a)
  double eta_b = 1;
  Vec beta;           // per-player pairwise primal-dual steps (FOGD)
  Vec delta;          // per-player estimate parameters (FOGD)

  double eta(long t) const { return eta_b / (static_cast<double>(t) + eta_a); }
};

/// Upper bounds (strict) and schedule minima admitted by the constants.
struct StepBounds {
  double kappa_max = 0, alpha_max = 0, k_max = 0;
  double eta_b_min = 0;  // needs the chosen k
  double eta_a_min = 0;  // needs k and eta_b
  Vec beta_max;
};

namespace detail {

/// mu / lambda_N(B)^2, infinite when lambda_N = 0 (single node).
inline double spectral_cap(double mu, double lambdaN) {
  return lambdaN > 0.0 ? mu / (lambdaN * lambdaN) : std::numeric_limits<double>::infinity();
}

}  // namespace detail

inline StepBounds step_bounds(const ProblemConstants& c, const SpectralInfo& s, int n, double k, double eta_b,
                              const Vec& delta = Vec()) {
  StepBounds b;
  const double cap = detail::spectral_cap(c.mu, s.lambdaN);
  b.kappa_max = std::min(1.0 / c.L, cap);
  b.alpha_max = c.mu / (2.0 * n * n * c.K0 * c.K0);
  b.k_max = c.theta / c.L0;
  const double q = k * (c.theta - k * c.L0);
  b.eta_b_min = q > 0.0 ? std::max(1.0 / (2.0 * q), 1.0) : std::numeric_limits<double>::infinity();
  b.eta_a_min = std::max(2.0 * q * eta_b, eta_b);
  b.beta_max = Vec(delta.size());
  for (Eigen::Index i = 0; i < delta.size(); ++i) b.beta_max(i) = std::min(1.0 / (c.L + c.hbar * delta(i)), cap);
  return b;
}

/// Each fixed step at safety x its bound; eta_b at its minimum and eta_a at
/// twice its lower bound. `delta` (may be empty) sizes the FOGD steps.
inline StepSizes admissible_steps(const ProblemConstants& c, const SpectralInfo& s, int n, double safety,
                                  const Vec& delta = Vec()) {
  if (!(safety > 0.0 && safety < 1.0)) throw Error(ErrorCode::InfeasibleSteps, "safety must lie in (0,1)");
  if (!(c.mu > 0 && c.L > 0 && c.theta > 0 && c.K0 > 0 && c.L0 > 0 && c.hbar >= 0))
    throw Error(ErrorCode::InfeasibleSteps, "constants must be positive");
  for (Eigen::Index i = 0; i < delta.size(); ++i)
    if (!(delta(i) > 0.0)) throw Error(ErrorCode::InfeasibleSteps, "delta must be positive");
  StepSizes st;
  const StepBounds pre = step_bounds(c, s, n, 0.0, 1.0, delta);
  if (!(pre.kappa_max > 0 && pre.alpha_max > 0 && pre.k_max > 0))
    throw Error(ErrorCode::InfeasibleSteps, "non-positive step-size upper bound");
  st.kappa = safety * pre.kappa_max;
  st.alpha = safety * pre.alpha_max;
  st.k = safety * pre.k_max;
  const double q = st.k * (c.theta - st.k * c.L0);
  st.eta_b = std::max(1.0 / (2.0 * q), 1.0);
  st.eta_a = 2.0 * std::max(2.0 * q * st.eta_b, st.eta_b);
  st.delta = delta;
  st.beta = safety * pre.beta_max;
  return st;
}

struct StepCheck {
  std::string name;
  double value = 0;
  double bound = 0;
  bool ok = false;
  std::string relation;  // "<" or ">=" / ">"
};

/// Every step-size inequality, evaluated for the given values.
inline std::vector<StepCheck> check_steps(const StepSizes& st, const ProblemConstants& c, const SpectralInfo& s,
                                          int n) {
  const StepBounds b = step_bounds(c, s, n, st.k, st.eta_b, st.delta);
  std::vector<StepCheck> out;
  out.push_back({"kappa", st.kappa, b.kappa_max, st.kappa > 0 && st.kappa < b.kappa_max, "<"});
  out.push_back({"alpha", st.alpha, b.alpha_max, st.alpha > 0 && st.alpha < b.alpha_max, "<"});
  out.push_back({"k", st.k, b.k_max, st.k > 0 && st.k < b.k_max, "<"});
  out.push_back({"eta_b", st.eta_b, b.eta_b_min, st.eta_b >= b.eta_b_min, ">="});
  out.push_back({"eta_a", st.eta_a, b.eta_a_min, st.eta_a > b.eta_a_min, ">"});
  for (Eigen::Index i = 0; i < st.beta.size() && i < b.beta_max.size(); ++i)
    out.push_back({"beta[" + std::to_string(i + 1) + "]", st.beta(i), b.beta_max(i),
                   st.beta(i) > 0 && st.beta(i) < b.beta_max(i), "<"});
  for (Eigen::Index i = 0; i < st.delta.size(); ++i)
    out.push_back({"delta[" + std::to_string(i + 1) + "]", st.delta(i), 0.0, st.delta(i) > 0, ">"});
  return out;
}

}  // namespace bilevel_ag
