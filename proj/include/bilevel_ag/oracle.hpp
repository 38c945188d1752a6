#pragma once

// Centralized reference computations: the aggregation sigma(x), its
// derivative, the pseudo-gradient F(x), the equilibrium and the perturbed
// inner solutions y_i(delta_i, x). Used for ground truth and diagnostics,
// never by the distributed engines.

#include "bilevel_ag/game.hpp"

#include <limits>

namespace bilevel_ag {

struct NewtonOptions {
  double tol = 1e-12;
  int max_iter = 100;
};

struct OracleResult {
  Vec sigma;
  std::vector<Mat> grad_sigma;  // m1 x m2 per player
  Profile F;
  Profile h;      // -(sum hess22_g)^{-1} grad2_J_i at (x_i, sigma)
  Mat gbar;       // (1/n) sum hess22_g_i(x_i, sigma)
};

struct SeOptions {
  double k = 0.1;
  double tol = 1e-10;
  int max_iter = 200000;
  std::optional<Profile> x0;
  NewtonOptions newton;
};

struct SeResult {
  Profile x;
  Vec y;
  double residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
  double k_used = 0.0;
  bool converged = false;
  bool non_contraction = false;  // step was halved at least once
};

namespace detail {

/// Damped Newton for min_y phi(y) given its value, gradient and Hessian.
/// The residual is ||grad phi||.
template <class Value, class Grad, class Hess>
Vec newton_minimize(Vec y, Value&& value, Grad&& grad, Hess&& hess, const NewtonOptions& opt, const char* what) {
  Vec r = grad(y);
  for (int it = 0; it < opt.max_iter; ++it) {
    if (r.norm() <= opt.tol) return y;
    const Mat H = hess(y);
    Eigen::LLT<Mat> llt(H);
    if (llt.info() != Eigen::Success)
      throw Error(ErrorCode::SingularHessian, std::string(what) + ": Hessian is not positive definite");
    const Vec step = llt.solve(-r);
    const double f0 = value(y);
    const double slope = r.dot(step);
    double t = 1.0;
    Vec trial = y + step;
    // Armijo backtracking; a full step is exact on quadratics.
    for (int ls = 0; ls < 60; ++ls) {
      if (value(trial) <= f0 + 1e-4 * t * slope || t < 1e-12) break;
      t *= 0.5;
      trial = y + t * step;
    }
    Vec r_trial = grad(trial);
    if (!r_trial.allFinite()) throw Error(ErrorCode::NumericalFailure, std::string(what) + ": non-finite iterate");
    // Near the optimum f differences drown in rounding; take the full Newton
    // step whenever it reduces the gradient norm further.
    if (t < 1.0) {
      const Vec full = y + step;
      const Vec r_full = grad(full);
      if (r_full.norm() < std::min(r.norm(), r_trial.norm())) {
        trial = full;
        r_trial = r_full;
      }
    }
    if (r_trial.norm() >= r.norm() && (trial - y).norm() <= 1e-15 * (1.0 + y.norm())) return trial;
    y = trial;
    r = r_trial;
  }
  if (r.norm() <= opt.tol) return y;
  throw Error(ErrorCode::MaxIterExceeded,
              std::string(what) + ": residual " + std::to_string(r.norm()) + " after max iterations");
}

inline Mat hessian_sum(const GameSpec& spec, const Profile& x, const Vec& y) {
  Mat H = Mat::Zero(spec.m2, spec.m2);
  for (int i = 0; i < spec.n; ++i) H += spec.hess22_g(i, x[i], y);
  return H;
}

inline Vec inner_gradient(const GameSpec& spec, const Profile& x, const Vec& y) {
  Vec r = Vec::Zero(spec.m2);
  for (int i = 0; i < spec.n; ++i) r += spec.grad2_g(i, x[i], y);
  return r;
}

inline double inner_value(const GameSpec& spec, const Profile& x, const Vec& y) {
  double s = 0.0;
  for (int i = 0; i < spec.n; ++i) s += spec.g(i, x[i], y);
  return s;
}

}  // namespace detail

/// sigma(x) = argmin_y sum_i g_i(x_i, y).
inline Vec solve_sigma(const Profile& x, const GameSpec& spec, const NewtonOptions& opt = {},
                       const Vec* y0 = nullptr) {
  Vec y = y0 ? *y0 : Vec::Zero(spec.m2);
  return detail::newton_minimize(
      std::move(y), [&](const Vec& v) { return detail::inner_value(spec, x, v); },
      [&](const Vec& v) { return detail::inner_gradient(spec, x, v); },
      [&](const Vec& v) { return detail::hessian_sum(spec, x, v); }, opt, "solve_sigma");
}

/// y_i(delta, x) = argmin_y delta J_i(x_i, y) + sum_j g_j(x_j, y).
inline Vec solve_perturbed_inner(int i, const Profile& x, double delta, const GameSpec& spec,
                                 const NewtonOptions& opt = {}) {
  if (delta < 0.0) throw Error(ErrorCode::InvalidParams, "delta must be nonnegative");
  return detail::newton_minimize(
      Vec::Zero(spec.m2),
      [&](const Vec& v) { return delta * spec.J(i, x[i], v) + detail::inner_value(spec, x, v); },
      [&](const Vec& v) { return Vec(delta * spec.grad2_J(i, x[i], v) + detail::inner_gradient(spec, x, v)); },
      [&](const Vec& v) { return Mat(delta * hess22_J(spec, i, x[i], v) + detail::hessian_sum(spec, x, v)); }, opt,
      "solve_perturbed_inner");
}

/// Derivative of sigma and the pseudo-gradient at x. All inverse-Hessian
/// products are Cholesky solves against the summed Hessian.
inline OracleResult pseudo_gradient(const Profile& x, const GameSpec& spec, const NewtonOptions& opt = {}) {
  OracleResult r;
  r.sigma = solve_sigma(x, spec, opt);
  const Mat H = detail::hessian_sum(spec, x, r.sigma);
  Eigen::LLT<Mat> llt(H);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::SingularHessian, "summed inner Hessian is not positive definite");
  r.gbar = H / spec.n;
  r.grad_sigma.resize(static_cast<std::size_t>(spec.n));
  r.F.resize(static_cast<std::size_t>(spec.n));
  r.h.resize(static_cast<std::size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) {
    const Mat jac = spec.jac21_g(i, x[i], r.sigma);  // m1 x m2
    // -jac * H^{-1} = -(H^{-1} jac^T)^T since H is symmetric.
    r.grad_sigma[i] = -llt.solve(jac.transpose()).transpose();
    const Vec g2J = spec.grad2_J(i, x[i], r.sigma);
    r.F[i] = spec.grad1_J(i, x[i], r.sigma) + r.grad_sigma[i] * g2J;
    r.h[i] = -llt.solve(g2J);
  }
  return r;
}

inline Profile pseudo_gradient_only(const Profile& x, const GameSpec& spec, const NewtonOptions& opt = {}) {
  return pseudo_gradient(x, spec, opt).F;
}

/// ||x - P_Omega[x - k F(x)]||.
inline double fixed_point_residual(const Profile& x, const Profile& F, const GameSpec& spec, double k) {
  double s = 0.0;
  for (int i = 0; i < spec.n; ++i) s += (x[i] - spec.action_sets[i].project(x[i] - k * F[i])).squaredNorm();
  return std::sqrt(s);
}

/// Fixed point of x -> P_Omega[x - k F(x)]; the step is halved whenever the
/// fixed-point residual fails to decrease.
inline SeResult solve_se(const GameSpec& spec, const SeOptions& opt = {}) {
  if (!(opt.k > 0.0)) throw Error(ErrorCode::InvalidParams, "solve_se step must be positive");
  SeResult res;
  Profile x = opt.x0 ? project(spec, *opt.x0) : Profile{};
  if (!opt.x0) {
    x.resize(static_cast<std::size_t>(spec.n));
    for (int i = 0; i < spec.n; ++i) x[i] = spec.action_sets[i].project(Vec::Zero(spec.m1));
  }
  double k = opt.k;
  Profile F = pseudo_gradient_only(x, spec, opt.newton);
  double prev = fixed_point_residual(x, F, spec, k);
  Profile best = x;
  double best_res = prev;
  int it = 0;
  for (; it < opt.max_iter && prev > opt.tol; ++it) {
    Profile next(x.size());
    for (int i = 0; i < spec.n; ++i) next[i] = spec.action_sets[i].project(x[i] - k * F[i]);
    Profile Fn = pseudo_gradient_only(next, spec, opt.newton);
    const double r = fixed_point_residual(next, Fn, spec, k);
    if (r >= prev && r > opt.tol && k > 1e-12) {
      k *= 0.5;
      res.non_contraction = true;
      prev = fixed_point_residual(x, F, spec, k);
      continue;
    }
    x = std::move(next);
    F = std::move(Fn);
    prev = r;
    if (r < best_res) {
      best_res = r;
      best = x;
    }
  }
  res.x = prev <= best_res ? x : best;
  res.residual = std::min(prev, best_res);
  res.iterations = it;
  res.k_used = k;
  res.converged = res.residual <= opt.tol;
  res.y = solve_sigma(res.x, spec, opt.newton);
  return res;
}

}  // namespace bilevel_ag
