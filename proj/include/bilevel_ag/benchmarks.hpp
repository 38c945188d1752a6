#pragma once

// Concrete games: the small-cell power allocation game, a general quadratic
// family, and the toy instances built from it.

#include "bilevel_ag/oracle.hpp"

#include <memory>
#include <random>

namespace bilevel_ag {

/// Per-player data of
///   g_i(x, y) = 1/2 y'H y - y'C x + 1/2 x'E x
///   J_i(x, y) = 1/2 x'P x + x'R y + 1/2 y'Q y + p'x + r'y + c0
/// with H: m2 x m2, C: m2 x m1, E, P: m1 x m1, R: m1 x m2, Q: m2 x m2.
struct QuadraticPlayer {
  Mat H, C, E, P, R, Q;
  Vec p, r;
  double c0 = 0.0;
};

inline GameSpec quadratic_game(std::string name, std::vector<QuadraticPlayer> players,
                               std::vector<ActionSet> sets) {
  if (players.empty() || players.size() != sets.size())
    throw Error(ErrorCode::InvalidParams, "quadratic game needs one action set per player");
  GameSpec s;
  s.name = std::move(name);
  s.n = static_cast<int>(players.size());
  s.m1 = static_cast<int>(players[0].C.cols());
  s.m2 = static_cast<int>(players[0].H.rows());
  for (const auto& q : players) {
    if (q.H.rows() != s.m2 || q.H.cols() != s.m2 || q.C.rows() != s.m2 || q.C.cols() != s.m1 ||
        q.E.rows() != s.m1 || q.P.rows() != s.m1 || q.R.rows() != s.m1 || q.R.cols() != s.m2 ||
        q.Q.rows() != s.m2 || q.p.size() != s.m1 || q.r.size() != s.m2)
      throw Error(ErrorCode::DimensionMismatch, "inconsistent quadratic player data");
  }
  auto data = std::make_shared<const std::vector<QuadraticPlayer>>(std::move(players));
  s.g = [data](int i, const Vec& x, const Vec& y) {
    const auto& q = (*data)[i];
    return 0.5 * y.dot(q.H * y) - y.dot(q.C * x) + 0.5 * x.dot(q.E * x);
  };
  s.grad1_g = [data](int i, const Vec& x, const Vec& y) -> Vec {
    const auto& q = (*data)[i];
    return -q.C.transpose() * y + q.E * x;
  };
  s.grad2_g = [data](int i, const Vec& x, const Vec& y) -> Vec {
    const auto& q = (*data)[i];
    return q.H * y - q.C * x;
  };
  s.jac21_g = [data](int i, const Vec&, const Vec&) -> Mat { return -(*data)[i].C.transpose(); };
  s.hess22_g = [data](int i, const Vec&, const Vec&) -> Mat { return (*data)[i].H; };
  s.J = [data](int i, const Vec& x, const Vec& y) {
    const auto& q = (*data)[i];
    return 0.5 * x.dot(q.P * x) + x.dot(q.R * y) + 0.5 * y.dot(q.Q * y) + q.p.dot(x) + q.r.dot(y) + q.c0;
  };
  s.grad1_J = [data](int i, const Vec& x, const Vec& y) -> Vec {
    const auto& q = (*data)[i];
    return q.P * x + q.R * y + q.p;
  };
  s.grad2_J = [data](int i, const Vec& x, const Vec& y) -> Vec {
    const auto& q = (*data)[i];
    return q.R.transpose() * x + q.Q * y + q.r;
  };
  s.hess22_J = [data](int i, const Vec&, const Vec&) -> Mat { return (*data)[i].Q; };
  s.action_sets = std::move(sets);
  validate(s);
  return s;
}

// ---------------------------------------------------------------------------
// Power allocation in small-cell networks.

struct PowerAllocationParams {
  Vec a, b, c;  // interference / bandwidth / inverse-distance coefficients
  Vec P0;       // power caps, Omega_i = [0, P0_i]

  static PowerAllocationParams defaults() {
    PowerAllocationParams p;
    p.a = (Vec(10) << 2.5, 3, 1, 2, 4, 1, 2.5, 4, 2.5, 4).finished();
    p.b = (Vec(10) << 3, 3, 4, 4, 3, 5, 4, 4, 3.5, 4).finished();
    p.c = p.b;
    p.P0 = Vec::Ones(10);
    return p;
  }

  int n() const { return static_cast<int>(a.size()); }
};

/// Equilibrium vector reported alongside the default parameters. Not a
/// solution of the stated costs; kept for the record only.
inline Profile published_power_allocation_se() {
  const double v[] = {0, 0, 1, 0.59, 0, 1, 0.47, 0.29, 0.07, 0.29};
  Profile x;
  for (double e : v) x.push_back(Vec::Constant(1, e));
  return x;
}

inline void validate(const PowerAllocationParams& p) {
  const auto n = p.a.size();
  if (n < 1 || p.b.size() != n || p.c.size() != n || p.P0.size() != n)
    throw Error(ErrorCode::InvalidParams, "power allocation parameter vectors must share a length >= 1");
  for (const Vec* v : {&p.a, &p.b, &p.c, &p.P0})
    if (!((v->array() > 0.0).all() && v->allFinite()))
      throw Error(ErrorCode::InvalidParams, "power allocation parameters must be positive");
}

inline Vec power_allocation_sigma(const PowerAllocationParams& p, const Profile& x) {
  double s = 0.0;
  for (int i = 0; i < p.n(); ++i) s += p.a(i) * x[i](0);
  return Vec::Constant(1, s / 2.0);
}

/// J_i = a_i y x_i - b_i (1 + c_i x_i), g_i = y^2/n - a_i x_i y, so that
/// sigma(x) = sum_i a_i x_i / 2.
inline GameSpec power_allocation_game(const PowerAllocationParams& p) {
  validate(p);
  const int n = p.n();
  std::vector<QuadraticPlayer> players;
  std::vector<ActionSet> sets;
  for (int i = 0; i < n; ++i) {
    QuadraticPlayer q;
    q.H = Mat::Constant(1, 1, 2.0 / n);
    q.C = Mat::Constant(1, 1, p.a(i));
    q.E = Mat::Zero(1, 1);
    q.P = Mat::Zero(1, 1);
    q.R = Mat::Constant(1, 1, p.a(i));
    q.Q = Mat::Zero(1, 1);
    q.p = Vec::Constant(1, -p.b(i) * p.c(i));
    q.r = Vec::Zero(1);
    q.c0 = -p.b(i);
    players.push_back(q);
    sets.push_back(ActionSet::box(1, 0.0, p.P0(i)));
  }
  GameSpec s = quadratic_game("power_allocation", std::move(players), std::move(sets));
  s.reference_sigma = [p](const Profile& x) { return power_allocation_sigma(p, x); };

  // Jacobian of F is (a a' + diag(a^2)) / 2.
  const Mat JF = 0.5 * (p.a * p.a.transpose() + Mat(p.a.cwiseProduct(p.a).asDiagonal()));
  const double amax = p.a.maxCoeff();
  const double sigma_max = 0.5 * p.a.dot(p.P0);
  const double y_bound = std::max(10.0 * sigma_max, 1.0);
  ConstantOverrides& c = s.analytic;
  c.mu = 2.0;
  c.L = std::max(amax, 2.0 / n);
  c.theta = Eigen::SelfAdjointEigenSolver<Mat>(JF, Eigen::EigenvaluesOnly).eigenvalues()(0);
  c.K = p.P0.maxCoeff();
  c.K0 = 2.0 / n;
  c.K1 = p.a.cwiseProduct(p.P0).maxCoeff();
  c.K2 = y_bound * 2.0 / n + c.K1.value();
  c.K3 = amax;
  c.hbar = 1e-12;  // J_i is linear in y
  c.y_bound = y_bound;
  if (n == 10 && p.a.isApprox(PowerAllocationParams::defaults().a)) s.published_se = published_power_allocation_se();
  return s;
}

struct InteriorCandidate {
  Vec x;
  double sigma = 0.0;
  bool valid = false;  // no component needed projection
};

/// Closed-form root of F assuming no bound is active:
/// x_i = 2 b_i c_i / a_i^2 - 2 sigma / a_i, sigma = sum_j (b_j c_j / a_j) / (n + 1).
inline InteriorCandidate interior_se_formula(const PowerAllocationParams& p) {
  validate(p);
  const int n = p.n();
  InteriorCandidate out;
  out.sigma = p.b.cwiseProduct(p.c).cwiseQuotient(p.a).sum() / (n + 1);
  out.x.resize(n);
  out.valid = true;
  for (int i = 0; i < n; ++i) {
    const double raw = 2.0 * p.b(i) * p.c(i) / (p.a(i) * p.a(i)) - 2.0 * out.sigma / p.a(i);
    if (!(raw > 0.0 && raw < p.P0(i))) out.valid = false;
    out.x(i) = std::clamp(raw, 0.0, p.P0(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Toy instances (m1 = m2 = 1).

namespace detail {

inline QuadraticPlayer scalar_player(double H, double C, double E, double P, double R, double Q, double p,
                                     double r, double c0 = 0.0) {
  QuadraticPlayer q;
  q.H = Mat::Constant(1, 1, H);
  q.C = Mat::Constant(1, 1, C);
  q.E = Mat::Constant(1, 1, E);
  q.P = Mat::Constant(1, 1, P);
  q.R = Mat::Constant(1, 1, R);
  q.Q = Mat::Constant(1, 1, Q);
  q.p = Vec::Constant(1, p);
  q.r = Vec::Constant(1, r);
  q.c0 = c0;
  return q;
}

}  // namespace detail

/// n = 1, g = (y - x)^2 / 2, J = (x - 0.5)^2 / 2, Omega = [0, 1]. SE (0.5, 0.5).
inline GameSpec toy_t1() {
  GameSpec s = quadratic_game("toy_t1", {detail::scalar_player(1, 1, 1, 1, 0, 0, -0.5, 0, 0.125)},
                              {ActionSet::box(1, 0.0, 1.0)});
  s.analytic.mu = 1.0;
  s.analytic.L = 1.0;
  s.analytic.theta = 1.0;
  s.analytic.K = 1.0;
  s.analytic.K0 = 1.0;
  s.analytic.K1 = 1e-12;
  s.analytic.K3 = 1.0;
  s.analytic.hbar = 1e-12;
  s.analytic.ell = 1.0;
  s.recorded_se = Profile{Vec::Constant(1, 0.5)};
  return s;
}

/// T1 with the outer cost replaced by J = y, so y(delta, x) = x - delta.
inline GameSpec toy_t1_linear_cost() {
  GameSpec s = quadratic_game("toy_t1_linear_cost", {detail::scalar_player(1, 1, 1, 0, 0, 0, 0, 1)},
                              {ActionSet::box(1, 0.0, 1.0)});
  return s;
}

/// n = 2, g_i = y^2/4 - x_i y, J_i = x_i^2/2 + y x_i, Omega_i = [-1, 1].
/// F_i = 2 x_i + x_1 + x_2, SE x = (0, 0), sigma = 0.
inline GameSpec toy_t2() {
  const auto q = detail::scalar_player(0.5, 1, 0, 1, 1, 0, 0, 0);
  GameSpec s = quadratic_game("toy_t2", {q, q}, {ActionSet::box(1, -1.0, 1.0), ActionSet::box(1, -1.0, 1.0)});
  s.analytic.mu = 1.0;
  s.analytic.theta = 1.0;  // Jacobian [[3,1],[1,3]]
  s.recorded_se = Profile{Vec::Zero(1), Vec::Zero(1)};
  return s;
}

// ---------------------------------------------------------------------------

/// Traditional aggregative game embedded in the bilevel form:
/// g_i = ||y||^2/(2n) - <y, C_i x_i>, so sigma(x) = sum_i C_i x_i, with strongly
/// convex quadratic outer costs on Omega_i = [-1, 1]^m1. The SE is solved by the
/// oracle and recorded.
inline GameSpec synthetic_quadratic_game(int n, std::uint64_t seed, int m1 = 2, int m2 = 2) {
  if (n < 1 || m1 < 1 || m2 < 1) throw Error(ErrorCode::InvalidParams, "synthetic game needs n, m1, m2 >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  auto randn = [&](int r, int c, double scale) {
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = scale * normal(rng);
    return m;
  };
  auto randu = [&](int r, double scale) {
    Vec v(r);
    for (int i = 0; i < r; ++i) v(i) = scale * unif(rng);
    return v;
  };

  std::vector<QuadraticPlayer> players;
  for (int i = 0; i < n; ++i) {
    QuadraticPlayer q;
    q.H = Mat::Identity(m2, m2) / n;
    q.C = randn(m2, m1, 0.5 / std::sqrt(double(n)));
    q.E = Mat::Identity(m1, m1) * 0.1;
    const Mat M = randn(m1, m1, 0.3);
    q.P = Mat::Identity(m1, m1) * 2.0 + M * M.transpose();
    q.R = randn(m1, m2, 0.3);
    const Mat N = randn(m2, m2, 0.5);
    q.Q = N * N.transpose() + 0.2 * Mat::Identity(m2, m2);
    q.p = randu(m1, 3.0);
    q.r = randu(m2, 1.0);
    players.push_back(q);
  }
  std::vector<ActionSet> sets(static_cast<std::size_t>(n), ActionSet::box(m1, -1.0, 1.0));
  GameSpec s = quadratic_game("synthetic_quadratic", std::move(players), std::move(sets));
  s.analytic.mu = 1.0;  // sum_i H_i = I

  SeOptions opt;
  opt.k = 0.1;
  opt.tol = 1e-13;
  const SeResult se = solve_se(s, opt);
  if (!se.converged) throw Error(ErrorCode::NumericalFailure, "synthetic game equilibrium did not converge");
  s.recorded_se = se.x;
  return s;
}

}  // namespace bilevel_ag
