#pragma once

// Bilevel aggregative game: outer costs J_i(x_i, y), inner bifunctions
// g_i(x_i, y), their derivatives, and per-player action sets.

#include "bilevel_ag/core.hpp"

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace bilevel_ag {

struct BoxSet {
  Vec lower;
  Vec upper;
};

struct BallSet {
  Vec center;
  double radius = 1.0;
};

/// User projector; radius_bound must bound sup ||x|| over the set.
struct CustomSet {
  int dim = 1;
  std::function<Vec(const Vec&)> projector;
  double radius_bound = 1.0;
};

class ActionSet {
 public:
  using Kind = std::variant<BoxSet, BallSet, CustomSet>;

  ActionSet() : kind_(BoxSet{Vec::Zero(1), Vec::Ones(1)}) {}
  explicit ActionSet(Kind kind) : kind_(std::move(kind)) { check(); }

  static ActionSet box(Vec lower, Vec upper) { return ActionSet(BoxSet{std::move(lower), std::move(upper)}); }
  static ActionSet box(int dim, double lo, double hi) {
    return box(Vec::Constant(dim, lo), Vec::Constant(dim, hi));
  }
  static ActionSet ball(Vec center, double radius) { return ActionSet(BallSet{std::move(center), radius}); }

  const Kind& kind() const { return kind_; }

  int dim() const {
    return std::visit(
        [](const auto& s) -> int {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, BoxSet>) return static_cast<int>(s.lower.size());
          else if constexpr (std::is_same_v<T, BallSet>) return static_cast<int>(s.center.size());
          else return s.dim;
        },
        kind_);
  }

  Vec project(const Vec& v) const {
    if (v.size() != dim())
      throw Error(ErrorCode::DimensionMismatch,
                  "projection of a " + std::to_string(v.size()) + "-vector onto a " + std::to_string(dim()) +
                      "-dimensional set");
    return std::visit(
        [&](const auto& s) -> Vec {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, BoxSet>) {
            return v.cwiseMax(s.lower).cwiseMin(s.upper);
          } else if constexpr (std::is_same_v<T, BallSet>) {
            const Vec d = v - s.center;
            const double r = d.norm();
            if (r <= s.radius) return v;
            return s.center + d * (s.radius / r);
          } else {
            return s.projector(v);
          }
        },
        kind_);
  }

  bool contains(const Vec& v, double tol = 1e-12) const { return (project(v) - v).norm() <= tol; }

  /// Bound on sup_{x in set} ||x||.
  double radius() const {
    return std::visit(
        [](const auto& s) -> double {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, BoxSet>) return s.lower.cwiseAbs().cwiseMax(s.upper.cwiseAbs()).norm();
          else if constexpr (std::is_same_v<T, BallSet>) return s.center.norm() + s.radius;
          else return s.radius_bound;
        },
        kind_);
  }

  /// Uniform sample for boxes and balls; for custom sets, the projection of a
  /// uniform point in the bounding ball.
  template <class Rng>
  Vec sample(Rng& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    return std::visit(
        [&](const auto& s) -> Vec {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, BoxSet>) {
            Vec out(s.lower.size());
            for (Eigen::Index k = 0; k < out.size(); ++k) out(k) = s.lower(k) + (s.upper(k) - s.lower(k)) * unit(rng);
            return out;
          } else if constexpr (std::is_same_v<T, BallSet>) {
            return s.center + sample_ball(rng, static_cast<int>(s.center.size()), s.radius);
          } else {
            return s.projector(sample_ball(rng, s.dim, s.radius_bound));
          }
        },
        kind_);
  }

  /// Corners of a box (dim <= 12); empty for other kinds.
  std::vector<Vec> vertices() const {
    std::vector<Vec> out;
    if (const auto* b = std::get_if<BoxSet>(&kind_)) {
      const int d = static_cast<int>(b->lower.size());
      if (d > 12) return out;
      for (unsigned mask = 0; mask < (1u << d); ++mask) {
        Vec v(d);
        for (int k = 0; k < d; ++k) v(k) = (mask >> k) & 1u ? b->upper(k) : b->lower(k);
        out.push_back(v);
      }
    }
    return out;
  }

  template <class Rng>
  static Vec sample_ball(Rng& rng, int dim, double radius) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vec d(dim);
    for (int k = 0; k < dim; ++k) d(k) = normal(rng);
    const double nrm = d.norm();
    if (nrm == 0.0) return Vec::Zero(dim);
    return d * (radius * std::pow(unit(rng), 1.0 / dim) / nrm);
  }

 private:
  void check() const {
    std::visit(
        [](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, BoxSet>) {
            if (s.lower.size() != s.upper.size() || s.lower.size() == 0)
              throw Error(ErrorCode::DimensionMismatch, "box bounds must be nonempty and of equal length");
            if (!s.lower.allFinite() || !s.upper.allFinite() || (s.lower.array() > s.upper.array()).any())
              throw Error(ErrorCode::InvalidParams, "box must be nonempty and bounded");
          } else if constexpr (std::is_same_v<T, BallSet>) {
            if (!(s.radius >= 0.0) || !std::isfinite(s.radius) || s.center.size() == 0)
              throw Error(ErrorCode::InvalidParams, "ball needs a finite nonnegative radius");
          } else {
            if (!s.projector || s.dim < 1 || !(s.radius_bound > 0.0))
              throw Error(ErrorCode::InvalidParams, "custom set needs a projector and a radius bound");
          }
        },
        kind_);
  }

  Kind kind_;
};

inline Vec project(const ActionSet& set, const Vec& v) { return set.project(v); }

/// Analytic values that take precedence over sampled estimates.
struct ConstantOverrides {
  std::optional<double> mu, L, theta, K, K0, K1, K2, K3, hbar, ell, L0, y_bound;
};

/// The game definition. Evaluators take (player, x_i, y) and must be pure.
/// jac21_g returns the m1 x m2 matrix whose rows are indexed by x-components.
struct GameSpec {
  using Scalar = std::function<double(int, const Vec&, const Vec&)>;
  using Vector = std::function<Vec(int, const Vec&, const Vec&)>;
  using Matrix = std::function<Mat(int, const Vec&, const Vec&)>;

  std::string name;
  int n = 0;
  int m1 = 0;
  int m2 = 0;

  Scalar J, g;
  Vector grad1_J, grad2_J, grad1_g, grad2_g;
  Matrix jac21_g, hess22_g;
  Matrix hess22_J;  // optional; finite differences of grad2_J when empty

  std::vector<ActionSet> action_sets;

  // Reference data attached by benchmark constructors.
  std::function<Vec(const Profile&)> reference_sigma;
  ConstantOverrides analytic;
  std::optional<Profile> recorded_se;   // SE computed at construction time
  std::optional<Profile> published_se;  // literature vector, logged only
};

inline void validate(const GameSpec& spec) {
  if (spec.n < 1 || spec.m1 < 1 || spec.m2 < 1) throw Error(ErrorCode::InvalidParams, "n, m1, m2 must be >= 1");
  if (static_cast<int>(spec.action_sets.size()) != spec.n)
    throw Error(ErrorCode::DimensionMismatch, "one action set per player required");
  for (const auto& s : spec.action_sets)
    if (s.dim() != spec.m1) throw Error(ErrorCode::DimensionMismatch, "action set dimension differs from m1");
  if (!spec.J || !spec.g || !spec.grad1_J || !spec.grad2_J || !spec.grad1_g || !spec.grad2_g || !spec.jac21_g ||
      !spec.hess22_g)
    throw Error(ErrorCode::InvalidParams, "game '" + spec.name + "' is missing an evaluator");
}

inline Mat hess22_J(const GameSpec& spec, int i, const Vec& x, const Vec& y) {
  if (spec.hess22_J) return spec.hess22_J(i, x, y);
  Mat H(spec.m2, spec.m2);
  for (int k = 0; k < spec.m2; ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(y(k)));
    Vec yp = y, ym = y;
    yp(k) += h;
    ym(k) -= h;
    H.col(k) = (spec.grad2_J(i, x, yp) - spec.grad2_J(i, x, ym)) / (2.0 * h);
  }
  return 0.5 * (H + H.transpose());
}

inline Profile project(const GameSpec& spec, const Profile& x) {
  Profile out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = spec.action_sets[i].project(x[i]);
  return out;
}

template <class Rng>
Profile sample_profile(const GameSpec& spec, Rng& rng) {
  Profile x(static_cast<std::size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) x[i] = spec.action_sets[i].sample(rng);
  return x;
}

}  // namespace bilevel_ag
