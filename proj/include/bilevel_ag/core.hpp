#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace bilevel_ag {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// One m-vector per player (actions x_i, estimates y_i, z_i, ...).
using Profile = std::vector<Vec>;

enum class ErrorCode {
  InvalidEdge,
  DisconnectedGraph,
  InvalidWeights,
  NumericalFailure,
  DimensionMismatch,
  NonPositiveModulus,
  InfeasibleSteps,
  InvalidParams,
  NonFiniteState,
  YBoundViolated,
  SingularHessian,
  MaxIterExceeded,
  EmptyTrace,
  ConfigError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidEdge: return "InvalidEdge";
    case ErrorCode::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::InvalidWeights: return "InvalidWeights";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonPositiveModulus: return "NonPositiveModulus";
    case ErrorCode::InfeasibleSteps: return "InfeasibleSteps";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::YBoundViolated: return "YBoundViolated";
    case ErrorCode::SingularHessian: return "SingularHessian";
    case ErrorCode::MaxIterExceeded: return "MaxIterExceeded";
    case ErrorCode::EmptyTrace: return "EmptyTrace";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {

inline bool all_finite(const Profile& p) {
  for (const auto& v : p)
    if (!v.allFinite()) return false;
  return true;
}

inline bool all_finite(const std::vector<Mat>& p) {
  for (const auto& m : p)
    if (!m.allFinite()) return false;
  return true;
}

inline Profile zeros(int n, int dim) { return Profile(static_cast<std::size_t>(n), Vec::Zero(dim)); }

/// Euclidean norm of the stacked profile a - b.
inline double stacked_distance(const Profile& a, const Profile& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]).squaredNorm();
  return std::sqrt(s);
}

inline Vec stack(const Profile& p) {
  Eigen::Index total = 0;
  for (const auto& v : p) total += v.size();
  Vec out(total);
  Eigen::Index off = 0;
  for (const auto& v : p) {
    out.segment(off, v.size()) = v;
    off += v.size();
  }
  return out;
}

inline Profile unstack(const Vec& flat, int n, int dim) {
  Profile out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[i] = flat.segment(static_cast<Eigen::Index>(i) * dim, dim);
  return out;
}

}  // namespace detail
}  // namespace bilevel_ag
