#pragma once

// Per-iteration error metrics against oracle references, the sqrt(ln t / t)
// envelope fit and CSV output.

#include "bilevel_ag/fogd.hpp"
#include "bilevel_ag/oracle.hpp"

#include <cstdio>
#include <optional>
#include <ostream>

namespace bilevel_ag {

struct TraceRecord {
  long t = 0;
  double eta_t = 0;
  double err_x = 0;        // ||x_t - x*||
  double err_y_star = 0;   // max_i ||y_i - sigma(x*)||
  double err_y_track = 0;  // max_i ||y_i - sigma(x_t)||
  std::optional<double> err_v;  // max_i ||v_i - Gbar_t||_F
  std::optional<double> err_z;  // max_i ||z_i - h_i(x_t)||
  std::optional<double> err_w;  // max_{i,k} ||w_ik - y_i(delta_i, x_t)||
  std::optional<double> err_d;  // max_i ||d_i - grad sigma_i grad2_J_i||
};

struct ReferenceSolution {
  Profile x_star;
  Vec sigma_star;
};

namespace detail {

inline void fill_common(TraceRecord& r, const Profile& x, const ConsensusState& c, const ReferenceSolution& ref,
                        const Vec& sigma_t) {
  r.err_x = stacked_distance(x, ref.x_star);
  for (const auto& y : c.y) {
    r.err_y_star = std::max(r.err_y_star, (y - ref.sigma_star).norm());
    r.err_y_track = std::max(r.err_y_track, (y - sigma_t).norm());
  }
}

}  // namespace detail

inline TraceRecord snapshot(const SogdState& s, const GameSpec& spec, const StepSizes& st,
                            const ReferenceSolution& ref) {
  TraceRecord r;
  r.t = s.t;
  r.eta_t = st.eta(s.t);
  const OracleResult o = pseudo_gradient(s.x, spec);
  detail::fill_common(r, s.x, s.consensus, ref, o.sigma);
  // Gbar_t averages the Hessians at the iterates (x_t, y_t).
  Mat gbar = Mat::Zero(spec.m2, spec.m2);
  for (int i = 0; i < spec.n; ++i) gbar += spec.hess22_g(i, s.x[i], s.consensus.y[i]);
  gbar /= spec.n;
  double ev = 0.0, ez = 0.0;
  for (int i = 0; i < spec.n; ++i) {
    ev = std::max(ev, (s.v[i] - gbar).norm());
    ez = std::max(ez, (s.z[i] - o.h[i]).norm());
  }
  r.err_v = ev;
  r.err_z = ez;
  return r;
}

inline TraceRecord snapshot(const FogdState& s, const GameSpec& spec, const StepSizes& st, const FogdOptions& fo,
                            const ReferenceSolution& ref) {
  TraceRecord r;
  r.t = s.t;
  r.eta_t = st.eta(s.t);
  const OracleResult o = pseudo_gradient(s.x, spec);
  detail::fill_common(r, s.x, s.consensus, ref, o.sigma);
  const Vec delta = effective_delta(st, fo, s.t);
  double ew = 0.0, ed = 0.0;
  for (int i = 0; i < spec.n; ++i) {
    const Vec yi = solve_perturbed_inner(i, s.x, delta(i), spec);
    for (int k = 0; k < spec.n; ++k) ew = std::max(ew, (s.pairwise.w[i][k] - yi).norm());
    const Vec d = two_point_estimate(i, s.x[i], s.pairwise.w[i][i], s.consensus.y[i], delta(i), spec,
                                     fo.strict_printed_estimator);
    const Vec target = o.grad_sigma[i] * spec.grad2_J(i, s.x[i], o.sigma);
    ed = std::max(ed, (d - target).norm());
  }
  r.err_w = ew;
  r.err_d = ed;
  return r;
}

struct EnvelopeFit {
  double C_fit = 0;
  double C_half = 0;
  double violation_fraction = 0;
};

/// C_fit = max_{t >= t_min} err_x(t) / sqrt(ln t / t). C_half is the same
/// maximum over [t_min, 2 t_min]; violations count records with t >= 2 t_min
/// lying above C_half sqrt(ln t / t).
inline EnvelopeFit rate_envelope_fit(const std::vector<TraceRecord>& trace, long t_min) {
  auto env = [](long t) { return std::sqrt(std::log(double(t)) / double(t)); };
  const long lo = std::max<long>(t_min, 2);
  EnvelopeFit f;
  bool any = false, any_half = false;
  for (const auto& r : trace) {
    if (r.t < lo) continue;
    const double ratio = r.err_x / env(r.t);
    f.C_fit = any ? std::max(f.C_fit, ratio) : ratio;
    any = true;
    if (r.t <= 2 * t_min) {
      f.C_half = any_half ? std::max(f.C_half, ratio) : ratio;
      any_half = true;
    }
  }
  if (!any || !any_half) throw Error(ErrorCode::EmptyTrace, "no trace records at or beyond t_min");
  long total = 0, bad = 0;
  for (const auto& r : trace) {
    if (r.t < 2 * t_min || r.t < lo) continue;
    ++total;
    if (r.err_x > f.C_half * env(r.t) * (1.0 + 1e-12)) ++bad;
  }
  f.violation_fraction = total ? double(bad) / double(total) : 0.0;
  return f;
}

inline const char* trace_csv_header() { return "t,eta_t,err_x,err_y_star,err_y_track,err_v,err_z,err_w,err_d"; }

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  auto opt = [&](const std::optional<double>& v) { return v ? num(*v) : std::string(); };
  os << trace_csv_header() << '\n';
  for (const auto& r : trace)
    os << r.t << ',' << num(r.eta_t) << ',' << num(r.err_x) << ',' << num(r.err_y_star) << ','
       << num(r.err_y_track) << ',' << opt(r.err_v) << ',' << opt(r.err_z) << ',' << opt(r.err_w) << ','
       << opt(r.err_d) << '\n';
}

}  // namespace bilevel_ag
