#pragma once

#include "bilevel_ag/diagnostics.hpp"

namespace bilevel_ag {

template <class State>
struct RunResult {
  State state;
  std::vector<TraceRecord> trace;
};

namespace detail {

inline bool due(long t, long T, long stride) { return stride > 0 && (t % stride == 0 || t == T); }

}  // namespace detail

/// T rounds of the second-order method. With a reference solution, a trace
/// record is taken every `trace_every` rounds and after the last one.
inline RunResult<SogdState> sogd_run(const GameSpec& spec, const GraphTopology& g, const StepSizes& st, long T,
                                     long trace_every, const ReferenceSolution* ref = nullptr,
                                     const EngineOptions& opt = {}) {
  RunResult<SogdState> r{sogd_init(spec, g, st, opt), {}};
  for (long t = 0; t < T; ++t) {
    r.state = sogd_iterate(r.state, spec, g, st, opt);
    if (ref && detail::due(r.state.t, T, trace_every)) r.trace.push_back(snapshot(r.state, spec, st, *ref));
  }
  return r;
}

inline RunResult<FogdState> fogd_run(const GameSpec& spec, const GraphTopology& g, const StepSizes& st, long T,
                                     long trace_every, const ReferenceSolution* ref = nullptr,
                                     const FogdOptions& fo = {}, const EngineOptions& opt = {}) {
  RunResult<FogdState> r{fogd_init(spec, g, st, opt), {}};
  for (long t = 0; t < T; ++t) {
    r.state = fogd_iterate(r.state, spec, g, st, fo, opt);
    if (ref && detail::due(r.state.t, T, trace_every)) r.trace.push_back(snapshot(r.state, spec, st, fo, *ref));
  }
  return r;
}

}  // namespace bilevel_ag
