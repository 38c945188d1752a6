#pragma once

// Config-driven experiment runner. A run config is a JSON document:
//
//   {
//     "graph":  {"n": 10, "metropolis": [[1,2], [2,3], ...]}    (1-based edges)
//            or {"weights": [[...], ...]}                        (row-major A)
//     "game":   {"kind": "power_allocation" | "synthetic_quadratic" | "toy_t1" |
//                         "toy_t2" | "toy_t1_linear_cost",
//                ...kind parameters...,
//                "constants": {"mode": "analytic" | "sampled", "sample_budget": 200,
//                              "y_bound": 132.5, "overrides": {"mu": 2, ...}}},
//     "algorithm": "sogd" | "fogd" | "oracle_only",
//     "steps":  {"safety": 0.9, "enforce_bounds": true,
//                "kappa": .., "alpha": .., "k": .., "eta_a": .., "eta_b": .., "beta": [..]},
//     "fogd":   {"delta": 0.1 | [..], "delta_decay": false, "strict_printed_estimator": false},
//     "iterations": 100000, "trace_every": 100, "seed": 1, "envelope_t_min": 1000,
//     "init":   {"y0": "zero" | [low, high]},
//     "oracle": {"k": 0.1, "tol": 1e-10, "max_iter": 200000},
//     "output": {"dir": "out"}
//   }
//
// Every default is written back into the summary's "config" echo.

#include "bilevel_ag/benchmarks.hpp"
#include "bilevel_ag/engines.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace bilevel_ag {

using nlohmann::json;

class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(ErrorCode::ConfigError, key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

struct RunConfig {
  json graph;
  json game;
  std::string algorithm = "sogd";
  double safety = 0.9;
  bool enforce_bounds = true;
  json step_overrides = json::object();
  std::optional<Vec> delta;
  bool delta_decay = false;
  bool strict_printed_estimator = false;
  long iterations = 10000;
  long trace_every = 100;
  std::uint64_t seed = 1;
  long envelope_t_min = 1000;
  bool y0_random = false;
  double y0_low = 0.0, y0_high = 0.0;
  double oracle_k = 0.1;
  double oracle_tol = 1e-10;
  int oracle_max_iter = 200000;
  std::string output_dir = "out";
  std::string constants_mode = "analytic";
  int sample_budget = 200;
  std::optional<double> y_bound;
  ConstantOverrides overrides;
};

namespace detail {

inline void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where.empty() ? "<root>" : where, "expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key()))
      throw ConfigError(where.empty() ? it.key() : where + "." + it.key(), "unknown key");
}

template <class T>
T get_or(const json& j, const char* key, const std::string& path, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path, e.what());
  }
}

inline double positive(double v, const std::string& key) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(key, "must be a positive number");
  return v;
}

inline Vec to_vec(const json& j, const std::string& key) {
  if (j.is_number()) return Vec::Constant(1, j.get<double>());
  if (!j.is_array()) throw ConfigError(key, "expected a number or an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(key, "expected numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline json to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline json to_json(const Profile& p) {
  json a = json::array();
  for (const auto& v : p) a.push_back(v.size() == 1 ? json(v(0)) : to_json(v));
  return a;
}

/// Broadcast a scalar (or length-1 list) to n entries.
inline Vec per_player(const Vec& v, int n, const std::string& key) {
  if (v.size() == 1) return Vec::Constant(n, v(0));
  if (v.size() != n) throw ConfigError(key, "needs 1 or " + std::to_string(n) + " entries");
  return v;
}

inline json overrides_to_json(const ConstantOverrides& o) {
  json j = json::object();
  auto put = [&](const char* k, const std::optional<double>& v) {
    if (v) j[k] = *v;
  };
  put("mu", o.mu);
  put("L", o.L);
  put("theta", o.theta);
  put("K", o.K);
  put("K0", o.K0);
  put("K1", o.K1);
  put("K2", o.K2);
  put("K3", o.K3);
  put("hbar", o.hbar);
  put("ell", o.ell);
  put("L0", o.L0);
  put("y_bound", o.y_bound);
  return j;
}

inline ConstantOverrides overrides_from_json(const json& j, const std::string& path) {
  check_keys(j, path, {"mu", "L", "theta", "K", "K0", "K1", "K2", "K3", "hbar", "ell", "L0", "y_bound"});
  ConstantOverrides o;
  auto take = [&](const char* k, std::optional<double>& dst) {
    if (j.contains(k)) dst = positive(get_or<double>(j, k, path + "." + k, 0.0), path + "." + k);
  };
  take("mu", o.mu);
  take("L", o.L);
  take("theta", o.theta);
  take("K", o.K);
  take("K0", o.K0);
  take("K1", o.K1);
  take("K2", o.K2);
  take("K3", o.K3);
  take("hbar", o.hbar);
  take("ell", o.ell);
  take("L0", o.L0);
  take("y_bound", o.y_bound);
  return o;
}

}  // namespace detail

inline RunConfig parse_config(const json& j) {
  using detail::get_or;
  detail::check_keys(j, "", {"graph", "game", "algorithm", "steps", "fogd", "iterations", "trace_every", "seed",
                             "envelope_t_min", "init", "oracle", "output"});
  RunConfig c;
  if (!j.contains("graph")) throw ConfigError("graph", "missing");
  if (!j.contains("game")) throw ConfigError("game", "missing");
  c.graph = j.at("graph");
  detail::check_keys(c.graph, "graph", {"n", "metropolis", "weights"});
  c.game = j.at("game");
  if (!c.game.is_object() || !c.game.contains("kind")) throw ConfigError("game.kind", "missing");

  c.algorithm = get_or<std::string>(j, "algorithm", "algorithm", c.algorithm);
  if (c.algorithm != "sogd" && c.algorithm != "fogd" && c.algorithm != "oracle_only")
    throw ConfigError("algorithm", "must be sogd, fogd or oracle_only");

  if (j.contains("steps")) {
    const json& s = j.at("steps");
    detail::check_keys(s, "steps", {"safety", "enforce_bounds", "kappa", "alpha", "k", "eta_a", "eta_b", "beta"});
    c.safety = get_or<double>(s, "safety", "steps.safety", c.safety);
    if (!(c.safety > 0.0 && c.safety < 1.0)) throw ConfigError("steps.safety", "must lie in (0,1)");
    c.enforce_bounds = get_or<bool>(s, "enforce_bounds", "steps.enforce_bounds", c.enforce_bounds);
    for (const char* k : {"kappa", "alpha", "k", "eta_a", "eta_b"})
      if (s.contains(k)) {
        detail::positive(get_or<double>(s, k, std::string("steps.") + k, 0.0), std::string("steps.") + k);
        c.step_overrides[k] = s.at(k);
      }
    if (s.contains("beta")) {
      const Vec b = detail::to_vec(s.at("beta"), "steps.beta");
      if (!(b.array() > 0.0).all()) throw ConfigError("steps.beta", "must be positive");
      c.step_overrides["beta"] = s.at("beta");
    }
  }

  if (j.contains("fogd")) {
    const json& f = j.at("fogd");
    detail::check_keys(f, "fogd", {"delta", "delta_decay", "strict_printed_estimator"});
    if (f.contains("delta")) {
      Vec d = detail::to_vec(f.at("delta"), "fogd.delta");
      if (d.size() == 0 || !(d.array() > 0.0).all() || !d.allFinite())
        throw ConfigError("fogd.delta", "every delta must be positive");
      c.delta = d;
    }
    c.delta_decay = get_or<bool>(f, "delta_decay", "fogd.delta_decay", false);
    c.strict_printed_estimator = get_or<bool>(f, "strict_printed_estimator", "fogd.strict_printed_estimator", false);
  }
  if (c.algorithm == "fogd" && !c.delta) throw ConfigError("fogd.delta", "required for algorithm fogd");

  c.iterations = get_or<long>(j, "iterations", "iterations", c.iterations);
  if (c.iterations < 0) throw ConfigError("iterations", "must be >= 0");
  c.trace_every = get_or<long>(j, "trace_every", "trace_every", c.trace_every);
  if (c.trace_every < 1) throw ConfigError("trace_every", "must be >= 1");
  c.seed = get_or<std::uint64_t>(j, "seed", "seed", c.seed);
  c.envelope_t_min = get_or<long>(j, "envelope_t_min", "envelope_t_min", c.envelope_t_min);
  if (c.envelope_t_min < 2) throw ConfigError("envelope_t_min", "must be >= 2");

  if (j.contains("init")) {
    detail::check_keys(j.at("init"), "init", {"y0"});
    const json& y0 = j.at("init").value("y0", json("zero"));
    if (y0.is_string()) {
      if (y0.get<std::string>() != "zero") throw ConfigError("init.y0", "expected \"zero\" or [low, high]");
    } else {
      const Vec r = detail::to_vec(y0, "init.y0");
      if (r.size() != 2 || !(r(0) <= r(1))) throw ConfigError("init.y0", "expected [low, high] with low <= high");
      c.y0_random = true;
      c.y0_low = r(0);
      c.y0_high = r(1);
    }
  }
  if (j.contains("oracle")) {
    const json& o = j.at("oracle");
    detail::check_keys(o, "oracle", {"k", "tol", "max_iter"});
    c.oracle_k = detail::positive(get_or<double>(o, "k", "oracle.k", c.oracle_k), "oracle.k");
    c.oracle_tol = detail::positive(get_or<double>(o, "tol", "oracle.tol", c.oracle_tol), "oracle.tol");
    c.oracle_max_iter = get_or<int>(o, "max_iter", "oracle.max_iter", c.oracle_max_iter);
  }
  if (j.contains("output")) {
    detail::check_keys(j.at("output"), "output", {"dir"});
    c.output_dir = get_or<std::string>(j.at("output"), "dir", "output.dir", c.output_dir);
  }

  if (c.game.contains("constants")) {
    const json& k = c.game.at("constants");
    detail::check_keys(k, "game.constants", {"mode", "sample_budget", "y_bound", "overrides"});
    c.constants_mode = get_or<std::string>(k, "mode", "game.constants.mode", c.constants_mode);
    if (c.constants_mode != "analytic" && c.constants_mode != "sampled")
      throw ConfigError("game.constants.mode", "must be analytic or sampled");
    c.sample_budget = get_or<int>(k, "sample_budget", "game.constants.sample_budget", c.sample_budget);
    if (c.sample_budget < 1) throw ConfigError("game.constants.sample_budget", "must be >= 1");
    if (k.contains("y_bound"))
      c.y_bound = detail::positive(get_or<double>(k, "y_bound", "game.constants.y_bound", 0.0), "game.constants.y_bound");
    if (k.contains("overrides")) c.overrides = detail::overrides_from_json(k.at("overrides"), "game.constants.overrides");
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("<file>", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

inline json echo(const RunConfig& c) {
  json j;
  j["graph"] = c.graph;
  json game = c.game;
  game["constants"] = {{"mode", c.constants_mode},
                       {"sample_budget", c.sample_budget},
                       {"overrides", detail::overrides_to_json(c.overrides)}};
  if (c.y_bound) game["constants"]["y_bound"] = *c.y_bound;
  j["game"] = game;
  j["algorithm"] = c.algorithm;
  json steps = c.step_overrides;
  steps["safety"] = c.safety;
  steps["enforce_bounds"] = c.enforce_bounds;
  j["steps"] = steps;
  j["fogd"] = {{"delta_decay", c.delta_decay}, {"strict_printed_estimator", c.strict_printed_estimator}};
  if (c.delta) j["fogd"]["delta"] = detail::to_json(*c.delta);
  j["iterations"] = c.iterations;
  j["trace_every"] = c.trace_every;
  j["seed"] = c.seed;
  j["envelope_t_min"] = c.envelope_t_min;
  j["init"] = {{"y0", c.y0_random ? json::array({c.y0_low, c.y0_high}) : json("zero")}};
  j["oracle"] = {{"k", c.oracle_k}, {"tol", c.oracle_tol}, {"max_iter", c.oracle_max_iter}};
  j["output"] = {{"dir", c.output_dir}};
  return j;
}

inline GraphTopology build_graph(const RunConfig& c) {
  const json& g = c.graph;
  if (g.contains("weights")) {
    const json& w = g.at("weights");
    if (!w.is_array() || w.empty()) throw ConfigError("graph.weights", "expected a square matrix");
    const int n = static_cast<int>(w.size());
    Mat A(n, n);
    for (int i = 0; i < n; ++i) {
      const Vec row = detail::to_vec(w[static_cast<std::size_t>(i)], "graph.weights");
      if (row.size() != n) throw ConfigError("graph.weights", "expected a square matrix");
      A.row(i) = row.transpose();
    }
    return from_weights(A);
  }
  if (!g.contains("n")) throw ConfigError("graph.n", "missing");
  const int n = detail::get_or<int>(g, "n", "graph.n", 0);
  std::vector<std::pair<int, int>> edges;
  if (g.contains("metropolis")) {
    for (const auto& e : g.at("metropolis")) {
      if (!e.is_array() || e.size() != 2) throw ConfigError("graph.metropolis", "edges must be [u, v] pairs");
      edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
  }
  return build_metropolis(n, edges);
}

inline GameSpec build_game(const RunConfig& c) {
  const json& g = c.game;
  const std::string kind = g.at("kind").get<std::string>();
  if (kind == "power_allocation") {
    detail::check_keys(g, "game", {"kind", "a", "b", "c", "P0", "n", "constants"});
    PowerAllocationParams p = PowerAllocationParams::defaults();
    if (g.contains("a")) p.a = detail::to_vec(g.at("a"), "game.a");
    if (g.contains("b")) p.b = detail::to_vec(g.at("b"), "game.b");
    p.c = g.contains("c") ? detail::to_vec(g.at("c"), "game.c") : p.b;
    const int n = static_cast<int>(p.a.size());
    p.P0 = g.contains("P0") ? detail::per_player(detail::to_vec(g.at("P0"), "game.P0"), n, "game.P0") : Vec::Ones(n);
    try {
      return power_allocation_game(p);
    } catch (const Error& e) {
      throw ConfigError("game", e.what());
    }
  }
  if (kind == "synthetic_quadratic") {
    detail::check_keys(g, "game", {"kind", "n", "seed", "m1", "m2", "constants"});
    const int n = detail::get_or<int>(g, "n", "game.n", 5);
    return synthetic_quadratic_game(n, detail::get_or<std::uint64_t>(g, "seed", "game.seed", 1),
                                    detail::get_or<int>(g, "m1", "game.m1", 2), detail::get_or<int>(g, "m2", "game.m2", 2));
  }
  detail::check_keys(g, "game", {"kind", "constants"});
  if (kind == "toy_t1") return toy_t1();
  if (kind == "toy_t2") return toy_t2();
  if (kind == "toy_t1_linear_cost") return toy_t1_linear_cost();
  throw ConfigError("game.kind", "unknown game kind '" + kind + "'");
}

inline ProblemConstants build_constants(const RunConfig& c, const GameSpec& spec) {
  DeriveOptions d;
  d.sample_budget = c.sample_budget;
  d.y_bound = c.y_bound;
  d.seed = static_cast<unsigned>(c.seed);
  if (c.constants_mode == "analytic") return constants_for(spec, d, c.overrides);
  return derive_constants(spec, d, c.overrides);
}

inline StepSizes build_steps(const RunConfig& c, const ProblemConstants& k, const SpectralInfo& s, const GameSpec& spec) {
  Vec delta;
  if (c.delta) delta = detail::per_player(*c.delta, spec.n, "fogd.delta");
  StepSizes st = admissible_steps(k, s, spec.n, c.safety, delta);
  const json& o = c.step_overrides;
  if (o.contains("kappa")) st.kappa = o["kappa"].get<double>();
  if (o.contains("alpha")) st.alpha = o["alpha"].get<double>();
  if (o.contains("k")) st.k = o["k"].get<double>();
  if (o.contains("eta_a")) st.eta_a = o["eta_a"].get<double>();
  if (o.contains("eta_b")) st.eta_b = o["eta_b"].get<double>();
  if (o.contains("beta") && delta.size() > 0)
    st.beta = detail::per_player(detail::to_vec(o["beta"], "steps.beta"), spec.n, "steps.beta");
  return st;
}

inline json steps_to_json(const StepSizes& st) {
  json j = {{"kappa", st.kappa}, {"alpha", st.alpha}, {"k", st.k}, {"eta_a", st.eta_a}, {"eta_b", st.eta_b}};
  if (st.beta.size()) j["beta"] = detail::to_json(st.beta);
  if (st.delta.size()) j["delta"] = detail::to_json(st.delta);
  return j;
}

inline json constants_to_json(const ProblemConstants& c) {
  return {{"mu", c.mu}, {"L", c.L},   {"theta", c.theta}, {"K", c.K},     {"K0", c.K0},   {"K1", c.K1},
          {"K2", c.K2}, {"K3", c.K3}, {"hbar", c.hbar},   {"ell", c.ell}, {"L0", c.L0}, {"y_bound", c.y_bound}};
}

inline json record_to_json(const TraceRecord& r) {
  json j = {{"t", r.t}, {"eta_t", r.eta_t}, {"err_x", r.err_x}, {"err_y_star", r.err_y_star},
            {"err_y_track", r.err_y_track}};
  auto put = [&](const char* k, const std::optional<double>& v) { j[k] = v ? json(*v) : json(nullptr); };
  put("err_v", r.err_v);
  put("err_z", r.err_z);
  put("err_w", r.err_w);
  put("err_d", r.err_d);
  return j;
}

struct Check {
  std::string name;
  bool ok = false;
  std::string detail;
  std::optional<double> value;
  std::optional<double> bound;
};

struct ValidationReport {
  std::vector<Check> checks;
  bool ok() const {
    for (const auto& c : checks)
      if (!c.ok) return false;
    return true;
  }
  json to_json() const {
    json a = json::array();
    for (const auto& c : checks) {
      json e = {{"name", c.name}, {"ok", c.ok}, {"detail", c.detail}};
      if (c.value) e["value"] = *c.value;
      if (c.bound) e["bound"] = *c.bound;
      a.push_back(e);
    }
    return {{"ok", ok()}, {"checks", a}};
  }
};

/// Dry run: graph connectivity, constant positivity and every step-size
/// inequality with its computed bound. Failures are reported, not thrown.
inline ValidationReport validate_config(const RunConfig& c) {
  ValidationReport rep;
  std::optional<GraphTopology> graph;
  std::optional<GameSpec> spec;
  try {
    graph = build_graph(c);
    rep.checks.push_back({"graph_connected", true, "connected, doubly stochastic weights", {}, {}});
  } catch (const Error& e) {
    rep.checks.push_back({"graph_connected", false, std::string("graph assumption violated: ") + e.what(), {}, {}});
  }
  try {
    spec = build_game(c);
    rep.checks.push_back({"game", true, spec->name, {}, {}});
  } catch (const Error& e) {
    rep.checks.push_back({"game", false, e.what(), {}, {}});
  }
  if (graph && spec && graph->n != spec->n) {
    rep.checks.push_back({"player_count", false, "graph has " + std::to_string(graph->n) + " nodes, game has " +
                                                     std::to_string(spec->n) + " players", {}, {}});
    return rep;
  }
  if (!graph || !spec) return rep;
  std::optional<ProblemConstants> k;
  try {
    k = build_constants(c, *spec);
    rep.checks.push_back({"constants_positive", true, "all constants strictly positive", {}, {}});
  } catch (const Error& e) {
    rep.checks.push_back({"constants_positive", false, e.what(), {}, {}});
    return rep;
  }
  const SpectralInfo s = spectral_bounds(*graph);
  try {
    const StepSizes st = build_steps(c, *k, s, *spec);
    for (const auto& sc : check_steps(st, *k, s, spec->n)) {
      // beta only matters for the first-order method.
      if (c.algorithm != "fogd" && sc.name.rfind("beta", 0) == 0) continue;
      rep.checks.push_back({"step_" + sc.name, sc.ok, sc.name + " " + sc.relation + " bound", sc.value, sc.bound});
    }
  } catch (const Error& e) {
    rep.checks.push_back({"step_sizes", false, e.what(), {}, {}});
  }
  return rep;
}

struct OracleSummary {
  SeResult se;
  json report;
};

inline OracleSummary oracle_summary(const RunConfig& c, const GameSpec& spec) {
  SeOptions so;
  so.k = c.oracle_k;
  so.tol = c.oracle_tol;
  so.max_iter = c.oracle_max_iter;
  OracleSummary out{solve_se(spec, so), {}};
  json& j = out.report;
  j["x_star"] = detail::to_json(out.se.x);
  j["sigma_star"] = detail::to_json(out.se.y);
  j["residual"] = out.se.residual;
  j["iterations"] = out.se.iterations;
  j["converged"] = out.se.converged;
  j["non_contraction"] = out.se.non_contraction;
  if (spec.reference_sigma) j["closed_form_sigma_star"] = detail::to_json(spec.reference_sigma(out.se.x));
  if (spec.published_se) {
    j["published_x_star"] = detail::to_json(*spec.published_se);
    j["distance_to_published"] = detail::stacked_distance(out.se.x, *spec.published_se);
    j["published_sigma"] = detail::to_json(solve_sigma(*spec.published_se, spec));
  }
  return out;
}

/// Executes a run and writes trace.csv (engine runs only) and summary.json
/// into `out_dir`. Returns the summary.
inline json run(const RunConfig& c, const std::string& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const GraphTopology graph = build_graph(c);
  const GameSpec spec = build_game(c);
  if (graph.n != spec.n) throw ConfigError("graph.n", "graph and game disagree on the number of players");
  const SpectralInfo s = spectral_bounds(graph);

  json summary;
  summary["config"] = echo(c);
  summary["config"]["output"]["dir"] = out_dir;
  summary["algorithm"] = c.algorithm;
  summary["graph"] = {{"n", graph.n}, {"lambda2", s.lambda2}, {"lambdaN", s.lambdaN}};

  const OracleSummary oracle = oracle_summary(c, spec);
  summary["oracle"] = oracle.report;
  std::filesystem::create_directories(out_dir);

  if (c.algorithm != "oracle_only") {
    const ProblemConstants k = build_constants(c, spec);
    const StepSizes st = build_steps(c, k, s, spec);
    summary["constants"] = constants_to_json(k);
    summary["step_sizes"] = steps_to_json(st);
    json violations = json::array();
    for (const auto& sc : check_steps(st, k, s, spec.n)) {
      if (c.algorithm != "fogd" && sc.name.rfind("beta", 0) == 0) continue;
      if (!sc.ok) violations.push_back(sc.name);
    }
    summary["step_bound_violations"] = violations;
    if (c.enforce_bounds && !violations.empty())
      throw ConfigError("steps", "step sizes violate their bounds: " + violations.dump() +
                                     " (set steps.enforce_bounds = false to run anyway)");

    EngineOptions eo;
    eo.y_bound = k.y_bound;
    eo.seed = c.seed;
    eo.y0_random = c.y0_random;
    eo.y0_low = c.y0_low;
    eo.y0_high = c.y0_high;
    const ReferenceSolution ref{oracle.se.x, oracle.se.y};

    std::vector<TraceRecord> trace;
    Profile x_final;
    if (c.algorithm == "sogd") {
      auto r = sogd_run(spec, graph, st, c.iterations, c.trace_every, &ref, eo);
      trace = std::move(r.trace);
      x_final = r.state.x;
    } else {
      FogdOptions fo{c.delta_decay, c.strict_printed_estimator};
      if (fo.strict_printed_estimator && spec.m1 != spec.m2)
        throw ConfigError("fogd.strict_printed_estimator", "requires m1 == m2");
      auto r = fogd_run(spec, graph, st, c.iterations, c.trace_every, &ref, fo, eo);
      trace = std::move(r.trace);
      x_final = r.state.x;
    }
    std::ofstream csv(std::filesystem::path(out_dir) / "trace.csv");
    write_trace_csv(csv, trace);
    summary["iterations"] = c.iterations;
    summary["x_final"] = detail::to_json(x_final);
    summary["final"] = trace.empty() ? json(nullptr) : record_to_json(trace.back());
    try {
      const EnvelopeFit f = rate_envelope_fit(trace, c.envelope_t_min);
      summary["rate_fit"] = {{"t_min", c.envelope_t_min}, {"C_fit", f.C_fit}, {"C_half", f.C_half},
                             {"violation_fraction", f.violation_fraction}};
    } catch (const Error&) {
      summary["rate_fit"] = nullptr;
    }
  }
  summary["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream(std::filesystem::path(out_dir) / "summary.json") << summary.dump(2) << '\n';
  return summary;
}

}  // namespace bilevel_ag
