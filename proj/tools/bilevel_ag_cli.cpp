// bilevel_ag: run, validate, or solve the reference equilibrium for a config.
//
//   bilevel_ag run <config> [--out DIR] [--seed N] [--iterations N]
//   bilevel_ag validate <config>
//   bilevel_ag oracle <config>

#include "bilevel_ag/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

int fail(const std::string& code, const std::string& message, const std::string& key = {}) {
  nlohmann::json err = {{"code", code}, {"message", message}};
  if (!key.empty()) err["key"] = key;
  std::cerr << nlohmann::json{{"error", err}}.dump() << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace bilevel_ag;
  CLI::App app{"Distributed equilibrium seeking for bilevel aggregative games"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<long> iterations;

  auto* run_cmd = app.add_subcommand("run", "Run the configured algorithm and write trace.csv / summary.json");
  run_cmd->add_option("config", config_path, "Run config (JSON)")->required();
  run_cmd->add_option("--out", out_dir, "Output directory (overrides output.dir)");
  run_cmd->add_option("--seed", seed, "Initialization seed");
  run_cmd->add_option("--iterations", iterations, "Number of rounds");

  auto* validate_cmd = app.add_subcommand("validate", "Check graph, constants and step-size bounds");
  validate_cmd->add_option("config", config_path, "Run config (JSON)")->required();

  auto* oracle_cmd = app.add_subcommand("oracle", "Solve the reference equilibrium centrally");
  oracle_cmd->add_option("config", config_path, "Run config (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = load_config(config_path);
    if (*run_cmd) {
      if (seed) cfg.seed = *seed;
      if (iterations) {
        if (*iterations < 0) throw ConfigError("iterations", "must be >= 0");
        cfg.iterations = *iterations;
      }
      const std::string dir = out_dir.empty() ? cfg.output_dir : out_dir;
      const nlohmann::json summary = run(cfg, dir);
      std::cout << summary.dump(2) << '\n';
      return 0;
    }
    if (*validate_cmd) {
      const ValidationReport rep = validate_config(cfg);
      std::cout << rep.to_json().dump(2) << '\n';
      return rep.ok() ? 0 : 1;
    }
    if (*oracle_cmd) {
      const GameSpec spec = build_game(cfg);
      std::cout << oracle_summary(cfg, spec).report.dump(2) << '\n';
      return 0;
    }
  } catch (const ConfigError& e) {
    return fail(to_string(e.code()), e.what(), e.key());
  } catch (const Error& e) {
    return fail(to_string(e.code()), e.what());
  } catch (const std::exception& e) {
    return fail("Internal", e.what());
  }
  return 0;
}
