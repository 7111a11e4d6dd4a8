// Command-line front end: runs granular-pile experiments from a JSON config
// and writes deterministic CSV/JSON artifacts.
//
// Exit codes: 0 success, 2 config error, 3 solver failure,
//             4 check failure (an optimality residual above tolerance).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "qvsweep/errors.hpp"
#include "qvsweep/runner.hpp"

namespace {

void write_error_file(const std::filesystem::path& outdir, const std::string& kind,
                      const std::string& message) {
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec) return;
  nlohmann::ordered_json doc;
  doc["error"] = kind;
  doc["message"] = message;
  std::ofstream out(outdir / "errors.json", std::ios::binary);
  out << doc.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Granular pile growth under slope bounds: simulation, support optimization, "
               "and optimality-condition checking"};
  app.require_subcommand(1);

  std::string config_path;
  std::string outdir = ".";
  std::string mode_name = "derived-consistent";
  std::uint64_t seed = 0;
  bool seed_given = false;

  const std::vector<std::string> commands = {"simulate", "optimize", "check", "gamma-sweep",
                                             "mosco-test"};
  for (const std::string& name : commands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment definition (JSON)")->required();
    sub->add_option("--out", outdir, "output directory for artifacts")->required();
    sub->add_option("--mode", mode_name, "condition mode: paper-literal or derived-consistent");
    sub->add_option("--seed", seed, "seed override for randomized artifacts")
        ->each([&](const std::string&) { seed_given = true; });
  }

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  qvs::ConditionMode mode;
  if (mode_name == "paper-literal") {
    mode = qvs::ConditionMode::paper_literal;
  } else if (mode_name == "derived-consistent") {
    mode = qvs::ConditionMode::derived_consistent;
  } else {
    std::cerr << "error: --mode must be paper-literal or derived-consistent\n";
    return 2;
  }

  try {
    const qvs::ExperimentConfig cfg = qvs::parse_config(config_path);
    const std::uint64_t run_seed = seed_given ? seed : cfg.seed;
    return qvs::run_command(command, cfg, outdir, mode, run_seed);
  } catch (const qvs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const qvs::SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    write_error_file(outdir, "solver_failure", e.what());
    return 3;
  }
}
