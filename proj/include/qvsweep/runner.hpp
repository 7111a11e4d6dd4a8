#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qvsweep/config.hpp"
#include "qvsweep/control.hpp"
#include "qvsweep/optimality.hpp"

namespace qvs {

// Problem pieces assembled from a config.
struct Experiment {
  Grid grid;
  Field y0_ref;          // support from the config
  std::vector<Field> f;  // per-step rate fields
  RegionMask region;
  TimeGrid tg;
  SolveOptions solve_opts;
  ControlProblem control;
};
Experiment build_experiment(const ExperimentConfig& cfg);

Field load_field_csv(const std::string& path, int expected_size);

// Executes one CLI command and writes its artifacts into outdir.
// Returns the process exit code: 0 ok, 4 when `check` finds violations.
// ConfigError and SolverError propagate to the caller.
int run_command(const std::string& command, const ExperimentConfig& cfg,
                const std::filesystem::path& outdir, ConditionMode mode, std::uint64_t seed);

}  // namespace qvs
