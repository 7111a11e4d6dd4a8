#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "qvsweep/bound.hpp"

namespace qvs {

struct SourceConfig {
  std::string kind = "point";            // point | uniform | custom
  std::array<double, 2> location{0.5, 0.5};  // domain coordinates of the point source
  double rate = 1.0;                     // total inflow (point) or density rate (uniform)
  std::string path;                      // node,value csv for kind == custom
};

struct SupportConfig {
  std::string kind = "flat";  // flat | ramp | custom
  double value = 0.0;         // flat height
  double slope = 0.0;         // ramp rise along x
  std::string path;           // node,value csv for kind == custom
  double lambda0 = 0.0;       // box perturbation bounds, 0 <= lambda0 <= lambda1
  double lambda1 = 1.0;
};

struct ControlConfig {
  double sigma = 1.0;
  std::array<double, 4> region{0.25, 0.75, 0.25, 0.75};  // x0,x1,y0,y1 of the protected zone
  double gamma = 10.0;
  std::string scheme = "implicit";  // implicit | explicit
  int max_iters = 100;
  double tol = 1e-8;
};

struct SolverConfig {
  std::vector<double> gamma_schedule{1e0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6};
  double inner_tol = 1e-6;
  double grad_tol = 1e-11;
  double picard_tol = 1e-10;
  int picard_max = 100;
  double damping = 1.0;
  int newton_max = 80;
  double act_tol = -1.0;   // <= 0: scaled default
  double check_tol = 1e-8;
};

struct ExperimentConfig {
  int nx = 9;
  int ny = 9;
  BoundParams material;
  double horizon = 0.2;
  int steps = 20;
  SourceConfig source;
  SupportConfig support;
  ControlConfig control;
  SolverConfig solver;
  std::uint64_t seed = 1;
};

// Parses and validates a JSON experiment definition.  Unknown keys and
// invariant violations raise ConfigError with the offending field path.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::string& path);

}  // namespace qvs
