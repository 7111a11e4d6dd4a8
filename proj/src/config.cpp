#include "qvsweep/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "qvsweep/errors.hpp"

namespace qvs {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& path,
                    const std::set<std::string>& known) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.count(it.key())) {
      throw ConfigError("unknown key \"" + (path.empty() ? it.key() : path + "." + it.key()) +
                        "\"");
    }
  }
}

template <class T>
void read(const json& obj, const std::string& path, const char* key, T& out) {
  if (obj.contains(key)) {
    try {
      out = obj.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("invalid value for \"" + path + "." + key + "\"");
    }
  }
}

double read_norm_exponent(const json& obj, const std::string& path) {
  if (!obj.contains("p")) return 2.0;
  const json& v = obj.at("p");
  if (v.is_string()) {
    if (v.get<std::string>() == "inf") return kInfNorm;
    throw ConfigError("invalid value for \"" + path + ".p\" (use a number >= 2 or \"inf\")");
  }
  if (v.is_number()) return v.get<double>();
  throw ConfigError("invalid value for \"" + path + ".p\"");
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be a JSON object");

  ExperimentConfig cfg;
  reject_unknown(root, "",
                 {"grid", "material", "time", "source", "support", "control", "solver", "seed"});

  if (root.contains("grid")) {
    const json& g = root["grid"];
    reject_unknown(g, "grid", {"nx", "ny"});
    read(g, "grid", "nx", cfg.nx);
    read(g, "grid", "ny", cfg.ny);
    if (cfg.nx < 1) throw ConfigError("grid.nx must be a positive integer");
    if (cfg.ny < 1) throw ConfigError("grid.ny must be a positive integer");
  }
  if (root.contains("material")) {
    const json& mt = root["material"];
    reject_unknown(mt, "material", {"alpha", "eps_interp", "eps_smooth", "p"});
    read(mt, "material", "alpha", cfg.material.alpha);
    read(mt, "material", "eps_interp", cfg.material.eps_interp);
    read(mt, "material", "eps_smooth", cfg.material.eps_smooth);
    cfg.material.p = read_norm_exponent(mt, "material");
    if (!(cfg.material.alpha > 0.0)) throw ConfigError("material.alpha must be positive");
    if (!(cfg.material.eps_interp > 0.0)) throw ConfigError("material.eps_interp must be positive");
    if (!(cfg.material.eps_smooth > 0.0)) throw ConfigError("material.eps_smooth must be positive");
    if (!(cfg.material.p >= 2.0)) throw ConfigError("material.p must lie in [2, inf]");
  }
  if (root.contains("time")) {
    const json& t = root["time"];
    reject_unknown(t, "time", {"horizon", "steps"});
    read(t, "time", "horizon", cfg.horizon);
    read(t, "time", "steps", cfg.steps);
    if (!(cfg.horizon > 0.0)) throw ConfigError("time.horizon must be positive");
    if (cfg.steps < 1) throw ConfigError("time.steps must be a positive integer");
  }
  if (root.contains("source")) {
    const json& s = root["source"];
    reject_unknown(s, "source", {"kind", "location", "rate", "path"});
    read(s, "source", "kind", cfg.source.kind);
    read(s, "source", "location", cfg.source.location);
    read(s, "source", "rate", cfg.source.rate);
    read(s, "source", "path", cfg.source.path);
    if (cfg.source.kind != "point" && cfg.source.kind != "uniform" &&
        cfg.source.kind != "custom") {
      throw ConfigError("source.kind must be point, uniform, or custom");
    }
    if (cfg.source.rate < 0.0) throw ConfigError("source.rate must be nonnegative");
    if (cfg.source.kind == "custom" && cfg.source.path.empty()) {
      throw ConfigError("source.path required for source.kind = custom");
    }
  }
  if (root.contains("support")) {
    const json& s = root["support"];
    reject_unknown(s, "support", {"kind", "value", "slope", "path", "lambda0", "lambda1"});
    read(s, "support", "kind", cfg.support.kind);
    read(s, "support", "value", cfg.support.value);
    read(s, "support", "slope", cfg.support.slope);
    read(s, "support", "path", cfg.support.path);
    read(s, "support", "lambda0", cfg.support.lambda0);
    read(s, "support", "lambda1", cfg.support.lambda1);
    if (cfg.support.kind != "flat" && cfg.support.kind != "ramp" &&
        cfg.support.kind != "custom") {
      throw ConfigError("support.kind must be flat, ramp, or custom");
    }
    if (cfg.support.lambda0 < 0.0) throw ConfigError("support.lambda0 must be nonnegative");
    if (cfg.support.lambda0 > cfg.support.lambda1) {
      throw ConfigError("support.lambda0 must not exceed support.lambda1");
    }
    if (cfg.support.kind == "custom" && cfg.support.path.empty()) {
      throw ConfigError("support.path required for support.kind = custom");
    }
  }
  if (root.contains("control")) {
    const json& c = root["control"];
    reject_unknown(c, "control", {"sigma", "region", "gamma", "scheme", "max_iters", "tol"});
    read(c, "control", "sigma", cfg.control.sigma);
    read(c, "control", "region", cfg.control.region);
    read(c, "control", "gamma", cfg.control.gamma);
    read(c, "control", "scheme", cfg.control.scheme);
    read(c, "control", "max_iters", cfg.control.max_iters);
    read(c, "control", "tol", cfg.control.tol);
    if (!(cfg.control.sigma > 0.0)) throw ConfigError("control.sigma must be positive");
    if (!(cfg.control.gamma > 0.0)) throw ConfigError("control.gamma must be positive");
    if (cfg.control.scheme != "implicit" && cfg.control.scheme != "explicit") {
      throw ConfigError("control.scheme must be implicit or explicit");
    }
    if (cfg.control.max_iters < 1) throw ConfigError("control.max_iters must be positive");
    if (!(cfg.control.tol > 0.0)) throw ConfigError("control.tol must be positive");
  }
  if (root.contains("solver")) {
    const json& s = root["solver"];
    reject_unknown(s, "solver",
                   {"gamma_schedule", "inner_tol", "grad_tol", "picard_tol", "picard_max",
                    "damping", "newton_max", "act_tol", "check_tol"});
    read(s, "solver", "gamma_schedule", cfg.solver.gamma_schedule);
    read(s, "solver", "inner_tol", cfg.solver.inner_tol);
    read(s, "solver", "grad_tol", cfg.solver.grad_tol);
    read(s, "solver", "picard_tol", cfg.solver.picard_tol);
    read(s, "solver", "picard_max", cfg.solver.picard_max);
    read(s, "solver", "damping", cfg.solver.damping);
    read(s, "solver", "newton_max", cfg.solver.newton_max);
    read(s, "solver", "act_tol", cfg.solver.act_tol);
    read(s, "solver", "check_tol", cfg.solver.check_tol);
    if (cfg.solver.gamma_schedule.empty()) {
      throw ConfigError("solver.gamma_schedule must not be empty");
    }
    double prev = 0.0;
    for (double gval : cfg.solver.gamma_schedule) {
      if (!(gval > prev)) {
        throw ConfigError("solver.gamma_schedule must be strictly increasing and positive");
      }
      prev = gval;
    }
    if (!(cfg.solver.inner_tol > 0.0)) throw ConfigError("solver.inner_tol must be positive");
    if (!(cfg.solver.picard_tol > 0.0)) throw ConfigError("solver.picard_tol must be positive");
    if (!(cfg.solver.damping > 0.0 && cfg.solver.damping <= 1.0)) {
      throw ConfigError("solver.damping must lie in (0, 1]");
    }
    if (!(cfg.solver.check_tol > 0.0)) throw ConfigError("solver.check_tol must be positive");
  }
  read(root, "", "seed", cfg.seed);
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

}  // namespace qvs
