#include "qvsweep/runner.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <json.hpp>

#include "qvsweep/errors.hpp"

namespace qvs {

namespace {

using nlohmann::ordered_json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ordered_json field_to_json(const Field& v) {
  ordered_json arr = ordered_json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SolverError("cannot write artifact " + path.string());
  out << text;
}

void write_json(const std::filesystem::path& path, const ordered_json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

int nearest_node(const Grid& g, double x, double y) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      const double dx = g.x(ix) - x;
      const double dy = g.y(iy) - y;
      const double d = dx * dx + dy * dy;
      if (d < best_d) {
        best_d = d;
        best = g.index(ix, iy);
      }
    }
  }
  return best;
}

Field make_rate_field(const ExperimentConfig& cfg, const Grid& g) {
  Field f = Field::Zero(g.size());
  if (cfg.source.kind == "point") {
    // concentrated rate scaled by the cell area so total inflow is
    // grid-independent
    f[nearest_node(g, cfg.source.location[0], cfg.source.location[1])] =
        cfg.source.rate / g.cell_area();
  } else if (cfg.source.kind == "uniform") {
    f.setConstant(cfg.source.rate);
  } else {
    f = load_field_csv(cfg.source.path, g.size());
    if ((f.array() < 0.0).any()) throw ConfigError("source.path: rates must be nonnegative");
  }
  return f;
}

Field make_support(const ExperimentConfig& cfg, const Grid& g) {
  Field y0(g.size());
  if (cfg.support.kind == "flat") {
    y0.setConstant(cfg.support.value);
  } else if (cfg.support.kind == "ramp") {
    for (int iy = 0; iy < g.ny; ++iy) {
      for (int ix = 0; ix < g.nx; ++ix) y0[g.index(ix, iy)] = cfg.support.slope * g.x(ix);
    }
  } else {
    y0 = load_field_csv(cfg.support.path, g.size());
  }
  return y0;
}

RegionMask make_region(const ExperimentConfig& cfg, const Grid& g) {
  RegionMask mask;
  const auto& r = cfg.control.region;
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      const double x = g.x(ix), y = g.y(iy);
      if (x >= r[0] && x <= r[1] && y >= r[2] && y <= r[3]) {
        mask.indices.push_back(g.index(ix, iy));
      }
    }
  }
  return mask;
}

}  // namespace

Field load_field_csv(const std::string& path, int expected_size) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open field file: " + path);
  Field out = Field::Zero(expected_size);
  std::vector<char> seen(expected_size, 0);
  std::string line;
  bool header_checked = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!header_checked) {
      header_checked = true;
      if (line.find("node") != std::string::npos) continue;  // optional header
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ConfigError("bad row in field file " + path);
    const int node = std::stoi(line.substr(0, comma));
    const double value = std::stod(line.substr(comma + 1));
    if (node < 0 || node >= expected_size) {
      throw ConfigError("node index out of range in field file " + path);
    }
    out[node] = value;
    seen[node] = 1;
  }
  for (int i = 0; i < expected_size; ++i) {
    if (!seen[i]) throw ConfigError("field file " + path + " is missing node " + std::to_string(i));
  }
  return out;
}

Experiment build_experiment(const ExperimentConfig& cfg) {
  Experiment ex;
  ex.grid = Grid::rect(cfg.nx, cfg.ny);
  ex.y0_ref = make_support(cfg, ex.grid);
  ex.tg = TimeGrid{cfg.horizon, cfg.steps};
  const Field rate = make_rate_field(cfg, ex.grid);
  ex.f.assign(cfg.steps, rate);
  ex.region = make_region(cfg, ex.grid);

  ex.solve_opts.gamma_schedule = cfg.solver.gamma_schedule;
  ex.solve_opts.inner_tol = cfg.solver.inner_tol;
  ex.solve_opts.grad_tol = cfg.solver.grad_tol;
  ex.solve_opts.picard_tol = cfg.solver.picard_tol;
  ex.solve_opts.picard_max = cfg.solver.picard_max;
  ex.solve_opts.damping = cfg.solver.damping;
  ex.solve_opts.newton_max = cfg.solver.newton_max;

  ControlProblem& cp = ex.control;
  cp.grid = ex.grid;
  cp.a = region_weights(ex.grid, ex.region);
  cp.sigma = cfg.control.sigma;
  cp.y0_ref = ex.y0_ref;
  cp.lambda0 = Field::Constant(ex.grid.size(), cfg.support.lambda0);
  cp.lambda1 = Field::Constant(ex.grid.size(), cfg.support.lambda1);
  cp.tg = ex.tg;
  cp.f = ex.f;
  cp.bp = cfg.material;
  cp.gamma = cfg.control.gamma;
  cp.scheme =
      (cfg.control.scheme == "explicit") ? Scheme::explicit_euler : Scheme::semi_implicit;
  return ex;
}

namespace {

void run_simulate(const Experiment& ex, const ExperimentConfig& cfg,
                  const std::filesystem::path& outdir) {
  const SweepSolution sol =
      solve_discrete_qvi(ex.grid, ex.y0_ref, ex.f, ex.tg, cfg.material, ex.solve_opts);

  std::string csv = "t,node,height\n";
  const double tau = ex.tg.dt();
  for (int node = 0; node < ex.grid.size(); ++node) {
    for (int j = 0; j <= ex.tg.steps; ++j) {
      csv += fmt(j * tau) + "," + std::to_string(node) + "," +
             fmt(sol.trajectory.states[j][node]) + "\n";
    }
  }
  write_text(outdir / "trajectory.csv", csv);

  ordered_json feas;
  feas["steps"] = ex.tg.steps;
  feas["inner_tol"] = ex.solve_opts.inner_tol;
  ordered_json rows = ordered_json::array();
  for (size_t j = 0; j < sol.records.size(); ++j) {
    const StepRecord& r = sol.records[j];
    rows.push_back(ordered_json{{"step", j + 1},
                                {"violation", r.violation},
                                {"picard_residual", r.picard_residual},
                                {"picard_iters", r.picard_iters},
                                {"theta", r.theta}});
  }
  feas["records"] = rows;
  write_json(outdir / "feasibility.json", feas);
}

void run_optimize(const Experiment& ex, const ExperimentConfig& cfg,
                  const std::filesystem::path& outdir, std::uint64_t seed) {
  StepRules rules;
  rules.max_iters = cfg.control.max_iters;
  rules.tol = cfg.control.tol;
  const OptimizeReport rep = optimize_control(ex.control, ex.y0_ref, rules, seed);

  ordered_json doc;
  doc["iterations"] = rep.iterations;
  doc["converged"] = rep.converged;
  doc["objective_history"] = rep.objective_history;
  doc["grad_norm_history"] = rep.grad_norm_history;
  doc["vi_residual_literal"] = rep.vi_residual_literal;
  doc["vi_residual_complete"] = rep.vi_residual_complete;
  doc["final_y0"] = field_to_json(rep.final_y0);
  write_json(outdir / "report.json", doc);

  std::string csv = "node,value\n";
  for (int i = 0; i < rep.final_y0.size(); ++i) {
    csv += std::to_string(i) + "," + fmt(rep.final_y0[i]) + "\n";
  }
  write_text(outdir / "y0_final.csv", csv);
}

int run_check(const Experiment& ex, const ExperimentConfig& cfg,
              const std::filesystem::path& outdir, ConditionMode mode) {
  if (cfg.material.p != kInfNorm) {
    throw ConfigError("check requires material.p = \"inf\" (the constraint system is the "
                      "componentwise slope-bound form)");
  }
  const SweepSolution sol =
      solve_discrete_qvi(ex.grid, ex.y0_ref, ex.f, ex.tg, cfg.material, ex.solve_opts);
  const ConstraintSystem cs(ex.grid, cfg.material);
  const KktCertificate cert = recover_certificate(cs, ex.control, sol.trajectory, ex.y0_ref, mode,
                                                  cfg.solver.act_tol);
  const ResidualReport rep =
      kkt_residuals(cs, ex.control, sol.trajectory, ex.y0_ref, cert, mode, cfg.solver.check_tol,
                    cfg.solver.act_tol);

  ordered_json doc;
  doc["mode"] = (mode == ConditionMode::paper_literal) ? "paper-literal" : "derived-consistent";
  doc["tolerance"] = rep.tolerance;
  ordered_json conds;
  for (const std::string& id : kkt_condition_ids()) {
    const ConditionResidual& c = rep.entries.at(id);
    conds[id] = ordered_json{{"residual", c.value}, {"pass", c.pass}};
  }
  doc["conditions"] = conds;
  doc["all_pass"] = rep.all_pass();
  write_json(outdir / "residuals.json", doc);
  return rep.all_pass() ? 0 : 4;
}

void run_gamma_sweep(const Experiment& ex, const ExperimentConfig& cfg,
                     const std::filesystem::path& outdir, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Field target = ex.y0_ref + ex.tg.dt() * ex.f[0];
  for (int i = 0; i < target.size(); ++i) target[i] += 0.5 * gauss(rng);
  const Field m = bound_smooth(ex.grid, ex.y0_ref, ex.y0_ref, cfg.material);

  const ViSolveResult res =
      solve_vi_frozen(ex.grid, ex.y0_ref, target, m, cfg.material.p, ex.solve_opts);
  std::string csv = "gamma,max_violation\n";
  for (size_t i = 0; i < res.violations_per_gamma.size(); ++i) {
    csv += fmt(ex.solve_opts.gamma_schedule[i]) + "," + fmt(res.violations_per_gamma[i]) + "\n";
  }
  write_text(outdir / "violations.csv", csv);
}

void run_mosco_test(const Experiment& ex, const ExperimentConfig& cfg,
                    const std::filesystem::path& outdir, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int n = ex.grid.size();
  const double alpha = cfg.material.alpha;

  Field mstar(n), pattern(n), w(n);
  for (int i = 0; i < n; ++i) {
    mstar[i] = alpha + unif(rng);
    pattern[i] = 2.0 * unif(rng) - 1.0;
    w[i] = gauss(rng);
  }
  // scale w to be mstar-feasible
  auto [d1, d2] = apply_gradient(ex.grid, w);
  double ratio = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double nrm = grad_norm(d1[i], d2[i], 2.0);
    if (nrm > 0.0) ratio = std::min(ratio, mstar[i] / nrm);
  }
  if (std::isfinite(ratio)) w *= ratio;

  std::string csv = "level,distance,beta,scaled_violation\n";
  for (int k = 0; k <= 12; ++k) {
    const Field mn = (mstar + std::pow(0.5, k) * pattern).cwiseMax(alpha);
    const double beta = mosco_beta(mn, mstar, alpha);
    const double viol = bound_violation(ex.grid, Field(beta * w), mn, 2.0);
    csv += std::to_string(k) + "," + fmt((mn - mstar).lpNorm<Eigen::Infinity>()) + "," +
           fmt(beta) + "," + fmt(viol) + "\n";
  }
  write_text(outdir / "beta.csv", csv);
}

}  // namespace

int run_command(const std::string& command, const ExperimentConfig& cfg,
                const std::filesystem::path& outdir, ConditionMode mode, std::uint64_t seed) {
  std::filesystem::create_directories(outdir);
  const Experiment ex = build_experiment(cfg);
  if (command == "simulate") {
    run_simulate(ex, cfg, outdir);
    return 0;
  }
  if (command == "optimize") {
    run_optimize(ex, cfg, outdir, seed);
    return 0;
  }
  if (command == "check") {
    return run_check(ex, cfg, outdir, mode);
  }
  if (command == "gamma-sweep") {
    run_gamma_sweep(ex, cfg, outdir, seed);
    return 0;
  }
  if (command == "mosco-test") {
    run_mosco_test(ex, cfg, outdir, seed);
    return 0;
  }
  throw ConfigError("unknown command: " + command);
}

}  // namespace qvs
