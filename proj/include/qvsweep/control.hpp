#pragma once

#include <cstdint>
#include <vector>

#include "qvsweep/dynamics.hpp"

namespace qvs {

// Data of the support-selection problem: running cost <a, y_j - y0> plus a
// Tikhonov term on the support, box constraints around the reference support,
// and the smoothed forward model used as the differentiable surrogate.
struct ControlProblem {
  Grid grid;
  Field a;        // objective weights (from region_weights)
  double sigma = 1.0;
  Field y0_ref;
  Field lambda0;  // 0 <= lambda0 <= lambda1; box is [y0_ref+lambda0, y0_ref+lambda1]
  Field lambda1;
  TimeGrid tg;
  std::vector<Field> f;  // one interval rate per step
  BoundParams bp;
  double gamma = 10.0;   // penalty weight of the smoothed model
  Scheme scheme = Scheme::semi_implicit;
  double newton_tol = 1e-12;
  int newton_max = 50;

  void validate() const;
};

// J = sum_j tau <a, y_j - y0> + sigma/2 |y0 - y0_ref|^2.
double objective(const ControlProblem& cp, const Trajectory& traj, const Field& y0);

// Discrete adjoint of the smoothed forward model, consistent with whichever
// scheme produced traj.  Returned states p_0..p_M satisfy p_M = 0; in the
// inactive regime p_j = a (T - t_j).  p_0 is the initial-state sensitivity.
Trajectory adjoint_solve(const ControlProblem& cp, const Trajectory& traj, const Field& y0);

// Exact gradient of the reduced objective y0 -> J(traj(y0), y0) via one
// forward and one adjoint solve.
struct GradientEval {
  double objective = 0.0;
  Field gradient;
  Trajectory trajectory;
  Trajectory adjoint;
};
GradientEval reduced_gradient_eval(const ControlProblem& cp, const Field& y0);
Field reduced_gradient(const ControlProblem& cp, const Field& y0);

// Componentwise clamp onto the control box.
Field project_box(const ControlProblem& cp, const Field& z);

struct StepRules {
  int max_iters = 200;
  double tol = 1e-8;       // projected-gradient norm target
  double armijo_c = 1e-4;  // sufficient-decrease constant
  double step0 = 1.0;
  double step_shrink = 0.5;
  int ls_max = 40;
  int vi_samples = 100;    // box samples for the stationarity residuals
};

struct OptimizeReport {
  std::vector<double> objective_history;  // accepted iterates, nonincreasing
  std::vector<double> grad_norm_history;  // projected-gradient norms
  Field final_y0;
  double vi_residual_literal = 0.0;   // min over samples of the adjoint-term form
  double vi_residual_complete = 0.0;  // min over samples with the full reduced gradient
  int iterations = 0;
  bool converged = false;
};

// Projected gradient descent with backtracking on the reduced objective.
OptimizeReport optimize_control(const ControlProblem& cp, const Field& y0_init,
                                const StepRules& rules, std::uint64_t seed);

}  // namespace qvs
