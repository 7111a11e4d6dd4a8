#pragma once

#include <vector>

#include "qvsweep/constraint.hpp"
#include "qvsweep/grid.hpp"

namespace qvs {

struct TimeGrid {
  double horizon = 1.0;  // T
  int steps = 1;         // M

  double dt() const { return horizon / steps; }
  double t(int j) const { return j * dt(); }
  void validate() const;
};

enum class TrajectoryKind { sweeping, smoothed_explicit, smoothed_implicit };

// States y_0 ... y_M on one grid; index 0 is the initial/support state.
struct Trajectory {
  std::vector<Field> states;
  TimeGrid timegrid;
  TrajectoryKind kind = TrajectoryKind::sweeping;

  int steps() const { return static_cast<int>(states.size()) - 1; }
};

// Piecewise-linear sampling of a trajectory at time t in [0, T].
Field broken_line(const Trajectory& traj, double t);
// Piecewise-constant sampling (value of the active interval, right endpoint at T).
Field broken_line_pc(const Trajectory& traj, double t);

struct SolveOptions {
  std::vector<double> gamma_schedule{1e0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6};
  double inner_tol = 1e-6;    // accepted slope-bound violation per step
  double grad_tol = 1e-11;    // first-order residual target of the inner minimization
  int newton_max = 80;        // inner iterations per continuation stage
  double picard_tol = 1e-10;  // fixed-point tolerance of the bound update
  int picard_max = 100;
  double damping = 1.0;       // fixed-point mixing weight, halved on oscillation

  void validate() const;
};

// Projection-type step: minimize 1/2 |y - target|^2 + gamma * penalty(y; M)
// along the continuation schedule.  Solves the inequality-constrained step
// with the bound frozen at M.
struct ViSolveResult {
  Field y;
  double violation = 0.0;      // max slope excess at the returned iterate
  double grad_residual = 0.0;  // sup-norm of the penalized objective gradient
  std::vector<double> violations_per_gamma;
  std::vector<double> penalty_per_gamma;  // penalty value at each stage end
  double max_inner_increase = 0.0;        // worst within-stage objective increase
  bool converged = false;
};
ViSolveResult solve_vi_frozen(const Grid& g, const Field& y_prev, const Field& target_rhs,
                              const Field& M, double p, const SolveOptions& opts);

// One implicit sweeping step: fixed-point iteration over the state-dependent
// bound, each inner problem solved by solve_vi_frozen.
struct QviStepResult {
  Field y;
  double violation = 0.0;        // |D y|_p against bound(y, y0) at the returned state
  double picard_residual = 0.0;  // sup-norm change of the last fixed-point update
  int picard_iters = 0;
  double theta = 1.0;  // final mixing weight
  bool converged = false;
};
QviStepResult qvi_step(const Grid& g, const Field& y_prev, const Field& y0, const Field& f_j,
                       double tau, const BoundParams& bp, const SolveOptions& opts);

struct StepRecord {
  double violation = 0.0;
  double picard_residual = 0.0;
  int picard_iters = 0;
  double theta = 1.0;
};

struct SweepSolution {
  Trajectory trajectory;
  std::vector<StepRecord> records;  // one per step j = 1..M
};

// Full discrete sweeping trajectory; f holds one interval rate per step.
// Throws SolverError with the step index if a step fails to certify.
SweepSolution solve_discrete_qvi(const Grid& g, const Field& y0, const std::vector<Field>& f,
                                 const TimeGrid& tg, const BoundParams& bp,
                                 const SolveOptions& opts);

// Penalty part of the smoothed dynamics at a frozen bound m:
//   value = D^T smooth_max(0, |D y|_2^2 - m^2) D y.
// jac_y is symmetric positive semidefinite; jac_m carries the bound channel.
struct PenaltyRhs {
  Field value;
  Eigen::MatrixXd jac_y;
  Eigen::MatrixXd jac_m;
};
PenaltyRhs smoothed_penalty_rhs(const Grid& g, const Field& y, const Field& m, double eps_smooth,
                                bool with_jacobians);

// Full right-hand side of y' = f - gamma * G(y, y0) with the state-dependent
// bound m = bound(y, y0), and its dense Jacobians in y and y0.
struct SmoothedRhs {
  Field value;
  Eigen::MatrixXd jac_y;
  Eigen::MatrixXd jac_y0;
};
SmoothedRhs smoothed_penalty_map(const Grid& g, const Field& y, const Field& y0,
                                 const BoundParams& bp, bool with_jacobians);

// Time discretizations of the smoothed model.  The semi-implicit scheme takes
// the stiff penalty implicitly and freezes the bound at the previous state,
// which keeps every step problem strongly convex; the explicit scheme
// evaluates everything at the previous state.
enum class Scheme { explicit_euler, semi_implicit };

// Time-stepped solution of the smoothed model; the differentiable forward
// model of the control problem.  y(0) = y0.
Trajectory forward_smoothed(const Grid& g, const Field& y0, const std::vector<Field>& f,
                            const TimeGrid& tg, double gamma, const BoundParams& bp, Scheme scheme,
                            double newton_tol = 1e-12, int newton_max = 60);

// Scaling factor beta = (1 + |Mn - Mstar|_inf / alpha)^{-1} in (0, 1]; for
// Mn >= alpha, beta * w is Mn-feasible whenever w is Mstar-feasible.
double mosco_beta(const Field& Mn, const Field& Mstar, double alpha);

}  // namespace qvs
