#include "qvsweep/control.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "qvsweep/errors.hpp"

namespace qvs {

void ControlProblem::validate() const {
  const int n = grid.size();
  if (a.size() != n || y0_ref.size() != n || lambda0.size() != n || lambda1.size() != n) {
    throw std::invalid_argument("ControlProblem: field sizes do not match grid");
  }
  if (!(sigma > 0.0)) throw std::invalid_argument("ControlProblem: sigma must be positive");
  if ((lambda0.array() < 0.0).any() || ((lambda1 - lambda0).array() < 0.0).any()) {
    throw std::invalid_argument("ControlProblem: need 0 <= lambda0 <= lambda1");
  }
  tg.validate();
  bp.validate();
  if (static_cast<int>(f.size()) != tg.steps) {
    throw std::invalid_argument("ControlProblem: need one rate field per step");
  }
  if (!(gamma > 0.0)) throw std::invalid_argument("ControlProblem: gamma must be positive");
}

double objective(const ControlProblem& cp, const Trajectory& traj, const Field& y0) {
  if (traj.steps() != cp.tg.steps) {
    throw std::invalid_argument("objective: trajectory does not match the time grid");
  }
  if (y0.size() != cp.grid.size()) throw std::invalid_argument("objective: y0 size mismatch");
  const double tau = cp.tg.dt();
  double j = 0.0;
  for (int s = 1; s <= cp.tg.steps; ++s) j += tau * cp.a.dot(traj.states[s] - y0);
  j += 0.5 * cp.sigma * (y0 - cp.y0_ref).squaredNorm();
  return j;
}

namespace {

bool is_smoothed(TrajectoryKind k) {
  return k == TrajectoryKind::smoothed_explicit || k == TrajectoryKind::smoothed_implicit;
}

Scheme scheme_of(TrajectoryKind k) {
  return k == TrajectoryKind::smoothed_explicit ? Scheme::explicit_euler : Scheme::semi_implicit;
}

// Shared reverse sweep.  Accumulates p-bar_j (sensitivity of J to state y_j),
// the y0 channel of every step, and the initial-state sensitivity.
struct ReverseResult {
  std::vector<Field> pbar;  // index j = 0..M
  Field grad_y0_channel;    // sum of per-step dG/dy0 contributions
};

ReverseResult reverse_sweep(const ControlProblem& cp, const Trajectory& traj, const Field& y0) {
  const int n = cp.grid.size();
  const int m = cp.tg.steps;
  const double tau = cp.tg.dt();
  ReverseResult out;
  out.pbar.assign(m + 1, Field::Zero(n));
  out.grad_y0_channel = Field::Zero(n);

  out.pbar[m] = tau * cp.a;
  for (int j = m; j >= 1; --j) {
    Field v;
    Field y0_term;
    if (traj.kind == TrajectoryKind::smoothed_explicit) {
      // y_j = y_{j-1} + tau (f_j - gamma G(y_{j-1}, y0))
      const SmoothedRhs rhs = smoothed_penalty_map(cp.grid, traj.states[j - 1], y0, cp.bp, true);
      const Eigen::MatrixXd step_jac =
          Eigen::MatrixXd::Identity(n, n) - tau * cp.gamma * rhs.jac_y;
      v = step_jac.transpose() * out.pbar[j];
      y0_term = -tau * cp.gamma * rhs.jac_y0.transpose() * out.pbar[j];
    } else {
      // y_j solves y_j - y_{j-1} - tau f_j + tau gamma P(y_j; m_{j-1}) = 0
      // with the bound m_{j-1} taken at the previous state
      const SmoothBoundEval mb = bound_smooth_eval(cp.grid, traj.states[j - 1], y0, cp.bp);
      const PenaltyRhs rhs =
          smoothed_penalty_rhs(cp.grid, traj.states[j], mb.value, cp.bp.eps_smooth, true);
      Eigen::MatrixXd aj = tau * cp.gamma * rhs.jac_y;
      aj.diagonal().array() += 1.0;
      const Field w = Eigen::LLT<Eigen::MatrixXd>(aj).solve(out.pbar[j]);  // aj symmetric
      const Field bound_channel = rhs.jac_m.transpose() * w;
      v = w - tau * cp.gamma * (mb.dw.array() * bound_channel.array()).matrix();
      y0_term = -tau * cp.gamma * bound_smooth_z_jacobian(cp.grid, mb).transpose() *
                bound_channel;
    }
    out.grad_y0_channel += y0_term;
    out.pbar[j - 1] = v;
    if (j - 1 >= 1) out.pbar[j - 1] += tau * cp.a;
  }
  return out;
}

}  // namespace

Trajectory adjoint_solve(const ControlProblem& cp, const Trajectory& traj, const Field& y0) {
  cp.validate();
  if (!is_smoothed(traj.kind)) {
    throw SolverError("adjoint_solve: trajectory was not produced by the smoothed forward model");
  }
  if (scheme_of(traj.kind) != cp.scheme) {
    throw SolverError("adjoint_solve: forward scheme does not match the problem's scheme");
  }
  if (traj.steps() != cp.tg.steps) {
    throw std::invalid_argument("adjoint_solve: trajectory does not match the time grid");
  }
  const ReverseResult rev = reverse_sweep(cp, traj, y0);
  const double tau = cp.tg.dt();
  Trajectory adj;
  adj.timegrid = cp.tg;
  adj.kind = traj.kind;
  adj.states.resize(cp.tg.steps + 1);
  adj.states[0] = rev.pbar[0];
  for (int j = 1; j <= cp.tg.steps; ++j) adj.states[j] = rev.pbar[j] - tau * cp.a;
  return adj;
}

GradientEval reduced_gradient_eval(const ControlProblem& cp, const Field& y0) {
  cp.validate();
  if (y0.size() != cp.grid.size()) {
    throw std::invalid_argument("reduced_gradient: y0 size mismatch");
  }
  GradientEval out;
  out.trajectory = forward_smoothed(cp.grid, y0, cp.f, cp.tg, cp.gamma, cp.bp, cp.scheme,
                                    cp.newton_tol, cp.newton_max);
  out.objective = objective(cp, out.trajectory, y0);
  const ReverseResult rev = reverse_sweep(cp, out.trajectory, y0);

  // d/dy0 of sum_j tau <a, y_j - y0> contributes -T a; the initial condition
  // y(0) = y0 contributes the state-0 sensitivity; the bound's y0 channel
  // enters through every step.
  out.gradient = cp.sigma * (y0 - cp.y0_ref) - cp.tg.horizon * cp.a + rev.grad_y0_channel +
                 rev.pbar[0];

  const double tau = cp.tg.dt();
  Trajectory adj;
  adj.timegrid = cp.tg;
  adj.kind = out.trajectory.kind;
  adj.states.resize(cp.tg.steps + 1);
  adj.states[0] = rev.pbar[0];
  for (int j = 1; j <= cp.tg.steps; ++j) adj.states[j] = rev.pbar[j] - tau * cp.a;
  out.adjoint = std::move(adj);
  return out;
}

Field reduced_gradient(const ControlProblem& cp, const Field& y0) {
  return reduced_gradient_eval(cp, y0).gradient;
}

Field project_box(const ControlProblem& cp, const Field& z) {
  if (z.size() != cp.grid.size()) throw std::invalid_argument("project_box: size mismatch");
  const Field lo = cp.y0_ref + cp.lambda0;
  const Field hi = cp.y0_ref + cp.lambda1;
  return z.cwiseMax(lo).cwiseMin(hi);
}

namespace {

// Adjoint-term stationarity form: pairs sigma (y0 - ref) with the bound's y0
// channel weighted by the adjoint states, omitting the running-cost and
// initial-condition couplings of the reduced gradient.
Field literal_vi_vector(const ControlProblem& cp, const Field& y0, const Trajectory& traj,
                        const Trajectory& adj) {
  const double tau = cp.tg.dt();
  Field v = cp.sigma * (y0 - cp.y0_ref);
  for (int j = 1; j <= cp.tg.steps; ++j) {
    const SmoothedRhs rhs = smoothed_penalty_map(cp.grid, traj.states[j], y0, cp.bp, true);
    v -= cp.gamma * tau * rhs.jac_y0.transpose() * adj.states[j];
  }
  return v;
}

}  // namespace

OptimizeReport optimize_control(const ControlProblem& cp, const Field& y0_init,
                                const StepRules& rules, std::uint64_t seed) {
  cp.validate();
  OptimizeReport rep;
  Field y0 = project_box(cp, y0_init);
  GradientEval ev = reduced_gradient_eval(cp, y0);
  rep.objective_history.push_back(ev.objective);

  for (int it = 0; it < rules.max_iters; ++it) {
    rep.iterations = it;
    const double pg_norm = (y0 - project_box(cp, y0 - ev.gradient)).norm();
    rep.grad_norm_history.push_back(pg_norm);
    if (pg_norm <= rules.tol) {
      rep.converged = true;
      break;
    }
    double step = rules.step0;
    bool accepted = false;
    for (int ls = 0; ls < rules.ls_max; ++ls) {
      const Field trial = project_box(cp, y0 - step * ev.gradient);
      GradientEval trial_ev = reduced_gradient_eval(cp, trial);
      const double decrease = ev.gradient.dot(y0 - trial);
      if (trial_ev.objective <= ev.objective - rules.armijo_c * decrease) {
        y0 = trial;
        ev = std::move(trial_ev);
        rep.objective_history.push_back(ev.objective);
        accepted = true;
        break;
      }
      step *= rules.step_shrink;
    }
    if (!accepted) break;  // line search exhausted; report the best iterate
  }

  rep.final_y0 = y0;

  // stationarity residuals: minimum over sampled box points of the pairing
  // <v, yhat - y0>, once with the adjoint-term form and once with the full
  // reduced gradient
  const Field lo = cp.y0_ref + cp.lambda0;
  const Field hi = cp.y0_ref + cp.lambda1;
  const Field v_literal = literal_vi_vector(cp, y0, ev.trajectory, ev.adjoint);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double min_literal = 0.0, min_complete = 0.0;
  for (int s = 0; s < rules.vi_samples; ++s) {
    Field yhat(cp.grid.size());
    for (int i = 0; i < cp.grid.size(); ++i) yhat[i] = lo[i] + unif(rng) * (hi[i] - lo[i]);
    min_literal = std::min(min_literal, v_literal.dot(yhat - y0));
    min_complete = std::min(min_complete, ev.gradient.dot(yhat - y0));
  }
  rep.vi_residual_literal = min_literal;
  rep.vi_residual_complete = min_complete;
  return rep;
}

}  // namespace qvs
