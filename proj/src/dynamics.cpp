#include "qvsweep/dynamics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "qvsweep/errors.hpp"

namespace qvs {

void TimeGrid::validate() const {
  if (steps < 1) throw std::invalid_argument("TimeGrid: steps must be >= 1");
  if (!(horizon > 0.0)) throw std::invalid_argument("TimeGrid: horizon must be positive");
}

void SolveOptions::validate() const {
  if (gamma_schedule.empty()) throw std::invalid_argument("SolveOptions: empty gamma schedule");
  double prev = 0.0;
  for (double gval : gamma_schedule) {
    if (!(gval > prev)) {
      throw std::invalid_argument("SolveOptions: gamma schedule must be strictly increasing");
    }
    prev = gval;
  }
  if (!(inner_tol > 0.0) || !(grad_tol > 0.0) || !(picard_tol > 0.0)) {
    throw std::invalid_argument("SolveOptions: tolerances must be positive");
  }
  if (!(damping > 0.0) || damping > 1.0) {
    throw std::invalid_argument("SolveOptions: damping must lie in (0, 1]");
  }
}

Field broken_line(const Trajectory& traj, double t) {
  const double T = traj.timegrid.horizon;
  if (t < 0.0 || t > T) throw std::invalid_argument("broken_line: time outside [0, T]");
  const double tau = traj.timegrid.dt();
  const int j = std::min(static_cast<int>(t / tau), traj.steps() - 1);
  const double theta = (t - j * tau) / tau;
  return (1.0 - theta) * traj.states[j] + theta * traj.states[j + 1];
}

Field broken_line_pc(const Trajectory& traj, double t) {
  const double T = traj.timegrid.horizon;
  if (t < 0.0 || t > T) throw std::invalid_argument("broken_line_pc: time outside [0, T]");
  const double tau = traj.timegrid.dt();
  const int j = std::min(static_cast<int>(t / tau) + 1, traj.steps());
  return traj.states[j];
}

ViSolveResult solve_vi_frozen(const Grid& g, const Field& y_prev, const Field& target_rhs,
                              const Field& M, double p, const SolveOptions& opts) {
  opts.validate();
  if ((M.array() < 0.0).any()) {
    throw std::invalid_argument("solve_vi_frozen: bound M must be nonnegative");
  }
  const int n = g.size();
  if (target_rhs.size() != n || M.size() != n) {
    throw std::invalid_argument("solve_vi_frozen: field sizes do not match grid");
  }
  ViSolveResult res;
  res.y = (y_prev.size() == n) ? y_prev : target_rhs;

  // unconstrained minimizer already feasible: done
  if (bound_violation(g, target_rhs, M, p) <= 0.0) {
    res.y = target_rhs;
    res.violation = 0.0;
    res.grad_residual = 0.0;
    res.violations_per_gamma.assign(opts.gamma_schedule.size(), 0.0);
    res.penalty_per_gamma.assign(opts.gamma_schedule.size(), 0.0);
    res.converged = true;
    return res;
  }

  const double gscale = 1.0 + target_rhs.lpNorm<Eigen::Infinity>();
  for (double gamma : opts.gamma_schedule) {
    // damped Newton on the penalized objective, warm-started across stages
    for (int it = 0; it < opts.newton_max; ++it) {
      PenaltyEval pe = penalty_value_grad(g, res.y, M, p);
      Field grad = res.y - target_rhs + gamma * pe.grad;
      res.grad_residual = grad.lpNorm<Eigen::Infinity>();
      if (res.grad_residual <= opts.grad_tol * gscale) break;

      Eigen::MatrixXd hess = gamma * penalty_hessian(g, res.y, M, p);
      hess.diagonal().array() += 1.0;
      Field dir = Eigen::LDLT<Eigen::MatrixXd>(hess).solve(-grad);
      if (!dir.allFinite()) dir = -grad;

      const double f0 = 0.5 * (res.y - target_rhs).squaredNorm() + gamma * pe.value;
      const double slope = grad.dot(dir);
      double step = 1.0;
      Field trial;
      double ft = f0;
      for (int ls = 0; ls < 50; ++ls) {
        trial = res.y + step * dir;
        ft = 0.5 * (trial - target_rhs).squaredNorm() +
             gamma * penalty_value_grad(g, trial, M, p).value;
        if (ft <= f0 + 1e-4 * step * slope) break;
        step *= 0.5;
      }
      res.max_inner_increase = std::max(res.max_inner_increase, ft - f0);
      res.y = trial;
    }
    res.violations_per_gamma.push_back(bound_violation(g, res.y, M, p));
    res.penalty_per_gamma.push_back(penalty_value_grad(g, res.y, M, p).value);
  }
  res.violation = res.violations_per_gamma.back();
  res.converged = res.violation <= opts.inner_tol;
  return res;
}

QviStepResult qvi_step(const Grid& g, const Field& y_prev, const Field& y0, const Field& f_j,
                       double tau, const BoundParams& bp, const SolveOptions& opts) {
  if (!(tau > 0.0)) throw std::invalid_argument("qvi_step: tau must be positive");
  bp.validate();
  const Field target = y_prev + tau * f_j;

  QviStepResult out;
  out.theta = opts.damping;
  Field z = y_prev;
  double prev_resid = std::numeric_limits<double>::infinity();
  for (int m = 0; m < opts.picard_max; ++m) {
    const Field m_frozen = bound_smooth(g, z, y0, bp);
    ViSolveResult vi = solve_vi_frozen(g, z, target, m_frozen, bp.p, opts);
    Field z_next = (1.0 - out.theta) * z + out.theta * vi.y;
    out.picard_residual = (z_next - z).lpNorm<Eigen::Infinity>();
    out.picard_iters = m + 1;
    z = z_next;
    if (out.picard_residual <= opts.picard_tol) {
      // certify against the bound at the final state itself
      out.y = solve_vi_frozen(g, z, target, bound_smooth(g, z, y0, bp), bp.p, opts).y;
      out.violation = bound_violation(g, out.y, bound_smooth(g, out.y, y0, bp), bp.p);
      out.converged = out.violation <= opts.inner_tol;
      return out;
    }
    if (out.picard_residual > prev_resid && out.theta > 1.0 / 64.0) out.theta *= 0.5;
    prev_resid = out.picard_residual;
  }
  out.y = z;
  out.violation = bound_violation(g, z, bound_smooth(g, z, y0, bp), bp.p);
  out.converged = false;
  return out;
}

SweepSolution solve_discrete_qvi(const Grid& g, const Field& y0, const std::vector<Field>& f,
                                 const TimeGrid& tg, const BoundParams& bp,
                                 const SolveOptions& opts) {
  tg.validate();
  if (static_cast<int>(f.size()) != tg.steps) {
    throw std::invalid_argument("solve_discrete_qvi: need one rate field per step");
  }
  SweepSolution sol;
  sol.trajectory.timegrid = tg;
  sol.trajectory.kind = TrajectoryKind::sweeping;
  sol.trajectory.states.reserve(tg.steps + 1);
  sol.trajectory.states.push_back(y0);
  const double tau = tg.dt();
  for (int j = 1; j <= tg.steps; ++j) {
    QviStepResult step = qvi_step(g, sol.trajectory.states.back(), y0, f[j - 1], tau, bp, opts);
    if (!step.converged) {
      throw SolverError("solve_discrete_qvi: step " + std::to_string(j) +
                        " failed (violation " + std::to_string(step.violation) +
                        ", fixed-point residual " + std::to_string(step.picard_residual) + ")");
    }
    sol.trajectory.states.push_back(step.y);
    sol.records.push_back({step.violation, step.picard_residual, step.picard_iters, step.theta});
  }
  return sol;
}

PenaltyRhs smoothed_penalty_rhs(const Grid& g, const Field& y, const Field& m, double eps_smooth,
                                bool with_jacobians) {
  const int n = g.size();
  if (y.size() != n || m.size() != n) {
    throw std::invalid_argument("smoothed_penalty_rhs: field sizes do not match grid");
  }
  auto [d1, d2] = apply_gradient(g, y);
  Field u(n), q(n);
  for (int i = 0; i < n; ++i) {
    u[i] = d1[i] * d1[i] + d2[i] * d2[i] - m[i] * m[i];
    q[i] = smooth_max(u[i], eps_smooth);
  }
  PenaltyRhs out;
  out.value = apply_gradient_adjoint(g, (q.array() * d1.array()).matrix(),
                                     (q.array() * d2.array()).matrix());
  if (!with_jacobians) return out;

  const Eigen::MatrixXd D1 = d1_matrix(g);
  const Eigen::MatrixXd D2 = d2_matrix(g);
  // B = diag(d1) D1 + diag(d2) D2 carries the |D y|^2 channel:
  // du = 2 B dy - 2 m dm
  Eigen::MatrixXd B = d1.asDiagonal() * D1;
  if (g.dim == 2) B += d2.asDiagonal() * D2;

  Field qp(n);
  for (int i = 0; i < n; ++i) qp[i] = smooth_max_d1(u[i], eps_smooth);

  out.jac_y = D1.transpose() * (q.asDiagonal() * D1);
  if (g.dim == 2) out.jac_y += D2.transpose() * (q.asDiagonal() * D2);
  out.jac_y += 2.0 * B.transpose() * (qp.asDiagonal() * B);

  out.jac_m = B.transpose() * ((-2.0 * qp.array() * m.array()).matrix().asDiagonal());
  return out;
}

SmoothedRhs smoothed_penalty_map(const Grid& g, const Field& y, const Field& y0,
                                 const BoundParams& bp, bool with_jacobians) {
  bp.validate();
  const SmoothBoundEval mb = bound_smooth_eval(g, y, y0, bp);
  const PenaltyRhs pen = smoothed_penalty_rhs(g, y, mb.value, bp.eps_smooth, with_jacobians);
  SmoothedRhs out;
  out.value = pen.value;
  if (!with_jacobians) return out;
  out.jac_y = pen.jac_y + pen.jac_m * mb.dw.asDiagonal();
  out.jac_y0 = pen.jac_m * bound_smooth_z_jacobian(g, mb);
  return out;
}

Trajectory forward_smoothed(const Grid& g, const Field& y0, const std::vector<Field>& f,
                            const TimeGrid& tg, double gamma, const BoundParams& bp, Scheme scheme,
                            double newton_tol, int newton_max) {
  tg.validate();
  if (!(gamma > 0.0)) throw std::invalid_argument("forward_smoothed: gamma must be positive");
  if (static_cast<int>(f.size()) != tg.steps) {
    throw std::invalid_argument("forward_smoothed: need one rate field per step");
  }
  const double tau = tg.dt();
  double mass = y0.lpNorm<Eigen::Infinity>();
  for (const Field& fj : f) mass += tau * fj.lpNorm<Eigen::Infinity>();
  const double blowup = 1e6 * (1.0 + mass);

  Trajectory traj;
  traj.timegrid = tg;
  traj.kind = (scheme == Scheme::explicit_euler) ? TrajectoryKind::smoothed_explicit
                                                 : TrajectoryKind::smoothed_implicit;
  traj.states.reserve(tg.steps + 1);
  traj.states.push_back(y0);

  for (int j = 1; j <= tg.steps; ++j) {
    const Field& prev = traj.states.back();
    Field next;
    if (scheme == Scheme::explicit_euler) {
      const SmoothedRhs rhs = smoothed_penalty_map(g, prev, y0, bp, false);
      next = prev + tau * (f[j - 1] - gamma * rhs.value);
    } else {
      // stiff penalty implicit, bound frozen at the previous state; the step
      // residual is the gradient of a strongly convex functional, so Newton
      // with a residual-norm line search converges globally
      const Field m_prev = bound_smooth(g, prev, y0, bp);
      next = prev;
      bool ok = false;
      for (int it = 0; it < newton_max; ++it) {
        const PenaltyRhs rhs = smoothed_penalty_rhs(g, next, m_prev, bp.eps_smooth, true);
        Field resid = next - prev - tau * f[j - 1] + tau * gamma * rhs.value;
        if (resid.lpNorm<Eigen::Infinity>() <= newton_tol * (1.0 + mass)) {
          ok = true;
          break;
        }
        Eigen::MatrixXd jac = tau * gamma * rhs.jac_y;
        jac.diagonal().array() += 1.0;
        Field delta = Eigen::LLT<Eigen::MatrixXd>(jac).solve(-resid);
        double step = 1.0;
        const double r0 = resid.squaredNorm();
        Field trial;
        for (int ls = 0; ls < 50; ++ls) {
          trial = next + step * delta;
          Field rt = trial - prev - tau * f[j - 1] +
                     tau * gamma * smoothed_penalty_rhs(g, trial, m_prev, bp.eps_smooth, false).value;
          if (rt.squaredNorm() <= (1.0 - 1e-4 * step) * r0) break;
          step *= 0.5;
        }
        next = trial;
      }
      if (!ok) {
        throw SolverError("forward_smoothed: implicit step " + std::to_string(j) +
                          " did not converge; reduce tau or gamma");
      }
    }
    if (!next.allFinite() || next.lpNorm<Eigen::Infinity>() > blowup) {
      throw SolverError("forward_smoothed: blow-up at step " + std::to_string(j) +
                        "; reduce tau or switch to the semi-implicit scheme");
    }
    traj.states.push_back(std::move(next));
  }
  return traj;
}

double mosco_beta(const Field& Mn, const Field& Mstar, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("mosco_beta: alpha must be positive");
  if (Mn.size() != Mstar.size()) throw std::invalid_argument("mosco_beta: size mismatch");
  const double dist = (Mn - Mstar).lpNorm<Eigen::Infinity>();
  return 1.0 / (1.0 + dist / alpha);
}

}  // namespace qvs
