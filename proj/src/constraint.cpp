#include "qvsweep/constraint.hpp"

#include <algorithm>
#include <stdexcept>

namespace qvs {

namespace {

void check_field(const Grid& g, const Field& v, const char* name) {
  if (v.size() != g.size()) {
    throw std::invalid_argument(std::string(name) + ": field size does not match grid");
  }
}

}  // namespace

ConstraintSystem::ConstraintSystem(const Grid& g, const BoundParams& bp) : grid(g), params(bp) {
  params.validate();
}

BoundParams ConstraintSystem::box_params() const {
  BoundParams bp = params;
  bp.p = kInfNorm;
  return bp;
}

Field g_eval(const ConstraintSystem& cs, const Field& y, const Field& y0) {
  check_field(cs.grid, y, "g_eval(y)");
  check_field(cs.grid, y0, "g_eval(y0)");
  const int n = cs.grid.size();
  auto [d1, d2] = apply_gradient(cs.grid, y);
  const Field m = bound_smooth(cs.grid, y, y0, cs.box_params());
  Field out(cs.count());
  for (int k = 0; k < 2; ++k) {
    const Field& dk = (k == 0) ? d1 : d2;
    for (int i = 0; i < n; ++i) {
      out[cs.flat(i, k)] = dk[i] + m[i];
      out[cs.flat(n + i, k)] = m[i] - dk[i];
    }
  }
  return out;
}

GJacobian g_jacobian(const ConstraintSystem& cs, const Field& y, const Field& y0) {
  check_field(cs.grid, y, "g_jacobian(y)");
  check_field(cs.grid, y0, "g_jacobian(y0)");
  const int n = cs.grid.size();
  const SmoothBoundEval ev = bound_smooth_eval(cs.grid, y, y0, cs.box_params());
  const Eigen::MatrixXd d1 = d1_matrix(cs.grid);
  const Eigen::MatrixXd d2 = d2_matrix(cs.grid);
  const Eigen::MatrixXd mz = bound_smooth_z_jacobian(cs.grid, ev);

  GJacobian jac;
  jac.dy = Eigen::MatrixXd::Zero(cs.count(), n);
  jac.dy0 = Eigen::MatrixXd::Zero(cs.count(), n);
  for (int k = 0; k < 2; ++k) {
    const Eigen::MatrixXd& dk = (k == 0) ? d1 : d2;
    for (int i = 0; i < n; ++i) {
      const int lo = cs.flat(i, k);
      const int up = cs.flat(n + i, k);
      jac.dy.row(lo) = dk.row(i);
      jac.dy.row(up) = -dk.row(i);
      jac.dy(lo, i) += ev.dw[i];
      jac.dy(up, i) += ev.dw[i];
      jac.dy0.row(lo) = mz.row(i);
      jac.dy0.row(up) = mz.row(i);
    }
  }
  return jac;
}

Field g_hessian_action(const ConstraintSystem& cs, const Field& y, const Field& y0, int l, int k,
                       const Field& v) {
  check_field(cs.grid, y, "g_hessian_action(y)");
  check_field(cs.grid, v, "g_hessian_action(v)");
  const int n = cs.grid.size();
  if (l < 0 || l >= 2 * n || k < 0 || k > 1) {
    throw std::out_of_range("g_hessian_action: constraint index out of range");
  }
  const SmoothBoundEval ev = bound_smooth_eval(cs.grid, y, y0, cs.box_params());
  const int i = l % n;
  Field out = Field::Zero(n);
  out[i] = ev.dww[i] * v[i];
  return out;
}

Field g_cross_hessian_action(const ConstraintSystem& cs, const Field& y, const Field& y0, int l,
                             int k, const Field& v) {
  check_field(cs.grid, y, "g_cross_hessian_action(y)");
  check_field(cs.grid, v, "g_cross_hessian_action(v)");
  const int n = cs.grid.size();
  if (l < 0 || l >= 2 * n || k < 0 || k > 1) {
    throw std::out_of_range("g_cross_hessian_action: constraint index out of range");
  }
  const SmoothBoundEval ev = bound_smooth_eval(cs.grid, y, y0, cs.box_params());
  const int i = l % n;
  // d^2 g / dy0 dy has a single nonzero column (node i); its action on v is
  // v_i times the cross-derivative row in the y0 variable.
  Field out = Field::Zero(n);
  out[i] += ev.dwz_direct[i] * v[i];
  Field q1 = Field::Zero(n), q2 = Field::Zero(n);
  q1[i] = ev.dwd1[i] * v[i];
  q2[i] = ev.dwd2[i] * v[i];
  out += apply_gradient_adjoint(cs.grid, q1, q2);
  return out;
}

PenaltyEval penalty_value_grad(const Grid& g, const Field& y, const Field& M, double p) {
  check_field(g, y, "penalty_value_grad(y)");
  check_field(g, M, "penalty_value_grad(M)");
  if ((M.array() < 0.0).any()) {
    throw std::invalid_argument("penalty_value_grad: bound M must be nonnegative");
  }
  const int n = g.size();
  auto [d1, d2] = apply_gradient(g, y);
  PenaltyEval out;
  Field q1(n), q2(n);
  if (p == kInfNorm) {
    for (int i = 0; i < n; ++i) {
      const double u1 = std::max(d1[i] * d1[i] - M[i] * M[i], 0.0);
      const double u2 = std::max(d2[i] * d2[i] - M[i] * M[i], 0.0);
      out.value += 0.25 * (u1 * u1 + u2 * u2);
      q1[i] = u1 * d1[i];
      q2[i] = u2 * d2[i];
    }
  } else if (p == 2.0) {
    for (int i = 0; i < n; ++i) {
      const double u = std::max(d1[i] * d1[i] + d2[i] * d2[i] - M[i] * M[i], 0.0);
      out.value += 0.25 * u * u;
      q1[i] = u * d1[i];
      q2[i] = u * d2[i];
    }
  } else {
    throw std::invalid_argument("penalty_value_grad: p must be 2 or inf");
  }
  out.grad = apply_gradient_adjoint(g, q1, q2);
  return out;
}

Eigen::MatrixXd penalty_hessian(const Grid& g, const Field& y, const Field& M, double p) {
  check_field(g, y, "penalty_hessian(y)");
  check_field(g, M, "penalty_hessian(M)");
  const int n = g.size();
  auto [d1, d2] = apply_gradient(g, y);
  const Eigen::MatrixXd D1 = d1_matrix(g);
  const Eigen::MatrixXd D2 = d2_matrix(g);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  if (p == kInfNorm) {
    Field w1(n), w2(n);
    for (int i = 0; i < n; ++i) {
      const double u1 = d1[i] * d1[i] - M[i] * M[i];
      const double u2 = d2[i] * d2[i] - M[i] * M[i];
      w1[i] = std::max(u1, 0.0) + (u1 > 0.0 ? 2.0 * d1[i] * d1[i] : 0.0);
      w2[i] = std::max(u2, 0.0) + (u2 > 0.0 ? 2.0 * d2[i] * d2[i] : 0.0);
    }
    h = D1.transpose() * w1.asDiagonal() * D1;
    if (g.dim == 2) h += D2.transpose() * w2.asDiagonal() * D2;
    return h;
  }
  if (p != 2.0) throw std::invalid_argument("penalty_hessian: p must be 2 or inf");
  Field q(n), act(n);
  for (int i = 0; i < n; ++i) {
    const double u = d1[i] * d1[i] + d2[i] * d2[i] - M[i] * M[i];
    q[i] = std::max(u, 0.0);
    act[i] = u > 0.0 ? 1.0 : 0.0;
  }
  h = D1.transpose() * q.asDiagonal() * D1;
  if (g.dim == 2) h += D2.transpose() * q.asDiagonal() * D2;
  Eigen::MatrixXd b = d1.asDiagonal() * D1;
  if (g.dim == 2) b += d2.asDiagonal() * D2;
  h += 2.0 * b.transpose() * act.asDiagonal() * b;
  return h;
}

double bound_violation(const Grid& g, const Field& y, const Field& M, double p) {
  check_field(g, y, "bound_violation(y)");
  check_field(g, M, "bound_violation(M)");
  auto [d1, d2] = apply_gradient(g, y);
  double worst = 0.0;
  for (int i = 0; i < g.size(); ++i) {
    worst = std::max(worst, grad_norm(d1[i], d2[i], p) - M[i]);
  }
  return std::max(worst, 0.0);
}

}  // namespace qvs
