#pragma once

#include "qvsweep/bound.hpp"
#include "qvsweep/grid.hpp"

namespace qvs {

// The 4N inequality system describing states with admissible slopes:
//   g[l=i,   k] = (Dk y)_i + bound_i(y, y0)   >= 0
//   g[l=N+i, k] = bound_i(y, y0) - (Dk y)_i   >= 0
// for k in {1,2}, with the smoothed componentwise bound (p = inf form).
// Flat ordering is k-major: index = k*2N + l, k in {0,1}, l in [0,2N).
struct ConstraintSystem {
  Grid grid;
  BoundParams params;

  ConstraintSystem(const Grid& g, const BoundParams& bp);

  int count() const { return 4 * grid.size(); }
  int flat(int l, int k) const { return k * 2 * grid.size() + l; }
  // inverse of flat()
  int l_of(int idx) const { return idx % (2 * grid.size()); }
  int k_of(int idx) const { return idx / (2 * grid.size()); }
  int node_of(int idx) const { return l_of(idx) % grid.size(); }
  bool is_upper(int idx) const { return l_of(idx) >= grid.size(); }  // bound - Dk y rows

  // bound parameters with the componentwise box norm forced
  BoundParams box_params() const;
};

// All 4N constraint values at (y, y0).
Field g_eval(const ConstraintSystem& cs, const Field& y, const Field& y0);

// Exact derivative of g_eval with respect to y and y0 (dense, 4N x N each).
struct GJacobian {
  Eigen::MatrixXd dy;
  Eigen::MatrixXd dy0;
};
GJacobian g_jacobian(const ConstraintSystem& cs, const Field& y, const Field& y0);

// Action of the y-y Hessian block of one constraint on v.  The bound couples
// to y only through the node value, so the block is a single diagonal entry.
Field g_hessian_action(const ConstraintSystem& cs, const Field& y, const Field& y0, int l, int k,
                       const Field& v);

// Action of the mixed y0-y Hessian block of one constraint on v (the
// cross-term variant reported alongside the zero-slot convention).
Field g_cross_hessian_action(const ConstraintSystem& cs, const Field& y, const Field& y0, int l,
                             int k, const Field& v);

// Quartic penalty of slope-bound violation with frozen bound M:
//   p = 2:   value = 1/4 sum_i ((|D y|_2^2 - M_i^2)^+)^2
//   p = inf: value = 1/4 sum_{i,k} (((Dk y)_i^2 - M_i^2)^+)^2
// grad is the exact gradient; it is a monotone map of y for fixed M >= 0.
struct PenaltyEval {
  double value = 0.0;
  Field grad;
};
PenaltyEval penalty_value_grad(const Grid& g, const Field& y, const Field& M, double p = 2.0);

// Hessian of the penalty (positive semidefinite; kinks treated one-sidedly).
Eigen::MatrixXd penalty_hessian(const Grid& g, const Field& y, const Field& M, double p = 2.0);

// Largest slope excess max_i (|(D y)_i|_p - M_i)^+ of y against the bound M.
double bound_violation(const Grid& g, const Field& y, const Field& M, double p);

}  // namespace qvs
