#pragma once

#include <cmath>
#include <limits>

#include "qvsweep/grid.hpp"

namespace qvs {

inline constexpr double kInfNorm = std::numeric_limits<double>::infinity();

// Parameters of the state-dependent gradient bound.
struct BoundParams {
  double alpha = 1.0;        // repose slope tan(theta)
  double eps_interp = 0.05;  // width of the support-proximity blending band (height units)
  double eps_smooth = 0.01;  // regularization width for max/abs smoothing
  double p = 2.0;            // gradient-norm exponent in [2, inf]

  void validate() const;
};

// Smooth approximation of max(0,x): (x + sqrt(x^2 + eps^2))/2.
// Nonnegative, convex, and within eps/2 of max(0,x).
template <class T>
T smooth_max(T x, T eps) {
  return (x + std::sqrt(x * x + eps * eps)) / T(2);
}

template <class T>
T smooth_max_d1(T x, T eps) {
  return (T(1) + x / std::sqrt(x * x + eps * eps)) / T(2);
}

template <class T>
T smooth_max_d2(T x, T eps) {
  const T r = std::sqrt(x * x + eps * eps);
  return eps * eps / (T(2) * r * r * r);
}

// Quintic step: 0 for s<=0, 1 for s>=1, C^2 across both ends.
double quintic_step(double s);
double quintic_step_d1(double s);
double quintic_step_d2(double s);

// Exact p-norm of a per-node gradient pair.
double grad_norm(double d1, double d2, double p);

// Piecewise bound map: alpha above the band, max(alpha, |grad z|_p) at and
// below the support, linear blend inside (z_i, z_i + eps_interp].
Field bound_continuous(const Grid& g, const Field& w, const Field& z, const BoundParams& bp);

// Smoothed bound map and the derivative channels needed by the dynamics,
// constraint Jacobians, and second-order terms of the optimality system.
// Per node the value depends on w only through w_i and on z through z_i and
// the local gradient pair ((D1 z)_i, (D2 z)_i).
struct SmoothBoundEval {
  Field value;       // bound per node, always >= alpha
  Field dw;          // d/dw_i
  Field dww;         // d^2/dw_i^2
  Field dz_direct;   // d/dz_i (band coordinate channel)
  Field dd1;         // d/d(D1 z)_i
  Field dd2;         // d/d(D2 z)_i
  Field dwz_direct;  // d^2/dw_i dz_i
  Field dwd1;        // d^2/dw_i d(D1 z)_i
  Field dwd2;        // d^2/dw_i d(D2 z)_i
};

SmoothBoundEval bound_smooth_eval(const Grid& g, const Field& w, const Field& z,
                                  const BoundParams& bp);
Field bound_smooth(const Grid& g, const Field& w, const Field& z, const BoundParams& bp);

// Dense Jacobian of the smoothed bound with respect to z:
// diag(dz_direct) + diag(dd1) D1 + diag(dd2) D2.
Eigen::MatrixXd bound_smooth_z_jacobian(const Grid& g, const SmoothBoundEval& eval);

}  // namespace qvs
