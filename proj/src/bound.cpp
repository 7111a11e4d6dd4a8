#include "qvsweep/bound.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace qvs {

void BoundParams::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("BoundParams: alpha must be positive");
  if (!(eps_interp > 0.0)) throw std::invalid_argument("BoundParams: eps_interp must be positive");
  if (!(eps_smooth > 0.0)) throw std::invalid_argument("BoundParams: eps_smooth must be positive");
  if (!(p >= 2.0)) throw std::invalid_argument("BoundParams: p must lie in [2, inf]");
}

double quintic_step(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

double quintic_step_d1(double s) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  const double t = s * (1.0 - s);
  return 30.0 * t * t;
}

double quintic_step_d2(double s) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  return 60.0 * s * (2.0 * s - 1.0) * (s - 1.0);
}

double grad_norm(double d1, double d2, double p) {
  const double a1 = std::abs(d1), a2 = std::abs(d2);
  if (p == 2.0) return std::hypot(a1, a2);
  if (p == kInfNorm) return std::max(a1, a2);
  return std::pow(std::pow(a1, p) + std::pow(a2, p), 1.0 / p);
}

namespace {

void check_pair(const Grid& g, const Field& w, const Field& z, const char* name) {
  if (w.size() != g.size() || z.size() != g.size()) {
    throw std::invalid_argument(std::string(name) + ": field sizes do not match grid");
  }
}

// Smoothed p-norm of a gradient pair with value and partials.
// p=2: sqrt(d1^2 + d2^2 + es^2).
// p=inf: smoothed max of the two componentwise-smoothed absolute values.
// 2<p<inf: (|d1|^p + |d2|^p + es^p)^(1/p).
struct NormEval {
  double value;
  double dd1;
  double dd2;
};

NormEval smoothed_norm(double d1, double d2, double p, double es, int dim) {
  NormEval out{};
  if (dim == 1) {
    const double r = std::sqrt(d1 * d1 + es * es);
    out.value = r;
    out.dd1 = d1 / r;
    out.dd2 = 0.0;
    return out;
  }
  if (p == 2.0) {
    const double r = std::sqrt(d1 * d1 + d2 * d2 + es * es);
    out.value = r;
    out.dd1 = d1 / r;
    out.dd2 = d2 / r;
    return out;
  }
  if (p == kInfNorm) {
    const double a = std::sqrt(d1 * d1 + es * es);
    const double b = std::sqrt(d2 * d2 + es * es);
    const double r = std::sqrt((a - b) * (a - b) + es * es);
    out.value = 0.5 * (a + b) + 0.5 * r;
    const double dv_da = 0.5 + 0.5 * (a - b) / r;
    const double dv_db = 0.5 - 0.5 * (a - b) / r;
    out.dd1 = dv_da * d1 / a;
    out.dd2 = dv_db * d2 / b;
    return out;
  }
  const double a1 = std::abs(d1), a2 = std::abs(d2);
  const double s = std::pow(a1, p) + std::pow(a2, p) + std::pow(es, p);
  const double r = std::pow(s, 1.0 / p);
  out.value = r;
  const double c = std::pow(s, 1.0 / p - 1.0);
  out.dd1 = (a1 > 0.0) ? c * std::pow(a1, p - 1.0) * (d1 > 0 ? 1.0 : -1.0) : 0.0;
  out.dd2 = (a2 > 0.0) ? c * std::pow(a2, p - 1.0) * (d2 > 0 ? 1.0 : -1.0) : 0.0;
  return out;
}

}  // namespace

Field bound_continuous(const Grid& g, const Field& w, const Field& z, const BoundParams& bp) {
  check_pair(g, w, z, "bound_continuous");
  bp.validate();
  auto [d1, d2] = apply_gradient(g, z);
  Field out(g.size());
  for (int i = 0; i < g.size(); ++i) {
    const double base = std::max(bp.alpha, grad_norm(d1[i], d2[i], bp.p));
    const double gap = w[i] - z[i];
    if (gap > bp.eps_interp) {
      out[i] = bp.alpha;
    } else if (gap > 0.0) {
      const double s = gap / bp.eps_interp;
      out[i] = base * (1.0 - s) + bp.alpha * s;
    } else {
      out[i] = base;  // at and below the support
    }
  }
  return out;
}

SmoothBoundEval bound_smooth_eval(const Grid& g, const Field& w, const Field& z,
                                  const BoundParams& bp) {
  check_pair(g, w, z, "bound_smooth");
  bp.validate();
  const int n = g.size();
  const double es = bp.eps_smooth;
  const double eps = bp.eps_interp;
  auto [d1, d2] = apply_gradient(g, z);

  SmoothBoundEval ev;
  ev.value.resize(n);
  ev.dw.resize(n);
  ev.dww.resize(n);
  ev.dz_direct.resize(n);
  ev.dd1.resize(n);
  ev.dd2.resize(n);
  ev.dwz_direct.resize(n);
  ev.dwd1.resize(n);
  ev.dwd2.resize(n);

  for (int i = 0; i < n; ++i) {
    const NormEval nm = smoothed_norm(d1[i], d2[i], bp.p, es, g.dim);
    // smoothed max(alpha, norm)
    const double b = bp.alpha + smooth_max(nm.value - bp.alpha, es);
    const double db_dn = smooth_max_d1(nm.value - bp.alpha, es);

    const double s = (w[i] - z[i]) / eps;
    const double S = quintic_step(s);
    const double S1 = quintic_step_d1(s);
    const double S2 = quintic_step_d2(s);

    ev.value[i] = b + (bp.alpha - b) * S;
    ev.dw[i] = (bp.alpha - b) * S1 / eps;
    ev.dww[i] = (bp.alpha - b) * S2 / (eps * eps);
    ev.dz_direct[i] = -(bp.alpha - b) * S1 / eps;
    ev.dd1[i] = (1.0 - S) * db_dn * nm.dd1;
    ev.dd2[i] = (1.0 - S) * db_dn * nm.dd2;
    ev.dwz_direct[i] = -(bp.alpha - b) * S2 / (eps * eps);
    ev.dwd1[i] = -db_dn * nm.dd1 * S1 / eps;
    ev.dwd2[i] = -db_dn * nm.dd2 * S1 / eps;
  }
  return ev;
}

Field bound_smooth(const Grid& g, const Field& w, const Field& z, const BoundParams& bp) {
  return bound_smooth_eval(g, w, z, bp).value;
}

Eigen::MatrixXd bound_smooth_z_jacobian(const Grid& g, const SmoothBoundEval& eval) {
  Eigen::MatrixXd jac = eval.dd1.asDiagonal() * d1_matrix(g);
  if (g.dim == 2) jac += eval.dd2.asDiagonal() * d2_matrix(g);
  jac += Eigen::MatrixXd(eval.dz_direct.asDiagonal());
  return jac;
}

}  // namespace qvs
