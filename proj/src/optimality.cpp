#include "qvsweep/optimality.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace qvs {

double default_act_tol(const Field& g_values) {
  return 1e-8 * (1.0 + g_values.lpNorm<Eigen::Infinity>());
}

ActiveSet active_set(const ConstraintSystem& cs, const Field& y, const Field& y0, double act_tol) {
  if (!(act_tol > 0.0) && !std::isinf(act_tol)) {
    throw std::invalid_argument("active_set: act_tol must be positive");
  }
  const Field g = g_eval(cs, y, y0);
  ActiveSet aset;
  aset.act_tol = act_tol;
  aset.is_active.assign(cs.count(), 0);
  for (int idx = 0; idx < cs.count(); ++idx) {
    if (g[idx] <= act_tol) {
      aset.is_active[idx] = 1;
      aset.active.push_back(idx);
    }
  }
  return aset;
}

LicqReport licq_check(const ConstraintSystem& cs, const Field& y, const Field& y0,
                      const ActiveSet& aset) {
  LicqReport rep;
  rep.active_count = static_cast<int>(aset.active.size());
  if (aset.active.empty()) return rep;  // ok, condition number 1 by convention

  const GJacobian jac = g_jacobian(cs, y, y0);
  const int n = cs.grid.size();
  Eigen::MatrixXd rows(rep.active_count, 2 * n);
  for (int r = 0; r < rep.active_count; ++r) {
    rows.row(r).head(n) = jac.dy.row(aset.active[r]);
    rows.row(r).tail(n) = jac.dy0.row(aset.active[r]);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(rows);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  const double thresh = std::max(smax * std::max(rows.rows(), rows.cols()) * 1e-12, 1e-14);
  rep.rank = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) > thresh) ++rep.rank;
  }
  rep.ok = (rep.rank == rep.active_count);
  const double smin = sv(sv.size() - 1);
  rep.condition_number = (smin > 0.0) ? smax / smin : std::numeric_limits<double>::infinity();
  return rep;
}

Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double tol,
                     int max_iter) {
  const int ncol = static_cast<int>(A.cols());
  if (max_iter <= 0) max_iter = 3 * ncol + 10;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(ncol);
  if (ncol == 0) return x;
  std::vector<char> passive(ncol, 0);

  for (int outer = 0; outer < max_iter; ++outer) {
    const Eigen::VectorXd w = A.transpose() * (b - A * x);
    int best = -1;
    double best_w = tol;
    for (int i = 0; i < ncol; ++i) {
      if (!passive[i] && w(i) > best_w) {
        best_w = w(i);
        best = i;
      }
    }
    if (best < 0) break;
    passive[best] = 1;

    for (int inner = 0; inner < max_iter; ++inner) {
      std::vector<int> pidx;
      for (int i = 0; i < ncol; ++i) {
        if (passive[i]) pidx.push_back(i);
      }
      Eigen::MatrixXd ap(A.rows(), pidx.size());
      for (size_t c = 0; c < pidx.size(); ++c) ap.col(c) = A.col(pidx[c]);
      const Eigen::VectorXd z = ap.colPivHouseholderQr().solve(b);

      double min_z = std::numeric_limits<double>::infinity();
      for (int i = 0; i < z.size(); ++i) min_z = std::min(min_z, z(i));
      if (min_z > 0.0) {
        x.setZero();
        for (size_t c = 0; c < pidx.size(); ++c) x(pidx[c]) = z(c);
        break;
      }
      double alpha = std::numeric_limits<double>::infinity();
      for (size_t c = 0; c < pidx.size(); ++c) {
        if (z(c) <= 0.0) {
          const double xi = x(pidx[c]);
          alpha = std::min(alpha, xi / (xi - z(c)));
        }
      }
      for (size_t c = 0; c < pidx.size(); ++c) {
        x(pidx[c]) += alpha * (z(c) - x(pidx[c]));
        if (x(pidx[c]) <= tol) {
          x(pidx[c]) = 0.0;
          passive[pidx[c]] = 0;
        }
      }
    }
  }
  return x;
}

namespace {

// Columns of grad_y(g)^T restricted to a support set.
Eigen::MatrixXd active_columns(const Eigen::MatrixXd& jac_dy, const std::vector<int>& support) {
  Eigen::MatrixXd cols(jac_dy.cols(), support.size());
  for (size_t c = 0; c < support.size(); ++c) cols.col(c) = jac_dy.row(support[c]).transpose();
  return cols;
}

// Scatter solved support multipliers into the full 4N vector.
Eigen::VectorXd scatter(int total, const std::vector<int>& support, const Eigen::VectorXd& vals) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(total);
  for (size_t c = 0; c < support.size(); ++c) out(support[c]) = vals(c);
  return out;
}

struct ConeDecomposition {
  Eigen::VectorXd multipliers;  // length 4N
  double residual = 0.0;
};

// min |grad_y(g)^T eta - rhs| over eta >= 0 supported on the active set.
ConeDecomposition cone_decompose(const Eigen::MatrixXd& jac_dy, const std::vector<int>& support,
                                 const Field& rhs) {
  ConeDecomposition out;
  const Eigen::MatrixXd cols = active_columns(jac_dy, support);
  const Eigen::VectorXd sol = nnls(cols, rhs);
  out.multipliers = scatter(static_cast<int>(jac_dy.rows()), support, sol);
  out.residual = (cols * sol - rhs).lpNorm<Eigen::Infinity>();
  return out;
}

}  // namespace

MultiplierRecovery recover_velocity_multipliers(const ConstraintSystem& cs, const Field& y,
                                                const Field& y0, const Field& w, const Field& f_j,
                                                const ActiveSet& aset) {
  if (w.size() != cs.grid.size() || f_j.size() != cs.grid.size()) {
    throw std::invalid_argument("recover_velocity_multipliers: size mismatch");
  }
  const GJacobian jac = g_jacobian(cs, y, y0);
  // grad_y(g)^T lambda = -(w + f)
  const ConeDecomposition dec = cone_decompose(jac.dy, aset.active, -(w + f_j));
  return {dec.multipliers, dec.residual};
}

CoderivativeImage coderivative_image(const ConstraintSystem& cs, const Field& y, const Field& y0,
                                     const Field& /*w*/, const Field& q,
                                     const Eigen::VectorXd& lambda, double act_tol) {
  if (lambda.size() != cs.count()) {
    throw std::invalid_argument("coderivative_image: multiplier size mismatch");
  }
  const int n = cs.grid.size();
  const Field g = g_eval(cs, y, y0);
  const GJacobian jac = g_jacobian(cs, y, y0);
  const SmoothBoundEval ev = bound_smooth_eval(cs.grid, y, y0, cs.box_params());

  CoderivativeImage img;
  img.base_y = Field::Zero(n);
  img.base_y0_variant = Field::Zero(n);
  img.gamma_class.assign(cs.count(), GammaClass::forced_zero);

  const double lam_tol = 1e-12 * (1.0 + lambda.lpNorm<Eigen::Infinity>());
  for (int idx = 0; idx < cs.count(); ++idx) {
    const double inner = jac.dy.row(idx).dot(q);
    img.domain_violation = std::max(img.domain_violation, std::abs(lambda(idx) * inner));

    const int i = cs.node_of(idx);
    if (lambda(idx) != 0.0) {
      // second-order base: the y-y block is diagonal in the node value
      img.base_y[i] -= lambda(idx) * ev.dww[i] * q[i];
      img.base_y0_variant[i] -= lambda(idx) * ev.dwz_direct[i] * q[i];
      Field q1 = Field::Zero(n), q2 = Field::Zero(n);
      q1[i] = lambda(idx) * ev.dwd1[i] * q[i];
      q2[i] = lambda(idx) * ev.dwd2[i] * q[i];
      img.base_y0_variant -= apply_gradient_adjoint(cs.grid, q1, q2);
    }

    if (g[idx] > act_tol) {
      img.gamma_class[idx] = GammaClass::forced_zero;
    } else if (lambda(idx) <= lam_tol && inner > act_tol) {
      img.gamma_class[idx] = GammaClass::forced_zero;
    } else if (lambda(idx) <= lam_tol && inner < -act_tol) {
      img.gamma_class[idx] = GammaClass::nonneg;
    } else {
      img.gamma_class[idx] = GammaClass::free_sign;
    }
  }
  img.domain_ok = img.domain_violation <= act_tol;
  return img;
}

KktCertificate recover_certificate(const ConstraintSystem& cs, const ControlProblem& cp,
                                   const Trajectory& traj, const Field& y0, ConditionMode mode,
                                   double act_tol) {
  cp.validate();
  const int m = traj.steps();
  if (m != cp.tg.steps) {
    throw std::invalid_argument("recover_certificate: trajectory does not match the time grid");
  }
  const int n = cs.grid.size();
  const double tau = cp.tg.dt();
  const double horizon = cp.tg.horizon;

  if (act_tol <= 0.0) {
    double gmax = 0.0;
    for (int j = 1; j <= m; ++j) {
      gmax = std::max(gmax, g_eval(cs, traj.states[j], y0).lpNorm<Eigen::Infinity>());
    }
    act_tol = 1e-8 * (1.0 + gmax);
  }

  KktCertificate cert;
  cert.lambda_cost = 1.0;
  cert.eta.assign(m, Eigen::VectorXd::Zero(cs.count()));
  cert.gam.assign(std::max(m - 1, 0), Eigen::VectorXd::Zero(cs.count()));
  cert.p.assign(m, Field::Zero(n));
  cert.eta_residuals.assign(m, 0.0);

  // velocity multipliers: forward pairing at j = 1..M-1, terminal step at M
  for (int j = 1; j <= m - 1; ++j) {
    const ActiveSet aset = active_set(cs, traj.states[j], y0, act_tol);
    const GJacobian jac = g_jacobian(cs, traj.states[j], y0);
    const Field vel = (traj.states[j + 1] - traj.states[j]) / tau;
    const ConeDecomposition dec = cone_decompose(jac.dy, aset.active, -(vel + cp.f[j - 1]));
    cert.eta[j - 1] = dec.multipliers;
    cert.eta_residuals[j - 1] = dec.residual;
  }
  {
    const ActiveSet aset = active_set(cs, traj.states[m], y0, act_tol);
    const Field w = -(traj.states[m] - traj.states[m - 1]) / tau;
    const MultiplierRecovery rec =
        recover_velocity_multipliers(cs, traj.states[m], y0, w, cp.f[m - 1], aset);
    cert.eta[m - 1] = rec.lambda;
    cert.eta_residuals[m - 1] = rec.residual;
  }

  // transversality defines p_M; the adjoint difference equation with the
  // minimum-norm choice gamma = 0 defines p_j backward
  {
    const GJacobian jac = g_jacobian(cs, traj.states[m], y0);
    Field pm = -cert.lambda_cost * horizon * cp.a;
    pm += jac.dy.transpose() * cert.eta[m - 1];
    cert.p[m - 1] = pm;
  }
  const Field drift = (mode == ConditionMode::paper_literal)
                          ? Field(cert.lambda_cost * horizon * cp.a / tau)
                          : Field(cert.lambda_cost * cp.a);
  for (int j = m - 1; j >= 1; --j) {
    const Field& p_next = cert.p[j];  // p_{j+1}
    const SmoothBoundEval ev = bound_smooth_eval(cs.grid, traj.states[j], y0, cs.box_params());
    Field hess_term = Field::Zero(n);
    for (int idx = 0; idx < cs.count(); ++idx) {
      const double eta = cert.eta[j - 1](idx);
      if (eta != 0.0) {
        const int i = cs.node_of(idx);
        hess_term[i] += eta * ev.dww[i] * (-p_next[i]);
      }
    }
    cert.p[j - 1] = p_next - tau * drift + tau * hess_term;
  }

  // box normal from the support stationarity relation
  {
    const GJacobian jac = g_jacobian(cs, traj.states[m], y0);
    const Field eta_term = jac.dy0.transpose() * cert.eta[m - 1];
    if (mode == ConditionMode::paper_literal) {
      cert.psi = -cert.lambda_cost * (horizon * cp.a + cp.sigma * y0) + eta_term;
    } else {
      cert.psi =
          cert.lambda_cost * (horizon * cp.a - cp.sigma * (y0 - cp.y0_ref)) + eta_term;
    }
  }
  return cert;
}

const std::vector<std::string>& kkt_condition_ids() {
  static const std::vector<std::string> ids = {
      "dac15", "dac16", "dac17", "dac19", "dac20", "dac21", "dac22", "dac23",
      "dac24", "dac25", "dac26", "noc1",  "con_al1", "pnn", "psi_cone"};
  return ids;
}

bool ResidualReport::all_pass() const {
  for (const auto& [id, entry] : entries) {
    if (!entry.pass) return false;
  }
  return true;
}

ResidualReport kkt_residuals(const ConstraintSystem& cs, const ControlProblem& cp,
                             const Trajectory& traj, const Field& y0, const KktCertificate& cert,
                             ConditionMode mode, double tolerance, double act_tol) {
  cp.validate();
  const int m = traj.steps();
  const int n = cs.grid.size();
  const double tau = cp.tg.dt();
  const double horizon = cp.tg.horizon;
  const double lam = cert.lambda_cost;

  std::vector<Field> gvals(m + 1);
  std::vector<GJacobian> jacs(m + 1);
  std::vector<SmoothBoundEval> evs(m + 1);
  double gmax = 0.0;
  for (int j = 1; j <= m; ++j) {
    gvals[j] = g_eval(cs, traj.states[j], y0);
    jacs[j] = g_jacobian(cs, traj.states[j], y0);
    evs[j] = bound_smooth_eval(cs.grid, traj.states[j], y0, cs.box_params());
    gmax = std::max(gmax, gvals[j].lpNorm<Eigen::Infinity>());
  }
  if (act_tol <= 0.0) act_tol = 1e-8 * (1.0 + gmax);

  double r15 = 0.0, r16 = 0.0, r20 = 0.0, r21 = 0.0, r22 = 0.0, r23 = 0.0, r25 = 0.0;
  for (int j = 1; j <= m - 1; ++j) {
    const Field vel = (traj.states[j + 1] - traj.states[j]) / tau;
    Field resid15 = vel + cp.f[j - 1] + jacs[j].dy.transpose() * cert.eta[j - 1];
    r15 = std::max(r15, resid15.lpNorm<Eigen::Infinity>());

    const Field& p_next = cert.p[j];
    const Field drift = (mode == ConditionMode::paper_literal) ? Field(lam * horizon * cp.a / tau)
                                                               : Field(lam * cp.a);
    Field resid16 = (cert.p[j] - cert.p[j - 1]) / tau - drift;
    // note: p index shift, cert.p[j-1] is p_j and cert.p[j] is p_{j+1}
    for (int idx = 0; idx < cs.count(); ++idx) {
      const double eta = cert.eta[j - 1](idx);
      if (eta != 0.0) {
        const int i = cs.node_of(idx);
        resid16[i] += eta * evs[j].dww[i] * (-p_next[i]);
      }
    }
    resid16 += jacs[j].dy.transpose() * cert.gam[j - 1];
    r16 = std::max(r16, resid16.lpNorm<Eigen::Infinity>());

    for (int idx = 0; idx < cs.count(); ++idx) {
      const double g = gvals[j](idx);
      const double eta = cert.eta[j - 1](idx);
      const double gmm = cert.gam[j - 1](idx);
      const double inner = jacs[j].dy.row(idx).dot(-p_next);
      if (g > act_tol) {
        r20 = std::max(r20, std::abs(eta));
        r23 = std::max(r23, std::abs(gmm));
      }
      if (g > act_tol || (eta <= act_tol && inner > act_tol)) {
        r21 = std::max(r21, std::abs(gmm));
      }
      if (std::abs(g) <= act_tol && eta <= act_tol && inner < -act_tol) {
        r22 = std::max(r22, std::max(0.0, -gmm));
      }
      if (eta > act_tol) {
        r25 = std::max(r25, std::abs(inner));
      }
    }
  }

  // support stationarity
  Field resid17;
  {
    const Field eta_term = jacs[m].dy0.transpose() * cert.eta[m - 1];
    if (mode == ConditionMode::paper_literal) {
      resid17 = -lam * (horizon * cp.a + cp.sigma * y0) + eta_term - cert.psi;
    } else {
      resid17 = lam * (-horizon * cp.a + cp.sigma * (y0 - cp.y0_ref)) - eta_term + cert.psi;
    }
  }

  // transversality
  Field resid19 = cert.p[m - 1] + lam * horizon * cp.a - jacs[m].dy.transpose() * cert.eta[m - 1];
  Field resid_pnn = cert.p[m - 1] - jacs[m].dy.transpose() * cert.eta[m - 1];

  double r24 = 0.0, r_con = 0.0;
  for (int idx = 0; idx < cs.count(); ++idx) {
    const double g = gvals[m](idx);
    const double eta = cert.eta[m - 1](idx);
    if (g > act_tol) r24 = std::max(r24, std::abs(eta));
    r_con = std::max(r_con, std::abs(eta * g));
  }

  // nontriviality sums
  double sum26 = lam + cert.eta[m - 1].norm();
  for (const Field& pj : cert.p) sum26 += pj.norm();
  const double sum_noc = sum26 + cert.psi.norm();
  const double floor = 1e-12;

  // box-normal face test
  double r_psi = 0.0;
  {
    const Field lo = cp.y0_ref + cp.lambda0;
    const Field hi = cp.y0_ref + cp.lambda1;
    for (int i = 0; i < n; ++i) {
      if (hi[i] - lo[i] <= act_tol) continue;  // degenerate interval: any sign admissible
      const bool at_lo = y0[i] <= lo[i] + act_tol;
      const bool at_hi = y0[i] >= hi[i] - act_tol;
      double v = 0.0;
      if (at_lo && !at_hi) {
        v = std::max(0.0, cert.psi[i]);
      } else if (at_hi && !at_lo) {
        v = std::max(0.0, -cert.psi[i]);
      } else if (!at_lo && !at_hi) {
        v = std::abs(cert.psi[i]);
      }
      r_psi = std::max(r_psi, v);
    }
  }

  ResidualReport rep;
  rep.tolerance = tolerance;
  auto put = [&](const std::string& id, double value) {
    rep.entries[id] = ConditionResidual{value, value <= tolerance};
  };
  put("dac15", r15);
  put("dac16", r16);
  put("dac17", resid17.lpNorm<Eigen::Infinity>());
  put("dac19", resid19.lpNorm<Eigen::Infinity>());
  put("dac20", r20);
  put("dac21", r21);
  put("dac22", r22);
  put("dac23", r23);
  put("dac24", r24);
  put("dac25", r25);
  put("dac26", sum26 > floor ? 0.0 : 1.0);
  put("noc1", sum_noc > floor ? 0.0 : 1.0);
  put("con_al1", r_con);
  put("pnn", resid_pnn.lpNorm<Eigen::Infinity>());
  put("psi_cone", r_psi);
  return rep;
}

}  // namespace qvs
