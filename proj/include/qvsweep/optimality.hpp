#pragma once

#include <map>
#include <string>
#include <vector>

#include "qvsweep/constraint.hpp"
#include "qvsweep/control.hpp"
#include "qvsweep/dynamics.hpp"

namespace qvs {

// Default activity band: 1e-8 * (1 + |g|_inf).
double default_act_tol(const Field& g_values);

struct ActiveSet {
  std::vector<int> active;      // flat constraint indices with g <= act_tol
  std::vector<char> is_active;  // size 4N partition flag
  double act_tol = 0.0;
};
ActiveSet active_set(const ConstraintSystem& cs, const Field& y, const Field& y0, double act_tol);

// Rank test of the active constraint gradients in the full (y, y0) variable.
struct LicqReport {
  bool ok = true;
  double condition_number = 1.0;
  int rank = 0;
  int active_count = 0;
};
LicqReport licq_check(const ConstraintSystem& cs, const Field& y, const Field& y0,
                      const ActiveSet& aset);

// Nonnegative least squares min |A x - b| s.t. x >= 0 (active-set method).
Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double tol = 1e-12,
                     int max_iter = 0);

// Cone multipliers of the discrete velocity: given w = -(y_j - y_{j-1})/tau,
// solves min |grad_y(g)^T lambda + (w + f)| over lambda >= 0 supported on the
// active set.  Under full rank with zero residual the multipliers are unique.
struct MultiplierRecovery {
  Eigen::VectorXd lambda;  // length 4N, zero off the active set
  double residual = 0.0;
};
MultiplierRecovery recover_velocity_multipliers(const ConstraintSystem& cs, const Field& y,
                                                const Field& y0, const Field& w, const Field& f_j,
                                                const ActiveSet& aset);

// Sign classification of the second-stage multipliers.
enum class GammaClass { forced_zero, nonneg, free_sign };

// Affine description of the graphical-derivative image at (y, y0, w) in the
// direction q, together with the domain test lambda * <grad_y g, q> = 0.
struct CoderivativeImage {
  bool domain_ok = true;
  double domain_violation = 0.0;
  Field base_y;           // -sum lambda <hess_y g, q>
  Field base_y0_variant;  // cross-term variant of the 0 second slot
  std::vector<GammaClass> gamma_class;  // per flat constraint index
};
CoderivativeImage coderivative_image(const ConstraintSystem& cs, const Field& y, const Field& y0,
                                     const Field& w, const Field& q,
                                     const Eigen::VectorXd& lambda, double act_tol);

// Which printed coefficients the checker uses where the source conditions
// disagree internally (adjoint drift coefficient, support-cost derivative).
enum class ConditionMode { paper_literal, derived_consistent };

// Full first-order certificate of a discrete sweeping trajectory.
struct KktCertificate {
  double lambda_cost = 1.0;                // objective multiplier
  std::vector<Eigen::VectorXd> eta;        // j = 1..M (index j-1), length 4N, >= 0
  std::vector<Eigen::VectorXd> gam;        // j = 1..M-1 (index j-1), length 4N
  std::vector<Field> p;                    // adjoint vectors j = 1..M (index j-1)
  Field psi;                               // box-constraint normal
  std::vector<double> eta_residuals;       // attained decomposition residual per step
};

KktCertificate recover_certificate(const ConstraintSystem& cs, const ControlProblem& cp,
                                   const Trajectory& traj, const Field& y0, ConditionMode mode,
                                   double act_tol = -1.0);

struct ConditionResidual {
  double value = 0.0;
  bool pass = true;
};

struct ResidualReport {
  std::map<std::string, ConditionResidual> entries;
  double tolerance = 0.0;
  bool all_pass() const;
};

// Evaluates every optimality condition as a numerical residual: equations as
// max absolute violation, implications as consequent violation where the
// antecedent holds, and the box-normal membership as a face sign test.
ResidualReport kkt_residuals(const ConstraintSystem& cs, const ControlProblem& cp,
                             const Trajectory& traj, const Field& y0, const KktCertificate& cert,
                             ConditionMode mode, double tolerance, double act_tol = -1.0);

// Fixed key set of the report.
const std::vector<std::string>& kkt_condition_ids();

}  // namespace qvs
