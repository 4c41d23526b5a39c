#pragma once

#include <Eigen/Dense>

#include "ccpa/common.hpp"

namespace ccpa {

/// Smooth convex program  min f0(x)  s.t.  g_i(x) <= 0, i = 1..m.
/// Derivative callbacks accumulate into the caller's gradient/Hessian.
class ConvexProgram {
 public:
  virtual ~ConvexProgram() = default;
  virtual int dim() const = 0;
  virtual int constraint_count() const = 0;
  virtual double objective(const Eigen::VectorXd& x) const = 0;
  virtual void objective_derivs(const Eigen::VectorXd& x, Eigen::VectorXd& grad,
                                Eigen::MatrixXd& hess) const = 0;
  virtual void constraints(const Eigen::VectorXd& x, Eigen::VectorXd& g) const = 0;
  /// Adds sum_i [ grad g_i / s_i ] to grad and
  /// sum_i [ grad g_i grad g_i^T / s_i^2 + hess g_i / s_i ] to hess,
  /// with s_i = -g_i(x) > 0 supplied by the solver.
  virtual void barrier_derivs(const Eigen::VectorXd& x, const Eigen::VectorXd& slack,
                              Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const = 0;
};

struct BarrierOptions {
  double gap_tol = 1e-10;     // stop when m/tau <= gap_tol * max(1, |f0|)
  double newton_tol = 1e-10;  // Newton decrement threshold (lambda^2 / 2)
  int max_newton = 400;       // total Newton iterations across stages
  double tau0 = 0.0;          // initial barrier weight; <= 0 means automatic
  double mu = 10.0;           // stage multiplier
};

struct BarrierResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  Eigen::VectorXd dual;  // multiplier estimates 1 / (tau * s_i)
  int newton_steps = 0;
  int stages = 0;
};

/// Primal log-barrier method with damped Newton inner steps and backtracking
/// line search. Requires a strictly feasible start; throws NumericalError
/// ("phase-I failure") otherwise.
BarrierResult solve_barrier(const ConvexProgram& prog, const Eigen::VectorXd& x0,
                            const BarrierOptions& opts = {});

}  // namespace ccpa
