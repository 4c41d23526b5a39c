#include "ccpa/barrier.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <sstream>

namespace ccpa {

namespace {

double barrier_potential(double tau, double f0, const Eigen::VectorXd& slack) {
  double phi = tau * f0;
  for (int i = 0; i < slack.size(); ++i) phi -= std::log(slack(i));
  return phi;
}

std::string iterate_summary(const Eigen::VectorXd& x, const Eigen::VectorXd& slack) {
  std::ostringstream os;
  os << "dim=" << x.size() << " |x|_inf=" << x.cwiseAbs().maxCoeff()
     << " min_slack=" << slack.minCoeff();
  return os.str();
}

}  // namespace

BarrierResult solve_barrier(const ConvexProgram& prog, const Eigen::VectorXd& x0,
                            const BarrierOptions& opts) {
  const int n = prog.dim();
  const int m = prog.constraint_count();
  require_dim((int)x0.size() == n, "barrier start dimension mismatch");

  Eigen::VectorXd x = x0;
  Eigen::VectorXd g(m), slack(m);
  prog.constraints(x, g);
  slack = -g;
  if (m > 0 && slack.minCoeff() <= 0.0)
    throw NumericalError("phase-I failure: start point not strictly feasible (min slack " +
                         std::to_string(slack.minCoeff()) + ")");

  double f0 = prog.objective(x);
  double tau = opts.tau0 > 0.0 ? opts.tau0 : std::max(1.0, m / std::max(1.0, std::abs(f0)));

  BarrierResult res;
  res.x = x;
  res.objective = f0;
  res.dual = Eigen::VectorXd::Zero(m);

  Eigen::VectorXd grad(n), step(n), x_try(n), g_try(m);
  Eigen::MatrixXd hess(n, n);

  int total_newton = 0;
  while (true) {
    ++res.stages;
    // Center at the current tau. Beyond the numerical noise floor of the
    // potential (tau can be ~1e10), the decrement stalls; two consecutive
    // steps without measurable progress mean the stage is centered.
    int stalls = 0;
    for (int stage_it = 0; stage_it < 80; ++stage_it) {
      if (total_newton >= opts.max_newton)
        throw NumericalError("barrier: Newton budget exhausted (" + iterate_summary(x, slack) +
                             ")");
      grad.setZero();
      hess.setZero();
      prog.objective_derivs(x, grad, hess);
      grad *= tau;
      hess *= tau;
      prog.barrier_derivs(x, slack, grad, hess);

      Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
      double ridge = 0.0;
      while (ldlt.info() != Eigen::Success && ridge < 1e6) {
        ridge = ridge == 0.0 ? 1e-10 : ridge * 100.0;
        ldlt.compute(hess + ridge * Eigen::MatrixXd::Identity(n, n));
      }
      step = ldlt.solve(-grad);
      double descent = grad.dot(step);
      if (!(descent < 0.0)) {
        // Retry with a strong ridge before giving up.
        ldlt.compute(hess + 1e-6 * hess.diagonal().maxCoeff() * Eigen::MatrixXd::Identity(n, n));
        step = ldlt.solve(-grad);
        descent = grad.dot(step);
        if (!(descent < 0.0)) {
          if (-descent / 2.0 < 1e-3 * std::max(1, m)) break;  // centered to noise
          throw NumericalError("barrier: Newton step is not a descent direction (" +
                               iterate_summary(x, slack) + ")");
        }
      }
      const double decrement = -descent;  // lambda^2
      if (decrement / 2.0 < opts.newton_tol) break;

      // Backtrack to strict feasibility, then Armijo on the potential.
      const double phi = barrier_potential(tau, f0, slack);
      double beta = 1.0;
      bool accepted = false;
      double phi_new = phi;
      for (int ls = 0; ls < 60; ++ls) {
        x_try = x + beta * step;
        prog.constraints(x_try, g_try);
        if ((-g_try).minCoeff() > 0.0) {
          const double f_try = prog.objective(x_try);
          const double phi_try = barrier_potential(tau, f_try, -g_try);
          if (phi_try <= phi + 0.25 * beta * descent) {
            x = x_try;
            slack = -g_try;
            f0 = f_try;
            phi_new = phi_try;
            accepted = true;
            break;
          }
        }
        beta *= 0.5;
      }
      ++total_newton;
      if (!accepted) {
        if (decrement / 2.0 < 1e-3 * std::max(1, m)) break;  // centered to noise
        throw NumericalError("barrier: line search failed (" + iterate_summary(x, slack) + ")");
      }
      if (phi - phi_new <= 1e-13 * std::abs(phi)) {
        if (++stalls >= 2) break;
      } else {
        stalls = 0;
      }
    }

    res.x = x;
    res.objective = f0;
    res.newton_steps = total_newton;
    if (m == 0 || (double)m / tau <= opts.gap_tol * std::max(1.0, std::abs(f0))) break;
    tau *= opts.mu;
  }
  for (int i = 0; i < m; ++i) res.dual(i) = 1.0 / (tau * slack(i));
  return res;
}

}  // namespace ccpa
