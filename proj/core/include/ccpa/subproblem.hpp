#pragma once

#include <span>
#include <vector>

#include "ccpa/barrier.hpp"
#include "ccpa/equalizer.hpp"
#include "ccpa/exitchart.hpp"
#include "ccpa/papr.hpp"
#include "ccpa/power.hpp"
#include "ccpa/sigmodel.hpp"

namespace ccpa {

/// MMSE receive filters for every (user, grid point, bin) of the discretized
/// convergence condition, plus the effective SINR achieved at the power
/// allocation they were computed for.
struct GridReceiver {
  int num_users = 0, grid_size = 0, block_len = 0, num_rx = 0;
  std::vector<cplx> omega;   // [u][k][n][r]
  std::vector<double> zeta;  // [u][k]

  std::span<const cplx> at(int u, int k, int n) const {
    return {omega.data() + (((std::size_t)u * grid_size + k) * block_len + n) * num_rx,
            (std::size_t)num_rx};
  }
  double zeta_at(int u, int k) const { return zeta[(std::size_t)u * grid_size + k]; }
};

GridReceiver receiver_for_targets(const ChannelRealization& ch, const PowerAllocation& p,
                                  const ConvergenceTargets& targets, double noise_var);

/// One convex subproblem of the successive approximation:
///
///   minimize   sum e^{alpha_{u,m}}
///   s.t. (a)   sum_n t^k_{u,n} >= N_F xi_{u,k}
///        (b)   alpha_{u,n} + ln|w^H g_u|^2
///              - ln( sum_l e^{alpha_{l,n}} |w^H g_l|^2 dbar_{l,k} + nv ||w||^2 )
///              >= ln t_hat + (t - t_hat)/t_hat
///        (c)   log_peak(alpha_u) <= tangent of log_budget at alpha_hat   [optional]
///        plus  alpha >= alpha_floor, t >= t_floor.
///
/// Variables x = [alpha (U*N_F) ; t (U*K*N_F)]. The linearization point
/// (t_hat, alpha_hat) is refreshed between solves via set_linearization().
class PowerSubproblem final : public ConvexProgram {
 public:
  PowerSubproblem(const ChannelRealization& ch, const ConvergenceTargets& targets,
                  const GridReceiver& rx, double noise_var,
                  const std::vector<PaprModel>* papr_models, std::span<const double> delta,
                  double alpha_floor);

  int users() const { return users_; }
  int block_len() const { return nf_; }
  int grid_size() const { return grid_; }
  bool with_papr() const { return papr_ != nullptr; }

  int alpha_index(int u, int n) const { return u * nf_ + n; }
  int t_index(int u, int k, int n) const { return n_alpha_ + (u * grid_ + k) * nf_ + n; }
  int num_t() const { return n_t_; }

  void set_t_floor(std::vector<double> floors);  // size U*K*N_F
  void set_linearization(std::span<const double> t_hat, std::span<const double> alpha_hat);

  // ConvexProgram
  int dim() const override { return n_alpha_ + n_t_; }
  int constraint_count() const override;
  double objective(const Eigen::VectorXd& x) const override;
  void objective_derivs(const Eigen::VectorXd& x, Eigen::VectorXd& grad,
                        Eigen::MatrixXd& hess) const override;
  void constraints(const Eigen::VectorXd& x, Eigen::VectorXd& g) const override;
  void barrier_derivs(const Eigen::VectorXd& x, const Eigen::VectorXd& slack,
                      Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const override;

  /// Per-bin SINR implied by the alpha part of x for row (u,k,n).
  double sinr_from_alpha(const Eigen::VectorXd& x, int u, int k, int n) const;

  /// Largest violation of the ORIGINAL (non-linearized) constraint families
  /// at x; <= 0 means feasible for the true problem.
  double max_true_violation(const Eigen::VectorXd& x) const;

 private:
  struct SinrRow {
    double ln_gain = 0.0;              // ln |w^H g_u|^2
    double noise = 0.0;                // nv ||w||^2
    std::vector<double> log_weight;    // ln(|w^H g_l|^2 dbar_{l,k}), -inf if zero
  };

  double sinr_lse(const SinrRow& row, const Eigen::VectorXd& x, int n,
                  std::vector<double>* p_out) const;

  int users_ = 0, nf_ = 0, grid_ = 0;
  int n_alpha_ = 0, n_t_ = 0;
  std::vector<SinrRow> rows_;  // [(u*K+k)*N_F + n]
  std::vector<double> xi_;     // [u][k]
  const std::vector<PaprModel>* papr_ = nullptr;
  std::vector<double> delta_;
  double alpha_floor_ = -690.0;
  std::vector<double> t_floor_;
  std::vector<double> t_hat_;
  std::vector<double> alpha_hat_;
  std::vector<double> tangent_const_;  // [u][m]
  std::vector<double> tangent_grad_;   // [u][m][l]
};

}  // namespace ccpa
