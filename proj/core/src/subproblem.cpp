#include "ccpa/subproblem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ccpa {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

GridReceiver receiver_for_targets(const ChannelRealization& ch, const PowerAllocation& p,
                                  const ConvergenceTargets& targets, double noise_var) {
  GridReceiver out;
  out.num_users = ch.num_users();
  out.grid_size = targets.grid_size;
  out.block_len = ch.block_len();
  out.num_rx = ch.num_rx();
  out.omega.assign(
      (std::size_t)out.num_users * out.grid_size * out.block_len * out.num_rx, cplx{0.0, 0.0});
  out.zeta.assign((std::size_t)out.num_users * out.grid_size, 0.0);
  std::vector<double> dbar((std::size_t)out.num_users);
  for (int k = 0; k < out.grid_size; ++k) {
    for (int u = 0; u < out.num_users; ++u) dbar[u] = targets.dbar(u, k);
    const Receiver rx = compute_mmse_receiver(ch, p, dbar, noise_var);
    for (int u = 0; u < out.num_users; ++u) {
      out.zeta[(std::size_t)u * out.grid_size + k] = rx.zeta[u];
      for (int n = 0; n < out.block_len; ++n) {
        const std::span<const cplx> w = rx.at(u, n);
        std::copy(w.begin(), w.end(),
                  out.omega.begin() +
                      (((std::size_t)u * out.grid_size + k) * out.block_len + n) * out.num_rx);
      }
    }
  }
  return out;
}

PowerSubproblem::PowerSubproblem(const ChannelRealization& ch, const ConvergenceTargets& targets,
                                 const GridReceiver& rx, double noise_var,
                                 const std::vector<PaprModel>* papr_models,
                                 std::span<const double> delta, double alpha_floor)
    : users_(ch.num_users()),
      nf_(ch.block_len()),
      grid_(targets.grid_size),
      papr_(papr_models),
      alpha_floor_(alpha_floor) {
  n_alpha_ = users_ * nf_;
  n_t_ = users_ * grid_ * nf_;
  if (papr_) {
    require_dim((int)papr_->size() == users_, "one papr model per user expected");
    require_dim((int)delta.size() == users_, "one papr threshold per user expected");
    delta_.assign(delta.begin(), delta.end());
  }
  xi_ = targets.xi;

  rows_.resize((std::size_t)users_ * grid_ * nf_);
  double max_gain = 0.0;
  for (int u = 0; u < users_; ++u)
    for (int k = 0; k < grid_; ++k)
      for (int n = 0; n < nf_; ++n) {
        SinrRow& row = rows_[((std::size_t)u * grid_ + k) * nf_ + n];
        const std::span<const cplx> w = rx.at(u, k, n);
        double wnorm = 0.0;
        for (const cplx& v : w) wnorm += std::norm(v);
        row.noise = std::max(noise_var * wnorm, 1e-280);
        row.log_weight.assign((std::size_t)users_, kNegInf);
        for (int l = 0; l < users_; ++l) {
          const std::span<const cplx> g = ch.gamma(l, n);
          cplx dot = 0.0;
          for (int r = 0; r < ch.num_rx(); ++r) dot += std::conj(w[r]) * g[r];
          const double gl = std::norm(dot);
          if (l == u) {
            row.ln_gain = gl;  // raw; log taken after the clamp pass
            max_gain = std::max(max_gain, gl);
          }
          const double wl = gl * targets.dbar(l, k);
          if (wl > 0.0) row.log_weight[l] = std::log(wl);
        }
      }
  // Dead bins (|w^H g_u| ~ 0) get a clamped gain so their rows stay finite;
  // the objective then pins such bins to the power floor.
  const double gain_clamp = std::max(max_gain, 1e-100) * 1e-30;
  for (SinrRow& row : rows_) row.ln_gain = std::log(std::max(row.ln_gain, gain_clamp));

  t_floor_.assign((std::size_t)n_t_, 1e-300);
  t_hat_.assign((std::size_t)n_t_, 1.0);
  alpha_hat_.assign((std::size_t)n_alpha_, 0.0);
  if (papr_) {
    tangent_const_.assign((std::size_t)users_ * nf_, 0.0);
    tangent_grad_.assign((std::size_t)users_ * nf_ * nf_, 0.0);
  }
}

void PowerSubproblem::set_t_floor(std::vector<double> floors) {
  require_dim((int)floors.size() == n_t_, "t floor size mismatch");
  t_floor_ = std::move(floors);
}

void PowerSubproblem::set_linearization(std::span<const double> t_hat,
                                        std::span<const double> alpha_hat) {
  require_dim((int)t_hat.size() == n_t_, "t_hat size mismatch");
  for (double t : t_hat) require_domain(t > 0.0, "t_hat must be positive");
  t_hat_.assign(t_hat.begin(), t_hat.end());
  if (papr_) {
    require_dim((int)alpha_hat.size() == n_alpha_, "alpha_hat size mismatch");
    alpha_hat_.assign(alpha_hat.begin(), alpha_hat.end());
    for (int u = 0; u < users_; ++u) {
      const std::span<const double> au{alpha_hat_.data() + (std::size_t)u * nf_,
                                       (std::size_t)nf_};
      for (int m = 0; m < nf_; ++m) {
        const double w0 = (*papr_)[u].log_budget(au, delta_[u], m);
        const std::vector<double> g = (*papr_)[u].log_budget_grad(au, delta_[u], m);
        double c = w0;
        for (int l = 0; l < nf_; ++l) {
          c -= g[l] * au[l];
          tangent_grad_[((std::size_t)u * nf_ + m) * nf_ + l] = g[l];
        }
        tangent_const_[(std::size_t)u * nf_ + m] = c;
      }
    }
  }
}

int PowerSubproblem::constraint_count() const {
  return users_ * grid_                 // (a)
         + users_ * grid_ * nf_         // (b)
         + (papr_ ? users_ * nf_ : 0)   // (c)
         + n_alpha_ + n_t_;             // floors
}

double PowerSubproblem::objective(const Eigen::VectorXd& x) const {
  double s = 0.0;
  for (int i = 0; i < n_alpha_; ++i) s += std::exp(x(i));
  return s;
}

void PowerSubproblem::objective_derivs(const Eigen::VectorXd& x, Eigen::VectorXd& grad,
                                       Eigen::MatrixXd& hess) const {
  for (int i = 0; i < n_alpha_; ++i) {
    const double e = std::exp(x(i));
    grad(i) += e;
    hess(i, i) += e;
  }
}

double PowerSubproblem::sinr_lse(const SinrRow& row, const Eigen::VectorXd& x, int n,
                                 std::vector<double>* p_out) const {
  // ln( sum_l e^{alpha_{l,n}} |w^H g_l|^2 dbar_l + noise ), max-shifted.
  double shift = std::log(row.noise);
  for (int l = 0; l < users_; ++l)
    if (row.log_weight[l] != kNegInf)
      shift = std::max(shift, row.log_weight[l] + x(alpha_index(l, n)));
  double sum = std::exp(std::log(row.noise) - shift);
  for (int l = 0; l < users_; ++l)
    if (row.log_weight[l] != kNegInf)
      sum += std::exp(row.log_weight[l] + x(alpha_index(l, n)) - shift);
  const double value = shift + std::log(sum);
  if (p_out) {
    p_out->assign((std::size_t)users_, 0.0);
    for (int l = 0; l < users_; ++l)
      if (row.log_weight[l] != kNegInf)
        (*p_out)[l] = std::exp(row.log_weight[l] + x(alpha_index(l, n)) - value);
  }
  return value;
}

void PowerSubproblem::constraints(const Eigen::VectorXd& x, Eigen::VectorXd& g) const {
  int at = 0;
  for (int u = 0; u < users_; ++u)
    for (int k = 0; k < grid_; ++k) {
      double sum_t = 0.0;
      for (int n = 0; n < nf_; ++n) sum_t += x(t_index(u, k, n));
      g(at++) = nf_ * xi_[(std::size_t)u * grid_ + k] - sum_t;
    }
  for (int u = 0; u < users_; ++u)
    for (int k = 0; k < grid_; ++k)
      for (int n = 0; n < nf_; ++n) {
        const std::size_t ridx = ((std::size_t)u * grid_ + k) * nf_ + n;
        const SinrRow& row = rows_[ridx];
        const double t = x(t_index(u, k, n));
        const double th = t_hat_[ridx];
        const double y = std::log(th) + (t - th) / th;
        const double lhs = x(alpha_index(u, n)) + row.ln_gain - sinr_lse(row, x, n, nullptr);
        g(at++) = y - lhs;
      }
  if (papr_) {
    std::vector<double> au((std::size_t)nf_);
    for (int u = 0; u < users_; ++u) {
      for (int l = 0; l < nf_; ++l) au[l] = x(alpha_index(u, l));
      for (int m = 0; m < nf_; ++m) {
        double tangent = tangent_const_[(std::size_t)u * nf_ + m];
        for (int l = 0; l < nf_; ++l)
          tangent += tangent_grad_[((std::size_t)u * nf_ + m) * nf_ + l] * au[l];
        g(at++) = (*papr_)[u].log_peak(au, m) - tangent;
      }
    }
  }
  for (int i = 0; i < n_alpha_; ++i) g(at++) = alpha_floor_ - x(i);
  for (int i = 0; i < n_t_; ++i) g(at++) = t_floor_[i] - x(n_alpha_ + i);
}

void PowerSubproblem::barrier_derivs(const Eigen::VectorXd& x, const Eigen::VectorXd& slack,
                                     Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const {
  int at = 0;
  // (a): linear rows, gradient -1 on each t of the group.
  for (int u = 0; u < users_; ++u)
    for (int k = 0; k < grid_; ++k) {
      const double s = slack(at++);
      const double w1 = 1.0 / (s * s);
      for (int n = 0; n < nf_; ++n) {
        const int ti = t_index(u, k, n);
        grad(ti) += -1.0 / s;
        for (int n2 = 0; n2 < nf_; ++n2) hess(ti, t_index(u, k, n2)) += w1;
      }
    }
  // (b)
  std::vector<double> p;
  std::vector<int> idx((std::size_t)users_ + 1);
  std::vector<double> gv((std::size_t)users_ + 1);
  for (int u = 0; u < users_; ++u)
    for (int k = 0; k < grid_; ++k)
      for (int n = 0; n < nf_; ++n) {
        const std::size_t ridx = ((std::size_t)u * grid_ + k) * nf_ + n;
        const SinrRow& row = rows_[ridx];
        const double s = slack(at++);
        const double inv_s = 1.0 / s, inv_s2 = inv_s * inv_s;
        sinr_lse(row, x, n, &p);
        // Sparse gradient: t coordinate then the U alpha coordinates of bin n.
        int nn = 0;
        idx[nn] = t_index(u, k, n);
        gv[nn++] = 1.0 / t_hat_[ridx];
        for (int l = 0; l < users_; ++l) {
          idx[nn] = alpha_index(l, n);
          gv[nn++] = p[l] - (l == u ? 1.0 : 0.0);
        }
        for (int a = 0; a < nn; ++a) {
          grad(idx[a]) += gv[a] * inv_s;
          for (int b = 0; b < nn; ++b) hess(idx[a], idx[b]) += gv[a] * gv[b] * inv_s2;
        }
        // Hessian of g itself: log-sum-exp block diag(p) - p p^T on alphas.
        for (int l = 0; l < users_; ++l) {
          const int ai = alpha_index(l, n);
          hess(ai, ai) += p[l] * inv_s;
          for (int l2 = 0; l2 < users_; ++l2)
            hess(ai, alpha_index(l2, n)) -= p[l] * p[l2] * inv_s;
        }
      }
  // (c)
  if (papr_) {
    std::vector<double> au((std::size_t)nf_), gc((std::size_t)nf_);
    Eigen::MatrixXd hblock(nf_, nf_);
    for (int u = 0; u < users_; ++u) {
      const PaprModel& model = (*papr_)[u];
      for (int l = 0; l < nf_; ++l) au[l] = x(alpha_index(u, l));
      for (int m = 0; m < nf_; ++m) {
        const double s = slack(at++);
        const double inv_s = 1.0 / s, inv_s2 = inv_s * inv_s;
        const double lse = model.log_peak(au, m);
        // Softmax weights of the peak-side terms.
        std::fill(gc.begin(), gc.end(), 0.0);
        hblock.setZero();
        for (int l = 0; l < nf_; ++l) {
          const double c = model.coef(l);
          if (c <= 0.0) continue;
          const double pr = std::exp(std::log(c) + au[l] - lse);
          gc[l] += pr;
          hblock(l, l) += pr;
        }
        for (int pi = 0; pi < model.pair_count(); ++pi) {
          const double ep = model.eta_plus(m, pi);
          if (ep <= 0.0) continue;
          const auto [nn2, ii] = model.pair(pi);
          const double pr =
              std::exp(std::log(2.0 * ep / nf_) + 0.5 * (au[nn2] + au[ii]) - lse);
          gc[nn2] += 0.5 * pr;
          gc[ii] += 0.5 * pr;
          hblock(nn2, nn2) += 0.25 * pr;
          hblock(ii, ii) += 0.25 * pr;
          hblock(nn2, ii) += 0.25 * pr;
          hblock(ii, nn2) += 0.25 * pr;
        }
        for (int l = 0; l < nf_; ++l)
          gc[l] -= tangent_grad_[((std::size_t)u * nf_ + m) * nf_ + l];
        for (int a = 0; a < nf_; ++a) {
          const int ai = alpha_index(u, a);
          grad(ai) += gc[a] * inv_s;
          for (int b = 0; b < nf_; ++b) {
            const int bi = alpha_index(u, b);
            hess(ai, bi) += gc[a] * gc[b] * inv_s2;
            // softmax Hessian: hblock - q q^T with q the softmax mean
            hess(ai, bi) += hblock(a, b) * inv_s;
          }
        }
        // subtract q q^T / s (q = softmax mean = gc + tangent_grad)
        for (int a = 0; a < nf_; ++a) {
          const double qa = gc[a] + tangent_grad_[((std::size_t)u * nf_ + m) * nf_ + a];
          for (int b = 0; b < nf_; ++b) {
            const double qb = gc[b] + tangent_grad_[((std::size_t)u * nf_ + m) * nf_ + b];
            hess(alpha_index(u, a), alpha_index(u, b)) -= qa * qb * inv_s;
          }
        }
      }
    }
  }
  // floors
  for (int i = 0; i < n_alpha_; ++i) {
    const double s = slack(at++);
    grad(i) += -1.0 / s;
    hess(i, i) += 1.0 / (s * s);
  }
  for (int i = 0; i < n_t_; ++i) {
    const double s = slack(at++);
    grad(n_alpha_ + i) += -1.0 / s;
    hess(n_alpha_ + i, n_alpha_ + i) += 1.0 / (s * s);
  }
}

double PowerSubproblem::sinr_from_alpha(const Eigen::VectorXd& x, int u, int k, int n) const {
  const SinrRow& row = rows_[((std::size_t)u * grid_ + k) * nf_ + n];
  return std::exp(x(alpha_index(u, n)) + row.ln_gain - sinr_lse(row, x, n, nullptr));
}

double PowerSubproblem::max_true_violation(const Eigen::VectorXd& x) const {
  double worst = -std::numeric_limits<double>::infinity();
  for (int u = 0; u < users_; ++u)
    for (int k = 0; k < grid_; ++k) {
      double sum_t = 0.0;
      for (int n = 0; n < nf_; ++n) sum_t += x(t_index(u, k, n));
      worst = std::max(worst, nf_ * xi_[(std::size_t)u * grid_ + k] - sum_t);
      for (int n = 0; n < nf_; ++n) {
        const double t = x(t_index(u, k, n));
        worst = std::max(worst, std::log(t) - std::log(sinr_from_alpha(x, u, k, n)));
      }
    }
  if (papr_) {
    std::vector<double> au((std::size_t)nf_);
    for (int u = 0; u < users_; ++u) {
      for (int l = 0; l < nf_; ++l) au[l] = x(alpha_index(u, l));
      for (int m = 0; m < nf_; ++m)
        worst = std::max(worst,
                         (*papr_)[u].log_peak(au, m) - (*papr_)[u].log_budget(au, delta_[u], m));
    }
  }
  return worst;
}

}  // namespace ccpa
