#pragma once

#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "ccpa/common.hpp"
#include "ccpa/sigmodel.hpp"

namespace ccpa {

/// Exact per-sample transmit power algebra for one known QPSK block.
///
/// For s = F^-1 P^(1/2) F b with |b_n| = 1, the model precomputes the real
/// coefficients d_l and eta_{nim} so that for every output sample m
///
///   |s_m|^2 = (1/N) sum_l (1 + 2 d_l / N) P_l
///           + (2/N^2) sum_{i>n} eta_{nim} sqrt(P_n P_i).
///
/// The instantaneous PAPR constraint and its log-domain convexification
/// (split into the eta+ and eta- parts) are evaluated from the same tables.
class PaprModel {
 public:
  explicit PaprModel(const SymbolBlock& block);

  int block_len() const { return n_; }
  double d(int l) const { return d_[l]; }
  /// 1 + 2 d_l / N; nonnegative up to roundoff (validated at build).
  double coef(int l) const { return coef_[l]; }

  int pair_count() const { return (int)pairs_.size(); }
  std::pair<int, int> pair(int idx) const { return pairs_[idx]; }  // (n, i), n < i
  double eta(int m, int idx) const { return eta_[(std::size_t)m * pairs_.size() + idx]; }
  double eta_plus(int m, int idx) const { return std::max(0.0, eta(m, idx)); }
  double eta_minus(int m, int idx) const { return std::min(eta(m, idx), 0.0); }

  /// Closed-form |s_m|^2 for every m.
  std::vector<double> peak_power(std::span<const double> p) const;

  /// (1/N) sum_l P_l.
  static double avg_power(std::span<const double> p);

  /// 10 log10(max_m |s_m|^2 / avg_power). Throws on an all-zero allocation.
  double papr_db(std::span<const double> p) const;

  /// LHS - RHS of the per-sample PAPR inequality; <= 0 everywhere iff the
  /// allocation satisfies PAPR <= delta. Equal to N |s_m|^2 - delta sum P.
  std::vector<double> constraint_residual(std::span<const double> p, double delta) const;

  /// Convex side: ln( sum_l (1+2d_l/N) e^{a_l} + (2/N) sum eta+ e^{(a_n+a_i)/2} ).
  double log_peak(std::span<const double> alpha, int m) const;

  /// Concave-side budget W_m: ln( delta sum e^{a_l} + (2/N) sum (-eta-) e^{(a_n+a_i)/2} ).
  double log_budget(std::span<const double> alpha, double delta, int m) const;
  std::vector<double> log_budget_grad(std::span<const double> alpha, double delta, int m) const;

  /// First-order expansion T_m of log_budget at alpha_hat; a global lower
  /// bound on log_budget since the budget is a log-sum-exp of affines, so
  /// log_peak <= T_m implies the true constraint.
  double log_budget_tangent(std::span<const double> alpha, std::span<const double> alpha_hat,
                            double delta, int m) const;

  /// Fixture dump: rows `kind,i1,i2,i3,value` for d (l,0,0) and eta (n,i,m).
  void dump_csv(std::ostream& os) const;

 private:
  int n_ = 0;
  std::vector<double> d_;
  std::vector<double> coef_;
  std::vector<std::pair<int, int>> pairs_;
  std::vector<double> eta_;  // [m][pair]
};

}  // namespace ccpa
