#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ccpa/subproblem.hpp"

namespace ccpa {

struct ScaOptions {
  double obj_rel_tol = 1e-5;   // relative objective change
  double t_drift_tol = 1e-4;   // ||t - t_hat||_inf / ||t_hat||_inf
  int max_outer = 50;
  BarrierOptions barrier;
};

enum class ScaStatus { converged, max_iters, infeasible };

struct ScaTraceRow {
  int outer_iter;
  double objective;
  double max_constraint_residual;  // true (non-linearized) families
  double papr_worst_db;            // NaN when no PAPR constraint is active
};

struct ScaState {
  PowerAllocation allocation;
  std::vector<double> t;  // final auxiliary variables [u][k][n]
  std::vector<double> objective_trace;
  std::vector<ScaTraceRow> trace;
  std::vector<std::vector<double>> alpha_history;  // per accepted outer iterate
  ScaStatus status = ScaStatus::max_iters;
  int outer_iters = 0;
  std::string message;
};

/// Strictly feasible starting point: uniform power bisected upward until all
/// grid SINR thresholds hold with the given margin (uniform allocations are
/// PAPR-feasible for any threshold >= 1). Throws InfeasibleTargetError when
/// the bisection cap (1e6 x noise level) is reached.
struct ScaInit {
  PowerAllocation p0;
  std::vector<double> t0;  // per-bin SINR terms at p0, [u][k][n]
  double alpha_floor = 0.0;
  double uniform_level = 0.0;
};
ScaInit init_feasible(const ChannelRealization& ch, const ConvergenceTargets& targets,
                      double noise_var, double margin = 1.05, double power_cap_factor = 1e6);

/// Successive convex approximation without the PAPR family (Algorithm 1
/// semantics: re-linearize t only).
ScaState sca_ccpa(const ChannelRealization& ch, const ConvergenceTargets& targets,
                  const GridReceiver& rx, double noise_var, const ScaInit& init,
                  const ScaOptions& opts = {});

/// With the per-user instantaneous PAPR family (Algorithm 2 semantics:
/// re-linearize both t and alpha).
ScaState sca_ccpa_papr(const ChannelRealization& ch, const ConvergenceTargets& targets,
                       const GridReceiver& rx, const std::vector<PaprModel>& papr_models,
                       std::span<const double> delta, double noise_var, const ScaInit& init,
                       const ScaOptions& opts = {});

struct AlternatingOptions {
  ScaOptions sca;
  int max_rounds = 20;
  double power_rel_tol = 1e-4;
};

struct AlternatingResult {
  PowerAllocation allocation;
  GridReceiver receiver;
  ScaState last_sca;
  std::vector<double> total_power_per_round;
  int rounds = 0;
  bool oscillation_warning = false;
};

/// Alternates the SCA power step (fixed receiver) with the MMSE receiver
/// update (fixed power). Both steps are descent steps for the total power,
/// so the round trace is non-increasing. An optional warm start reuses a
/// feasible allocation from another run (e.g. a tighter PAPR threshold).
AlternatingResult alternating_optimize(const ChannelRealization& ch,
                                       const ConvergenceTargets& targets, double noise_var,
                                       const std::vector<PaprModel>* papr_models,
                                       std::span<const double> delta,
                                       const AlternatingOptions& opts = {},
                                       const PowerAllocation* warm_start = nullptr);

}  // namespace ccpa
