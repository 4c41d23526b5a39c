#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ccpa/expconfig.hpp"
#include "ccpa/exitchart.hpp"
#include "ccpa/papr.hpp"
#include "ccpa/sca.hpp"

namespace ccpa {

/// Immutable per-experiment state shared by all realizations: decoder
/// curves, the residual-interference cache and the discretized targets.
struct ExperimentContext {
  ExperimentConfig cfg;
  std::vector<ExitCurve> decoders;          // per user
  std::shared_ptr<DeltaBarCache> dbar;
  ConvergenceTargets targets;
  std::vector<double> target_i_hat;         // resolved equalizer MI targets
};

ExperimentContext make_context(const ExperimentConfig& cfg);

/// Hard-limits samples whose power exceeds threshold_db above avg_power,
/// preserving phase.
std::vector<cplx> clip_waveform(std::span<const cplx> s, double threshold_db, double avg_power);

/// Semi-analytic EXIT trajectory of the closed-form equalizer model for a
/// fixed allocation.
Trajectory analytic_trajectory(const ExperimentContext& ctx, const ChannelRealization& ch,
                               const PowerAllocation& p);

/// Monte-Carlo EXIT trajectory with the time-domain transmit waveforms
/// clipped at threshold_db; threshold <= 0 disables clipping. Deterministic
/// per (config seed, realization index).
Trajectory mc_trajectory(const ExperimentContext& ctx, const ChannelRealization& ch,
                         const PowerAllocation& p, double threshold_db, int realization);

/// All strategies on one realization with a warm-start chain from the
/// tightest PAPR threshold to the unconstrained problem, plus a from-scratch
/// candidate per problem (best of the two is kept). The chain makes the
/// total-power ordering ccpa <= looser <= tighter structural.
struct StrategyComparison {
  std::vector<double> delta_db;             // ascending (tightest first)
  std::vector<AlternatingResult> papr;      // aligned with delta_db
  AlternatingResult ccpa;
  bool feasible = true;
};
StrategyComparison compare_strategies(const ExperimentContext& ctx, const ChannelRealization& ch,
                                      const std::vector<PaprModel>& models,
                                      std::vector<double> delta_db_list);

struct RealizationRow {
  int realization = 0;
  int user = 0;
  bool feasible = false;
  double total_power = 0.0;
  double snr_db = 0.0;
  double papr_db = 0.0;
  int sca_iters = 0;
  int alt_rounds = 0;
  double endpoint_i_hat = 0.0;
  double endpoint_i_ring = 0.0;
  double bep = 0.0;
};

struct RunReport {
  std::vector<RealizationRow> rows;
  int infeasible_count = 0;
  double mean_total_power = 0.0;
  double mean_snr_db = 0.0;
  double max_papr_db = 0.0;
  double min_endpoint_i_hat = 1.0;

  void finalize();
  void write_csv(std::ostream& os) const;
};

/// Runs the configured strategy over all channel realizations and writes
/// report.csv, exit_chart.csv, trajectory.csv, solver_trace.csv and
/// sinr_bins.csv under cfg.out_dir.
RunReport run_experiment(const ExperimentConfig& cfg);

/// EXIT chart data: `kind,user,x,y` rows with decoder curves (x = decoder
/// output MI), equalizer transfer samples and the trajectory staircase.
void emit_exit_chart_data(std::ostream& os, const std::vector<ExitCurve>& decoders,
                          const std::vector<std::vector<std::pair<double, double>>>& eq_samples,
                          const Trajectory& traj);

/// Solver trace CSV: `outer_iter,objective,max_constraint_residual,papr_worst_db`.
void write_solver_trace_csv(std::ostream& os, const ScaState& state);

}  // namespace ccpa
