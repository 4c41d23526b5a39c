#include "ccpa/sca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ccpa {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> grid_bin_sinrs(const ChannelRealization& ch, const GridReceiver& rx,
                                   const PowerAllocation& p, const ConvergenceTargets& targets,
                                   double noise_var) {
  const int users = ch.num_users(), nf = ch.block_len(), grid = targets.grid_size;
  std::vector<double> out((std::size_t)users * grid * nf);
  std::vector<double> dbar((std::size_t)users);
  std::vector<std::vector<cplx>> bins((std::size_t)nf);
  for (int u = 0; u < users; ++u)
    for (int k = 0; k < grid; ++k) {
      for (int l = 0; l < users; ++l) dbar[l] = targets.dbar(l, k);
      for (int n = 0; n < nf; ++n) {
        const std::span<const cplx> w = rx.at(u, k, n);
        bins[n].assign(w.begin(), w.end());
      }
      const std::vector<double> s = per_bin_sinr(ch, bins, p, dbar, noise_var, u);
      for (int n = 0; n < nf; ++n) out[((std::size_t)u * grid + k) * nf + n] = s[n];
    }
  return out;
}

bool thresholds_met(const ConvergenceTargets& targets, const GridReceiver& rx, double margin) {
  for (int u = 0; u < targets.num_users; ++u)
    for (int k = 0; k < targets.grid_size; ++k)
      if (rx.zeta_at(u, k) < margin * targets.threshold(u, k)) return false;
  return true;
}

/// Start vector: alpha at the allocation, t shrunk below the achieved SINRs
/// by a per-(u,k) factor small enough to keep family (a) strictly feasible.
/// Returns false when no strictly interior start exists (slack exhausted).
bool make_start(const PowerSubproblem& sub, const PowerAllocation& p,
                const std::vector<double>& t_hat, const ConvergenceTargets& targets,
                double alpha_floor, Eigen::VectorXd& x) {
  const int users = sub.users(), nf = sub.block_len(), grid = sub.grid_size();
  x.resize(sub.dim());
  for (int u = 0; u < users; ++u)
    for (int n = 0; n < nf; ++n)
      x(sub.alpha_index(u, n)) =
          std::log(std::max(p.at(u, n), std::exp(alpha_floor) * (1.0 + 1e-9)));
  for (int u = 0; u < users; ++u)
    for (int k = 0; k < grid; ++k) {
      double sum_t = 0.0;
      for (int n = 0; n < nf; ++n) sum_t += t_hat[((std::size_t)u * grid + k) * nf + n];
      const double slack = sum_t - nf * targets.threshold(u, k);
      if (!(slack > 0.0) || !(sum_t > 0.0)) return false;
      const double kappa = std::min(1e-3, 0.4 * slack / sum_t);
      if (kappa < 1e-13) return false;
      for (int n = 0; n < nf; ++n)
        x(sub.t_index(u, k, n)) = t_hat[((std::size_t)u * grid + k) * nf + n] * (1.0 - kappa);
    }
  return true;
}

struct ScaContext {
  const ChannelRealization& ch;
  const ConvergenceTargets& targets;
  const GridReceiver& rx;
  double noise_var;
  const std::vector<PaprModel>* papr;
  std::span<const double> delta;
};

double worst_papr_db(const ScaContext& ctx, const PowerAllocation& p) {
  if (!ctx.papr) return kNaN;
  double worst = -std::numeric_limits<double>::infinity();
  for (int u = 0; u < p.num_users; ++u)
    worst = std::max(worst, (*ctx.papr)[u].papr_db(p.row(u)));
  return worst;
}

ScaState run_sca(const ScaContext& ctx, const ScaInit& init, const ScaOptions& opts) {
  const int users = ctx.ch.num_users(), nf = ctx.ch.block_len();
  PowerSubproblem sub(ctx.ch, ctx.targets, ctx.rx, ctx.noise_var, ctx.papr, ctx.delta,
                      init.alpha_floor);
  require_dim((int)init.t0.size() == sub.num_t(), "t0 size mismatch");

  std::vector<double> t_floor(init.t0.size());
  for (std::size_t i = 0; i < init.t0.size(); ++i)
    t_floor[i] = std::max(init.t0[i] * 1e-9, 1e-300);
  sub.set_t_floor(std::move(t_floor));

  std::vector<double> t_hat = init.t0;
  std::vector<double> alpha_hat((std::size_t)users * nf);
  for (int u = 0; u < users; ++u)
    for (int n = 0; n < nf; ++n)
      alpha_hat[(std::size_t)u * nf + n] =
          std::log(std::max(init.p0.at(u, n), std::exp(init.alpha_floor)));

  ScaState state;
  state.allocation = init.p0;

  Eigen::VectorXd x;
  if (!make_start(sub, init.p0, t_hat, ctx.targets, init.alpha_floor, x)) {
    state.status = ScaStatus::infeasible;
    state.message = "no strictly interior start (thresholds tight at the initial point)";
    return state;
  }
  state.objective_trace.push_back(sub.objective(x));

  auto extract_alpha = [&](const Eigen::VectorXd& v) {
    std::vector<double> a((std::size_t)users * nf);
    for (int u = 0; u < users; ++u)
      for (int n = 0; n < nf; ++n) a[(std::size_t)u * nf + n] = v(sub.alpha_index(u, n));
    return a;
  };
  auto extract_t = [&](const Eigen::VectorXd& v) {
    std::vector<double> t((std::size_t)sub.num_t());
    for (int i = 0; i < sub.num_t(); ++i) t[i] = v(users * nf + i);
    return t;
  };

  for (int outer = 1; outer <= opts.max_outer; ++outer) {
    sub.set_linearization(t_hat, alpha_hat);

    // The previous iterate is feasible for the re-linearized subproblem with
    // slacks no smaller than its own interior margins; nudge only on roundoff.
    {
      Eigen::VectorXd g(sub.constraint_count());
      sub.constraints(x, g);
      if ((-g).minCoeff() <= 0.0) {
        PowerAllocation p_cur = PowerAllocation::from_log(users, nf, extract_alpha(x));
        if (!make_start(sub, p_cur, t_hat, ctx.targets, init.alpha_floor, x))
          throw NumericalError("sca: lost strict feasibility at outer iteration " +
                               std::to_string(outer));
        sub.constraints(x, g);
        if ((-g).minCoeff() <= 0.0)
          throw NumericalError("sca: start repair failed at outer iteration " +
                               std::to_string(outer));
      }
    }

    const BarrierResult res = solve_barrier(sub, x, opts.barrier);
    const double prev = state.objective_trace.back();

    if (res.objective > prev + 1e-6 * std::max(1.0, std::abs(prev)))
      throw NumericalError("sca: objective regressed beyond solver tolerance");
    const bool regressed = res.objective > prev;
    if (!regressed) {
      x = res.x;
      state.objective_trace.push_back(res.objective);
      state.alpha_history.push_back(extract_alpha(x));
    }

    const std::vector<double> t_star = extract_t(x);
    double drift = 0.0, t_scale = 0.0;
    for (std::size_t i = 0; i < t_star.size(); ++i) {
      drift = std::max(drift, std::abs(t_star[i] - t_hat[i]));
      t_scale = std::max(t_scale, std::abs(t_hat[i]));
    }
    drift = t_scale > 0.0 ? drift / t_scale : 0.0;

    PowerAllocation p_cur = PowerAllocation::from_log(users, nf, extract_alpha(x));
    state.trace.push_back(
        {outer, state.objective_trace.back(), sub.max_true_violation(x), worst_papr_db(ctx, p_cur)});
    state.outer_iters = outer;
    state.allocation = std::move(p_cur);
    state.t = t_star;

    const double obj = state.objective_trace.back();
    const bool small_change =
        std::abs(prev - obj) < opts.obj_rel_tol * std::max(std::abs(obj), 1e-300);
    t_hat = t_star;
    alpha_hat = extract_alpha(x);
    if (regressed || (small_change && drift < opts.t_drift_tol)) {
      state.status = ScaStatus::converged;
      return state;
    }
  }
  state.status = ScaStatus::max_iters;
  return state;
}

}  // namespace

ScaInit init_feasible(const ChannelRealization& ch, const ConvergenceTargets& targets,
                      double noise_var, double margin, double power_cap_factor) {
  const int users = ch.num_users(), nf = ch.block_len();
  const double cap = noise_var * power_cap_factor;

  auto receiver_at = [&](double level) {
    return receiver_for_targets(ch, PowerAllocation::uniform(users, nf, level), targets,
                                noise_var);
  };
  auto ok = [&](double level) { return thresholds_met(targets, receiver_at(level), margin); };

  double hi = noise_var;
  while (!ok(hi)) {
    hi *= 2.0;
    if (hi > cap)
      throw InfeasibleTargetError("uniform power bisection cap reached; targets infeasible");
  }
  double lo = hi / 2.0;
  const double lo_min = noise_var * 1e-6;
  if (hi == noise_var) {
    // Already satisfiable at the noise level; search down for minimal scaling.
    lo = hi;
    while (lo > lo_min && ok(lo / 2.0)) lo /= 2.0;
    lo /= 2.0;
  }
  if (ok(lo)) {
    hi = lo;
  } else {
    for (int it = 0; it < 40 && (hi - lo) / hi > 1e-3; ++it) {
      const double mid = 0.5 * (lo + hi);
      (ok(mid) ? hi : lo) = mid;
    }
  }

  ScaInit init;
  init.uniform_level = hi;
  init.p0 = PowerAllocation::uniform(users, nf, hi);
  const GridReceiver rx = receiver_for_targets(ch, init.p0, targets, noise_var);
  init.t0 = grid_bin_sinrs(ch, rx, init.p0, targets, noise_var);
  init.alpha_floor = std::log(hi * 1e-12);
  return init;
}

ScaState sca_ccpa(const ChannelRealization& ch, const ConvergenceTargets& targets,
                  const GridReceiver& rx, double noise_var, const ScaInit& init,
                  const ScaOptions& opts) {
  return run_sca({ch, targets, rx, noise_var, nullptr, {}}, init, opts);
}

ScaState sca_ccpa_papr(const ChannelRealization& ch, const ConvergenceTargets& targets,
                       const GridReceiver& rx, const std::vector<PaprModel>& papr_models,
                       std::span<const double> delta, double noise_var, const ScaInit& init,
                       const ScaOptions& opts) {
  return run_sca({ch, targets, rx, noise_var, &papr_models, delta}, init, opts);
}

AlternatingResult alternating_optimize(const ChannelRealization& ch,
                                       const ConvergenceTargets& targets, double noise_var,
                                       const std::vector<PaprModel>* papr_models,
                                       std::span<const double> delta,
                                       const AlternatingOptions& opts,
                                       const PowerAllocation* warm_start) {
  AlternatingResult out;
  ScaInit init;
  if (warm_start) {
    init.p0 = *warm_start;
    init.uniform_level = std::max(warm_start->total() / (ch.num_users() * ch.block_len()),
                                  noise_var * 1e-9);
    init.alpha_floor = std::log(init.uniform_level * 1e-12);
  } else {
    init = init_feasible(ch, targets, noise_var);
  }

  PowerAllocation p_cur = init.p0;
  for (int round = 1; round <= opts.max_rounds; ++round) {
    out.receiver = receiver_for_targets(ch, p_cur, targets, noise_var);
    init.p0 = p_cur;
    init.t0 = grid_bin_sinrs(ch, out.receiver, p_cur, targets, noise_var);

    ScaState state =
        papr_models
            ? sca_ccpa_papr(ch, targets, out.receiver, *papr_models, delta, noise_var, init,
                            opts.sca)
            : sca_ccpa(ch, targets, out.receiver, noise_var, init, opts.sca);
    if (state.status == ScaStatus::infeasible) {
      if (round == 1) {
        out.last_sca = std::move(state);
        out.rounds = round;
        out.allocation = p_cur;
        return out;
      }
      break;  // no strictly interior restart: alternating has converged
    }

    const double prev_total = p_cur.total();
    const double new_total = state.allocation.total();
    out.rounds = round;
    out.total_power_per_round.push_back(new_total);
    if (new_total > prev_total * (1.0 + 1e-9)) {
      // Both steps are descent steps; a regression means numerical noise.
      out.last_sca = std::move(state);
      break;
    }
    p_cur = state.allocation;
    out.last_sca = std::move(state);
    if (std::abs(prev_total - new_total) < opts.power_rel_tol * prev_total) {
      out.allocation = p_cur;
      out.receiver = receiver_for_targets(ch, p_cur, targets, noise_var);
      return out;
    }
  }
  out.oscillation_warning = out.rounds >= opts.max_rounds;
  out.allocation = p_cur;
  out.receiver = receiver_for_targets(ch, p_cur, targets, noise_var);
  return out;
}

}  // namespace ccpa
