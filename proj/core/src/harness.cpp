#include "ccpa/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <thread>

#include "ccpa/equalizer.hpp"

namespace ccpa {

namespace {

// Stream roles.
constexpr std::uint64_t kTagChannel = 0x11;
constexpr std::uint64_t kTagBlock = 0x22;
constexpr std::uint64_t kTagPrior = 0x33;
constexpr std::uint64_t kTagNoise = 0x44;
constexpr std::uint64_t kTagDeltaBar = 0x55;

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

ExperimentContext make_context(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentContext ctx;
  ctx.cfg = cfg;
  if (cfg.decoder_curve.empty()) throw FormatError("config: decoder_curve path missing");
  const ExitCurve curve = ExitCurve::load_csv_file(cfg.decoder_curve);
  ctx.decoders.assign((std::size_t)cfg.sys.num_users, curve);
  ctx.dbar = std::make_shared<DeltaBarCache>(cfg.delta_bar_samples,
                                             mix64(cfg.sys.rng_seed ^ kTagDeltaBar));
  ctx.targets = build_targets(ctx.decoders, cfg.sys.grid_size, cfg.sys.gap,
                              cfg.target_mi_decoder, *ctx.dbar);
  if (!cfg.target_mi_equalizer.empty()) {
    ctx.target_i_hat = cfg.target_mi_equalizer;
  } else {
    ctx.target_i_hat.resize((std::size_t)cfg.sys.num_users);
    for (int u = 0; u < cfg.sys.num_users; ++u)
      ctx.target_i_hat[u] = ctx.decoders[u].inverse(cfg.target_mi_decoder[u]);
  }
  return ctx;
}

std::vector<cplx> clip_waveform(std::span<const cplx> s, double threshold_db, double avg_power) {
  require_domain(avg_power > 0.0, "clip: average power must be positive");
  const double cap = db_to_linear(threshold_db) * avg_power;
  std::vector<cplx> out(s.begin(), s.end());
  for (cplx& v : out) {
    const double pw = std::norm(v);
    if (pw > cap) v *= std::sqrt(cap / pw);
  }
  return out;
}

Trajectory analytic_trajectory(const ExperimentContext& ctx, const ChannelRealization& ch,
                               const PowerAllocation& p) {
  const int users = ch.num_users();
  const double nv = ctx.cfg.sys.noise_var;
  const DeltaBarCache& dbar = *ctx.dbar;
  EqualizerEvaluator eval = [&, users, nv](const std::vector<double>& i_ring) {
    std::vector<double> deltas((std::size_t)users);
    for (int u = 0; u < users; ++u) deltas[u] = dbar(i_ring[u]);
    const Receiver rx = compute_mmse_receiver(ch, p, deltas, nv);
    std::vector<double> out((std::size_t)users);
    for (int u = 0; u < users; ++u)
      out[u] = j_function(std::sqrt(llr_variance(rx.zeta[u], deltas[u])));
    return out;
  };
  return simulate_trajectory(eval, ctx.decoders, ctx.cfg.max_traj_iters);
}

Trajectory mc_trajectory(const ExperimentContext& ctx, const ChannelRealization& ch,
                         const PowerAllocation& p, double threshold_db, int realization) {
  const int users = ch.num_users(), nf = ch.block_len();
  const double nv = ctx.cfg.sys.noise_var;
  const std::uint64_t seed = ctx.cfg.sys.rng_seed;
  std::vector<double> avg_power((std::size_t)users);
  for (int u = 0; u < users; ++u) avg_power[u] = PaprModel::avg_power(p.row(u));

  int iter_counter = 0;
  EqualizerEvaluator eval = [&, users, nf, nv, seed, threshold_db,
                             realization](const std::vector<double>& i_ring) {
    const int iter = ++iter_counter;
    std::vector<double> sigma_a((std::size_t)users);
    for (int u = 0; u < users; ++u) sigma_a[u] = j_inverse(std::min(i_ring[u], 1.0 - 1e-9));
    std::vector<std::vector<double>> signed_llrs((std::size_t)users);
    for (int b = 0; b < ctx.cfg.num_blocks; ++b) {
      std::vector<SymbolBlock> blocks;
      std::vector<SoftSymbolStats> priors;
      std::vector<std::vector<cplx>> waveforms;
      blocks.reserve(users);
      for (int u = 0; u < users; ++u) {
        RngStream brng = RngStream::derive(
            seed, {kTagBlock, (std::uint64_t)realization, (std::uint64_t)iter, (std::uint64_t)b,
                   (std::uint64_t)u});
        blocks.push_back(random_qpsk_block(nf, brng));
        RngStream prng = RngStream::derive(
            seed, {kTagPrior, (std::uint64_t)realization, (std::uint64_t)iter, (std::uint64_t)b,
                   (std::uint64_t)u});
        std::vector<std::array<double, 2>> llrs((std::size_t)nf);
        for (int n = 0; n < nf; ++n)
          for (int q = 0; q < 2; ++q)
            llrs[n][q] = draw_apriori_llr(blocks.back().bits[n][q], sigma_a[u], prng);
        priors.push_back(soft_symbols(llrs));
        std::vector<cplx> wave = transmit_waveform(p.row(u), blocks.back());
        if (threshold_db > 0.0 && std::isfinite(threshold_db) && avg_power[u] > 0.0)
          wave = clip_waveform(wave, threshold_db, avg_power[u]);
        waveforms.push_back(std::move(wave));
      }
      RngStream nrng = RngStream::derive(
          seed, {kTagNoise, (std::uint64_t)realization, (std::uint64_t)iter, (std::uint64_t)b});
      const std::vector<cplx> r = synth_received_waveforms(ch, waveforms, nv, nrng);
      const EqualizeResult eq = equalize_block(r, ch, p, priors, nv);
      for (int u = 0; u < users; ++u)
        for (int n = 0; n < nf; ++n)
          for (int q = 0; q < 2; ++q) {
            const double sign = blocks[u].bits[n][q] == 0 ? 1.0 : -1.0;
            signed_llrs[u].push_back(sign * eq.llrs[u][n][q]);
          }
    }
    std::vector<double> out((std::size_t)users);
    for (int u = 0; u < users; ++u) out[u] = mi_from_llr_samples(signed_llrs[u]);
    return out;
  };
  return simulate_trajectory(eval, ctx.decoders, ctx.cfg.max_traj_iters, 1e-3);
}

StrategyComparison compare_strategies(const ExperimentContext& ctx, const ChannelRealization& ch,
                                      const std::vector<PaprModel>& models,
                                      std::vector<double> delta_db_list) {
  std::sort(delta_db_list.begin(), delta_db_list.end());
  const double nv = ctx.cfg.sys.noise_var;
  const int users = ctx.cfg.sys.num_users;
  StrategyComparison out;
  out.delta_db = delta_db_list;

  AlternatingOptions opts;
  const PowerAllocation* prev = nullptr;
  try {
    for (double db : delta_db_list) {
      const std::vector<double> delta((std::size_t)users, db_to_linear(db));
      AlternatingResult scratch =
          alternating_optimize(ch, ctx.targets, nv, &models, delta, opts, nullptr);
      if (prev) {
        AlternatingResult warm =
            alternating_optimize(ch, ctx.targets, nv, &models, delta, opts, prev);
        if (warm.allocation.total() < scratch.allocation.total()) scratch = std::move(warm);
      }
      out.papr.push_back(std::move(scratch));
      prev = &out.papr.back().allocation;
    }
    AlternatingResult scratch = alternating_optimize(ch, ctx.targets, nv, nullptr, {}, opts);
    if (prev) {
      AlternatingResult warm = alternating_optimize(ch, ctx.targets, nv, nullptr, {}, opts, prev);
      if (warm.allocation.total() < scratch.allocation.total()) scratch = std::move(warm);
    }
    out.ccpa = std::move(scratch);
    for (const AlternatingResult& r : out.papr)
      if (r.last_sca.status == ScaStatus::infeasible) out.feasible = false;
    if (out.ccpa.last_sca.status == ScaStatus::infeasible) out.feasible = false;
  } catch (const InfeasibleTargetError&) {
    out.feasible = false;
  }
  return out;
}

void RunReport::finalize() {
  infeasible_count = 0;
  double tp = 0.0, snr = 0.0;
  max_papr_db = -1e300;
  min_endpoint_i_hat = 1.0;
  int feasible_rows = 0;
  std::vector<int> seen_realizations;
  for (const RealizationRow& r : rows) {
    if (!r.feasible) {
      if (r.user == 0) ++infeasible_count;
      continue;
    }
    ++feasible_rows;
    if (r.user == 0) {
      tp += r.total_power;
      snr += r.snr_db;
      seen_realizations.push_back(r.realization);
    }
    max_papr_db = std::max(max_papr_db, r.papr_db);
    min_endpoint_i_hat = std::min(min_endpoint_i_hat, r.endpoint_i_hat);
  }
  const int n = (int)seen_realizations.size();
  mean_total_power = n ? tp / n : 0.0;
  mean_snr_db = n ? snr / n : 0.0;
  if (!feasible_rows) {
    max_papr_db = 0.0;
    min_endpoint_i_hat = 0.0;
  }
}

void RunReport::write_csv(std::ostream& os) const {
  os << "realization,user,feasible,total_power,snr_db,papr_db,sca_iters,alt_rounds,"
        "endpoint_I_hat,endpoint_I_ring,bep\n";
  char buf[256];
  for (const RealizationRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%.9g,%.6f,%.6f,%d,%d,%.6f,%.6f,%.6g\n",
                  r.realization, r.user, r.feasible ? 1 : 0, r.total_power, r.snr_db, r.papr_db,
                  r.sca_iters, r.alt_rounds, r.endpoint_i_hat, r.endpoint_i_ring, r.bep);
    os << buf;
  }
}

void emit_exit_chart_data(std::ostream& os, const std::vector<ExitCurve>& decoders,
                          const std::vector<std::vector<std::pair<double, double>>>& eq_samples,
                          const Trajectory& traj) {
  os << "kind,user,x,y\n";
  char buf[96];
  for (int u = 0; u < (int)decoders.size(); ++u)
    for (int k = 0; k < decoders[u].sample_count(); ++k) {
      // decoder input MI on the y axis, output MI on the x axis
      std::snprintf(buf, sizeof buf, "decoder,%d,%.6f,%.6f\n", u, decoders[u].sample_ie(k),
                    decoders[u].sample_ia(k));
      os << buf;
    }
  for (int u = 0; u < (int)eq_samples.size(); ++u)
    for (const auto& [x, y] : eq_samples[u]) {
      std::snprintf(buf, sizeof buf, "equalizer,%d,%.6f,%.6f\n", u, x, y);
      os << buf;
    }
  std::vector<double> prev_ring((std::size_t)decoders.size(), 0.0);
  for (const TrajectoryPoint& pt : traj.points) {
    std::snprintf(buf, sizeof buf, "trajectory,%d,%.6f,%.6f\n", pt.user, prev_ring[pt.user],
                  pt.i_hat_e);
    os << buf;
    std::snprintf(buf, sizeof buf, "trajectory,%d,%.6f,%.6f\n", pt.user, pt.i_ring_e, pt.i_hat_e);
    os << buf;
    prev_ring[pt.user] = pt.i_ring_e;
  }
}

void write_solver_trace_csv(std::ostream& os, const ScaState& state) {
  os << "outer_iter,objective,max_constraint_residual,papr_worst_db\n";
  char buf[128];
  for (const ScaTraceRow& r : state.trace) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.3g,%.6f\n", r.outer_iter, r.objective,
                  r.max_constraint_residual, r.papr_worst_db);
    os << buf;
  }
}

namespace {

struct RealizationData {
  bool feasible = false;
  PowerAllocation allocation;
  std::vector<double> papr_db;
  int sca_iters = 0;
  int alt_rounds = 0;
  Trajectory traj;
  ScaState sca;
  GridReceiver receiver;
};

RealizationData run_one(const ExperimentContext& ctx, int i) {
  const ExperimentConfig& cfg = ctx.cfg;
  const int users = cfg.sys.num_users;
  const double nv = cfg.sys.noise_var;
  RealizationData out;

  const ChannelRealization ch =
      rayleigh_channel(cfg.sys, mix64(cfg.sys.rng_seed ^ kTagChannel) + (std::uint64_t)i);
  std::vector<SymbolBlock> blocks;
  std::vector<PaprModel> models;
  for (int u = 0; u < users; ++u) {
    RngStream rng =
        RngStream::derive(cfg.sys.rng_seed, {kTagBlock, (std::uint64_t)i, (std::uint64_t)u});
    blocks.push_back(random_qpsk_block(cfg.sys.block_len, rng));
    models.emplace_back(blocks.back());
  }

  try {
    AlternatingResult alt;
    if (cfg.strategy == Strategy::ccpa_papr) {
      std::vector<double> delta = cfg.sys.papr_threshold;
      if (delta.empty()) delta.assign((std::size_t)users, db_to_linear(cfg.delta_db));
      alt = alternating_optimize(ch, ctx.targets, nv, &models, delta);
    } else {
      alt = alternating_optimize(ch, ctx.targets, nv, nullptr, {});
    }
    if (alt.last_sca.status == ScaStatus::infeasible) return out;

    out.allocation = alt.allocation;
    out.sca_iters = alt.last_sca.outer_iters;
    out.alt_rounds = alt.rounds;
    out.sca = alt.last_sca;
    out.receiver = alt.receiver;

    if (cfg.strategy == Strategy::ccpa_clip) {
      out.traj = mc_trajectory(ctx, ch, out.allocation, cfg.delta_db, i);
      out.papr_db.resize((std::size_t)users);
      for (int u = 0; u < users; ++u) {
        const std::vector<cplx> wave = transmit_waveform(out.allocation.row(u), blocks[u]);
        const double avg = PaprModel::avg_power(out.allocation.row(u));
        const std::vector<cplx> clipped = clip_waveform(wave, cfg.delta_db, avg);
        double peak = 0.0;
        for (const cplx& v : clipped) peak = std::max(peak, std::norm(v));
        out.papr_db[u] = linear_to_db(peak / avg);
      }
    } else {
      out.traj = analytic_trajectory(ctx, ch, out.allocation);
      out.papr_db.resize((std::size_t)users);
      for (int u = 0; u < users; ++u) out.papr_db[u] = models[u].papr_db(out.allocation.row(u));
    }
    out.feasible = true;
  } catch (const InfeasibleTargetError&) {
    out.feasible = false;
  }
  return out;
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& cfg) {
  const ExperimentContext ctx = make_context(cfg);
  const int users = cfg.sys.num_users;
  const double nv = cfg.sys.noise_var;

  std::vector<RealizationData> data((std::size_t)cfg.num_realizations);
  parallel_for(cfg.num_realizations, cfg.threads,
               [&](int i) { data[(std::size_t)i] = run_one(ctx, i); });

  RunReport report;
  for (int i = 0; i < cfg.num_realizations; ++i) {
    const RealizationData& d = data[(std::size_t)i];
    for (int u = 0; u < users; ++u) {
      RealizationRow row;
      row.realization = i;
      row.user = u;
      row.feasible = d.feasible;
      if (d.feasible) {
        row.total_power = d.allocation.total();
        row.snr_db = linear_to_db(row.total_power / (cfg.sys.num_rx * cfg.sys.block_len * nv));
        row.papr_db = d.papr_db[u];
        row.sca_iters = d.sca_iters;
        row.alt_rounds = d.alt_rounds;
        row.endpoint_i_hat = d.traj.final_i_hat[u];
        row.endpoint_i_ring = d.traj.final_i_ring[u];
        row.bep = bep_of_targets(row.endpoint_i_ring, row.endpoint_i_hat);
      }
      report.rows.push_back(row);
    }
  }
  report.finalize();

  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  {
    std::ofstream os(fs::path(cfg.out_dir) / "report.csv");
    report.write_csv(os);
  }
  // Diagnostics from the first feasible realization.
  const auto first = std::find_if(data.begin(), data.end(),
                                  [](const RealizationData& d) { return d.feasible; });
  if (first != data.end()) {
    const RealizationData& d = *first;
    const int i = (int)(first - data.begin());
    const ChannelRealization ch =
        rayleigh_channel(cfg.sys, mix64(cfg.sys.rng_seed ^ kTagChannel) + (std::uint64_t)i);
    {
      std::ofstream os(fs::path(cfg.out_dir) / "trajectory.csv");
      save_trajectory_csv(os, d.traj);
    }
    {
      // Equalizer transfer sampled on a uniform a-priori grid (same MI for
      // all users, diagonal convention).
      std::vector<std::vector<std::pair<double, double>>> eq_samples((std::size_t)users);
      const int grid_pts = 21;
      for (int g = 0; g < grid_pts; ++g) {
        const double ia = (double)g / (grid_pts - 1) * 0.999;
        std::vector<double> deltas((std::size_t)users, (*ctx.dbar)(ia));
        const Receiver rx = compute_mmse_receiver(ch, d.allocation, deltas, nv);
        for (int u = 0; u < users; ++u)
          eq_samples[u].push_back(
              {ia, j_function(std::sqrt(llr_variance(rx.zeta[u], deltas[u])))});
      }
      std::ofstream os(fs::path(cfg.out_dir) / "exit_chart.csv");
      emit_exit_chart_data(os, ctx.decoders, eq_samples, d.traj);
    }
    {
      std::ofstream os(fs::path(cfg.out_dir) / "solver_trace.csv");
      write_solver_trace_csv(os, d.sca);
    }
    {
      std::ofstream os(fs::path(cfg.out_dir) / "sinr_bins.csv");
      os << "k,user,bin,sinr\n";
      char buf[96];
      std::vector<double> deltas((std::size_t)users);
      std::vector<std::vector<cplx>> bins((std::size_t)cfg.sys.block_len);
      for (int k = 0; k < ctx.targets.grid_size; ++k) {
        for (int u = 0; u < users; ++u) deltas[u] = ctx.targets.dbar(u, k);
        for (int u = 0; u < users; ++u) {
          for (int n = 0; n < cfg.sys.block_len; ++n) {
            const std::span<const cplx> w = d.receiver.at(u, k, n);
            bins[n].assign(w.begin(), w.end());
          }
          const std::vector<double> s =
              per_bin_sinr(ch, bins, d.allocation, deltas, nv, u);
          for (int n = 0; n < cfg.sys.block_len; ++n) {
            std::snprintf(buf, sizeof buf, "%d,%d,%d,%.9g\n", k, u, n, s[n]);
            os << buf;
          }
        }
      }
    }
  }
  return report;
}

}  // namespace ccpa
