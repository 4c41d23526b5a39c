#include <doctest.h>

#include <cmath>
#include <vector>

#include "ccpa/barrier.hpp"
#include "ccpa/exitchart.hpp"
#include "ccpa/sca.hpp"
#include "ccpa/sigmodel.hpp"

using namespace ccpa;

namespace {

// Trivially convex toy: min 0.5 ||x - c||^2 s.t. lo <= x <= hi.
class BoxQp final : public ConvexProgram {
 public:
  BoxQp(Eigen::VectorXd c, double lo, double hi) : c_(std::move(c)), lo_(lo), hi_(hi) {}
  int dim() const override { return (int)c_.size(); }
  int constraint_count() const override { return 2 * dim(); }
  double objective(const Eigen::VectorXd& x) const override {
    return 0.5 * (x - c_).squaredNorm();
  }
  void objective_derivs(const Eigen::VectorXd& x, Eigen::VectorXd& grad,
                        Eigen::MatrixXd& hess) const override {
    grad += x - c_;
    hess += Eigen::MatrixXd::Identity(dim(), dim());
  }
  void constraints(const Eigen::VectorXd& x, Eigen::VectorXd& g) const override {
    for (int i = 0; i < dim(); ++i) {
      g(i) = lo_ - x(i);
      g(dim() + i) = x(i) - hi_;
    }
  }
  void barrier_derivs(const Eigen::VectorXd&, const Eigen::VectorXd& slack,
                      Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const override {
    for (int i = 0; i < dim(); ++i) {
      grad(i) += -1.0 / slack(i) + 1.0 / slack(dim() + i);
      hess(i, i) += 1.0 / (slack(i) * slack(i)) +
                    1.0 / (slack(dim() + i) * slack(dim() + i));
    }
  }

 private:
  Eigen::VectorXd c_;
  double lo_, hi_;
};

ConvergenceTargets manual_targets(int users, int grid, const std::vector<double>& xi,
                                  const std::vector<double>& dbar) {
  ConvergenceTargets t;
  t.num_users = users;
  t.grid_size = grid;
  t.xi = xi;
  t.delta_bar = dbar;
  t.mi_grid.assign(xi.size(), 0.0);
  t.eps.assign(xi.size(), 0.0);
  t.sigma_ring.assign(xi.size(), 0.0);
  return t;
}

ConvergenceTargets paper_style_targets(int users, int grid, double target, double eps) {
  std::vector<ExitCurve> dec((std::size_t)users, ExitCurve::identity(21));
  const DeltaBarCache cache(20000, 7);
  const std::vector<double> e((std::size_t)users, eps);
  const std::vector<double> tgt((std::size_t)users, target);
  return build_targets(dec, grid, e, tgt, cache);
}

ChannelRealization paper_channel(std::uint64_t seed) {
  SystemConfig cfg;  // U=2, N_R=2, N_F=8, N_L=5
  return rayleigh_channel(cfg, seed);
}

std::vector<PaprModel> models_for(std::uint64_t seed, int users, int nf) {
  std::vector<PaprModel> out;
  for (int u = 0; u < users; ++u) {
    RngStream rng = RngStream::derive(seed, {0xB10C, (std::uint64_t)u});
    out.emplace_back(random_qpsk_block(nf, rng));
  }
  return out;
}

}  // namespace

TEST_CASE("barrier solves a box-constrained quadratic against projected gradient") {
  Eigen::VectorXd c(5);
  c << -3.0, 0.2, 0.9, 2.5, 1.0;
  const BoxQp qp(c, 0.0, 1.0);
  Eigen::VectorXd x0 = Eigen::VectorXd::Constant(5, 0.5);
  BarrierOptions opts;
  const BarrierResult res = solve_barrier(qp, x0, opts);

  // projected gradient oracle
  Eigen::VectorXd x = x0;
  for (int it = 0; it < 20000; ++it) {
    x -= 0.5 * (x - c);
    x = x.cwiseMax(1e-12).cwiseMin(1.0 - 1e-12);
  }
  for (int i = 0; i < 5; ++i) CHECK(std::abs(res.x(i) - x(i)) < 1e-5);
  // multiplier estimates: active lower bound at i=0 has positive dual
  CHECK(res.dual(0) > 1e-3);
  CHECK(res.dual(5 + 0) < 1e-6);
}

TEST_CASE("barrier rejects an infeasible start") {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(3);
  const BoxQp qp(c, 0.0, 1.0);
  Eigen::VectorXd bad = Eigen::VectorXd::Constant(3, 2.0);
  CHECK_THROWS_WITH_AS(solve_barrier(qp, bad, {}),
                       doctest::Contains("phase-I"), NumericalError);
}

TEST_CASE("zero thresholds drive the allocation to the power floor") {
  const ChannelRealization ch = paper_channel(51);
  const ConvergenceTargets targets =
      manual_targets(2, 1, {0.0, 0.0}, {1.0, 1.0});
  const double nv = 0.1;
  const ScaInit init = init_feasible(ch, targets, nv);
  const GridReceiver rx = receiver_for_targets(ch, init.p0, targets, nv);
  const ScaState state = sca_ccpa(ch, targets, rx, nv, init);
  CHECK(state.status == ScaStatus::converged);
  CHECK(state.outer_iters <= 2);
  const double floor = std::exp(init.alpha_floor);
  CHECK(state.allocation.total() < 16.0 * floor * 10.0);
  CHECK(state.allocation.total() >= 16.0 * floor);
}

TEST_CASE("two-bin flat-channel instance matches the closed form and a grid oracle") {
  // U=1, N_R=1, N_F=2, flat channel, full residual interference
  const ChannelRealization ch =
      ChannelRealization::from_taps(2, 1, 1, 1, {cplx{1.0, 0.0}});
  const double nv = 0.2, xi = 0.6;
  const ConvergenceTargets targets = manual_targets(1, 1, {xi}, {1.0});

  AlternatingOptions opts;
  opts.power_rel_tol = 1e-8;
  opts.sca.obj_rel_tol = 1e-9;
  opts.sca.t_drift_tol = 1e-6;
  const AlternatingResult res = alternating_optimize(ch, targets, nv, nullptr, {}, opts);

  // closed form: per-bin sinr P/(P+nv), uniform optimum P* = nv xi/(1-xi)
  const double p_star = nv * xi / (1.0 - xi);
  CHECK(std::abs(res.allocation.total() - 2.0 * p_star) / (2.0 * p_star) < 1e-4);

  // dense grid oracle on (P1, P2)
  double best = 1e300;
  const int g = 2000;
  for (int i = 0; i <= g; ++i)
    for (int j = 0; j <= g; ++j) {
      const double p1 = 4.0 * p_star * i / g, p2 = 4.0 * p_star * j / g;
      const double s = 0.5 * (p1 / (p1 + nv) + p2 / (p2 + nv));
      if (s >= xi) best = std::min(best, p1 + p2);
    }
  CHECK(std::abs(res.allocation.total() - best) / best < 2e-3);
}

TEST_CASE("sca trace is monotone and feasibility margins hold") {
  const ChannelRealization ch = paper_channel(52);
  const ConvergenceTargets targets = paper_style_targets(2, 4, 0.9, 0.01);
  const double nv = 0.1;
  const ScaInit init = init_feasible(ch, targets, nv);
  const GridReceiver rx = receiver_for_targets(ch, init.p0, targets, nv);
  const ScaState state = sca_ccpa(ch, targets, rx, nv, init);
  REQUIRE(state.status == ScaStatus::converged);
  for (std::size_t i = 1; i < state.objective_trace.size(); ++i)
    CHECK(state.objective_trace[i] <= state.objective_trace[i - 1] + 1e-9);
  // returned point satisfies every original constraint family
  CHECK(state.trace.back().max_constraint_residual <= 1e-6);
  // achieved average sinr >= threshold at every grid point
  std::vector<double> dbar(2);
  for (int k = 0; k < targets.grid_size; ++k) {
    for (int u = 0; u < 2; ++u) dbar[u] = targets.dbar(u, k);
    std::vector<std::vector<cplx>> bins(8);
    for (int u = 0; u < 2; ++u) {
      for (int n = 0; n < 8; ++n) {
        const std::span<const cplx> w = rx.at(u, k, n);
        bins[n].assign(w.begin(), w.end());
      }
      CHECK(effective_sinr(ch, bins, state.allocation, dbar, nv, u) >=
            targets.threshold(u, k) - 1e-6);
    }
  }
}

TEST_CASE("papr-constrained sca keeps every iterate truly feasible") {
  const ChannelRealization ch = paper_channel(53);
  const ConvergenceTargets targets = paper_style_targets(2, 4, 0.9, 0.01);
  const double nv = 0.1;
  const std::vector<PaprModel> models = models_for(53, 2, 8);
  const std::vector<double> delta(2, db_to_linear(3.0));
  const ScaInit init = init_feasible(ch, targets, nv);
  const GridReceiver rx = receiver_for_targets(ch, init.p0, targets, nv);
  const ScaState state = sca_ccpa_papr(ch, targets, rx, models, delta, nv, init);
  REQUIRE(state.status == ScaStatus::converged);
  for (std::size_t i = 1; i < state.objective_trace.size(); ++i)
    CHECK(state.objective_trace[i] <= state.objective_trace[i - 1] + 1e-9);
  // the tangent bound makes every accepted iterate feasible for the true
  // papr constraint, not only the linearized one
  for (const std::vector<double>& alpha : state.alpha_history) {
    for (int u = 0; u < 2; ++u) {
      std::vector<double> p(8);
      for (int n = 0; n < 8; ++n) p[n] = std::exp(alpha[(std::size_t)u * 8 + n]);
      double total = 0.0;
      for (double v : p) total += v;
      for (double r : models[u].constraint_residual(p, delta[u]))
        CHECK(r <= 1e-9 * std::max(1.0, delta[u] * total));
    }
  }
  for (int u = 0; u < 2; ++u)
    CHECK(models[u].papr_db(state.allocation.row(u)) <= 3.0 + 1e-6);
}

TEST_CASE("a threshold of one (plus interior slack) forces a flat envelope") {
  const ChannelRealization ch = paper_channel(54);
  const ConvergenceTargets targets = paper_style_targets(2, 3, 0.85, 0.01);
  const double nv = 0.1;
  const std::vector<PaprModel> models = models_for(54, 2, 8);
  const std::vector<double> delta(2, 1.0 + 1e-6);
  const AlternatingResult res =
      alternating_optimize(ch, targets, nv, &models, delta, {});
  REQUIRE(res.last_sca.status == ScaStatus::converged);
  for (int u = 0; u < 2; ++u) {
    const std::vector<double> peaks = models[u].peak_power(res.allocation.row(u));
    const double avg = PaprModel::avg_power(res.allocation.row(u));
    for (double v : peaks) CHECK(std::abs(v - avg) / avg < 1.1e-6);
  }
}

TEST_CASE("nested thresholds order the total power") {
  const ChannelRealization ch = paper_channel(55);
  const ConvergenceTargets targets = paper_style_targets(2, 4, 0.9, 0.01);
  const double nv = 0.1;
  const std::vector<PaprModel> models = models_for(55, 2, 8);
  const std::vector<double> d3(2, db_to_linear(3.0)), d6(2, db_to_linear(6.0));

  const AlternatingResult r3 = alternating_optimize(ch, targets, nv, &models, d3, {});
  const AlternatingResult r6 =
      alternating_optimize(ch, targets, nv, &models, d6, {}, &r3.allocation);
  const AlternatingResult rc =
      alternating_optimize(ch, targets, nv, nullptr, {}, {}, &r6.allocation);
  CHECK(rc.allocation.total() <= r6.allocation.total() * (1.0 + 1e-9));
  CHECK(r6.allocation.total() <= r3.allocation.total() * (1.0 + 1e-9));
}

TEST_CASE("alternating rounds never increase the total power") {
  const ChannelRealization ch = paper_channel(56);
  const ConvergenceTargets targets = paper_style_targets(2, 4, 0.9, 0.01);
  const double nv = 0.1;
  const AlternatingResult res = alternating_optimize(ch, targets, nv, nullptr, {});
  REQUIRE(res.total_power_per_round.size() >= 1);
  for (std::size_t i = 1; i < res.total_power_per_round.size(); ++i)
    CHECK(res.total_power_per_round[i] <=
          res.total_power_per_round[i - 1] * (1.0 + 1e-9));
  CHECK_FALSE(res.oscillation_warning);

  // restarting from the solution changes nothing (receiver already optimal)
  const AlternatingResult again =
      alternating_optimize(ch, targets, nv, nullptr, {}, {}, &res.allocation);
  CHECK(again.rounds <= 2);
  CHECK(std::abs(again.allocation.total() - res.allocation.total()) <=
        1e-4 * res.allocation.total());
}

TEST_CASE("papr constraints survive receiver updates") {
  const ChannelRealization ch = paper_channel(57);
  const ConvergenceTargets targets = paper_style_targets(2, 3, 0.88, 0.01);
  const double nv = 0.1;
  const std::vector<PaprModel> models = models_for(57, 2, 8);
  const std::vector<double> delta(2, db_to_linear(3.0));
  const AlternatingResult res = alternating_optimize(ch, targets, nv, &models, delta, {});
  REQUIRE(res.last_sca.status == ScaStatus::converged);
  for (int u = 0; u < 2; ++u)
    CHECK(models[u].papr_db(res.allocation.row(u)) <= 3.0 + 1e-6);
}

TEST_CASE("initialization is feasible, strict and deterministic") {
  const ChannelRealization ch = paper_channel(58);
  const ConvergenceTargets targets = paper_style_targets(2, 4, 0.9, 0.01);
  const double nv = 0.1;
  const ScaInit a = init_feasible(ch, targets, nv);
  const ScaInit b = init_feasible(ch, targets, nv);
  CHECK(a.uniform_level == b.uniform_level);
  const GridReceiver rx = receiver_for_targets(ch, a.p0, targets, nv);
  for (int u = 0; u < 2; ++u)
    for (int k = 0; k < targets.grid_size; ++k)
      CHECK(rx.zeta_at(u, k) >= 1.0499 * targets.threshold(u, k));
  // infeasible thresholds hit the bisection cap
  const ConvergenceTargets impossible = manual_targets(2, 1, {1e9, 1e9}, {0.5, 0.5});
  CHECK_THROWS_AS(init_feasible(ch, impossible, nv), InfeasibleTargetError);
}
