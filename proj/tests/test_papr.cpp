#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "ccpa/papr.hpp"
#include "ccpa/rng.hpp"
#include "ccpa/sigmodel.hpp"

using namespace ccpa;

namespace {

// Direct oracle: |s_m|^2 with s = F^-1 P^(1/2) F b.
std::vector<double> peak_oracle(const SymbolBlock& block, std::span<const double> p) {
  const std::vector<cplx> s = transmit_waveform(p, block);
  std::vector<double> out(s.size());
  for (std::size_t m = 0; m < s.size(); ++m) out[m] = std::norm(s[m]);
  return out;
}

double papr_db_oracle(const SymbolBlock& block, std::span<const double> p) {
  const std::vector<double> peaks = peak_oracle(block, p);
  double mx = 0.0, avg = 0.0;
  for (double v : peaks) mx = std::max(mx, v);
  for (double v : p) avg += v;
  avg /= (double)p.size();
  return 10.0 * std::log10(mx / avg);
}

std::vector<double> random_power(int n, RngStream& rng, double scale = 2.0) {
  std::vector<double> p((std::size_t)n);
  for (double& v : p) v = rng.uniform() * scale;
  return p;
}

}  // namespace

TEST_CASE("two-sample all-ones block gives d = (1, -1)") {
  const SymbolBlock b = qpsk_block_from_bits({{0, 0}, {0, 0}});
  // scale symbols to unit modulus: (1+j)/sqrt2 etc. d depends only on
  // b_p b_q* = 1 here, a_{l,1,0} = e^{j pi l}.
  const PaprModel model(b);
  CHECK(model.d(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(model.d(1) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("closed-form per-sample power matches the transform oracle") {
  RngStream rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const SymbolBlock block = random_qpsk_block(8, rng);
    const PaprModel model(block);
    const std::vector<double> p = random_power(8, rng);
    const std::vector<double> got = model.peak_power(p);
    const std::vector<double> want = peak_oracle(block, p);
    double scale = 0.0;
    for (double v : want) scale = std::max(scale, v);
    for (int m = 0; m < 8; ++m) CHECK(std::abs(got[m] - want[m]) <= 1e-9 * std::max(scale, 1.0));
  }
}

TEST_CASE("uniform power produces a flat envelope equal to the level") {
  RngStream rng(6);
  const SymbolBlock block = random_qpsk_block(8, rng);
  const PaprModel model(block);
  const std::vector<double> p((std::size_t)8, 1.7);
  for (double v : model.peak_power(p)) CHECK(v == doctest::Approx(1.7).epsilon(1e-12));
  CHECK(model.papr_db(p) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("single active bin yields constant envelope") {
  RngStream rng(7);
  const SymbolBlock block = random_qpsk_block(8, rng);
  const PaprModel model(block);
  std::vector<double> p(8, 0.0);
  p[0] = 3.0;
  const std::vector<double> got = model.peak_power(p);
  const std::vector<double> want = peak_oracle(block, p);
  for (int m = 0; m < 8; ++m) {
    CHECK(got[m] == doctest::Approx(got[0]).epsilon(1e-9));  // constant across m
    CHECK(got[m] == doctest::Approx(want[m]).epsilon(1e-9));
  }
  // E|s_m|^2 over random blocks is c/N; check the sample mean.
  double mean = 0.0;
  const int blocks = 2000;
  for (int i = 0; i < blocks; ++i) {
    const SymbolBlock bl = random_qpsk_block(8, rng);
    mean += PaprModel(bl).peak_power(p)[0];
  }
  mean /= blocks;
  CHECK(std::abs(mean - 3.0 / 8.0) / (3.0 / 8.0) < 0.1);
}

TEST_CASE("average power is the mean allocation") {
  std::vector<double> p = {8, 0, 0, 0, 0, 0, 0, 0};
  CHECK(PaprModel::avg_power(p) == doctest::Approx(1.0));
  std::vector<double> u(8, 3.0);
  CHECK(PaprModel::avg_power(u) == doctest::Approx(3.0));
  // matches the oracle's sample-average over many random blocks
  RngStream rng(8);
  const std::vector<double> pw = random_power(8, rng);
  double mean = 0.0;
  const int blocks = 1000;
  for (int i = 0; i < blocks; ++i) {
    const SymbolBlock bl = random_qpsk_block(8, rng);
    const std::vector<double> peaks = peak_oracle(bl, pw);
    for (double v : peaks) mean += v;
  }
  mean /= blocks * 8;
  CHECK(std::abs(mean - PaprModel::avg_power(pw)) / PaprModel::avg_power(pw) < 0.01);
}

TEST_CASE("papr in dB matches the transform oracle") {
  RngStream rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const SymbolBlock block = random_qpsk_block(8, rng);
    const PaprModel model(block);
    const std::vector<double> p = random_power(8, rng);
    CHECK(std::abs(model.papr_db(p) - papr_db_oracle(block, p)) < 1e-6);
  }
  const SymbolBlock block = random_qpsk_block(8, rng);
  const PaprModel model(block);
  const std::vector<double> zeros(8, 0.0);
  CHECK_THROWS_AS(model.papr_db(zeros), DomainError);
}

TEST_CASE("constraint residual: uniform power sits exactly on the delta=1 boundary") {
  RngStream rng(10);
  const SymbolBlock block = random_qpsk_block(8, rng);
  const PaprModel model(block);
  const std::vector<double> p(8, 2.0);
  for (double r : model.constraint_residual(p, 1.0)) CHECK(std::abs(r) < 1e-9);
  for (double r : model.constraint_residual(p, 2.0)) CHECK(r < 0.0);
}

TEST_CASE("constraint residual feasibility agrees with papr_db") {
  RngStream rng(11);
  int boundary_checks = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const SymbolBlock block = random_qpsk_block(8, rng);
    const PaprModel model(block);
    const std::vector<double> p = random_power(8, rng);
    const double delta = 1.0 + 3.0 * rng.uniform();
    double worst = -1e300;
    for (double r : model.constraint_residual(p, delta)) worst = std::max(worst, r);
    const bool feasible = worst <= 0.0;
    const bool papr_ok = model.papr_db(p) <= 10.0 * std::log10(delta) + 1e-9;
    CHECK(feasible == papr_ok);
    ++boundary_checks;
  }
  CHECK(boundary_checks == 100);
}

TEST_CASE("constraint residual equals N |s_m|^2 - delta sum P") {
  RngStream rng(12);
  const SymbolBlock block = random_qpsk_block(8, rng);
  const PaprModel model(block);
  const std::vector<double> p = random_power(8, rng);
  const double delta = 1.8;
  const std::vector<double> res = model.constraint_residual(p, delta);
  const std::vector<double> peaks = model.peak_power(p);
  double total = 0.0;
  for (double v : p) total += v;
  for (int m = 0; m < 8; ++m)
    CHECK(res[m] == doctest::Approx(8.0 * peaks[m] - delta * total).epsilon(1e-9));
}

TEST_CASE("eta splits recombine and the per-sample sums vanish") {
  RngStream rng(13);
  const SymbolBlock block = random_qpsk_block(8, rng);
  const PaprModel model(block);
  for (int m = 0; m < 8; ++m) {
    double sum = 0.0;
    for (int idx = 0; idx < model.pair_count(); ++idx) {
      CHECK(model.eta_plus(m, idx) + model.eta_minus(m, idx) ==
            doctest::Approx(model.eta(m, idx)).epsilon(1e-12));
      sum += model.eta(m, idx);
    }
    // uniform-allocation consistency forces sum_{i>n} eta_{nim} = 0
    CHECK(std::abs(sum) < 1e-9);
  }
}

TEST_CASE("non-unit symbols are rejected") {
  SymbolBlock b;
  b.symbols = {cplx{1.0, 0.0}, cplx{0.5, 0.0}};
  b.bits = {{0, 0}, {0, 0}};
  CHECK_THROWS_AS(PaprModel{b}, DomainError);
}

TEST_CASE("budget gradient matches central finite differences") {
  RngStream rng(14);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    const SymbolBlock block = random_qpsk_block(8, rng);
    const PaprModel model(block);
    std::vector<double> alpha(8);
    for (double& a : alpha) a = 2.0 * rng.gaussian();
    const double delta = 1.0 + 3.0 * rng.uniform();
    const int m = (int)rng.uniform_int(8);
    const std::vector<double> grad = model.log_budget_grad(alpha, delta, m);
    for (int k = 0; k < 8; ++k) {
      std::vector<double> ap = alpha, am = alpha;
      ap[k] += h;
      am[k] -= h;
      const double fd =
          (model.log_budget(ap, delta, m) - model.log_budget(am, delta, m)) / (2.0 * h);
      CHECK(std::abs(grad[k] - fd) < 1e-5);
    }
  }
}

TEST_CASE("tangent touches the budget at the expansion point and underestimates elsewhere") {
  RngStream rng(15);
  const SymbolBlock block = random_qpsk_block(8, rng);
  const PaprModel model(block);
  std::vector<double> alpha_hat(8);
  for (double& a : alpha_hat) a = rng.gaussian();
  const double delta = 2.0;
  for (int m = 0; m < 8; ++m)
    CHECK(model.log_budget_tangent(alpha_hat, alpha_hat, delta, m) ==
          doctest::Approx(model.log_budget(alpha_hat, delta, m)).epsilon(1e-14));
  // The budget is a log-sum-exp of affines, so its tangent plane is a global
  // underestimate; this is what makes the linearized constraint safe.
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> alpha(8);
    for (double& a : alpha) a = 2.5 * rng.gaussian();
    const int m = (int)rng.uniform_int(8);
    CHECK(model.log_budget_tangent(alpha, alpha_hat, delta, m) <=
          model.log_budget(alpha, delta, m) + 1e-12);
  }
}

TEST_CASE("log_peak is convex along segments and consistent with the residual") {
  RngStream rng(16);
  const SymbolBlock block = random_qpsk_block(8, rng);
  const PaprModel model(block);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(8), b(8), mid(8);
    for (int i = 0; i < 8; ++i) {
      a[i] = 2.0 * rng.gaussian();
      b[i] = 2.0 * rng.gaussian();
      mid[i] = 0.5 * (a[i] + b[i]);
    }
    const int m = (int)rng.uniform_int(8);
    CHECK(model.log_peak(mid, m) <=
          0.5 * model.log_peak(a, m) + 0.5 * model.log_peak(b, m) + 1e-12);
  }
  // exp(log_peak) equals the positive-coefficient side of the residual
  std::vector<double> alpha(8);
  for (double& v : alpha) v = rng.gaussian();
  std::vector<double> p(8);
  for (int i = 0; i < 8; ++i) p[i] = std::exp(alpha[i]);
  for (int m = 0; m < 8; ++m) {
    double lhs = 0.0;
    for (int l = 0; l < 8; ++l) lhs += model.coef(l) * p[l];
    for (int idx = 0; idx < model.pair_count(); ++idx) {
      const auto [nn, ii] = model.pair(idx);
      lhs += 2.0 / 8.0 * model.eta_plus(m, idx) * std::sqrt(p[nn] * p[ii]);
    }
    CHECK(std::exp(model.log_peak(alpha, m)) == doctest::Approx(lhs).epsilon(1e-9));
  }
}

TEST_CASE("uniform alpha evaluates the peak side in closed form") {
  RngStream rng(17);
  const SymbolBlock block = random_qpsk_block(8, rng);
  const PaprModel model(block);
  const double c = 0.37;
  std::vector<double> alpha(8, std::log(c));
  for (int m = 0; m < 8; ++m) {
    double sum = 0.0;
    for (int l = 0; l < 8; ++l) sum += model.coef(l);
    for (int idx = 0; idx < model.pair_count(); ++idx)
      sum += 2.0 / 8.0 * model.eta_plus(m, idx);
    CHECK(model.log_peak(alpha, m) == doctest::Approx(std::log(c * sum)).epsilon(1e-12));
  }
}

TEST_CASE("model dump matches the frozen fixture") {
  RngStream rng(4242);
  const SymbolBlock block = random_qpsk_block(8, rng);
  const PaprModel model(block);
  std::stringstream ss;
  model.dump_csv(ss);
  std::ifstream want(std::string(CCPA_SOURCE_DIR) + "/data/papr_model_nf8_seed4242.csv");
  REQUIRE(want.good());
  std::string got_line, want_line;
  int row = 0;
  std::stringstream got(ss.str());
  while (std::getline(want, want_line)) {
    ++row;
    REQUIRE(std::getline(got, got_line));
    CHECK_MESSAGE(got_line == want_line, "row " << row);
  }
  CHECK_FALSE(std::getline(got, got_line));
}
