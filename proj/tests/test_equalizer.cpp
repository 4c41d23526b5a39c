#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "ccpa/equalizer.hpp"
#include "ccpa/exitchart.hpp"
#include "ccpa/sigmodel.hpp"

using namespace ccpa;

namespace {

// Four-symbol expectation oracle for Gray QPSK soft symbols.
cplx soft_symbol_oracle(double l1, double l2) {
  cplx acc = 0.0;
  for (int z1 = 0; z1 < 2; ++z1)
    for (int z2 = 0; z2 < 2; ++z2) {
      const double zb1 = 2.0 * z1 - 1.0, zb2 = 2.0 * z2 - 1.0;
      const double pr =
          0.25 * (1.0 - zb1 * std::tanh(l1 / 2.0)) * (1.0 - zb2 * std::tanh(l2 / 2.0));
      acc += pr * qpsk_map(z1, z2);
    }
  return acc;
}

ChannelRealization test_channel(std::uint64_t seed, int users = 2, int rx = 2) {
  SystemConfig cfg;
  cfg.num_users = users;
  cfg.num_rx = rx;
  return rayleigh_channel(cfg, seed);
}

std::vector<std::array<double, 2>> zero_llrs(int n) {
  return std::vector<std::array<double, 2>>((std::size_t)n, {0.0, 0.0});
}

}  // namespace

TEST_CASE("soft symbols: no a-priori means zero estimates and full residual") {
  const SoftSymbolStats s = soft_symbols(zero_llrs(8));
  for (const cplx& b : s.soft) CHECK(std::abs(b) == 0.0);
  CHECK(s.delta_bar == doctest::Approx(1.0));
}

TEST_CASE("soft symbols: perfect a-priori saturates the estimate") {
  std::vector<std::array<double, 2>> llrs(4, {1e9, 1e9});
  const SoftSymbolStats s = soft_symbols(llrs);
  const double r = 1.0 / std::sqrt(2.0);
  for (const cplx& b : s.soft) CHECK(std::abs(b - cplx{r, r}) < 1e-12);
  for (double m : s.mag_sq) CHECK(m == doctest::Approx(1.0));
  CHECK(s.delta_bar == doctest::Approx(0.0));
  // infinities handled through tanh saturation
  std::vector<std::array<double, 2>> inf_llrs(2, {HUGE_VAL, -HUGE_VAL});
  const SoftSymbolStats si = soft_symbols(inf_llrs);
  CHECK(std::abs(si.soft[0] - cplx{r, -r}) < 1e-12);
}

TEST_CASE("soft symbols match the four-symbol enumeration oracle") {
  RngStream rng(3);
  std::vector<std::array<double, 2>> llrs(64);
  for (auto& l : llrs) {
    l[0] = 4.0 * rng.gaussian();
    l[1] = 4.0 * rng.gaussian();
  }
  const SoftSymbolStats s = soft_symbols(llrs);
  for (std::size_t n = 0; n < llrs.size(); ++n)
    CHECK(std::abs(s.soft[n] - soft_symbol_oracle(llrs[n][0], llrs[n][1])) < 1e-12);
}

TEST_CASE("scalar beamformer reduces to the textbook expression") {
  const ChannelRealization ch = test_channel(4, 1, 1);
  const PowerAllocation p = PowerAllocation::uniform(1, 8, 2.0);
  const std::vector<double> dbar = {1.0};
  for (int m = 0; m < 8; ++m) {
    const std::vector<cplx> w = mmse_beamformer(ch, p, dbar, 0.3, 0, m, 1.0);
    const cplx g = ch.gamma(0, m)[0];
    // zeta = 1, avg(bddot) = 0: denominator constant is 1
    const cplx expect = g * std::sqrt(2.0) / (2.0 * std::norm(g) + 0.3);
    CHECK(std::abs(w[0] - expect) < 1e-12);
  }
}

TEST_CASE("perfect cancelation turns the beamformer into a matched filter") {
  const ChannelRealization ch = test_channel(5);
  const PowerAllocation p = PowerAllocation::uniform(2, 8, 1.5);
  const std::vector<double> dbar = {0.0, 0.0};
  const double nv = 0.25;
  const std::vector<cplx> w = mmse_beamformer(ch, p, dbar, nv, 1, 3, 0.7);
  const std::span<const cplx> g = ch.gamma(1, 3);
  // w should be collinear with gamma
  const cplx ratio = w[0] / g[0];
  CHECK(std::abs(w[1] / g[1] - ratio) < 1e-12);
}

TEST_CASE("2x2 beamformer matches the closed-form inverse") {
  const ChannelRealization ch = test_channel(6);
  std::vector<double> pw(16);
  RngStream rng(7);
  for (double& v : pw) v = 0.5 + rng.uniform();
  const PowerAllocation p = PowerAllocation::from_linear(2, 8, pw);
  const std::vector<double> dbar = {0.8, 0.6};
  const double nv = 0.2, zeta = 1.3;
  for (int m = 0; m < 8; ++m) {
    // A = sum_l P_l g_l g_l^H dbar_l + nv I, explicit 2x2 inversion
    cplx a11 = nv, a12 = 0.0, a21 = 0.0, a22 = nv;
    for (int l = 0; l < 2; ++l) {
      const std::span<const cplx> g = ch.gamma(l, m);
      const double c = p.at(l, m) * dbar[l];
      a11 += c * g[0] * std::conj(g[0]);
      a12 += c * g[0] * std::conj(g[1]);
      a21 += c * g[1] * std::conj(g[0]);
      a22 += c * g[1] * std::conj(g[1]);
    }
    const cplx det = a11 * a22 - a12 * a21;
    const std::span<const cplx> gu = ch.gamma(0, m);
    const cplx b0 = (a22 * gu[0] - a12 * gu[1]) / det;
    const cplx b1 = (-a21 * gu[0] + a11 * gu[1]) / det;
    const double scale = std::sqrt(p.at(0, m)) / ((1.0 - dbar[0]) * zeta + 1.0);
    const std::vector<cplx> w = mmse_beamformer(ch, p, dbar, nv, 0, m, zeta);
    CHECK(std::abs(w[0] - b0 * scale) < 1e-12);
    CHECK(std::abs(w[1] - b1 * scale) < 1e-12);
  }
}

TEST_CASE("effective sinr is scale invariant in the filter") {
  const ChannelRealization ch = test_channel(8);
  const PowerAllocation p = PowerAllocation::uniform(2, 8, 1.0);
  const std::vector<double> dbar = {0.5, 0.7};
  const double nv = 0.3;
  std::vector<std::vector<cplx>> bins(8), scaled(8);
  for (int m = 0; m < 8; ++m) {
    bins[m] = mmse_beamformer(ch, p, dbar, nv, 0, m, 1.0);
    scaled[m] = bins[m];
    for (cplx& v : scaled[m]) v *= cplx{3.0, -2.0};
  }
  const double z1 = effective_sinr(ch, bins, p, dbar, nv, 0);
  const double z2 = effective_sinr(ch, scaled, p, dbar, nv, 0);
  CHECK(z1 == doctest::Approx(z2).epsilon(1e-12));
}

TEST_CASE("normalized and unnormalized filters give the same sinr") {
  const ChannelRealization ch = test_channel(9);
  const PowerAllocation p = PowerAllocation::uniform(2, 8, 2.0);
  const std::vector<double> dbar = {0.4, 0.9};
  const double nv = 0.15;
  std::vector<std::vector<cplx>> normalized(8), raw(8);
  for (int m = 0; m < 8; ++m) {
    normalized[m] = mmse_beamformer(ch, p, dbar, nv, 0, m, 2.2);
    raw[m] = mmse_beamformer(ch, p, dbar, nv, 0, m, 0.0);  // denominator 1
  }
  CHECK(effective_sinr(ch, normalized, p, dbar, nv, 0) ==
        doctest::Approx(effective_sinr(ch, raw, p, dbar, nv, 0)).epsilon(1e-12));
}

TEST_CASE("flat single-user channel recovers the scalar sinr formula") {
  std::vector<cplx> taps = {cplx{1.0, 0.0}};
  const ChannelRealization ch = ChannelRealization::from_taps(8, 1, 1, 1, taps);
  const double pw = 1.7, nv = 0.4;
  const PowerAllocation p = PowerAllocation::uniform(1, 8, pw);
  const std::vector<double> dbar = {1.0};
  const Receiver rx = compute_mmse_receiver(ch, p, dbar, nv);
  CHECK(rx.zeta[0] == doctest::Approx(pw / (pw + nv)).epsilon(1e-9));
}

TEST_CASE("sinr grows with power when the user has no self interference") {
  const ChannelRealization ch = test_channel(10);
  std::vector<double> pw(16, 1.0);
  const std::vector<double> dbar = {0.0, 0.6};
  const double nv = 0.2;
  const PowerAllocation p0 = PowerAllocation::from_linear(2, 8, pw);
  const Receiver rx0 = compute_mmse_receiver(ch, p0, dbar, nv);
  for (int m = 0; m < 8; ++m) {
    std::vector<double> bumped = pw;
    bumped[(std::size_t)m] += 0.5;  // user 0, bin m
    const PowerAllocation p1 = PowerAllocation::from_linear(2, 8, bumped);
    const Receiver rx1 = compute_mmse_receiver(ch, p1, dbar, nv);
    CHECK(rx1.zeta[0] >= rx0.zeta[0] - 1e-12);
  }
}

TEST_CASE("llr variance closed form") {
  CHECK(llr_variance(0.7, 0.0) == doctest::Approx(2.8));
  CHECK(llr_variance(0.0, 0.5) == doctest::Approx(0.0));
  CHECK(llr_variance(0.5, 0.5) == doctest::Approx(8.0 / 3.0));
  CHECK_THROWS_AS(llr_variance(2.0, 0.5), DomainError);
}

TEST_CASE("perfect priors cancel all interference in the frequency domain") {
  const ChannelRealization ch = test_channel(11);
  const PowerAllocation p = PowerAllocation::uniform(2, 8, 1.3);
  RngStream brng(12);
  const std::vector<SymbolBlock> blocks = {random_qpsk_block(8, brng),
                                           random_qpsk_block(8, brng)};
  RngStream nrng(13);
  const std::vector<cplx> r = synth_received(ch, p, blocks, 0.0, nrng);
  // perfect a-priori LLRs for both users
  std::vector<SoftSymbolStats> priors;
  for (int u = 0; u < 2; ++u) {
    std::vector<std::array<double, 2>> llrs(8);
    for (int n = 0; n < 8; ++n)
      for (int q = 0; q < 2; ++q) llrs[n][q] = blocks[u].bits[n][q] == 0 ? 1e9 : -1e9;
    priors.push_back(soft_symbols(llrs));
  }
  const std::vector<cplx> res = soft_cancel(r, ch, p, priors);
  for (const cplx& v : res) CHECK(std::abs(v) < 1e-9);
}

TEST_CASE("noiseless equalization recovers the transmitted bits") {
  const ChannelRealization ch = test_channel(14, 1, 1);
  const PowerAllocation p = PowerAllocation::uniform(1, 8, 1.0);
  RngStream brng(15);
  const SymbolBlock block = random_qpsk_block(8, brng);
  RngStream nrng(16);
  const double nv = 1e-12;
  const std::vector<cplx> r = synth_received(ch, p, {block}, nv, nrng);
  const std::vector<SoftSymbolStats> priors = {soft_symbols(zero_llrs(8))};
  const EqualizeResult eq = equalize_block(r, ch, p, priors, nv);
  for (int n = 0; n < 8; ++n)
    for (int q = 0; q < 2; ++q) {
      const double expect_sign = block.bits[n][q] == 0 ? 1.0 : -1.0;
      CHECK(eq.llrs[0][n][q] * expect_sign > 0.0);
    }
}

TEST_CASE("equalizer llr statistics follow the variance prediction") {
  const ChannelRealization ch = test_channel(21);
  const PowerAllocation p = PowerAllocation::uniform(2, 8, 1.0);
  const double nv = 0.25;
  const int blocks_per_point = 200;
  for (double i_a : {0.0, 0.5, 0.9}) {
    const double sigma_a = i_a > 0.0 ? j_inverse(i_a) : 0.0;
    double pred_acc = 0.0;
    std::vector<double> samples;  // bit-sign conditioned LLRs of user 0
    samples.reserve((std::size_t)blocks_per_point * 16);
    RngStream rng(1000 + (std::uint64_t)(i_a * 10));
    for (int b = 0; b < blocks_per_point; ++b) {
      std::vector<SymbolBlock> blocks;
      std::vector<SoftSymbolStats> priors;
      for (int u = 0; u < 2; ++u) {
        blocks.push_back(random_qpsk_block(8, rng));
        std::vector<std::array<double, 2>> llrs(8);
        for (int n = 0; n < 8; ++n)
          for (int q = 0; q < 2; ++q)
            llrs[n][q] = sigma_a > 0.0 ? draw_apriori_llr(blocks[u].bits[n][q], sigma_a, rng)
                                       : 0.0;
        priors.push_back(soft_symbols(llrs));
      }
      const std::vector<cplx> r = synth_received(ch, p, blocks, nv, rng);
      const EqualizeResult eq = equalize_block(r, ch, p, priors, nv);
      pred_acc += eq.sigma_hat_sq[0];
      for (int n = 0; n < 8; ++n)
        for (int q = 0; q < 2; ++q) {
          const double sign = blocks[0].bits[n][q] == 0 ? 1.0 : -1.0;
          samples.push_back(sign * eq.llrs[0][n][q]);
        }
    }
    const double predicted = pred_acc / blocks_per_point;
    double mean = 0.0;
    for (double v : samples) mean += v;
    mean /= (double)samples.size();
    double var = 0.0;
    for (double v : samples) var += (v - mean) * (v - mean);
    var /= (double)samples.size() - 1.0;
    CHECK(std::abs(var - predicted) / predicted < 0.10);
    // Gaussian consistency: mean ~ variance / 2 on correct-sign LLRs
    CHECK(std::abs(mean - var / 2.0) / (var / 2.0) < 0.10);
  }
}
