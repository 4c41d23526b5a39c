#include "ccpa/equalizer.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace ccpa {

SoftSymbolStats soft_symbols(const std::vector<std::array<double, 2>>& llrs) {
  SoftSymbolStats s;
  const std::size_t n = llrs.size();
  s.soft.resize(n);
  s.mag_sq.resize(n);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double tr = std::tanh(llrs[i][0] / 2.0);
    const double ti = std::tanh(llrs[i][1] / 2.0);
    s.soft[i] = {tr * inv_sqrt2, ti * inv_sqrt2};
    s.mag_sq[i] = std::min(1.0, std::norm(s.soft[i]));
    acc += 1.0 - s.mag_sq[i];
  }
  s.delta_bar = n ? acc / (double)n : 1.0;
  return s;
}

namespace {

Eigen::MatrixXcd covariance_at_bin(const ChannelRealization& ch, const PowerAllocation& p,
                                   std::span<const double> delta_bar, double noise_var, int m) {
  const int r = ch.num_rx();
  Eigen::MatrixXcd a = noise_var * Eigen::MatrixXcd::Identity(r, r);
  for (int l = 0; l < ch.num_users(); ++l) {
    const double w = p.at(l, m) * delta_bar[l];
    if (w == 0.0) continue;
    const std::span<const cplx> g = ch.gamma(l, m);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) a(i, j) += w * g[i] * std::conj(g[j]);
  }
  return a;
}

Eigen::VectorXcd gamma_vec(const ChannelRealization& ch, int u, int m) {
  const std::span<const cplx> g = ch.gamma(u, m);
  Eigen::VectorXcd v(ch.num_rx());
  for (int i = 0; i < ch.num_rx(); ++i) v(i) = g[i];
  return v;
}

double sinr_of_filter(const ChannelRealization& ch, std::span<const cplx> w,
                      const PowerAllocation& p, std::span<const double> delta_bar,
                      double noise_var, int user, int m) {
  const int r = ch.num_rx();
  double num = 0.0, den = 0.0, wnorm = 0.0;
  for (int i = 0; i < r; ++i) wnorm += std::norm(w[i]);
  for (int l = 0; l < ch.num_users(); ++l) {
    const std::span<const cplx> g = ch.gamma(l, m);
    cplx dot = 0.0;
    for (int i = 0; i < r; ++i) dot += std::conj(w[i]) * g[i];
    const double e = p.at(l, m) * std::norm(dot);
    if (l == user) num = e;
    den += e * delta_bar[l];
  }
  den += wnorm * noise_var;
  return num / den;
}

}  // namespace

std::vector<cplx> mmse_beamformer(const ChannelRealization& ch, const PowerAllocation& p,
                                  std::span<const double> delta_bar, double noise_var, int user,
                                  int bin, double zeta) {
  require_dim((int)delta_bar.size() == ch.num_users(), "delta_bar size mismatch");
  require_domain(noise_var > 0.0, "noise variance must be positive");
  const Eigen::MatrixXcd a = covariance_at_bin(ch, p, delta_bar, noise_var, bin);
  const Eigen::VectorXcd g = gamma_vec(ch, user, bin);
  const double denom = (1.0 - delta_bar[user]) * zeta + 1.0;
  Eigen::VectorXcd w = a.llt().solve(g) * (std::sqrt(p.at(user, bin)) / denom);
  return {w.data(), w.data() + w.size()};
}

std::vector<double> per_bin_sinr(const ChannelRealization& ch,
                                 const std::vector<std::vector<cplx>>& omega_bins,
                                 const PowerAllocation& p, std::span<const double> delta_bar,
                                 double noise_var, int user) {
  require_dim((int)omega_bins.size() == ch.block_len(), "one filter per bin expected");
  std::vector<double> out((std::size_t)ch.block_len());
  for (int m = 0; m < ch.block_len(); ++m)
    out[m] = sinr_of_filter(ch, omega_bins[m], p, delta_bar, noise_var, user, m);
  return out;
}

double effective_sinr(const ChannelRealization& ch,
                      const std::vector<std::vector<cplx>>& omega_bins, const PowerAllocation& p,
                      std::span<const double> delta_bar, double noise_var, int user) {
  const std::vector<double> s = per_bin_sinr(ch, omega_bins, p, delta_bar, noise_var, user);
  double acc = 0.0;
  for (double v : s) acc += v;
  return acc / (double)s.size();
}

double llr_variance(double zeta, double delta_bar) {
  require_domain(zeta >= 0.0, "negative SINR");
  const double d = 1.0 - zeta * delta_bar;
  require_domain(d > 0.0, "llr_variance: zeta * delta_bar >= 1 (upstream inconsistency)");
  return 4.0 * zeta / d;
}

std::vector<std::vector<cplx>> Receiver::user_bins(int u) const {
  std::vector<std::vector<cplx>> bins((std::size_t)block_len);
  for (int m = 0; m < block_len; ++m) {
    const std::span<const cplx> w = at(u, m);
    bins[m].assign(w.begin(), w.end());
  }
  return bins;
}

Receiver compute_mmse_receiver(const ChannelRealization& ch, const PowerAllocation& p,
                               std::span<const double> delta_bar, double noise_var,
                               int max_fixed_point, double zeta_tol) {
  require_dim((int)delta_bar.size() == ch.num_users(), "delta_bar size mismatch");
  require_domain(noise_var > 0.0, "noise variance must be positive");
  const int users = ch.num_users(), nf = ch.block_len(), r = ch.num_rx();
  Receiver rx;
  rx.num_users = users;
  rx.block_len = nf;
  rx.num_rx = r;
  rx.omega.assign((std::size_t)users * nf * r, cplx{0.0, 0.0});
  rx.zeta.assign((std::size_t)users, 1.0);

  // Factor the per-bin covariance once; it is shared by all users.
  std::vector<Eigen::LLT<Eigen::MatrixXcd>> llts;
  llts.reserve((std::size_t)nf);
  for (int m = 0; m < nf; ++m)
    llts.emplace_back(covariance_at_bin(ch, p, delta_bar, noise_var, m));

  for (int u = 0; u < users; ++u) {
    // zeta appears only in the filter's scalar normalization, which the SINR
    // ratio is invariant to, so the fixed point settles immediately; the loop
    // keeps the reported filters self-consistent.
    double zeta = 1.0;
    for (int it = 0; it < max_fixed_point; ++it) {
      const double denom = (1.0 - delta_bar[u]) * zeta + 1.0;
      for (int m = 0; m < nf; ++m) {
        const Eigen::VectorXcd w =
            llts[m].solve(gamma_vec(ch, u, m)) * (std::sqrt(p.at(u, m)) / denom);
        for (int i = 0; i < r; ++i) rx.omega[((std::size_t)u * nf + m) * r + i] = w(i);
      }
      double acc = 0.0;
      for (int m = 0; m < nf; ++m)
        acc += sinr_of_filter(ch, rx.at(u, m), p, delta_bar, noise_var, u, m);
      const double next = acc / nf;
      const bool done = std::abs(next - zeta) < zeta_tol;
      zeta = next;
      if (done) break;
    }
    rx.zeta[u] = zeta;
  }
  return rx;
}

std::vector<cplx> soft_cancel(std::span<const cplx> received, const ChannelRealization& ch,
                              const PowerAllocation& p,
                              const std::vector<SoftSymbolStats>& priors) {
  const int users = ch.num_users(), nf = ch.block_len(), r = ch.num_rx();
  require_dim((int)received.size() == nf * r, "received vector size mismatch");
  require_dim((int)priors.size() == users, "one prior per user expected");

  // r~ = F_{N_R} r: per-antenna DFT, then reorder to bin-major (m, antenna).
  std::vector<cplx> r_hat((std::size_t)nf * r);
  for (int ant = 0; ant < r; ++ant) {
    const std::vector<cplx> f = dft(received.subspan((std::size_t)ant * nf, (std::size_t)nf));
    for (int m = 0; m < nf; ++m) r_hat[(std::size_t)m * r + ant] = f[m];
  }
  for (int u = 0; u < users; ++u) {
    const std::vector<cplx> soft_f = dft(priors[u].soft);
    for (int m = 0; m < nf; ++m) {
      const std::span<const cplx> g = ch.gamma(u, m);
      const cplx c = std::sqrt(p.at(u, m)) * soft_f[m];
      for (int ant = 0; ant < r; ++ant) r_hat[(std::size_t)m * r + ant] -= g[ant] * c;
    }
  }
  return r_hat;
}

EqualizeResult equalize_block(std::span<const cplx> received, const ChannelRealization& ch,
                              const PowerAllocation& p,
                              const std::vector<SoftSymbolStats>& priors, double noise_var) {
  const int users = ch.num_users(), nf = ch.block_len(), r = ch.num_rx();
  std::vector<double> dbar((std::size_t)users);
  for (int u = 0; u < users; ++u) dbar[u] = priors[u].delta_bar;

  const std::vector<cplx> r_hat = soft_cancel(received, ch, p, priors);
  const Receiver rx = compute_mmse_receiver(ch, p, dbar, noise_var);

  EqualizeResult out;
  out.llrs.resize((std::size_t)users);
  out.zeta = rx.zeta;
  out.sigma_hat_sq.resize((std::size_t)users);
  out.gain.resize((std::size_t)users);
  out.residual_var.resize((std::size_t)users);

  for (int u = 0; u < users; ++u) {
    // Per-bin filtering of the canceled signal.
    std::vector<cplx> q((std::size_t)nf);
    for (int m = 0; m < nf; ++m) {
      const std::span<const cplx> w = rx.at(u, m);
      cplx acc = 0.0;
      for (int ant = 0; ant < r; ++ant) acc += std::conj(w[ant]) * r_hat[(std::size_t)m * r + ant];
      q[m] = acc;
    }
    // Average desired gain and total filtered variance under the prior model.
    cplx gbar = 0.0;
    double total_var = 0.0;
    for (int m = 0; m < nf; ++m) {
      const std::span<const cplx> w = rx.at(u, m);
      double wnorm = 0.0;
      for (int ant = 0; ant < r; ++ant) wnorm += std::norm(w[ant]);
      for (int l = 0; l < users; ++l) {
        const std::span<const cplx> g = ch.gamma(l, m);
        cplx dot = 0.0;
        for (int ant = 0; ant < r; ++ant) dot += std::conj(w[ant]) * g[ant];
        if (l == u) gbar += dot * std::sqrt(p.at(u, m));
        total_var += p.at(l, m) * std::norm(dot) * dbar[l];
      }
      total_var += wnorm * noise_var;
    }
    gbar /= (double)nf;
    total_var /= (double)nf;
    // The desired symbol's own prior was canceled and re-added through the
    // average gain, so its contribution leaves the residual.
    const double nu2 = std::max(total_var - std::norm(gbar) * dbar[u], 1e-300);

    std::vector<cplx> x_hat = idft(q);
    for (int m = 0; m < nf; ++m) x_hat[m] += gbar * priors[u].soft[m];

    const double scale = 2.0 * std::sqrt(2.0) * gbar.real() / nu2;
    auto& lu = out.llrs[u];
    lu.resize((std::size_t)nf);
    for (int m = 0; m < nf; ++m) {
      lu[m][0] = scale * x_hat[m].real();
      lu[m][1] = scale * x_hat[m].imag();
    }
    out.gain[u] = gbar.real();
    out.residual_var[u] = nu2;
    out.sigma_hat_sq[u] = llr_variance(rx.zeta[u], dbar[u]);
  }
  return out;
}

void dump_sinr_csv(std::ostream& os, const ChannelRealization& ch, const Receiver& rx,
                   const PowerAllocation& p, std::span<const double> delta_bar,
                   double noise_var) {
  os << "user,bin,sinr\n";
  char buf[64];
  for (int u = 0; u < ch.num_users(); ++u) {
    const std::vector<double> s =
        per_bin_sinr(ch, rx.user_bins(u), p, delta_bar, noise_var, u);
    for (int m = 0; m < ch.block_len(); ++m) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.9g\n", u, m, s[m]);
      os << buf;
    }
  }
}

}  // namespace ccpa
