#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "ccpa/common.hpp"
#include "ccpa/power.hpp"
#include "ccpa/sigmodel.hpp"

namespace ccpa {

/// Soft symbol estimates derived from a-priori LLRs.
struct SoftSymbolStats {
  std::vector<cplx> soft;        // b~_n
  std::vector<double> mag_sq;    // |b~_n|^2, in [0,1]
  double delta_bar = 1.0;        // avg(1 - |b~|^2)
};

/// Gray QPSK soft symbols: b~ = (tanh(l1/2) + j tanh(l2/2)) / sqrt(2).
SoftSymbolStats soft_symbols(const std::vector<std::array<double, 2>>& llrs);

/// Per-bin MMSE receive beamformer
///   w = (sum_l P_{l,m} g_l g_l^H dbar_l + nv I)^-1 g_u sqrt(P_{u,m})
///       / ((1 - dbar_u) zeta + 1).
std::vector<cplx> mmse_beamformer(const ChannelRealization& ch, const PowerAllocation& p,
                                  std::span<const double> delta_bar, double noise_var, int user,
                                  int bin, double zeta);

/// Per-bin SINR terms P_{u,m}|w^H g_u|^2 / (sum_l P_{l,m}|w^H g_l|^2 dbar_l
/// + ||w||^2 nv) for a given set of per-bin filters of one user.
std::vector<double> per_bin_sinr(const ChannelRealization& ch,
                                 const std::vector<std::vector<cplx>>& omega_bins,
                                 const PowerAllocation& p, std::span<const double> delta_bar,
                                 double noise_var, int user);

/// Frequency-averaged effective SINR zeta_u (mean of per_bin_sinr).
double effective_sinr(const ChannelRealization& ch,
                      const std::vector<std::vector<cplx>>& omega_bins, const PowerAllocation& p,
                      std::span<const double> delta_bar, double noise_var, int user);

/// Equalizer-output LLR variance 4 zeta / (1 - zeta dbar); requires
/// zeta dbar < 1 (always true for the MMSE zeta).
double llr_variance(double zeta, double delta_bar);

/// MMSE filters plus self-consistent zeta for every user at one residual
/// interference state.
struct Receiver {
  int num_users = 0, block_len = 0, num_rx = 0;
  std::vector<cplx> omega;    // [u][m][r]
  std::vector<double> zeta;   // [u]

  std::span<const cplx> at(int u, int m) const {
    return {omega.data() + ((std::size_t)u * block_len + m) * num_rx, (std::size_t)num_rx};
  }
  std::vector<std::vector<cplx>> user_bins(int u) const;
};

Receiver compute_mmse_receiver(const ChannelRealization& ch, const PowerAllocation& p,
                               std::span<const double> delta_bar, double noise_var,
                               int max_fixed_point = 20, double zeta_tol = 1e-9);

struct EqualizeResult {
  /// Extrinsic LLRs [user][symbol][rail].
  std::vector<std::vector<std::array<double, 2>>> llrs;
  std::vector<double> zeta;            // effective SINR per user
  std::vector<double> sigma_hat_sq;    // predicted LLR variance per user
  std::vector<double> gain;            // average desired-signal gain per user
  std::vector<double> residual_var;    // equivalent noise variance per user
};

/// One block of FD-SC-MMSE equalization: frequency-domain soft cancelation,
/// per-bin MMSE filtering, time-domain demapping to extrinsic LLRs.
EqualizeResult equalize_block(std::span<const cplx> received, const ChannelRealization& ch,
                              const PowerAllocation& p,
                              const std::vector<SoftSymbolStats>& priors, double noise_var);

/// Frequency-domain residual after soft cancelation (diagnostic; exposed for
/// the interference-cancelation contract).
std::vector<cplx> soft_cancel(std::span<const cplx> received, const ChannelRealization& ch,
                              const PowerAllocation& p,
                              const std::vector<SoftSymbolStats>& priors);

/// Diagnostic CSV of per-bin SINR contributions: `user,bin,sinr`.
void dump_sinr_csv(std::ostream& os, const ChannelRealization& ch, const Receiver& rx,
                   const PowerAllocation& p, std::span<const double> delta_bar, double noise_var);

}  // namespace ccpa
