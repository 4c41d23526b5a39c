#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ccpa/common.hpp"
#include "ccpa/config.hpp"
#include "ccpa/power.hpp"
#include "ccpa/rng.hpp"

namespace ccpa {

/// Unitary DFT with entries exp(+i 2 pi m l / N) / sqrt(N) (0-based m, l).
/// This sign convention diagonalizes circulant channel matrices as
/// F H F^-1 and is shared by the PAPR coefficient phases.
std::vector<cplx> dft(std::span<const cplx> x);

/// Inverse (conjugate) transform of dft().
std::vector<cplx> idft(std::span<const cplx> x);

/// Gray-mapped QPSK: bit 0 -> +1/sqrt(2), bit 1 -> -1/sqrt(2) on each rail.
cplx qpsk_map(int bit_re, int bit_im);

struct SymbolBlock {
  std::vector<cplx> symbols;                 // unit modulus
  std::vector<std::array<std::uint8_t, 2>> bits;  // Gray labels per symbol

  int size() const { return (int)symbols.size(); }
};

SymbolBlock qpsk_block_from_bits(const std::vector<std::array<std::uint8_t, 2>>& bits);
SymbolBlock random_qpsk_block(int block_len, RngStream& rng);

/// One quasi-static channel draw: time-domain taps per (user, antenna) and
/// the per-bin frequency response derived from them.
class ChannelRealization {
 public:
  static ChannelRealization from_taps(int block_len, int num_users, int num_rx,
                                      int num_taps, std::vector<cplx> taps);

  int num_users() const { return users_; }
  int num_rx() const { return rx_; }
  int num_taps() const { return taps_per_pair_; }
  int block_len() const { return block_len_; }

  cplx tap(int u, int r, int l) const {
    return taps_[((std::size_t)u * rx_ + r) * taps_per_pair_ + l];
  }

  /// Frequency response gamma_{u,m}: one complex value per receive antenna.
  std::span<const cplx> gamma(int u, int m) const {
    return {gamma_.data() + ((std::size_t)u * block_len_ + m) * rx_, (std::size_t)rx_};
  }

  /// ||gamma_{u,m}||^2.
  double bin_gain(int u, int m) const;

 private:
  int users_ = 0, rx_ = 0, taps_per_pair_ = 0, block_len_ = 0;
  std::vector<cplx> taps_;   // [u][r][l]
  std::vector<cplx> gamma_;  // [u][m][r]
};

/// i.i.d. complex Gaussian taps with per-tap variance 1/channel_len
/// (average equal gain profile, unit energy per user-antenna pair in
/// expectation). Streams are split per (user, antenna).
ChannelRealization rayleigh_channel(const SystemConfig& cfg, std::uint64_t seed);

/// Time-domain transmit waveform of one user: idft(sqrt(P) .* dft(b)).
std::vector<cplx> transmit_waveform(std::span<const double> power_row, const SymbolBlock& block);

/// Received stacked vector (antenna-major blocks of length N_F):
/// sum_u H_u F^-1 P_u^(1/2) F b_u + noise with per-element variance noise_var.
std::vector<cplx> synth_received(const ChannelRealization& ch, const PowerAllocation& power,
                                 const std::vector<SymbolBlock>& blocks, double noise_var,
                                 RngStream& noise_rng);

/// As synth_received but with externally supplied time-domain waveforms
/// (used by the clipping baseline).
std::vector<cplx> synth_received_waveforms(const ChannelRealization& ch,
                                           const std::vector<std::vector<cplx>>& waveforms,
                                           double noise_var, RngStream& noise_rng);

/// CSV fixture format: header `u,r,l,re,im`, one row per tap.
void save_channel_csv(std::ostream& os, const ChannelRealization& ch);
ChannelRealization load_channel_csv(std::istream& is, int block_len);
void save_channel_csv_file(const std::string& path, const ChannelRealization& ch);
ChannelRealization load_channel_csv_file(const std::string& path, int block_len);

}  // namespace ccpa
