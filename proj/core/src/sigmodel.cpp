#include "ccpa/sigmodel.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace ccpa {

namespace {

std::vector<cplx> transform(std::span<const cplx> x, double sign) {
  const int n = (int)x.size();
  require_dim(n > 0, "dft: empty input");
  const double scale = 1.0 / std::sqrt((double)n);
  std::vector<cplx> roots((std::size_t)n);
  for (int k = 0; k < n; ++k) roots[k] = std::polar(1.0, sign * 2.0 * M_PI * k / n);
  std::vector<cplx> y((std::size_t)n);
  for (int m = 0; m < n; ++m) {
    cplx acc = 0.0;
    for (int l = 0; l < n; ++l) acc += x[l] * roots[(std::size_t)((long long)m * l % n)];
    y[m] = scale * acc;
  }
  return y;
}

}  // namespace

std::vector<cplx> dft(std::span<const cplx> x) { return transform(x, +1.0); }
std::vector<cplx> idft(std::span<const cplx> x) { return transform(x, -1.0); }

cplx qpsk_map(int bit_re, int bit_im) {
  const double s = 1.0 / std::sqrt(2.0);
  return {(1 - 2 * bit_re) * s, (1 - 2 * bit_im) * s};
}

SymbolBlock qpsk_block_from_bits(const std::vector<std::array<std::uint8_t, 2>>& bits) {
  SymbolBlock b;
  b.bits = bits;
  b.symbols.reserve(bits.size());
  for (const auto& z : bits) b.symbols.push_back(qpsk_map(z[0], z[1]));
  return b;
}

SymbolBlock random_qpsk_block(int block_len, RngStream& rng) {
  require_domain(block_len > 0, "block_len must be positive");
  std::vector<std::array<std::uint8_t, 2>> bits((std::size_t)block_len);
  for (auto& z : bits) {
    z[0] = (std::uint8_t)rng.uniform_int(2);
    z[1] = (std::uint8_t)rng.uniform_int(2);
  }
  return qpsk_block_from_bits(bits);
}

ChannelRealization ChannelRealization::from_taps(int block_len, int num_users, int num_rx,
                                                 int num_taps, std::vector<cplx> taps) {
  require_dim(num_taps <= block_len, "channel longer than block");
  require_dim((int)taps.size() == num_users * num_rx * num_taps, "tap vector size mismatch");
  ChannelRealization ch;
  ch.users_ = num_users;
  ch.rx_ = num_rx;
  ch.taps_per_pair_ = num_taps;
  ch.block_len_ = block_len;
  ch.taps_ = std::move(taps);
  ch.gamma_.assign((std::size_t)num_users * block_len * num_rx, cplx{0.0, 0.0});
  // gamma_{u,m,r} = sum_l h_{u,r,l} exp(+i 2 pi m l / N): the diagonal of
  // F circ(h) F^-1 under the +i DFT convention.
  std::vector<cplx> roots((std::size_t)block_len);
  for (int k = 0; k < block_len; ++k)
    roots[k] = std::polar(1.0, 2.0 * M_PI * k / block_len);
  for (int u = 0; u < num_users; ++u)
    for (int m = 0; m < block_len; ++m)
      for (int r = 0; r < num_rx; ++r) {
        cplx acc = 0.0;
        for (int l = 0; l < num_taps; ++l)
          acc += ch.tap(u, r, l) * roots[(std::size_t)((long long)m * l % block_len)];
        ch.gamma_[((std::size_t)u * block_len + m) * num_rx + r] = acc;
      }
  return ch;
}

double ChannelRealization::bin_gain(int u, int m) const {
  double g = 0.0;
  for (const cplx& v : gamma(u, m)) g += std::norm(v);
  return g;
}

ChannelRealization rayleigh_channel(const SystemConfig& cfg, std::uint64_t seed) {
  const double tap_var = 1.0 / cfg.channel_len;
  std::vector<cplx> taps((std::size_t)cfg.num_users * cfg.num_rx * cfg.channel_len);
  for (int u = 0; u < cfg.num_users; ++u)
    for (int r = 0; r < cfg.num_rx; ++r) {
      RngStream rng = RngStream::derive(seed, {0x43484eULL, (std::uint64_t)u, (std::uint64_t)r});
      for (int l = 0; l < cfg.channel_len; ++l)
        taps[((std::size_t)u * cfg.num_rx + r) * cfg.channel_len + l] = rng.cgaussian(tap_var);
    }
  return ChannelRealization::from_taps(cfg.block_len, cfg.num_users, cfg.num_rx,
                                       cfg.channel_len, std::move(taps));
}

std::vector<cplx> transmit_waveform(std::span<const double> power_row, const SymbolBlock& block) {
  const int n = block.size();
  require_dim((int)power_row.size() == n, "power row / block size mismatch");
  for (double v : power_row) require_domain(v >= 0.0, "negative power");
  std::vector<cplx> spread = dft(block.symbols);
  for (int l = 0; l < n; ++l) spread[l] *= std::sqrt(power_row[l]);
  return idft(spread);
}

namespace {

void add_circular_convolution(const ChannelRealization& ch, int u, int r,
                              std::span<const cplx> x, std::span<cplx> out) {
  const int n = ch.block_len();
  for (int p = 0; p < n; ++p) {
    cplx acc = 0.0;
    for (int l = 0; l < ch.num_taps(); ++l) acc += ch.tap(u, r, l) * x[(p - l + n) % n];
    out[p] += acc;
  }
}

}  // namespace

std::vector<cplx> synth_received_waveforms(const ChannelRealization& ch,
                                           const std::vector<std::vector<cplx>>& waveforms,
                                           double noise_var, RngStream& noise_rng) {
  require_dim((int)waveforms.size() == ch.num_users(), "one waveform per user expected");
  const int n = ch.block_len();
  std::vector<cplx> r((std::size_t)ch.num_rx() * n, cplx{0.0, 0.0});
  for (int u = 0; u < ch.num_users(); ++u) {
    require_dim((int)waveforms[u].size() == n, "waveform length mismatch");
    for (int ant = 0; ant < ch.num_rx(); ++ant)
      add_circular_convolution(ch, u, ant, waveforms[u],
                               std::span<cplx>(r.data() + (std::size_t)ant * n, (std::size_t)n));
  }
  if (noise_var > 0.0)
    for (cplx& v : r) v += noise_rng.cgaussian(noise_var);
  return r;
}

std::vector<cplx> synth_received(const ChannelRealization& ch, const PowerAllocation& power,
                                 const std::vector<SymbolBlock>& blocks, double noise_var,
                                 RngStream& noise_rng) {
  require_dim(power.num_users == ch.num_users() && power.block_len == ch.block_len(),
              "power allocation dimensions mismatch");
  require_dim((int)blocks.size() == ch.num_users(), "one block per user expected");
  std::vector<std::vector<cplx>> waveforms;
  waveforms.reserve(blocks.size());
  for (int u = 0; u < ch.num_users(); ++u)
    waveforms.push_back(transmit_waveform(power.row(u), blocks[u]));
  return synth_received_waveforms(ch, waveforms, noise_var, noise_rng);
}

void save_channel_csv(std::ostream& os, const ChannelRealization& ch) {
  os << "u,r,l,re,im\n";
  char buf[96];
  for (int u = 0; u < ch.num_users(); ++u)
    for (int r = 0; r < ch.num_rx(); ++r)
      for (int l = 0; l < ch.num_taps(); ++l) {
        cplx h = ch.tap(u, r, l);
        std::snprintf(buf, sizeof buf, "%d,%d,%d,%.17g,%.17g\n", u, r, l, h.real(), h.imag());
        os << buf;
      }
}

ChannelRealization load_channel_csv(std::istream& is, int block_len) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("u,r,l", 0) != 0)
    throw FormatError("channel csv: missing header row");
  struct Entry { int u, r, l; cplx h; };
  std::vector<Entry> entries;
  int max_u = -1, max_r = -1, max_l = -1;
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    Entry e;
    double re, im;
    if (std::sscanf(line.c_str(), "%d,%d,%d,%lf,%lf", &e.u, &e.r, &e.l, &re, &im) != 5)
      throw FormatError("channel csv: bad row " + std::to_string(row));
    e.h = {re, im};
    max_u = std::max(max_u, e.u);
    max_r = std::max(max_r, e.r);
    max_l = std::max(max_l, e.l);
    entries.push_back(e);
  }
  const int users = max_u + 1, rx = max_r + 1, taps = max_l + 1;
  if (users <= 0 || (int)entries.size() != users * rx * taps)
    throw FormatError("channel csv: incomplete tap grid");
  std::vector<cplx> flat((std::size_t)users * rx * taps);
  for (const Entry& e : entries) flat[((std::size_t)e.u * rx + e.r) * taps + e.l] = e.h;
  return ChannelRealization::from_taps(block_len, users, rx, taps, std::move(flat));
}

void save_channel_csv_file(const std::string& path, const ChannelRealization& ch) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  save_channel_csv(os, ch);
}

ChannelRealization load_channel_csv_file(const std::string& path, int block_len) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path);
  return load_channel_csv(is, block_len);
}

}  // namespace ccpa
