#pragma once

#include <cstdint>
#include <vector>

#include "ccpa/common.hpp"

namespace ccpa {

/// Static dimensions and per-user parameters of one setup. PAPR thresholds
/// and tunnel gaps are stored in linear units; dB conversion happens at the
/// config-file boundary only.
struct SystemConfig {
  int num_users = 2;    // U
  int num_rx = 2;       // N_R
  int block_len = 8;    // N_F
  int channel_len = 5;  // N_L
  double noise_var = 0.1;
  std::vector<double> papr_threshold;  // delta_u >= 1, linear ratio, size U
  std::vector<double> gap;             // eps_u >= 0, size U
  int grid_size = 6;                   // K
  std::uint64_t rng_seed = 1;

  void validate() const {
    require_domain(num_users > 0 && num_rx > 0 && block_len > 0 && channel_len > 0,
                   "all dimensions must be positive");
    require_domain(channel_len <= block_len, "channel_len must not exceed block_len");
    require_domain(noise_var > 0.0, "noise_var must be positive");
    require_domain(grid_size >= 2, "grid_size must be at least 2");
    require_dim(papr_threshold.empty() || (int)papr_threshold.size() == num_users,
                "papr_threshold must have one entry per user");
    require_dim(gap.empty() || (int)gap.size() == num_users,
                "gap must have one entry per user");
    for (double d : papr_threshold)
      require_domain(d >= 1.0, "papr threshold below 1 (average would exceed peak)");
    for (double e : gap) require_domain(e >= 0.0, "gap must be nonnegative");
  }
};

}  // namespace ccpa
