#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ccpa/config.hpp"

namespace ccpa {

enum class Strategy { ccpa, ccpa_papr, ccpa_clip };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

/// Experiment description loaded from a flat key-value text file
/// (`key = value`, `#` comments). All dB quantities are converted to linear
/// at this boundary.
struct ExperimentConfig {
  SystemConfig sys;
  std::vector<double> target_mi_decoder;    // I_ring targets per user
  std::vector<double> target_mi_equalizer;  // empty: derive from decoder curve
  double delta_db = 6.0;                    // PAPR threshold / clip threshold
  Strategy strategy = Strategy::ccpa;
  int num_realizations = 20;
  int num_blocks = 200;       // Monte-Carlo blocks per trajectory step
  int delta_bar_samples = 100000;
  int max_traj_iters = 50;
  std::string decoder_curve;  // CSV fixture path
  std::string out_dir = ".";
  int threads = 1;

  static ExperimentConfig parse(std::istream& is);
  static ExperimentConfig load_file(const std::string& path);
  void validate() const;
};

}  // namespace ccpa
