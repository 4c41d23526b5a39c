#include "ccpa/expconfig.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace ccpa {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::ccpa: return "ccpa";
    case Strategy::ccpa_papr: return "ccpa_papr";
    case Strategy::ccpa_clip: return "ccpa_clip";
  }
  return "?";
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "ccpa") return Strategy::ccpa;
  if (s == "ccpa_papr") return Strategy::ccpa_papr;
  if (s == "ccpa_clip") return Strategy::ccpa_clip;
  throw FormatError("unknown strategy '" + s + "' (expected ccpa|ccpa_papr|ccpa_clip)");
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

std::vector<double> parse_list(const std::string& v, int row) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw FormatError("config row " + std::to_string(row) + ": bad number '" + item + "'");
    }
  }
  if (out.empty()) throw FormatError("config row " + std::to_string(row) + ": empty value");
  return out;
}

std::vector<double> per_user(std::vector<double> v, int users, const std::string& key) {
  if ((int)v.size() == 1) return std::vector<double>((std::size_t)users, v[0]);
  if ((int)v.size() != users)
    throw FormatError("config key '" + key + "': expected 1 or " + std::to_string(users) +
                      " values");
  return v;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(std::istream& is) {
  ExperimentConfig cfg;
  std::vector<double> papr_db_raw, gap_raw, tgt_dec_raw, tgt_eq_raw;
  bool have_delta_db = false;

  std::string line;
  int row = 0;
  while (std::getline(is, line)) {
    ++row;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("config row " + std::to_string(row) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto num = [&] { return parse_list(value, row); };
    auto single = [&] {
      const std::vector<double> v = num();
      if (v.size() != 1)
        throw FormatError("config row " + std::to_string(row) + ": expected a single value");
      return v[0];
    };

    if (key == "num_users") cfg.sys.num_users = (int)single();
    else if (key == "num_rx") cfg.sys.num_rx = (int)single();
    else if (key == "block_len") cfg.sys.block_len = (int)single();
    else if (key == "channel_len") cfg.sys.channel_len = (int)single();
    else if (key == "noise_var") cfg.sys.noise_var = single();
    else if (key == "grid_size") cfg.sys.grid_size = (int)single();
    else if (key == "seed") cfg.sys.rng_seed = (std::uint64_t)single();
    else if (key == "delta_db") { cfg.delta_db = single(); have_delta_db = true; }
    else if (key == "papr_threshold_db") papr_db_raw = num();
    else if (key == "gap") gap_raw = num();
    else if (key == "target_mi_decoder") tgt_dec_raw = num();
    else if (key == "target_mi_equalizer") {
      if (value != "auto") tgt_eq_raw = num();
    }
    else if (key == "strategy") cfg.strategy = strategy_from_string(value);
    else if (key == "num_realizations") cfg.num_realizations = (int)single();
    else if (key == "num_blocks") cfg.num_blocks = (int)single();
    else if (key == "delta_bar_samples") cfg.delta_bar_samples = (int)single();
    else if (key == "max_traj_iters") cfg.max_traj_iters = (int)single();
    else if (key == "decoder_curve") cfg.decoder_curve = value;
    else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "threads") cfg.threads = (int)single();
    else throw FormatError("config row " + std::to_string(row) + ": unknown key '" + key + "'");
  }

  const int users = cfg.sys.num_users;
  if (!papr_db_raw.empty()) {
    papr_db_raw = per_user(papr_db_raw, users, "papr_threshold_db");
  } else if (have_delta_db) {
    papr_db_raw.assign((std::size_t)users, cfg.delta_db);
  }
  cfg.sys.papr_threshold.clear();
  for (double db : papr_db_raw) cfg.sys.papr_threshold.push_back(db_to_linear(db));
  cfg.sys.gap = gap_raw.empty() ? std::vector<double>((std::size_t)users, 0.01)
                                : per_user(gap_raw, users, "gap");
  cfg.target_mi_decoder = tgt_dec_raw.empty()
                              ? std::vector<double>((std::size_t)users, 0.9998)
                              : per_user(tgt_dec_raw, users, "target_mi_decoder");
  if (!tgt_eq_raw.empty())
    cfg.target_mi_equalizer = per_user(tgt_eq_raw, users, "target_mi_equalizer");
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open config file " + path);
  return parse(is);
}

void ExperimentConfig::validate() const {
  sys.validate();
  require_domain(delta_db >= 0.0, "delta_db below 0 dB (threshold below 1) rejected");
  require_domain(num_realizations > 0 && num_blocks > 0, "realization/block counts must be positive");
  require_domain(delta_bar_samples > 0 && max_traj_iters > 0, "sample counts must be positive");
  require_domain(threads >= 1, "threads must be >= 1");
  for (double t : target_mi_decoder) require_domain(t > 0.0 && t < 1.0, "decoder MI target outside (0,1)");
  for (double t : target_mi_equalizer)
    require_domain(t > 0.0 && t < 1.0, "equalizer MI target outside (0,1)");
}

}  // namespace ccpa
