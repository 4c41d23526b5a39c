#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "ccpa/common.hpp"

namespace ccpa {

/// Per-user per-bin transmit powers. Linear view `p` is always populated;
/// the log view `alpha` exists only when requested and then satisfies
/// p = exp(alpha) elementwise with p held above a strictly positive floor
/// (log coordinates cannot represent zero power).
struct PowerAllocation {
  int num_users = 0;
  int block_len = 0;
  std::vector<double> p;      // row-major [u][n], >= 0
  std::vector<double> alpha;  // empty until refresh_log_view()

  static PowerAllocation from_linear(int users, int len, std::vector<double> values) {
    require_dim((int)values.size() == users * len, "power vector size mismatch");
    for (double v : values) require_domain(v >= 0.0, "negative power");
    PowerAllocation out;
    out.num_users = users;
    out.block_len = len;
    out.p = std::move(values);
    return out;
  }

  static PowerAllocation uniform(int users, int len, double value) {
    return from_linear(users, len, std::vector<double>((std::size_t)users * len, value));
  }

  static PowerAllocation from_log(int users, int len, std::vector<double> log_values) {
    require_dim((int)log_values.size() == users * len, "alpha vector size mismatch");
    PowerAllocation out;
    out.num_users = users;
    out.block_len = len;
    out.alpha = std::move(log_values);
    out.p.resize(out.alpha.size());
    for (std::size_t i = 0; i < out.alpha.size(); ++i) out.p[i] = std::exp(out.alpha[i]);
    return out;
  }

  double at(int u, int n) const { return p[(std::size_t)u * block_len + n]; }
  double& at(int u, int n) { return p[(std::size_t)u * block_len + n]; }

  std::span<const double> row(int u) const {
    return {p.data() + (std::size_t)u * block_len, (std::size_t)block_len};
  }

  double total() const {
    double s = 0.0;
    for (double v : p) s += v;
    return s;
  }

  /// Populates the log view, lifting entries below `floor` to the floor so
  /// both views stay consistent.
  void refresh_log_view(double floor) {
    require_domain(floor > 0.0, "power floor must be positive");
    alpha.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] < floor) p[i] = floor;
      alpha[i] = std::log(p[i]);
    }
  }
};

}  // namespace ccpa
