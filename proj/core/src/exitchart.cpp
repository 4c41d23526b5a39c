#include "ccpa/exitchart.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ccpa {

// Curve-fit constants for the consistent-Gaussian information measure
// (Brannstrom-style single-form fit).
namespace {
constexpr double kH1 = 0.3073;
constexpr double kH2 = 0.8935;
constexpr double kH3 = 1.1064;
constexpr double kMiCeil = 1.0 - 1e-12;
}  // namespace

double j_function(double sigma) {
  if (sigma <= 0.0) return 0.0;
  const double e = -kH1 * std::pow(sigma, 2.0 * kH2);
  const double inner = 1.0 - std::exp2(e);
  const double v = std::pow(inner, kH3);
  return std::min(v, kMiCeil);
}

double j_inverse(double mi) {
  if (mi >= 1.0) throw DomainError("j_inverse: mutual information must be below 1");
  if (mi <= 0.0) return 0.0;
  const double inner = std::pow(mi, 1.0 / kH3);
  const double e = std::log2(1.0 - inner);
  return std::pow(-e / kH1, 1.0 / (2.0 * kH2));
}

double delta_bar_of_mi(double mi, int samples, std::uint64_t seed) {
  require_domain(mi >= 0.0 && mi <= 1.0, "mutual information outside [0,1]");
  if (mi >= kMiCeil) return 0.0;
  if (mi <= 0.0) return 1.0;
  const double sigma = j_inverse(mi);
  const double mean = sigma * sigma / 2.0;
  RngStream rng = RngStream::derive(seed, {0xD3AAULL});
  double acc = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double llr = mean + sigma * rng.gaussian();
    const double t = std::tanh(llr / 2.0);
    acc += t * t;
  }
  return std::clamp(1.0 - acc / samples, 0.0, 1.0);
}

double bep_of_targets(double i_a_target, double i_e_target) {
  const double sa = j_inverse(i_a_target);
  const double se = j_inverse(i_e_target);
  return 0.5 * std::erfc(std::sqrt(sa * sa + se * se) / (2.0 * std::sqrt(2.0)));
}

double draw_apriori_llr(int bit, double mi_sigma, RngStream& rng) {
  const double sign = bit == 0 ? 1.0 : -1.0;
  return sign * mi_sigma * mi_sigma / 2.0 + mi_sigma * rng.gaussian();
}

double mi_from_llr_samples(std::span<const double> signed_llrs) {
  if (signed_llrs.empty()) return 0.0;
  double acc = 0.0;
  for (double x : signed_llrs) {
    // log2(1 + e^-x) via a stable softplus
    const double sp = std::max(-x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    acc += sp / M_LN2;
  }
  return std::clamp(1.0 - acc / signed_llrs.size(), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// ExitCurve

namespace {

// Fritsch-Carlson shape-preserving derivative estimates.
std::vector<double> pchip_derivatives(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = (int)x.size();
  std::vector<double> h(n - 1), delta(n - 1), d(n);
  for (int i = 0; i < n - 1; ++i) {
    h[i] = x[i + 1] - x[i];
    delta[i] = (y[i + 1] - y[i]) / h[i];
  }
  if (n == 2) {
    d[0] = d[1] = delta[0];
    return d;
  }
  for (int i = 1; i < n - 1; ++i) {
    if (delta[i - 1] * delta[i] <= 0.0) {
      d[i] = 0.0;
    } else {
      const double w1 = 2.0 * h[i] + h[i - 1];
      const double w2 = h[i] + 2.0 * h[i - 1];
      d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
  }
  auto endpoint = [](double h0, double h1, double d0, double d1) {
    double v = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (v * d0 <= 0.0)
      v = 0.0;
    else if (d0 * d1 <= 0.0 && std::abs(v) > 3.0 * std::abs(d0))
      v = 3.0 * d0;
    return v;
  };
  d[0] = endpoint(h[0], h[1], delta[0], delta[1]);
  d[n - 1] = endpoint(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  return d;
}

}  // namespace

ExitCurve ExitCurve::from_samples(std::vector<double> i_a, std::vector<double> i_e) {
  if (i_a.size() != i_e.size() || i_a.size() < 2)
    throw FormatError("exit curve: need at least two (I_A, I_E) samples");
  for (std::size_t r = 0; r < i_a.size(); ++r) {
    if (!(i_a[r] >= 0.0 && i_a[r] <= 1.0 && i_e[r] >= 0.0 && i_e[r] <= 1.0))
      throw FormatError("exit curve: value outside [0,1] at row " + std::to_string(r + 1));
    if (r > 0 && !(i_a[r] > i_a[r - 1]))
      throw FormatError("exit curve: I_A not strictly increasing at row " + std::to_string(r + 1));
    if (r > 0 && !(i_e[r] > i_e[r - 1]))
      throw FormatError("exit curve: I_E not strictly increasing at row " + std::to_string(r + 1));
  }
  ExitCurve c;
  c.i_a_ = std::move(i_a);
  c.i_e_ = std::move(i_e);
  c.deriv_ = pchip_derivatives(c.i_a_, c.i_e_);
  return c;
}

ExitCurve ExitCurve::load_csv(std::istream& is) {
  std::vector<double> ia, ie;
  std::string line;
  int row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("I_A", 0) == 0 || line.rfind("i_a", 0) == 0) continue;
    double a, e;
    if (std::sscanf(line.c_str(), "%lf,%lf", &a, &e) != 2)
      throw FormatError("exit curve: bad row " + std::to_string(row));
    ia.push_back(a);
    ie.push_back(e);
  }
  return from_samples(std::move(ia), std::move(ie));
}

ExitCurve ExitCurve::load_csv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path);
  return load_csv(is);
}

ExitCurve ExitCurve::identity(int samples) {
  std::vector<double> g((std::size_t)samples);
  for (int k = 0; k < samples; ++k) g[k] = (double)k / (samples - 1);
  return from_samples(g, g);
}

double ExitCurve::value(double x) const {
  if (x <= i_a_.front()) return i_e_.front();
  if (x >= i_a_.back()) return i_e_.back();
  const auto it = std::upper_bound(i_a_.begin(), i_a_.end(), x);
  const int i = (int)(it - i_a_.begin()) - 1;
  const double h = i_a_[i + 1] - i_a_[i];
  const double t = (x - i_a_[i]) / h;
  const double h00 = (1 + 2 * t) * (1 - t) * (1 - t);
  const double h10 = t * (1 - t) * (1 - t);
  const double h01 = t * t * (3 - 2 * t);
  const double h11 = t * t * (t - 1);
  return h00 * i_e_[i] + h10 * h * deriv_[i] + h01 * i_e_[i + 1] + h11 * h * deriv_[i + 1];
}

double ExitCurve::inverse(double y) const {
  if (y <= i_e_.front()) return i_a_.front();
  if (y > i_e_.back())
    throw DomainError("exit curve inverse: output above the curve's range");
  double lo = i_a_.front(), hi = i_a_.back();
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    (value(mid) < y ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------

double DeltaBarCache::operator()(double mi) const {
  const long long key = llround(std::clamp(mi, 0.0, 1.0) * 1e9);
  auto it = memo_.find(key);
  if (it != memo_.end()) return it->second;
  const double v = delta_bar_of_mi((double)key * 1e-9, samples_, seed_);
  memo_.emplace(key, v);
  return v;
}

ConvergenceTargets build_targets(const std::vector<ExitCurve>& decoders, int grid_size,
                                 std::span<const double> eps_user,
                                 std::span<const double> mi_target, const DeltaBarCache& dbar) {
  const int users = (int)decoders.size();
  require_dim((int)eps_user.size() == users && (int)mi_target.size() == users,
              "per-user parameter count mismatch");
  require_domain(grid_size >= 2, "grid needs at least two points");
  ConvergenceTargets t;
  t.num_users = users;
  t.grid_size = grid_size;
  const std::size_t total = (std::size_t)users * grid_size;
  t.mi_grid.resize(total);
  t.eps.resize(total);
  t.sigma_ring.resize(total);
  t.delta_bar.resize(total);
  t.xi.resize(total);
  for (int u = 0; u < users; ++u) {
    require_domain(mi_target[u] > 0.0 && mi_target[u] < 1.0, "decoder MI target outside (0,1)");
    for (int k = 0; k < grid_size; ++k) {
      const std::size_t at = (std::size_t)u * grid_size + k;
      const double mi = mi_target[u] * (double)k / (grid_size - 1);
      const double eps = k + 1 < grid_size ? eps_user[u] : 0.0;
      double need;
      try {
        need = decoders[u].inverse(mi) + eps;
      } catch (const DomainError&) {
        throw InfeasibleTargetError("decoder curve does not reach MI target for user " +
                                    std::to_string(u));
      }
      if (need >= 1.0)
        throw InfeasibleTargetError("required equalizer MI >= 1 at grid point " +
                                    std::to_string(k) + " for user " + std::to_string(u));
      const double sr = j_inverse(need);
      const double db = dbar(mi);
      t.mi_grid[at] = mi;
      t.eps[at] = eps;
      t.sigma_ring[at] = sr;
      t.delta_bar[at] = db;
      t.xi[at] = sr * sr / (4.0 + sr * sr * db);
    }
  }
  return t;
}

Trajectory simulate_trajectory(const EqualizerEvaluator& equalizer,
                               const std::vector<ExitCurve>& decoders, int max_iters,
                               double tol) {
  const int users = (int)decoders.size();
  Trajectory out;
  std::vector<double> i_ring((std::size_t)users, 0.0);
  out.final_i_hat.assign((std::size_t)users, 0.0);
  out.final_i_ring = i_ring;
  for (int iter = 1; iter <= max_iters; ++iter) {
    const std::vector<double> i_hat = equalizer(i_ring);
    require_dim((int)i_hat.size() == users, "equalizer evaluator user count mismatch");
    double move = 0.0;
    for (int u = 0; u < users; ++u) {
      const double next = decoders[u].value(i_hat[u]);
      move = std::max(move, std::abs(next - i_ring[u]));
      i_ring[u] = next;
      out.points.push_back({iter, u, i_hat[u], next});
    }
    out.final_i_hat = i_hat;
    out.final_i_ring = i_ring;
    out.iterations = iter;
    if (move < tol) {
      out.status = TrajectoryStatus::fixed_point;
      return out;
    }
  }
  out.status = TrajectoryStatus::max_iters;
  return out;
}

void save_trajectory_csv(std::ostream& os, const Trajectory& t) {
  os << "iter,user,I_hat_E,I_ring_E\n";
  char buf[96];
  for (const TrajectoryPoint& p : t.points) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.6f,%.6f\n", p.iter, p.user, p.i_hat_e, p.i_ring_e);
    os << buf;
  }
}

}  // namespace ccpa
