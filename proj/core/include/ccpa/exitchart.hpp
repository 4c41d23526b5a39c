#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ccpa/common.hpp"
#include "ccpa/rng.hpp"

namespace ccpa {

/// Mutual information of a consistent Gaussian LLR (variance = 2 x mean)
/// with standard deviation sigma. Strictly increasing, J(0) = 0, -> 1.
double j_function(double sigma);

/// Inverse of j_function on [0, 1); throws DomainError at mi >= 1.
double j_inverse(double mi);

/// Residual interference E[1 - |soft symbol|^2] for Gray QPSK under the
/// Gaussian a-priori model at mutual information `mi`; Monte-Carlo estimate
/// over `samples` draws, deterministic per seed.
double delta_bar_of_mi(double mi, int samples, std::uint64_t seed);

/// MI target pair -> bit error probability,
/// 0.5 erfc( sqrt(Jinv(I_A)^2 + Jinv(I_E)^2) / (2 sqrt 2) ).
double bep_of_targets(double i_a_target, double i_e_target);

/// Per-bit a-priori LLR draw conditioned on the transmitted bit, consistent
/// Gaussian at mutual information `mi`.
double draw_apriori_llr(int bit, double mi_sigma, RngStream& rng);

/// Ergodic MI estimate from LLR samples pre-multiplied by the bit sign
/// (+1 for bit 0, -1 for bit 1): 1 - mean(log2(1 + e^-x)), clamped to [0,1].
double mi_from_llr_samples(std::span<const double> signed_llrs);

/// Monotone decoder (or equalizer) transfer curve with piecewise-cubic
/// monotone interpolation between measured samples.
class ExitCurve {
 public:
  static ExitCurve from_samples(std::vector<double> i_a, std::vector<double> i_e);
  /// CSV rows `I_A,I_E`; `#`-prefixed lines (provenance header) are skipped.
  static ExitCurve load_csv(std::istream& is);
  static ExitCurve load_csv_file(const std::string& path);
  static ExitCurve identity(int samples);

  double value(double i_a) const;    // f(i_a), clamped to the sample range
  /// Inverse map; flat-extended to 0 below f(0), throws DomainError above
  /// the covered range.
  double inverse(double i_e) const;
  double max_output() const { return i_e_.back(); }
  int sample_count() const { return (int)i_a_.size(); }
  double sample_ia(int k) const { return i_a_[k]; }
  double sample_ie(int k) const { return i_e_[k]; }

 private:
  std::vector<double> i_a_, i_e_, deriv_;
};

/// Memoized delta_bar_of_mi with a fixed sample count and seed.
class DeltaBarCache {
 public:
  DeltaBarCache(int samples, std::uint64_t seed) : samples_(samples), seed_(seed) {}
  double operator()(double mi) const;

 private:
  int samples_;
  std::uint64_t seed_;
  mutable std::map<long long, double> memo_;
};

/// Discretized convergence condition along the diagonal: per user, K mutual
/// information points from 0 to the target with the required SINR threshold
/// xi and LLR std sigma_ring at each point.
struct ConvergenceTargets {
  int num_users = 0;
  int grid_size = 0;
  std::vector<double> mi_grid;     // [u][k], strictly increasing in k
  std::vector<double> eps;         // [u][k], eps_u for k<K-1, 0 at the target
  std::vector<double> sigma_ring;  // [u][k]
  std::vector<double> delta_bar;   // [u][k]
  std::vector<double> xi;          // [u][k]

  double at(const std::vector<double>& v, int u, int k) const {
    return v[(std::size_t)u * grid_size + k];
  }
  double mi(int u, int k) const { return at(mi_grid, u, k); }
  double gap(int u, int k) const { return at(eps, u, k); }
  double sigma(int u, int k) const { return at(sigma_ring, u, k); }
  double dbar(int u, int k) const { return at(delta_bar, u, k); }
  double threshold(int u, int k) const { return at(xi, u, k); }
};

ConvergenceTargets build_targets(const std::vector<ExitCurve>& decoders, int grid_size,
                                 std::span<const double> eps_user,
                                 std::span<const double> mi_target, const DeltaBarCache& dbar);

enum class TrajectoryStatus { fixed_point, max_iters };

struct TrajectoryPoint {
  int iter;
  int user;
  double i_hat_e;   // equalizer output MI
  double i_ring_e;  // decoder output MI
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
  TrajectoryStatus status = TrajectoryStatus::max_iters;
  int iterations = 0;
  std::vector<double> final_i_hat, final_i_ring;
};

/// Alternates an equalizer evaluation (a-priori MI vector -> extrinsic MI
/// vector) with the decoder curves until the decoder outputs stop moving.
using EqualizerEvaluator = std::function<std::vector<double>(const std::vector<double>&)>;
Trajectory simulate_trajectory(const EqualizerEvaluator& equalizer,
                               const std::vector<ExitCurve>& decoders, int max_iters,
                               double tol = 1e-5);

/// Trajectory CSV: `iter,user,I_hat_E,I_ring_E`.
void save_trajectory_csv(std::ostream& os, const Trajectory& t);

}  // namespace ccpa
