#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

#include "ccpa/common.hpp"

namespace ccpa {

/// splitmix64 finalizer, used to fold stream tags into a seed.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic random stream. One experiment owns a root seed; substreams
/// are derived per (role, realization, user, ...) tags so results do not
/// depend on evaluation order or thread scheduling.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  static RngStream derive(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t s = mix64(seed);
    for (std::uint64_t t : tags) s = mix64(s ^ mix64(t));
    return RngStream(s);
  }

  /// Uniform in [0, 1).
  double uniform() {
    return (gen_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (self-contained for reproducibility).
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Circular complex Gaussian with total variance `var`.
  cplx cgaussian(double var) {
    double s = std::sqrt(var / 2.0);
    double re = gaussian();
    double im = gaussian();
    return {s * re, s * im};
  }

  /// Uniform integer in [0, bound); bound must divide 2^64 or be small enough
  /// that modulo bias is irrelevant (qpsk labels use bound = 2).
  std::uint64_t uniform_int(std::uint64_t bound) {
    return gen_() % bound;
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace ccpa
