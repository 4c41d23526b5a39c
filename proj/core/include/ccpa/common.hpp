#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace ccpa {

using cplx = std::complex<double>;

/// Inputs with inconsistent vector/matrix sizes.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Inputs outside the mathematical domain of an operation (negative power,
/// mutual information >= 1, ...).
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Malformed file content; the message names the offending row.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Convergence targets that cannot be met (tunnel closed, bisection cap hit).
struct InfeasibleTargetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Internal numerical failure (non-descent Newton step, violated model
/// invariant). Indicates a bug or a degenerate instance, not bad user input.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require_dim(bool ok, const std::string& msg) {
  if (!ok) throw DimensionError(msg);
}

inline void require_domain(bool ok, const std::string& msg) {
  if (!ok) throw DomainError(msg);
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

}  // namespace ccpa
