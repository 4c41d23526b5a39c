#include "ccpa/papr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace ccpa {

namespace {

// Stable ln(sum_j c_j e^{x_j}) over positive-coefficient terms.
struct LogSumExp {
  double shift = -std::numeric_limits<double>::infinity();
  double sum = 0.0;

  void prepare(double x) { shift = std::max(shift, x); }
  void add(double coef, double x) { sum += coef * std::exp(x - shift); }
  double value() const { return shift + std::log(sum); }
};

}  // namespace

PaprModel::PaprModel(const SymbolBlock& block) {
  n_ = block.size();
  require_dim(n_ >= 2, "papr model needs at least two samples");
  for (const cplx& b : block.symbols)
    require_domain(std::abs(std::abs(b) - 1.0) < 1e-9, "papr model requires unit-modulus symbols");

  const int n = n_;
  // Integer unit roots: root[k] = exp(j 2 pi k / N); all phases below are
  // integer multiples of 2 pi / N.
  std::vector<cplx> root((std::size_t)n);
  for (int k = 0; k < n; ++k) root[k] = std::polar(1.0, 2.0 * M_PI * k / n);
  auto root_at = [&](long long units) -> const cplx& {
    long long k = units % n;
    if (k < 0) k += n;
    return root[(std::size_t)k];
  };

  const std::vector<cplx>& b = block.symbols;

  d_.assign((std::size_t)n, 0.0);
  coef_.assign((std::size_t)n, 0.0);
  for (int l = 0; l < n; ++l) {
    double acc = 0.0;
    for (int p = 1; p < n; ++p)
      for (int q = 0; q < p; ++q) {
        const cplx a = root_at((long long)l * (p - q));  // a_{lpq}
        const double rr = b[p].real() * b[q].real() + b[p].imag() * b[q].imag();
        const double ii = b[p].real() * b[q].imag() - b[p].imag() * b[q].real();
        acc += a.real() * rr + a.imag() * ii;
      }
    d_[l] = acc;
    coef_[l] = 1.0 + 2.0 * acc / n;
    if (coef_[l] < -1e-9)
      throw NumericalError("papr model invariant violated: 1 + 2 d_l / N negative at l=" +
                           std::to_string(l));
    coef_[l] = std::max(coef_[l], 0.0);
  }

  pairs_.reserve((std::size_t)n * (n - 1) / 2);
  for (int nn = 0; nn < n; ++nn)
    for (int i = nn + 1; i < n; ++i) pairs_.emplace_back(nn, i);

  eta_.assign((std::size_t)n * pairs_.size(), 0.0);
  for (int m = 0; m < n; ++m)
    for (std::size_t idx = 0; idx < pairs_.size(); ++idx) {
      const auto [nn, i] = pairs_[idx];
      double acc = 0.0;
      for (int p = 1; p < n; ++p)
        for (int q = 0; q < p; ++q) {
          // a_{npm} a*_{iqm} and a_{nqm} a*_{ipm} with a_{xym} = exp(j2pi x(y-m)/N).
          const cplx npq = root_at((long long)nn * (p - m) - (long long)i * (q - m));
          const cplx nqp = root_at((long long)nn * (q - m) - (long long)i * (p - m));
          const double rr = b[p].real() * b[q].real() + b[p].imag() * b[q].imag();
          const double ir = b[p].imag() * b[q].real() - b[p].real() * b[q].imag();
          acc += rr * (npq.real() + nqp.real()) - ir * (npq.imag() - nqp.imag());
        }
      eta_[(std::size_t)m * pairs_.size() + idx] = acc;
    }
}

std::vector<double> PaprModel::peak_power(std::span<const double> p) const {
  require_dim((int)p.size() == n_, "power row size mismatch");
  for (double v : p) require_domain(v >= 0.0, "negative power");
  const int n = n_;
  double linear = 0.0;
  for (int l = 0; l < n; ++l) linear += (1.0 + 2.0 * d_[l] / n) * p[l];
  std::vector<double> sqrt_p((std::size_t)n);
  for (int l = 0; l < n; ++l) sqrt_p[l] = std::sqrt(p[l]);
  std::vector<double> out((std::size_t)n);
  for (int m = 0; m < n; ++m) {
    double cross = 0.0;
    const double* em = &eta_[(std::size_t)m * pairs_.size()];
    for (std::size_t idx = 0; idx < pairs_.size(); ++idx) {
      const auto [nn, i] = pairs_[idx];
      cross += em[idx] * sqrt_p[nn] * sqrt_p[i];
    }
    out[m] = linear / n + 2.0 * cross / ((double)n * n);
  }
  return out;
}

double PaprModel::avg_power(std::span<const double> p) {
  double s = 0.0;
  for (double v : p) {
    require_domain(v >= 0.0, "negative power");
    s += v;
  }
  return s / (double)p.size();
}

double PaprModel::papr_db(std::span<const double> p) const {
  const double avg = avg_power(p);
  require_domain(avg > 0.0, "papr undefined for all-zero allocation");
  const std::vector<double> peaks = peak_power(p);
  double peak = 0.0;
  for (double v : peaks) peak = std::max(peak, v);
  return 10.0 * std::log10(peak / avg);
}

std::vector<double> PaprModel::constraint_residual(std::span<const double> p, double delta) const {
  require_dim((int)p.size() == n_, "power row size mismatch");
  const int n = n_;
  double linear = 0.0, total = 0.0;
  for (int l = 0; l < n; ++l) {
    require_domain(p[l] >= 0.0, "negative power");
    linear += (1.0 + 2.0 * d_[l] / n) * p[l];
    total += p[l];
  }
  std::vector<double> sqrt_p((std::size_t)n);
  for (int l = 0; l < n; ++l) sqrt_p[l] = std::sqrt(p[l]);
  std::vector<double> out((std::size_t)n);
  for (int m = 0; m < n; ++m) {
    double cross = 0.0;
    const double* em = &eta_[(std::size_t)m * pairs_.size()];
    for (std::size_t idx = 0; idx < pairs_.size(); ++idx) {
      const auto [nn, i] = pairs_[idx];
      cross += em[idx] * sqrt_p[nn] * sqrt_p[i];  // eta+ and eta- recombine
    }
    out[m] = linear + 2.0 * cross / n - delta * total;
  }
  return out;
}

double PaprModel::log_peak(std::span<const double> alpha, int m) const {
  require_dim((int)alpha.size() == n_, "alpha size mismatch");
  LogSumExp lse;
  for (int l = 0; l < n_; ++l)
    if (coef_[l] > 0.0) lse.prepare(alpha[l]);
  const double* em = &eta_[(std::size_t)m * pairs_.size()];
  for (std::size_t idx = 0; idx < pairs_.size(); ++idx)
    if (em[idx] > 0.0) {
      const auto [nn, i] = pairs_[idx];
      lse.prepare(0.5 * (alpha[nn] + alpha[i]));
    }
  for (int l = 0; l < n_; ++l)
    if (coef_[l] > 0.0) lse.add(coef_[l], alpha[l]);
  for (std::size_t idx = 0; idx < pairs_.size(); ++idx)
    if (em[idx] > 0.0) {
      const auto [nn, i] = pairs_[idx];
      lse.add(2.0 * em[idx] / n_, 0.5 * (alpha[nn] + alpha[i]));
    }
  return lse.value();
}

double PaprModel::log_budget(std::span<const double> alpha, double delta, int m) const {
  require_dim((int)alpha.size() == n_, "alpha size mismatch");
  require_domain(delta >= 1.0, "papr threshold below 1");
  LogSumExp lse;
  for (int l = 0; l < n_; ++l) lse.prepare(alpha[l]);
  const double* em = &eta_[(std::size_t)m * pairs_.size()];
  for (std::size_t idx = 0; idx < pairs_.size(); ++idx)
    if (em[idx] < 0.0) {
      const auto [nn, i] = pairs_[idx];
      lse.prepare(0.5 * (alpha[nn] + alpha[i]));
    }
  for (int l = 0; l < n_; ++l) lse.add(delta, alpha[l]);
  for (std::size_t idx = 0; idx < pairs_.size(); ++idx)
    if (em[idx] < 0.0) {
      const auto [nn, i] = pairs_[idx];
      lse.add(-2.0 * em[idx] / n_, 0.5 * (alpha[nn] + alpha[i]));
    }
  return lse.value();
}

std::vector<double> PaprModel::log_budget_grad(std::span<const double> alpha, double delta,
                                               int m) const {
  require_dim((int)alpha.size() == n_, "alpha size mismatch");
  const int n = n_;
  // Shift all exponents by max(alpha); numerator and denominator share the
  // same factor so the ratio is unchanged.
  double shift = alpha[0];
  for (double a : alpha) shift = std::max(shift, a);
  std::vector<double> ea((std::size_t)n);
  for (int l = 0; l < n; ++l) ea[l] = std::exp(alpha[l] - shift);
  const double* em = &eta_[(std::size_t)m * pairs_.size()];

  double den = 0.0;
  for (int l = 0; l < n; ++l) den += delta * ea[l];
  std::vector<double> num((std::size_t)n);
  for (int l = 0; l < n; ++l) num[l] = delta * ea[l];
  for (std::size_t idx = 0; idx < pairs_.size(); ++idx) {
    const double e_minus = std::min(em[idx], 0.0);
    if (e_minus == 0.0) continue;
    const auto [nn, i] = pairs_[idx];
    const double term = std::exp(0.5 * (alpha[nn] + alpha[i]) - shift);
    den += -2.0 * e_minus / n * term;
    num[nn] += -e_minus / n * term;
    num[i] += -e_minus / n * term;
  }
  std::vector<double> out((std::size_t)n);
  for (int l = 0; l < n; ++l) out[l] = num[l] / den;
  return out;
}

double PaprModel::log_budget_tangent(std::span<const double> alpha,
                                     std::span<const double> alpha_hat, double delta,
                                     int m) const {
  require_dim(alpha.size() == alpha_hat.size(), "alpha / alpha_hat size mismatch");
  double t = log_budget(alpha_hat, delta, m);
  const std::vector<double> g = log_budget_grad(alpha_hat, delta, m);
  for (int k = 0; k < n_; ++k) t += g[k] * (alpha[k] - alpha_hat[k]);
  return t;
}

void PaprModel::dump_csv(std::ostream& os) const {
  os << "kind,i1,i2,i3,value\n";
  char buf[80];
  for (int l = 0; l < n_; ++l) {
    std::snprintf(buf, sizeof buf, "d,%d,0,0,%.17g\n", l, d_[l]);
    os << buf;
  }
  for (int m = 0; m < n_; ++m)
    for (std::size_t idx = 0; idx < pairs_.size(); ++idx) {
      const auto [nn, i] = pairs_[idx];
      std::snprintf(buf, sizeof buf, "eta,%d,%d,%d,%.17g\n", nn, i, m, eta(m, (int)idx));
      os << buf;
    }
}

}  // namespace ccpa
