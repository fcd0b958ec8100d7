#pragma once

// Scalar kernels for the homogeneous coin-tossing measure of parameter p.
//
// Everything is in base 2. For a fixed p in (0,1) the L^q-spectrum is
//
//   tau(p, q) = log2(p^q + (1-p)^q),
//
// and its q-derivatives are expectations under the tilted weight
// w = p^q / (p^q + (1-p)^q):
//
//   tau'(p, q)  = w log2 p + (1-w) log2(1-p)
//   tau''(p, q) = ln 2 * w (1-w) (log2(p / (1-p)))^2
//
// All evaluations go through the log-ratio x = q ln((1-p)/p) so that large
// |q| (including negative q) neither overflows nor cancels.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cointoss {

inline constexpr double kLn2 = std::numbers::ln2;

inline void require_probability(double p, const char* what = "weight") {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument(std::string(what) + " must lie in the open interval (0,1), got " +
                                std::to_string(p));
  }
}

namespace detail {

inline double log2_complement(double p) { return std::log1p(-p) / kLn2; }

// q * ln((1-p)/p)
inline double tilt_exponent(double p, double q) { return q * (std::log1p(-p) - std::log(p)); }

// 1 / (1 + e^x) without overflow.
inline double logistic_neg(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

}  // namespace detail

// Weight of digit 0 in the Gibbs reweighting at parameter q.
inline double gibbs_weight(double p, double q) {
  if (q == 1.0) return p;
  if (q == 0.0) return 0.5;
  // For extreme q the exact weight can round to 0 or 1; keep it a valid weight.
  return std::clamp(detail::logistic_neg(detail::tilt_exponent(p, q)), std::numeric_limits<double>::denorm_min(),
                    1.0 - std::numeric_limits<double>::epsilon() / 2);
}

inline double tau_single(double p, double q) {
  if (q == 0.0) return 1.0;
  if (q == 1.0) return 0.0;
  if (p > 0.5) p = 1.0 - p;  // exact; tau, tau' and tau'' are symmetric in p
  const double a = q * std::log2(p);
  const double b = q * detail::log2_complement(p);
  if (a == b) return a + 1.0;
  const double hi = a > b ? a : b;
  const double lo = a > b ? b : a;
  return hi + std::log1p(std::exp2(lo - hi)) / kLn2;
}

inline double tau_single_d1(double p, double q) {
  if (p > 0.5) p = 1.0 - p;
  const double x = detail::tilt_exponent(p, q);
  const double w = detail::logistic_neg(x);
  const double wc = detail::logistic_neg(-x);
  return w * std::log2(p) + wc * detail::log2_complement(p);
}

// The true second derivative: ln 2 * w (1-w) (log2(p/(1-p)))^2 with w the
// tilted weight. It stays below [4p(1-p)]^q (log2(p/(1-p)))^2.
inline double tau_single_d2(double p, double q) {
  if (p > 0.5) p = 1.0 - p;
  const double x = detail::tilt_exponent(p, q);
  const double w = detail::logistic_neg(x);
  const double wc = detail::logistic_neg(-x);
  const double r = std::log2(p) - detail::log2_complement(p);
  return kLn2 * w * wc * r * r;
}

// Shannon entropy in bits; equals -tau'(p, 1).
inline double binary_entropy(double p) {
  return -p * std::log2(p) - (1.0 - p) * detail::log2_complement(p);
}

}  // namespace cointoss
