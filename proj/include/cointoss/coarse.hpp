#pragma once

// Coarse-grained multifractal spectrum: histogram of local exponents over all
// depth-n cylinders.
//
// N_n(bin) counts the cylinders I with -log2 mu(I) / n inside the bin, and
// log2 N_n / n is compared with the Legendre transform of tau_n. For a bin
// [a, b] a Chernoff bound gives, at every finite n,
//
//   log2 N_n / n <= inf_q ( max(a q, b q) + tau_n(q) ),
//
// which is the inequality `coarse_spectrum_bound` evaluates.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "cointoss/cylinders.hpp"
#include "cointoss/spectrum.hpp"
#include "cointoss/weights.hpp"

namespace cointoss {

struct AlphaBins {
  double lo = 0.0;
  double hi = 2.0;
  std::size_t count = 40;

  double width() const { return (hi - lo) / static_cast<double>(count); }
  double left(std::size_t i) const { return lo + width() * static_cast<double>(i); }
  double right(std::size_t i) const { return lo + width() * static_cast<double>(i + 1); }
  double center(std::size_t i) const { return lo + width() * (static_cast<double>(i) + 0.5); }

  void validate() const {
    if (!(hi > lo) || count == 0 || !std::isfinite(lo) || !std::isfinite(hi)) {
      throw std::invalid_argument("alpha bins need lo < hi and a positive count");
    }
  }
};

struct CoarseSpectrum {
  unsigned depth = 0;
  AlphaBins bins;
  std::vector<std::uint64_t> counts;
  std::uint64_t below = 0;  // exponents under bins.lo
  std::uint64_t above = 0;  // exponents at or over bins.hi

  std::uint64_t total() const {
    std::uint64_t t = below + above;
    for (auto c : counts) t += c;
    return t;
  }

  // log2 N / n; -inf for empty bins.
  double normalized(std::size_t i) const {
    if (counts[i] == 0) return -std::numeric_limits<double>::infinity();
    return std::log2(static_cast<double>(counts[i])) / static_cast<double>(depth);
  }
};

inline CoarseSpectrum coarse_spectrum(const WeightSequence& w, unsigned depth, const AlphaBins& bins,
                                      unsigned cap = kDefaultEnumerationCap) {
  bins.validate();
  if (depth == 0) throw std::invalid_argument("coarse spectrum needs depth >= 1");
  if (depth > cap) {
    throw BudgetError("coarse spectrum depth " + std::to_string(depth) + " exceeds the cap of " + std::to_string(cap));
  }
  // Accumulate -log2 mu(I) directly so deep cylinders do not underflow.
  std::vector<double> level{0.0};
  for (unsigned j = 1; j <= depth; ++j) {
    const double p = w.at(j);
    const double l0 = -std::log2(p);
    const double l1 = -detail::log2_complement(p);
    std::vector<double> next(level.size() * 2);
    for (std::size_t i = 0; i < level.size(); ++i) {
      next[2 * i] = level[i] + l0;
      next[2 * i + 1] = level[i] + l1;
    }
    level = std::move(next);
  }
  CoarseSpectrum out;
  out.depth = depth;
  out.bins = bins;
  out.counts.assign(bins.count, 0);
  const double n = static_cast<double>(depth);
  for (double e : level) {
    const double alpha = e / n;
    if (alpha < bins.lo) {
      ++out.below;
      continue;
    }
    const auto k = static_cast<std::size_t>(std::floor((alpha - bins.lo) / bins.width()));
    if (k >= bins.count) {
      ++out.above;
    } else {
      ++out.counts[k];
    }
  }
  return out;
}

// Chernoff upper bound for bin i, minimized over the given q grid.
inline double coarse_spectrum_bound(const WeightSequence& w, unsigned depth, const AlphaBins& bins, std::size_t i,
                                    const std::vector<double>& q_grid) {
  double best = std::numeric_limits<double>::infinity();
  for (double q : q_grid) {
    const double edge = q >= 0.0 ? bins.right(i) : bins.left(i);
    best = std::min(best, edge * q + tau_n(w, q, depth));
  }
  return best;
}

}  // namespace cointoss
