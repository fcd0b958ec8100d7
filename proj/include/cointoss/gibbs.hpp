#pragma once

// Gibbs reweighting of a Bernoulli product.
//
// For every depth n the normalized measure nu_n(I) = mu(I)^q / sum_J mu(J)^q
// is consistent across depths and is itself a Bernoulli product with weights
// p'_j = p_j^q / (p_j^q + (1-p_j)^q). The reweighted sequence is therefore
// built level by level; no limit procedure is involved.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

#include "cointoss/cylinders.hpp"
#include "cointoss/spectrum.hpp"
#include "cointoss/weights.hpp"

namespace cointoss {

inline WeightSequence gibbs_reweight(const WeightSequence& w, double q) { return WeightSequence::gibbs(w, q); }

struct ConsistencyReport {
  unsigned depth = 0;
  double q = 0.0;
  double max_discrepancy = 0.0;  // max over depth-n cylinders of |nu_n(I) - nu_{n+1}(I0) - nu_{n+1}(I1)|
};

namespace detail {

// mu(I)^q / sum_J mu(J)^q over a full cylinder table, in log space.
inline std::vector<double> normalized_powers(const CylinderTable& table, double q) {
  std::vector<double> logs(table.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < table.size(); ++i) {
    logs[i] = q * std::log(table.measure(i));
    top = std::max(top, logs[i]);
  }
  double total = 0.0;
  for (double& l : logs) {
    l = std::exp(l - top);
    total += l;
  }
  for (double& l : logs) l /= total;
  return logs;
}

}  // namespace detail

// Brute-force check that the level-n and level-(n+1) normalized powers agree
// on every depth-n cylinder.
inline ConsistencyReport verify_consistency(const WeightSequence& w, double q, unsigned depth,
                                            unsigned cap = kDefaultEnumerationCap) {
  if (depth + 1 > cap) {
    throw BudgetError("consistency check at depth " + std::to_string(depth) + " needs depth " +
                      std::to_string(depth + 1) + " cylinders, above the cap of " + std::to_string(cap));
  }
  const auto coarse = detail::normalized_powers(enumerate_cylinders(w, depth, cap), q);
  const auto fine = detail::normalized_powers(enumerate_cylinders(w, depth + 1, cap), q);
  ConsistencyReport out{depth, q, 0.0};
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    out.max_discrepancy = std::max(out.max_discrepancy, std::abs(coarse[i] - (fine[2 * i] + fine[2 * i + 1])));
  }
  return out;
}

struct CompositionReport {
  double q = 0.0;
  double s = 0.0;
  Depth depth = 0;
  double reweighted = 0.0;  // tau_{nu,n}(s)
  double composed = 0.0;    // tau_{mu,n}(qs) - s tau_{mu,n}(q)
  double residual() const { return std::abs(reweighted - composed); }
};

// tau_{nu,n}(s) = tau_{mu,n}(qs) - s tau_{mu,n}(q) with nu the reweighting at q.
inline CompositionReport verify_tau_composition(const WeightSequence& w, double q, double s, Depth depth) {
  if (depth == 0) throw std::invalid_argument("depth must be >= 1");
  CompositionReport out{q, s, depth, 0.0, 0.0};
  out.reweighted = tau_n(gibbs_reweight(w, q), s, depth);
  out.composed = tau_n(w, q * s, depth) - s * tau_n(w, q, depth);
  return out;
}

// Tail extrema of -tau_{nu,n}'(1), the entropy of the reweighted sequence.
// Equals level_set_dimension_bound on the source sequence.
inline TailExtrema gibbs_dimension(const WeightSequence& w, double q, const DepthSchedule& schedule,
                                   Depth tail_start = 1) {
  return entropy_dimension(gibbs_reweight(w, q), schedule, tail_start);
}

}  // namespace cointoss
