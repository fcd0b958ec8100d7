#pragma once

// L^q-spectra of inhomogeneous Bernoulli products.
//
// For a weight sequence (p_j) the depth-n spectrum is an average of the
// homogeneous ones,
//
//   tau_n(q) = (1/n) sum_{j<=n} tau(p_j, q),
//
// and tau(q) = limsup_n tau_n(q). Limits are estimated from finite depth
// schedules; the estimates are running extrema over the tail of a schedule.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cointoss/cylinders.hpp"
#include "cointoss/kernels.hpp"
#include "cointoss/weights.hpp"

namespace cointoss {

// ---------------------------------------------------------------------------
// Depth schedules

// Increasing list of depths at which sequence quantities are sampled.
class DepthSchedule {
 public:
  DepthSchedule() = default;
  explicit DepthSchedule(std::vector<Depth> depths) : depths_(std::move(depths)) {
    if (depths_.empty()) throw std::invalid_argument("depth schedule is empty");
    if (depths_.front() == 0) throw std::invalid_argument("depth schedule must start at depth >= 1");
    for (std::size_t i = 1; i < depths_.size(); ++i) {
      if (depths_[i] <= depths_[i - 1]) throw std::invalid_argument("depth schedule must be strictly increasing");
    }
  }

  // first, first+step, ... <= last
  static DepthSchedule linear(Depth first, Depth last, Depth step = 1) {
    if (step == 0) throw std::invalid_argument("schedule step must be positive");
    std::vector<Depth> d;
    for (Depth n = first; n <= last; n += step) d.push_back(n);
    return DepthSchedule(std::move(d));
  }

  // Roughly geometric progression from first to last (inclusive), deduplicated.
  static DepthSchedule geometric(Depth first, Depth last, double ratio) {
    if (!(ratio > 1.0)) throw std::invalid_argument("geometric schedule ratio must exceed 1");
    std::vector<Depth> d;
    for (double x = static_cast<double>(first); x <= static_cast<double>(last); x *= ratio) {
      const auto n = static_cast<Depth>(std::llround(x));
      if (d.empty() || n > d.back()) d.push_back(n);
    }
    if (d.empty() || d.back() != last) d.push_back(last);
    return DepthSchedule(std::move(d));
  }

  // Block-end depths of a rule inside [first, last].
  static DepthSchedule block_ends(const BlockRule& rule, Depth first, Depth last) {
    return DepthSchedule(rule.ends_between(first, last));
  }

  const std::vector<Depth>& depths() const { return depths_; }
  std::size_t size() const { return depths_.size(); }
  Depth back() const { return depths_.back(); }

 private:
  std::vector<Depth> depths_;
};

// Running extrema of a sequence quantity over the schedule depths >= tail_start.
struct TailExtrema {
  double lower = 0.0;
  double upper = 0.0;
  Depth lower_depth = 0;
  Depth upper_depth = 0;
  std::vector<Depth> near_lower;  // depths within the tolerance of `lower`
  std::vector<Depth> near_upper;
};

template <typename F>
TailExtrema tail_extrema(const DepthSchedule& schedule, Depth tail_start, F&& value_at, double near_tolerance = 0.0) {
  std::vector<Depth> depths;
  std::vector<double> values;
  for (Depth n : schedule.depths()) {
    if (n < tail_start) continue;
    depths.push_back(n);
    values.push_back(value_at(n));
  }
  if (depths.empty()) throw std::invalid_argument("no schedule depth at or beyond the tail start");
  TailExtrema out;
  const auto lo = std::min_element(values.begin(), values.end()) - values.begin();
  const auto hi = std::max_element(values.begin(), values.end()) - values.begin();
  out.lower = values[lo];
  out.upper = values[hi];
  out.lower_depth = depths[lo];
  out.upper_depth = depths[hi];
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] <= out.lower + near_tolerance) out.near_lower.push_back(depths[i]);
    if (values[i] >= out.upper - near_tolerance) out.near_upper.push_back(depths[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Depth-n spectra

inline double tau_n(const WeightSequence& w, double q, Depth n) {
  return depth_average(w, n, [q](double p) { return tau_single(p, q); });
}

inline double tau_n_d1(const WeightSequence& w, double q, Depth n) {
  return depth_average(w, n, [q](double p) { return tau_single_d1(p, q); });
}

inline double tau_n_d2(const WeightSequence& w, double q, Depth n) {
  return depth_average(w, n, [q](double p) { return tau_single_d2(p, q); });
}

// (1/(n log 2)) log sum_I mu(I)^q straight from the cylinder table; an
// independent route to tau_n used as an oracle. Uses log-sum-exp so negative
// q does not overflow.
inline double tau_from_cylinders(const CylinderTable& table, double q) {
  if (table.depth() == 0) throw std::invalid_argument("partition sum needs depth >= 1");
  double top = -std::numeric_limits<double>::infinity();
  for (double m : table.measures()) top = std::max(top, q * std::log2(m));
  double s = 0.0;
  for (double m : table.measures()) s += std::exp2(q * std::log2(m) - top);
  return (top + std::log2(s)) / static_cast<double>(table.depth());
}

// ---------------------------------------------------------------------------
// Convex combinations of homogeneous spectra

struct TauComponent {
  double lambda;
  double p;
  friend bool operator==(const TauComponent&, const TauComponent&) = default;
};

// tau(q) = sum_i lambda_i tau(p_i, q) with lambda_i > 0 summing to 1.
class TauCurve {
 public:
  static constexpr double kWeightTolerance = 1e-12;

  TauCurve() = default;
  explicit TauCurve(std::vector<TauComponent> components) : components_(std::move(components)) {
    if (components_.empty()) throw std::invalid_argument("tau curve needs at least one component");
    double total = 0.0;
    for (const auto& c : components_) {
      require_probability(c.p, "component parameter");
      if (!(c.lambda > 0.0 && c.lambda <= 1.0 + kWeightTolerance)) {
        throw std::invalid_argument("component weight must lie in (0,1], got " + std::to_string(c.lambda));
      }
      total += c.lambda;
    }
    if (std::abs(total - 1.0) > kWeightTolerance) {
      throw std::invalid_argument("component weights sum to " + std::to_string(total) + ", expected 1");
    }
  }

  static TauCurve single(double p) { return TauCurve({{1.0, p}}); }

  const std::vector<TauComponent>& components() const { return components_; }
  std::size_t size() const { return components_.size(); }

  double operator()(double q) const { return value(q); }

  double value(double q) const {
    double s = 0.0;
    for (const auto& c : components_) s += c.lambda * tau_single(c.p, q);
    return s;
  }
  double slope(double q) const {
    double s = 0.0;
    for (const auto& c : components_) s += c.lambda * tau_single_d1(c.p, q);
    return s;
  }
  double curvature(double q) const {
    double s = 0.0;
    for (const auto& c : components_) s += c.lambda * tau_single_d2(c.p, q);
    return s;
  }

  friend bool operator==(const TauCurve&, const TauCurve&) = default;

 private:
  std::vector<TauComponent> components_;
};

// ---------------------------------------------------------------------------
// Empirical spectra over grids and schedules

struct EmpiricalTau {
  std::vector<double> q_grid;
  std::vector<Depth> depths;
  std::vector<std::vector<double>> values;  // values[i][j] = tau_{depths[j]}(q_grid[i])
  std::vector<double> limsup;               // per q, over the whole schedule
  std::vector<double> liminf;
};

inline EmpiricalTau empirical_tau(const WeightSequence& w, const std::vector<double>& q_grid,
                                  const DepthSchedule& schedule) {
  if (q_grid.empty()) throw std::invalid_argument("q grid is empty");
  EmpiricalTau out{q_grid, schedule.depths(), {}, {}, {}};
  out.values.assign(q_grid.size(), std::vector<double>(schedule.size()));
  for (std::size_t j = 0; j < schedule.size(); ++j) {
    const auto counts = w.prefix_counts(schedule.depths()[j]);
    const auto n = static_cast<double>(schedule.depths()[j]);
    for (std::size_t i = 0; i < q_grid.size(); ++i) {
      double acc = 0.0;
      for (const auto& [p, c] : counts) acc += static_cast<double>(c) * tau_single(p, q_grid[i]);
      out.values[i][j] = acc / n;
    }
  }
  for (const auto& row : out.values) {
    out.limsup.push_back(*std::max_element(row.begin(), row.end()));
    out.liminf.push_back(*std::min_element(row.begin(), row.end()));
  }
  return out;
}

struct LimitOptions {
  Depth tail_start = 1;
  double near_tolerance = 1e-3;
};

// liminf / limsup estimates of tau_n(q) with the depths that (nearly) attain them.
inline TailExtrema tau_limits(const WeightSequence& w, double q, const DepthSchedule& schedule,
                              const LimitOptions& options = {}) {
  return tail_extrema(
      schedule, options.tail_start, [&](Depth n) { return tau_n(w, q, n); }, options.near_tolerance);
}

// ---------------------------------------------------------------------------
// Legendre transform

struct LegendrePoint {
  double alpha = 0.0;
  double value = 0.0;     // inf over the grid of alpha q + tau(q)
  double argmin_q = 0.0;  // smallest minimizing grid point
  bool at_boundary = false;  // minimizer on the grid edge: the infimum may lie outside
};

inline LegendrePoint legendre(const std::vector<double>& q_grid, const std::vector<double>& tau_values, double alpha) {
  if (q_grid.empty()) throw std::invalid_argument("Legendre transform needs a non-empty q grid");
  if (q_grid.size() != tau_values.size()) throw std::invalid_argument("q grid and tau values differ in length");
  if (!std::is_sorted(q_grid.begin(), q_grid.end())) throw std::invalid_argument("q grid must be sorted");
  LegendrePoint out{alpha, std::numeric_limits<double>::infinity(), q_grid.front(), false};
  std::size_t best = 0;
  for (std::size_t i = 0; i < q_grid.size(); ++i) {
    const double v = alpha * q_grid[i] + tau_values[i];
    if (v < out.value) {
      out.value = v;
      best = i;
    }
  }
  out.argmin_q = q_grid[best];
  // Flat objectives (every grid point a minimizer) are not a boundary issue.
  const double scale = 1e-12 * std::max(1.0, std::abs(out.value));
  bool interior_tie = false;
  for (std::size_t i = 1; i + 1 < q_grid.size(); ++i) {
    if (alpha * q_grid[i] + tau_values[i] <= out.value + scale) interior_tie = true;
  }
  out.at_boundary = q_grid.size() > 1 && (best == 0 || best == q_grid.size() - 1) && !interior_tie;
  return out;
}

template <typename Tau>
std::vector<double> sample_curve(const Tau& tau, const std::vector<double>& q_grid) {
  std::vector<double> v;
  v.reserve(q_grid.size());
  for (double q : q_grid) v.push_back(tau(q));
  return v;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
  if (count == 0) return {};
  if (count == 1) return {lo};
  std::vector<double> g(count);
  for (std::size_t i = 0; i < count; ++i) {
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Dimension quantities

// Tail extrema of -tau_n'(1) = (1/n) sum h(p_j): lower and upper entropy.
inline TailExtrema entropy_dimension(const WeightSequence& w, const DepthSchedule& schedule, Depth tail_start = 1) {
  return tail_extrema(schedule, tail_start,
                      [&](Depth n) { return depth_average(w, n, [](double p) { return binary_entropy(p); }); });
}

// -q tau_n'(q) + tau_n(q): the lower bound for the dimension of the level set
// between the one-sided exponents at q. Its tail liminf is `lower`.
inline double level_set_bound_at(const WeightSequence& w, double q, Depth n) {
  return depth_average(w, n, [q](double p) { return -q * tau_single_d1(p, q) + tau_single(p, q); });
}

inline TailExtrema level_set_dimension_bound(const WeightSequence& w, double q, const DepthSchedule& schedule,
                                             Depth tail_start = 1) {
  return tail_extrema(schedule, tail_start, [&](Depth n) { return level_set_bound_at(w, q, n); });
}

// ---------------------------------------------------------------------------
// Derivatives along limsup-attaining subsequences

struct DerivativeBracket {
  double q = 0.0;
  double limsup_estimate = 0.0;
  std::vector<Depth> subsequence;      // depths with tau_n(q) within tolerance of the limsup
  double subsequence_slope_min = 0.0;  // extrema of tau_n'(q) along the subsequence
  double subsequence_slope_max = 0.0;
  double left_derivative = 0.0;   // one-sided difference quotients of the limsup function
  double right_derivative = 0.0;
  bool violated = false;          // bracket left <= min <= max <= right broken beyond tolerance
};

struct BracketOptions {
  Depth tail_start = 1;
  double offset = 1e-3;             // epsilon_q of the difference quotients
  double near_tolerance = 1e-3;     // how close to the limsup a depth must be
  double bracket_tolerance = 1e-2;  // slack allowed when testing the bracket
  std::size_t min_tail = 3;
};

inline DerivativeBracket subsequence_derivative_bracket(const WeightSequence& w, double q,
                                                        const DepthSchedule& schedule,
                                                        const BracketOptions& options = {}) {
  std::vector<Depth> tail;
  for (Depth n : schedule.depths()) {
    if (n >= options.tail_start) tail.push_back(n);
  }
  if (tail.size() < options.min_tail) {
    throw std::invalid_argument("schedule tail has " + std::to_string(tail.size()) + " depths, at least " +
                                std::to_string(options.min_tail) + " are needed to isolate a subsequence");
  }
  if (!(options.offset > 0.0)) throw std::invalid_argument("difference offset must be positive");
  const DepthSchedule t(tail);
  const auto at = tau_limits(w, q, t, {tail.front(), options.near_tolerance});
  const double left = tau_limits(w, q - options.offset, t, {tail.front(), 0.0}).upper;
  const double right = tau_limits(w, q + options.offset, t, {tail.front(), 0.0}).upper;

  DerivativeBracket out;
  out.q = q;
  out.limsup_estimate = at.upper;
  out.subsequence = at.near_upper;
  out.subsequence_slope_min = std::numeric_limits<double>::infinity();
  out.subsequence_slope_max = -std::numeric_limits<double>::infinity();
  for (Depth n : out.subsequence) {
    const double s = tau_n_d1(w, q, n);
    out.subsequence_slope_min = std::min(out.subsequence_slope_min, s);
    out.subsequence_slope_max = std::max(out.subsequence_slope_max, s);
  }
  out.left_derivative = (at.upper - left) / options.offset;
  out.right_derivative = (right - at.upper) / options.offset;
  out.violated = out.subsequence_slope_min < out.left_derivative - options.bracket_tolerance ||
                 out.subsequence_slope_max > out.right_derivative + options.bracket_tolerance;
  return out;
}

}  // namespace cointoss
