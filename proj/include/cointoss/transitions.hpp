#pragma once

// Synthesis of Bernoulli products whose L^q-spectrum has prescribed phase
// transitions on (1, +inf).
//
// The building blocks all live on convex combinations of homogeneous spectra
// tau(p, .) with 0 < p < 1/2:
//
//  * for p1 < p2 < p3 the ratio (tau1 - tau2) / (tau2 - tau3) is decreasing
//    on (1, inf), so a two-term combination crosses a single tau(p0, .) at
//    most once there;
//  * a two-term combination can be re-expressed through three parameters
//    p1 < p4 < p2 < p5 so that the new curve agrees with the old one at two
//    chosen points q1 < q2 but with different slopes (a 3x3 linear system);
//  * the pointwise maximum of such curves is realized by splicing their
//    realizing sequences on superexponentially growing blocks, and its kinks
//    are the phase transitions.
//
// The staged construction repeats the split on nested targets
// 1 < q1 < q3 < ... < q4 < q2, producing one new kink pair per stage.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cointoss/error.hpp"
#include "cointoss/kernels.hpp"
#include "cointoss/quota.hpp"
#include "cointoss/spectrum.hpp"
#include "cointoss/weights.hpp"

namespace cointoss {

namespace detail {

inline std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

// Root of f on [a, b] given f(a) and f(b) of opposite signs (or zero).
template <typename F>
double bisect(F&& f, double a, double b, double width = 1e-14, int max_iter = 200) {
  double fa = f(a);
  for (int i = 0; i < max_iter && b - a > width; ++i) {
    const double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    const double fm = f(m);
    if ((fm <= 0.0) == (fa <= 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

inline int sign(double x, double zero = 0.0) { return x > zero ? 1 : (x < -zero ? -1 : 0); }

inline void require_below_half(double p, const char* what) {
  if (!(p > 0.0 && p < 0.5)) {
    throw std::invalid_argument(std::string(what) + " must lie in (0, 1/2), got " + fmt(p));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Monotone ratio

struct RatioReport {
  std::vector<double> q_grid;
  std::vector<double> ratios;
  std::vector<std::size_t> violations;  // i such that ratios[i+1] does not decrease from ratios[i]
  bool decreasing() const { return violations.empty(); }
};

// (tau(p1,.) - tau(p2,.)) / (tau(p2,.) - tau(p3,.)) on a grid inside (1, inf).
inline RatioReport ratio_is_decreasing(double p1, double p2, double p3, const std::vector<double>& q_grid,
                                       double tolerance = 1e-12) {
  if (!(0.0 < p1 && p1 < p2 && p2 < p3 && p3 < 0.5)) {
    throw std::invalid_argument("ratio check needs 0 < p1 < p2 < p3 < 1/2");
  }
  RatioReport out{q_grid, {}, {}};
  for (double q : q_grid) {
    if (!(q > 1.0)) throw std::invalid_argument("ratio check grid must lie in (1, inf)");
    const double t2 = tau_single(p2, q);
    const double denom = t2 - tau_single(p3, q);
    if (std::abs(denom) < 1e-300) {
      throw ConstructionError("ratio denominator vanishes at q=" + detail::fmt(q));
    }
    out.ratios.push_back((tau_single(p1, q) - t2) / denom);
  }
  for (std::size_t i = 0; i + 1 < out.ratios.size(); ++i) {
    if (out.ratios[i + 1] - out.ratios[i] > tolerance * std::max(1.0, std::abs(out.ratios[i]))) {
      out.violations.push_back(i);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Single crossing

enum class CrossingKind { none, single };

struct CrossingReport {
  CrossingKind kind = CrossingKind::none;
  double q0 = std::numeric_limits<double>::quiet_NaN();
  double residual = 0.0;  // |curve(q0) - tau(p0, q0)|
};

// Where does a two-term combination meet tau(p0, .) on (1, inf)?
inline CrossingReport single_crossing(const TauCurve& curve, double p0, const std::vector<double>& q_grid) {
  if (curve.size() != 2) throw std::invalid_argument("single crossing expects a two-component curve");
  const double pa = curve.components()[0].p;
  const double pb = curve.components()[1].p;
  detail::require_below_half(pa, "component parameter");
  detail::require_below_half(pb, "component parameter");
  detail::require_below_half(p0, "comparison parameter");
  if (pa == pb) throw std::invalid_argument("single crossing expects distinct component parameters");
  if (q_grid.size() < 2 || !std::is_sorted(q_grid.begin(), q_grid.end()) || !(q_grid.front() > 1.0)) {
    throw std::invalid_argument("crossing grid must be sorted, inside (1, inf), with >= 2 points");
  }
  auto diff = [&](double q) { return curve(q) - tau_single(p0, q); };
  std::vector<double> d;
  for (double q : q_grid) d.push_back(diff(q));

  std::vector<std::size_t> cells;
  for (std::size_t i = 0; i + 1 < d.size(); ++i) {
    if (d[i] == 0.0 || (d[i] < 0.0) != (d[i + 1] < 0.0)) {
      if (d[i] == 0.0 && i > 0) continue;  // counted with the previous cell
      cells.push_back(i);
    }
  }
  if (cells.empty()) {
    if ((d.front() < 0.0) != (d.back() < 0.0)) {
      throw ConstructionError("crossing grid too coarse to bracket the sign change");
    }
    return {};
  }
  if (cells.size() > 1) {
    throw ConstructionError("found " + std::to_string(cells.size()) +
                            " crossings on (1, inf); at most one is possible");
  }
  const std::size_t i = cells.front();
  CrossingReport out;
  out.kind = CrossingKind::single;
  out.q0 = d[i] == 0.0 ? q_grid[i] : detail::bisect(diff, q_grid[i], q_grid[i + 1]);
  out.residual = std::abs(diff(out.q0));
  return out;
}

// ---------------------------------------------------------------------------
// Matching parameter

// p in (min p_i, max p_i) with tau(p, q1) = curve(q1). For q1 > 1,
// p -> tau(p, q1) is strictly decreasing on (0, 1/2), so the root is unique.
inline double find_matching_p(const TauCurve& curve, double q1, double tolerance = 1e-12) {
  if (!(q1 > 1.0)) throw std::invalid_argument("matching point must satisfy q1 > 1");
  double lo = 1.0;
  double hi = 0.0;
  for (const auto& c : curve.components()) {
    detail::require_below_half(c.p, "component parameter");
    lo = std::min(lo, c.p);
    hi = std::max(hi, c.p);
  }
  if (lo == hi) return lo;
  const double target = curve(q1);
  auto f = [&](double p) { return tau_single(p, q1) - target; };
  if (!(f(lo) > 0.0 && f(hi) < 0.0)) {
    throw ConstructionError("no sign change of tau(p, q1) - curve(q1) on [" + detail::fmt(lo) + ", " +
                            detail::fmt(hi) + "]");
  }
  // f is decreasing: negate so the generic bisection sees an increasing function.
  const double p = detail::bisect([&](double x) { return -f(x); }, lo, hi, 0.0, 400);
  if (!(p > lo && p < hi) || std::abs(f(p)) >= tolerance) {
    throw ConstructionError("matching parameter did not converge: residual " + detail::fmt(std::abs(f(p))));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Interpolation system
//
//   l3 tau(pa, q1) + l4 tau(pb, q1) + l5 tau(pc, q1) = t1
//   l3 tau(pa, q2) + l4 tau(pb, q2) + l5 tau(pc, q2) = t2
//   l3             + l4             + l5             = 1

struct InterpolationSolution {
  std::array<double, 3> p{};
  std::array<double, 3> lambda{};
  double determinant = 0.0;
  double max_residual = 0.0;

  TauCurve curve() const { return TauCurve({{lambda[0], p[0]}, {lambda[1], p[1]}, {lambda[2], p[2]}}); }
};

namespace detail {

// Gaussian elimination with partial pivoting; returns the determinant.
inline double solve3(std::array<std::array<double, 3>, 3> a, std::array<double, 3> b, std::array<double, 3>& x) {
  double det = 1.0;
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    if (piv != c) {
      std::swap(a[piv], a[c]);
      std::swap(b[piv], b[c]);
      det = -det;
    }
    det *= a[c][c];
    if (a[c][c] == 0.0) return 0.0;
    for (int r = c + 1; r < 3; ++r) {
      const double f = a[r][c] / a[c][c];
      for (int k = c; k < 3; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  for (int r = 2; r >= 0; --r) {
    double s = b[r];
    for (int k = r + 1; k < 3; ++k) s -= a[r][k] * x[k];
    x[r] = s / a[r][r];
  }
  return det;
}

}  // namespace detail

inline InterpolationSolution solve_interpolation_system(double p_low, double p_mid, double p_high, double q1,
                                                        double q2, double target1, double target2,
                                                        double determinant_threshold = 1e-14,
                                                        double residual_tolerance = 1e-10) {
  if (!(0.0 < p_low && p_low < p_mid && p_mid < p_high && p_high < 0.5)) {
    throw std::invalid_argument("interpolation system needs 0 < p_low < p_mid < p_high < 1/2");
  }
  if (!(1.0 < q1 && q1 < q2)) throw std::invalid_argument("interpolation system needs 1 < q1 < q2");
  InterpolationSolution s;
  s.p = {p_low, p_mid, p_high};
  std::array<std::array<double, 3>, 3> a{};
  for (int j = 0; j < 3; ++j) {
    a[0][j] = tau_single(s.p[j], q1);
    a[1][j] = tau_single(s.p[j], q2);
    a[2][j] = 1.0;
  }
  const std::array<double, 3> b{target1, target2, 1.0};
  s.determinant = detail::solve3(a, b, s.lambda);
  if (!(std::abs(s.determinant) >= determinant_threshold)) {
    throw ConstructionError("interpolation system is singular: determinant " + detail::fmt(s.determinant));
  }
  for (int r = 0; r < 3; ++r) {
    const double lhs = a[r][0] * s.lambda[0] + a[r][1] * s.lambda[1] + a[r][2] * s.lambda[2];
    s.max_residual = std::max(s.max_residual, std::abs(lhs - b[r]));
  }
  if (!(s.lambda[0] > 0.0 && s.lambda[1] > 0.0 && s.lambda[2] > 0.0)) {
    throw ConstructionError("interpolation weights are not all positive: (" + detail::fmt(s.lambda[0]) + ", " +
                            detail::fmt(s.lambda[1]) + ", " + detail::fmt(s.lambda[2]) + ")");
  }
  if (s.max_residual >= residual_tolerance) {
    throw ConstructionError("interpolation residual " + detail::fmt(s.max_residual) + " above tolerance");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Splitting a combination

struct SplitOptions {
  std::optional<double> p_high;    // default: p2 + p_high_fraction * (1/2 - p2)
  double p_high_fraction = 0.6;
  double q_max = 0.0;              // right end of the verification grid; 0 means q2 + (q2 - 1)
  std::size_t verify_points = 2000;
  double slope_threshold = 1e-8;
  double match_tolerance = 1e-10;
};

struct SplitResult {
  TauCurve curve;
  double p_mid = 0.0;   // p4
  double p_high = 0.0;  // p5
  InterpolationSolution system;
  double slope_gap_low = 0.0;   // new slope - old slope at q1
  double slope_gap_high = 0.0;  // at q2
  int inside_sign = 0;          // sign of new - old on (q1, q2)
};

// Replaces the first two components of `curve` by three so that the result
// agrees with `curve` exactly at q1 and q2, has different slopes there, and
// meets it nowhere else on (1, q_max]. Trailing components are untouched.
inline SplitResult split_combination(const TauCurve& curve, double q1, double q2, const SplitOptions& options = {}) {
  if (curve.size() < 2) throw std::invalid_argument("splitting needs a curve with at least two components");
  if (!(1.0 < q1 && q1 < q2)) throw std::invalid_argument("splitting needs 1 < q1 < q2");
  const auto& comps = curve.components();
  const double p1 = comps[0].p;
  const double p2 = comps[1].p;
  if (!(0.0 < p1 && p1 < p2 && p2 < 0.5)) {
    throw std::invalid_argument("the first two components must satisfy 0 < p1 < p2 < 1/2");
  }
  const double mass = comps[0].lambda + comps[1].lambda;
  const TauCurve pair({{comps[0].lambda / mass, p1}, {comps[1].lambda / mass, p2}});

  SplitResult out;
  out.p_mid = find_matching_p(pair, q1);
  out.p_high = options.p_high.value_or(p2 + options.p_high_fraction * (0.5 - p2));
  if (!(out.p_high > p2 && out.p_high < 0.5)) {
    throw std::invalid_argument("p_high must lie in (p2, 1/2), got " + detail::fmt(out.p_high));
  }
  out.system = solve_interpolation_system(p1, out.p_mid, out.p_high, q1, q2, pair(q1), pair(q2));

  std::vector<TauComponent> next;
  for (int j = 0; j < 3; ++j) next.push_back({mass * out.system.lambda[j], out.system.p[j]});
  for (std::size_t i = 2; i < comps.size(); ++i) next.push_back(comps[i]);
  out.curve = TauCurve(std::move(next));

  for (double q : {q1, q2}) {
    if (std::abs(out.curve(q) - curve(q)) >= options.match_tolerance) {
      throw ConstructionError("split curve misses the target value at q=" + detail::fmt(q) + " by " +
                              detail::fmt(std::abs(out.curve(q) - curve(q))));
    }
  }
  out.slope_gap_low = out.curve.slope(q1) - curve.slope(q1);
  out.slope_gap_high = out.curve.slope(q2) - curve.slope(q2);
  if (std::abs(out.slope_gap_low) <= options.slope_threshold ||
      std::abs(out.slope_gap_high) <= options.slope_threshold) {
    throw ConstructionError("split slopes too close to the original: gaps " + detail::fmt(out.slope_gap_low) +
                            ", " + detail::fmt(out.slope_gap_high) + " at q1=" + detail::fmt(q1) +
                            ", q2=" + detail::fmt(q2));
  }

  // Equality only at q1 and q2: constant sign on each of (1,q1), (q1,q2),
  // (q2,q_max] away from the roots, alternating across them.
  const double q_max = options.q_max > 0.0 ? options.q_max : q2 + (q2 - 1.0);
  const double h = (q_max - 1.0) / static_cast<double>(std::max<std::size_t>(options.verify_points, 10));
  const double radius = 2.0 * h;
  int segment_sign[3] = {0, 0, 0};
  for (double q = 1.0 + radius; q <= q_max; q += h) {
    if (std::abs(q - q1) < radius || std::abs(q - q2) < radius) continue;
    const int seg = q < q1 ? 0 : (q < q2 ? 1 : 2);
    const int s = detail::sign(out.curve(q) - curve(q));
    if (s == 0 || (segment_sign[seg] != 0 && s != segment_sign[seg])) {
      throw ConstructionError("split curve meets the original away from the targets near q=" + detail::fmt(q));
    }
    segment_sign[seg] = s;
  }
  if (segment_sign[1] == 0 || (segment_sign[0] != 0 && segment_sign[0] == segment_sign[1]) ||
      (segment_sign[2] != 0 && segment_sign[2] == segment_sign[1])) {
    throw ConstructionError("split curve does not alternate around the targets");
  }
  out.inside_sign = segment_sign[1];
  return out;
}

// ---------------------------------------------------------------------------
// Realization by weight sequences

// Explicit sequence of length `horizon` in which parameter p_i occupies a
// deterministic set of positions such that every prefix of length n holds
// floor(lambda_i n) or ceil(lambda_i n) of them. Then
// |tau_n(q) - curve(q)| <= (sum_i |tau(p_i, q)|) / n <= k max_i |tau(p_i, q)| / n.
inline WeightSequence realize_curve(const TauCurve& curve, std::size_t horizon) {
  if (horizon < curve.size()) throw std::invalid_argument("realization horizon shorter than the component count");
  if (curve.size() == 1) return WeightSequence::constant(curve.components()[0].p);
  std::vector<double> freq;
  for (const auto& c : curve.components()) freq.push_back(c.lambda);
  const auto word = quota_word(freq, horizon);
  std::vector<double> weights(horizon);
  for (std::size_t i = 0; i < horizon; ++i) weights[i] = curve.components()[word[i]].p;
  return WeightSequence::explicit_list(std::move(weights));
}

// Infinite sequence whose tau_n equals the curve up to O(1/horizon) at every
// depth: the realized word repeated periodically.
inline WeightSequence realize_curve_periodic(const TauCurve& curve, std::size_t horizon) {
  const auto finite = realize_curve(curve, horizon);
  if (finite.kind() == WeightSequence::Kind::constant) return finite;
  std::vector<double> word(horizon);
  for (std::size_t i = 0; i < horizon; ++i) word[i] = finite.at(i + 1);
  return WeightSequence::periodic(std::move(word));
}

// Splices the inputs on the blocks of `rule`, cycling through them; the
// limsup spectrum of the result is the pointwise maximum of the inputs'.
inline WeightSequence realize_sup(std::vector<WeightSequence> measures, const BlockRule& rule) {
  if (measures.size() < 2) throw std::invalid_argument("realize_sup needs at least two sequences");
  return WeightSequence::block_schedule(std::move(measures), rule);
}

// ---------------------------------------------------------------------------
// Pointwise maximum of curves and its kinks

struct OneSidedSlopes {
  double left = 0.0;
  double right = 0.0;
  double gap() const { return right - left; }
};

class SupTau {
 public:
  SupTau() = default;
  explicit SupTau(std::vector<TauCurve> curves) : curves_(std::move(curves)) {
    if (curves_.empty()) throw std::invalid_argument("sup of an empty family");
  }

  const std::vector<TauCurve>& curves() const { return curves_; }
  std::size_t size() const { return curves_.size(); }

  double operator()(double q) const { return value(q); }
  double value(double q) const {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& c : curves_) best = std::max(best, c(q));
    return best;
  }

  // Index of the maximal curve; near-ties go to the curve that dominates just
  // to the right (largest slope), then to the lowest index.
  std::size_t owner(double q, double tie_tolerance = 1e-13) const {
    const double top = value(q);
    std::size_t best = curves_.size();
    double best_slope = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < curves_.size(); ++i) {
      if (curves_[i](q) < top - tie_tolerance) continue;
      const double s = curves_[i].slope(q);
      if (best == curves_.size() || s > best_slope) {
        best = i;
        best_slope = s;
      }
    }
    return best;
  }

  // One-sided derivatives of the maximum: extreme slopes among the curves
  // within `active_tolerance` of the maximum.
  OneSidedSlopes slopes(double q, double active_tolerance = 1e-9) const {
    const double top = value(q);
    OneSidedSlopes s{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& c : curves_) {
      if (c(q) < top - active_tolerance) continue;
      s.left = std::min(s.left, c.slope(q));
      s.right = std::max(s.right, c.slope(q));
    }
    return s;
  }

 private:
  std::vector<TauCurve> curves_;
};

struct Kink {
  double q = 0.0;
  double left_slope = 0.0;
  double right_slope = 0.0;
  double gap = 0.0;
  std::size_t left_owner = 0;
  std::size_t right_owner = 0;
};

struct TransitionReport {
  std::vector<Kink> kinks;
};

struct KinkOptions {
  double tie_tolerance = 1e-13;
  double cell_tolerance = 1e-12;  // how far a third curve may rise above the pair inside a cell
};

inline TransitionReport detect_kinks(const SupTau& sup, const std::vector<double>& q_grid,
                                     const KinkOptions& options = {}) {
  if (q_grid.size() < 3) throw std::invalid_argument("kink detection needs a grid of at least 3 points");
  if (!std::is_sorted(q_grid.begin(), q_grid.end())) throw std::invalid_argument("kink grid must be sorted");
  TransitionReport report;
  const auto& curves = sup.curves();
  std::size_t prev = sup.owner(q_grid.front(), options.tie_tolerance);
  for (std::size_t c = 0; c + 1 < q_grid.size(); ++c) {
    const double a = q_grid[c];
    const double b = q_grid[c + 1];
    const std::size_t next = sup.owner(b, options.tie_tolerance);
    const auto cell_name = [&] { return "[" + detail::fmt(a) + ", " + detail::fmt(b) + "]"; };
    const double mid = 0.5 * (a + b);
    const std::size_t mid_owner = sup.owner(mid, options.tie_tolerance);
    if (mid_owner != prev && mid_owner != next &&
        curves[mid_owner](mid) > std::max(curves[prev](mid), curves[next](mid)) + options.cell_tolerance) {
      throw ConstructionError("grid too coarse: more than one change of the maximal curve in cell " + cell_name());
    }
    if (next != prev) {
      const auto& left = curves[prev];
      const auto& right = curves[next];
      const double q = detail::bisect([&](double x) { return right(x) - left(x); }, a, b, 1e-15);
      if (sup.value(q) > std::max(left(q), right(q)) + options.cell_tolerance) {
        throw ConstructionError("grid too coarse: more than one change of the maximal curve in cell " +
                                cell_name());
      }
      Kink k{q, left.slope(q), right.slope(q), 0.0, prev, next};
      k.gap = k.right_slope - k.left_slope;
      if (k.gap > 0.0) report.kinks.push_back(k);
    }
    prev = next;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Staged construction of nested phase transitions

struct StageRecord {
  std::size_t stage = 0;  // n: rho_n is split into tau_{n+1}
  double q_low = 0.0;     // q_{2n-1}
  double q_high = 0.0;    // q_{2n}
  std::size_t owner = 0;  // curve owning rho_n at both targets
  int case_taken = 0;     // 1: new curve above rho_n between the targets; 2: below
  double p_high = 0.0;    // p5 finally used
  std::size_t shrink_steps = 0;
  std::optional<std::pair<double, double>> replaced_targets;  // new (q_{2n-3}, q_{2n-2}) after case 2
  double slope_gap_low = 0.0;   // tau_{n+1}' - rho_n' at q_low
  double slope_gap_high = 0.0;  // at q_high
};

struct ConstructionOptions {
  double p_high_fraction = 0.6;
  double shrink_factor = 0.5;
  std::size_t shrink_budget = 60;
  double slope_tolerance = 1e-8;
  double match_tolerance = 1e-10;
  double q_lower = 1.0;  // stands in for q_{-1}
  double q_upper = 0.0;  // stands in for q_0 and bounds verification grids; 0 means q2 + (q2 - 1)
  std::size_t max_stages = 8;
  std::size_t verify_points = 2000;
  std::size_t horizon = std::size_t{1} << 16;  // realization word length
};

// Produces tau_{n+1} from the curve owning rho_n at (q_low, q_high) and p5.
using StageSplitter = std::function<TauCurve(const TauCurve& owner, double q_low, double q_high, double p_high)>;

struct ConstructionState {
  std::vector<double> initial_targets;
  std::vector<double> targets;  // current, after any case-2 replacements
  std::vector<TauCurve> curves;  // tau_1 .. tau_m
  std::vector<StageRecord> stages;
  BlockRule rule = BlockRule::superexponential(2.0);
  ConstructionOptions options;

  std::size_t stage_count() const { return curves.size(); }
  SupTau sup() const { return SupTau(curves); }

  // q_1 .. q_{2(m-1)}: the targets that carry kinks of rho_m.
  std::vector<double> active_targets() const {
    return {targets.begin(), targets.begin() + static_cast<std::ptrdiff_t>(2 * (curves.size() - 1))};
  }

  double q_upper() const {
    if (options.q_upper > 0.0) return options.q_upper;
    return targets.size() >= 2 ? targets[1] + (targets[1] - 1.0) : 2.0;
  }

  // mu_i realizes tau_i, nu_k splices mu_1..mu_k on the blocks, and the
  // returned sequence applies nu_k on block k (nu_m from block m on).
  WeightSequence realize() const {
    std::vector<WeightSequence> mus;
    for (const auto& c : curves) mus.push_back(realize_curve_periodic(c, options.horizon));
    std::vector<WeightSequence> nus{mus.front()};
    for (std::size_t k = 2; k <= mus.size(); ++k) {
      nus.push_back(realize_sup(std::vector<WeightSequence>(mus.begin(), mus.begin() + static_cast<std::ptrdiff_t>(k)),
                                rule));
    }
    return WeightSequence::diagonal(std::move(nus), rule);
  }
};

// Targets q_1, q_2, ... nested as q_lower < q1 < q3 < q5 < ... < q6 < q4 < q2.
inline void validate_nesting(const std::vector<double>& t, double q_lower = 1.0) {
  if (t.size() % 2 != 0) throw ConstructionError("targets must come in pairs");
  if (t.empty()) return;
  if (!(t[0] > q_lower)) throw ConstructionError("first target must exceed " + detail::fmt(q_lower));
  for (std::size_t i = 2; i < t.size(); i += 2) {
    if (!(t[i] > t[i - 2])) throw ConstructionError("odd targets must increase (q" + std::to_string(i + 1) + ")");
    if (!(t[i + 1] < t[i - 1])) throw ConstructionError("even targets must decrease (q" + std::to_string(i + 2) + ")");
  }
  if (!(t[t.size() - 2] < t.back())) throw ConstructionError("innermost target pair is not ordered");
}

namespace detail {

inline double min_pairwise_gap(const std::vector<double>& t, std::size_t count) {
  double g = std::numeric_limits<double>::infinity();
  count = std::min(count, t.size());
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = i + 1; j < count; ++j) g = std::min(g, std::abs(t[i] - t[j]));
  }
  return g;
}

inline StageSplitter default_splitter(const ConstructionOptions& o, double q_upper) {
  return [o, q_upper](const TauCurve& owner, double a, double b, double p_high) {
    SplitOptions so;
    so.p_high = p_high;
    so.q_max = q_upper;
    so.verify_points = o.verify_points;
    so.slope_threshold = o.slope_tolerance;
    so.match_tolerance = o.match_tolerance;
    return split_combination(owner, a, b, so).curve;
  };
}

}  // namespace detail

// Runs stages until the state holds `stages` curves.
inline void advance_construction(ConstructionState& state, std::size_t stages, const StageSplitter& splitter = {}) {
  const auto& o = state.options;
  if (stages == 0) throw std::invalid_argument("stage count must be >= 1");
  if (stages > o.max_stages) {
    throw BudgetError("stage count " + std::to_string(stages) + " exceeds the budget of " +
                      std::to_string(o.max_stages));
  }
  if (state.targets.size() < 2 * (stages - 1)) {
    throw std::invalid_argument(std::to_string(stages) + " stages need " + std::to_string(2 * (stages - 1)) +
                                " targets, got " + std::to_string(state.targets.size()));
  }
  validate_nesting(state.targets, o.q_lower);
  const double q_upper = state.q_upper();
  if (!state.targets.empty() && !(q_upper > state.targets[1])) {
    throw std::invalid_argument("q_upper must exceed every target");
  }
  const StageSplitter split = splitter ? splitter : detail::default_splitter(o, q_upper);

  while (state.curves.size() < stages) {
    const std::size_t n = state.curves.size();  // splitting rho_n
    auto& t = state.targets;
    const double qa = t[2 * n - 2];
    const double qb = t[2 * n - 1];
    const SupTau rho = state.sup();
    const std::size_t owner = rho.owner(qa);
    if (rho.owner(qb) != owner) {
      throw ConstructionError("stage " + std::to_string(n) + ": targets " + detail::fmt(qa) + ", " +
                              detail::fmt(qb) + " lie on different branches of the current maximum");
    }
    for (std::size_t i = 0; i < rho.size(); ++i) {
      if (i == owner) continue;
      for (double q : {qa, qb}) {
        if (rho.curves()[i](q) >= rho(q) - o.match_tolerance) {
          throw ConstructionError("stage " + std::to_string(n) + ": target " + detail::fmt(q) +
                                  " sits on a kink of the current maximum");
        }
      }
    }
    const TauCurve& base = rho.curves()[owner];
    if (base.size() < 2) throw ConstructionError("owning curve has a single component and cannot be split");
    const double p2 = base.components()[1].p;
    const double slope_a = base.slope(qa);
    const double slope_b = base.slope(qb);

    StageRecord rec;
    rec.stage = n;
    rec.q_low = qa;
    rec.q_high = qb;
    rec.owner = owner;
    double p5 = p2 + o.p_high_fraction * (0.5 - p2);
    std::optional<TauCurve> accepted;
    std::string last_reason;

    for (std::size_t step = 0; step <= o.shrink_budget; ++step) {
      rec.shrink_steps = step;
      rec.p_high = p5;
      const TauCurve cand = split(base, qa, qb, p5);
      for (double q : {qa, qb}) {
        if (std::abs(cand(q) - rho(q)) >= o.match_tolerance) {
          throw ConstructionError("stage " + std::to_string(n) + ": new curve misses rho at q=" + detail::fmt(q));
        }
      }
      rec.slope_gap_low = cand.slope(qa) - slope_a;
      rec.slope_gap_high = cand.slope(qb) - slope_b;
      if (std::abs(rec.slope_gap_low) <= o.slope_tolerance || std::abs(rec.slope_gap_high) <= o.slope_tolerance) {
        throw ConstructionError("stage " + std::to_string(n) + ": ambiguous case, slope differences " +
                                detail::fmt(rec.slope_gap_low) + ", " + detail::fmt(rec.slope_gap_high) +
                                " inside the tolerance band");
      }
      if (rec.slope_gap_low > 0.0 && rec.slope_gap_high < 0.0) {
        rec.case_taken = 1;
        accepted = cand;
        break;
      }
      if (!(rec.slope_gap_low < 0.0 && rec.slope_gap_high > 0.0)) {
        throw ConstructionError("stage " + std::to_string(n) + ": slope differences have equal signs");
      }
      rec.case_taken = 2;
      if (n == 1) {
        // No earlier kinks to protect.
        accepted = cand;
        break;
      }

      // The new curve overtakes rho_n just outside (q_{2n-1}, q_{2n}); it must
      // fall back below rho_n before the midpoints towards the previous
      // targets, and the crossings q', q'' replace q_{2n-3}, q_{2n-2}.
      const double q_in_lo = t[2 * n - 4];
      const double q_in_hi = t[2 * n - 3];
      const double outer_lo = n >= 3 ? t[2 * n - 6] : o.q_lower;
      const double outer_hi = n >= 3 ? t[2 * n - 5] : q_upper;
      const double mid_lo = 0.5 * (q_in_lo + outer_lo);
      const double mid_hi = 0.5 * (q_in_hi + outer_hi);
      const auto excess = [&](double q) { return cand(q) - rho(q); };
      bool ok = excess(mid_lo) < 0.0 && excess(mid_hi) < 0.0 && excess(q_in_lo) > 0.0 && excess(q_in_hi) > 0.0;
      if (!ok) {
        last_reason = "midpoint inequalities not yet satisfied";
      } else {
        const double q1p = detail::bisect(excess, mid_lo, q_in_lo);
        const double q2p = detail::bisect([&](double q) { return -excess(q); }, q_in_hi, mid_hi);
        std::vector<double> moved = t;
        moved[2 * n - 4] = q1p;
        moved[2 * n - 3] = q2p;
        validate_nesting(moved, o.q_lower);

        const double scale = std::ldexp(1.0, -static_cast<int>(n));
        const double bound = scale * detail::min_pairwise_gap(t, 2 * n + 2);
        if (!(std::abs(q1p - q_in_lo) < bound && std::abs(q2p - q_in_hi) < bound)) {
          ok = false;
          last_reason = "replacement targets too far from the originals";
        } else {
          std::vector<TauCurve> grown = state.curves;
          grown.push_back(cand);
          const SupTau next(grown);
          for (std::size_t i = 0; i < 2 * n - 2 && ok; ++i) {
            const double before = rho.slopes(t[i]).gap();
            const double after = next.slopes(moved[i]).gap();
            if (!(std::abs(before - after) < scale * before)) {
              ok = false;
              last_reason = "kink gap at q" + std::to_string(i + 1) + " changed too much";
            }
          }
        }
        if (ok) {
          rec.replaced_targets = std::make_pair(q1p, q2p);
          t = std::move(moved);
          accepted = cand;
          break;
        }
      }
      p5 = p2 + o.shrink_factor * (p5 - p2);
    }
    if (!accepted) {
      throw ConstructionError("stage " + std::to_string(n) + ": case 2 repair failed after " +
                              std::to_string(o.shrink_budget) + " shrink steps (p5=" + detail::fmt(p5) +
                              "): " + last_reason);
    }
    state.curves.push_back(*accepted);
    state.stages.push_back(rec);
  }
}

inline ConstructionState build_dense_transitions(std::vector<double> targets, std::size_t stages,
                                                 const TauCurve& initial, const BlockRule& rule,
                                                 const ConstructionOptions& options = {},
                                                 const StageSplitter& splitter = {}) {
  ConstructionState state;
  state.initial_targets = targets;
  state.targets = std::move(targets);
  state.curves = {initial};
  state.rule = rule;
  state.options = options;
  advance_construction(state, stages, splitter);
  return state;
}

}  // namespace cointoss
