#pragma once

// Consolidated self-check suite.
//
// Each check compares an implementation against an independent route to the
// same number (brute-force cylinder sums, finite differences, closed forms,
// exact arithmetic on realized sequences). The homogeneous kernels are passed
// in as a bundle so a test fixture can swap one of them for a perturbed copy
// and watch the suite fail.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cointoss/coarse.hpp"
#include "cointoss/cylinders.hpp"
#include "cointoss/error.hpp"
#include "cointoss/gibbs.hpp"
#include "cointoss/kernels.hpp"
#include "cointoss/spectrum.hpp"
#include "cointoss/transitions.hpp"
#include "cointoss/weights.hpp"

namespace cointoss {

struct Kernels {
  std::function<double(double, double)> tau = tau_single;
  std::function<double(double, double)> d1 = tau_single_d1;
  std::function<double(double, double)> d2 = tau_single_d2;
  std::function<double(double, double)> gibbs = gibbs_weight;
};

inline const std::vector<std::string>& fault_names() {
  static const std::vector<std::string> names{"none", "tau", "d1", "d2", "gibbs"};
  return names;
}

// Kernels with the named one scaled by (1 + 1e-4).
inline Kernels perturbed_kernels(const std::string& fault) {
  Kernels k;
  constexpr double f = 1.0 + 1e-4;
  if (fault == "none") return k;
  if (fault == "tau") {
    k.tau = [f](double p, double q) { return f * tau_single(p, q) + 1e-4; };
  } else if (fault == "d1") {
    k.d1 = [f](double p, double q) { return f * tau_single_d1(p, q); };
  } else if (fault == "d2") {
    k.d2 = [f](double p, double q) { return f * tau_single_d2(p, q); };
  } else if (fault == "gibbs") {
    k.gibbs = [f](double p, double q) { return gibbs_weight(p, q) / f; };
  } else {
    throw ConfigError("unknown fault injection '" + fault + "'");
  }
  return k;
}

struct VerifyConfig {
  std::uint64_t seed = 20240607;
  unsigned enumeration_depth = 12;
  unsigned enumeration_cap = kDefaultEnumerationCap;
  std::size_t random_instances = 100;
  std::size_t stages = 3;
  std::string fault_injection = "none";

  double oracle_tolerance = 1e-9;
  double conservation_tolerance = 1e-12;
  double derivative_tolerance = 1e-6;
  double consistency_tolerance = 1e-12;
  double composition_tolerance = 1e-10;
  double interpolation_tolerance = 1e-10;
  double limit_tolerance = 5e-2;
  double kink_tolerance = 1e-6;
  double construction_tolerance = 1e-2;

  void validate() const {
    if (enumeration_depth == 0) throw ConfigError("enumeration_depth must be >= 1");
    if (enumeration_depth + 1 > enumeration_cap) {
      throw BudgetError("enumeration depth " + std::to_string(enumeration_depth) +
                        " (plus one level for the consistency check) exceeds the cap of " +
                        std::to_string(enumeration_cap));
    }
    if (random_instances == 0) throw ConfigError("random_instances must be >= 1");
    if (stages < 2) throw ConfigError("verify needs at least two construction stages");
    for (double t : {oracle_tolerance, conservation_tolerance, derivative_tolerance, consistency_tolerance,
                     composition_tolerance, interpolation_tolerance, limit_tolerance, kink_tolerance,
                     construction_tolerance}) {
      if (!(t > 0.0)) throw ConfigError("tolerances must be positive");
    }
    if (std::find(fault_names().begin(), fault_names().end(), fault_injection) == fault_names().end()) {
      throw ConfigError("unknown fault injection '" + fault_injection + "'");
    }
  }
};

struct CheckResult {
  std::string name;
  std::string subject;   // what the check establishes
  bool passed = false;
  double residual = 0.0;  // worst measured deviation
  double tolerance = 0.0;
  std::string detail;
};

struct CheckSpec {
  std::string name;
  std::string subject;
  std::vector<std::string> covers;  // library operations exercised
  std::function<CheckResult(const VerifyConfig&, const Kernels&)> run;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }
};

namespace detail {

inline double kernel_average(const WeightSequence& w, Depth n, const std::function<double(double)>& f) {
  return depth_average(w, n, f);
}

inline WeightSequence random_sequence(std::mt19937_64& gen, std::size_t length) {
  std::vector<double> p(length);
  for (auto& x : p) x = 0.02 + 0.96 * uniform01(gen);
  return WeightSequence::explicit_list(std::move(p));
}

inline CheckResult finish(CheckResult r, double residual, double tolerance, std::string detail = {}) {
  r.residual = residual;
  r.tolerance = tolerance;
  r.passed = std::isfinite(residual) && residual < tolerance;
  r.detail = std::move(detail);
  return r;
}

// The realized two-coin block schedule used by the oscillation checks.
inline WeightSequence two_coin_schedule() {
  return WeightSequence::block_schedule({WeightSequence::constant(0.3), WeightSequence::constant(0.4)},
                                        BlockRule::superexponential(2.0));
}

inline const std::vector<double>& construction_targets() {
  static const std::vector<double> t{1.5, 6.0, 2.0, 4.0, 2.5, 3.5, 2.8, 3.2, 2.9, 3.1, 2.95, 3.05, 2.97, 3.03};
  return t;
}

inline TauCurve construction_seed() { return TauCurve({{0.5, 0.2}, {0.5, 0.4}}); }

}  // namespace detail

inline std::vector<CheckSpec> verify_registry() {
  using detail::finish;
  std::vector<CheckSpec> r;

  r.push_back({"partition-sum-oracle",
               "depth-n spectrum as an average of homogeneous spectra equals the brute-force cylinder sum",
               {"tau_single", "tau_n", "cylinder_measure", "enumerate_cylinders"},
               [](const VerifyConfig& c, const Kernels& k) {
                 CheckResult out{"partition-sum-oracle", "", false, 0, 0, ""};
                 std::mt19937_64 gen(c.seed);
                 double worst = 0.0;
                 for (int s = 0; s < 20; ++s) {
                   const auto w = detail::random_sequence(gen, c.enumeration_depth);
                   const auto table = enumerate_cylinders(w, c.enumeration_depth, c.enumeration_cap);
                   const auto probe = sample_path(w, c.enumeration_depth, gen);
                   std::uint64_t code = 0;
                   for (auto b : probe.bits()) code = 2 * code + b;
                   worst = std::max(worst, std::abs(cylinder_measure(w, probe) - table.measure(code)) /
                                               table.measure(code));
                   for (double q : {-2.0, -0.5, 0.5, 1.0, 2.0, 3.0}) {
                     const double avg = depth_average(w, c.enumeration_depth, [&](double p) { return k.tau(p, q); });
                     worst = std::max(worst, std::abs(avg - tau_from_cylinders(table, q)));
                   }
                 }
                 return finish(out, worst, c.oracle_tolerance);
               }});

  r.push_back({"cylinder-mass-conservation", "cylinder measures at a fixed depth sum to one",
               {"enumerate_cylinders", "cylinder_measure"},
               [](const VerifyConfig& c, const Kernels&) {
                 CheckResult out{"cylinder-mass-conservation", "", false, 0, 0, ""};
                 std::mt19937_64 gen(c.seed + 1);
                 double worst = 0.0;
                 for (int s = 0; s < 5; ++s) {
                   const auto w = detail::random_sequence(gen, c.enumeration_depth);
                   for (unsigned n = 1; n <= c.enumeration_depth; ++n) {
                     const auto table = enumerate_cylinders(w, n, c.enumeration_cap);
                     worst = std::max(worst, std::abs(table.total_mass() - 1.0));
                   }
                 }
                 return finish(out, worst, c.conservation_tolerance);
               }});

  r.push_back({"spectrum-derivatives", "analytic first and second derivatives agree with finite differences",
               {"tau_single_d1", "tau_single_d2"},
               [](const VerifyConfig& c, const Kernels& k) {
                 CheckResult out{"spectrum-derivatives", "", false, 0, 0, ""};
                 double worst = 0.0;
                 const double h = 1e-4;
                 for (double p = 0.05; p < 0.96; p += 0.05) {
                   for (double q = -3.0; q <= 5.0; q += 0.25) {
                     const double fp = k.tau(p, q + h), f0 = k.tau(p, q), fm = k.tau(p, q - h);
                     const double d1 = (fp - fm) / (2 * h);
                     const double d2 = (fp - 2 * f0 + fm) / (h * h);
                     worst = std::max(worst, std::abs(d1 - k.d1(p, q)));
                     worst = std::max(worst, std::abs(d2 - k.d2(p, q)));
                   }
                 }
                 return finish(out, worst, c.derivative_tolerance);
               }});

  r.push_back({"curvature-bound",
               "second derivative is bounded by [4p(1-p)]^q0 (log2(p/(1-p)))^2 for all q >= q0",
               {"tau_single_d2"},
               [](const VerifyConfig&, const Kernels& k) {
                 CheckResult out{"curvature-bound", "", false, 0, 0, ""};
                 double worst = -std::numeric_limits<double>::infinity();
                 for (double q0 : {0.5, 1.0, 2.0}) {
                   for (int i = 1; i < 100; ++i) {
                     const double p = i / 100.0;
                     if (i == 50) continue;
                     const double l = std::log2(p / (1.0 - p));
                     const double bound = std::pow(4.0 * p * (1.0 - p), q0) * l * l;
                     for (double q = q0; q <= q0 + 20.0; q += 0.1) {
                       worst = std::max(worst, k.d2(p, q) - bound * (1.0 + 1e-12));
                     }
                   }
                 }
                 CheckResult res = finish(out, std::max(worst, 0.0), 1e-300);
                 res.passed = worst <= 0.0;
                 return res;
               }});

  r.push_back({"entropy-and-local-exponents",
               "entropy equals minus the slope at q=1, and sampled local exponents concentrate at it",
               {"tau_single_d1", "entropy_dimension", "local_exponent", "sample_path"},
               [](const VerifyConfig& c, const Kernels& k) {
                 CheckResult out{"entropy-and-local-exponents", "", false, 0, 0, ""};
                 double worst = 0.0;
                 for (int i = 1; i < 100; ++i) {
                   const double p = i / 100.0;
                   worst = std::max(worst, std::abs(-k.d1(p, 1.0) - binary_entropy(p)));
                 }
                 const auto w = WeightSequence::constant(0.3);
                 const auto e = entropy_dimension(w, DepthSchedule::linear(1, 200));
                 worst = std::max({worst, std::abs(e.lower - binary_entropy(0.3)), std::abs(e.upper - binary_entropy(0.3))});
                 std::mt19937_64 gen(c.seed + 2);
                 const Depth n = 2000;
                 const int samples = 200;
                 double mean = 0.0;
                 for (int s = 0; s < samples; ++s) mean += local_exponent(w, sample_path(w, n, gen));
                 mean /= samples;
                 const double l = std::log2(0.3 / 0.7);
                 const double sigma = std::sqrt(0.21 * l * l / static_cast<double>(n) / samples);
                 std::ostringstream d;
                 d << "sample mean " << mean << ", sigma " << sigma;
                 CheckResult res = finish(out, worst, 1e-9, d.str());
                 res.passed = res.passed && std::abs(mean - binary_entropy(0.3)) < 4.0 * sigma;
                 return res;
               }});

  r.push_back({"gibbs-product-structure",
               "normalized q-th powers of cylinder measures form the Bernoulli product with reweighted coins, "
               "consistently across depths",
               {"gibbs_reweight", "verify_consistency"},
               [](const VerifyConfig& c, const Kernels& k) {
                 CheckResult out{"gibbs-product-structure", "", false, 0, 0, ""};
                 std::mt19937_64 gen(c.seed + 3);
                 double worst = 0.0;
                 const unsigned n = std::min(c.enumeration_depth, 10U);
                 for (int s = 0; s < 4; ++s) {
                   const auto w = detail::random_sequence(gen, n + 1);
                   for (double q : {-1.0, 0.0, 0.5, 1.0, 2.0, 3.0}) {
                     worst = std::max(worst, verify_consistency(w, q, n, c.enumeration_cap).max_discrepancy);
                     const auto powers = detail::normalized_powers(enumerate_cylinders(w, n, c.enumeration_cap), q);
                     std::vector<double> reweighted(n);
                     for (unsigned j = 0; j < n; ++j) reweighted[j] = k.gibbs(w.at(j + 1), q);
                     const auto nu = enumerate_cylinders(WeightSequence::explicit_list(reweighted), n, c.enumeration_cap);
                     for (std::size_t i = 0; i < powers.size(); ++i) {
                       worst = std::max(worst, std::abs(powers[i] - nu.measure(i)));
                     }
                   }
                 }
                 return finish(out, worst, c.consistency_tolerance);
               }});

  r.push_back({"tau-composition",
               "spectrum of the reweighted product at s equals tau(qs) - s tau(q) of the original",
               {"gibbs_reweight", "verify_tau_composition"},
               [](const VerifyConfig& c, const Kernels& k) {
                 CheckResult out{"tau-composition", "", false, 0, 0, ""};
                 std::mt19937_64 gen(c.seed + 4);
                 double worst = 0.0;
                 const Depth n = 64;
                 for (int s = 0; s < 20; ++s) {
                   const auto w = detail::random_sequence(gen, n);
                   const double q = -3.0 + 6.0 * uniform01(gen);
                   const double t = -3.0 + 6.0 * uniform01(gen);
                   worst = std::max(worst, verify_tau_composition(w, q, t, n).residual());
                   const double lhs = depth_average(w, n, [&](double p) { return k.tau(k.gibbs(p, q), t); });
                   const double rhs = depth_average(w, n, [&](double p) { return k.tau(p, q * t) - t * k.tau(p, q); });
                   worst = std::max(worst, std::abs(lhs - rhs));
                 }
                 return finish(out, worst, c.composition_tolerance);
               }});

  r.push_back({"reweighted-dimension",
               "entropy of the reweighted product equals -q tau'(q) + tau(q) of the original",
               {"gibbs_dimension", "level_set_dimension_bound"},
               [](const VerifyConfig& c, const Kernels& k) {
                 CheckResult out{"reweighted-dimension", "", false, 0, 0, ""};
                 double worst = 0.0;
                 for (int i = 1; i < 50; ++i) {
                   const double p = i / 100.0;
                   for (double q = -3.0; q <= 4.0; q += 0.5) {
                     worst = std::max(worst, std::abs(binary_entropy(k.gibbs(p, q)) - (-q * k.d1(p, q) + k.tau(p, q))));
                   }
                 }
                 const auto w = detail::two_coin_schedule();
                 const auto sched = DepthSchedule::linear(100, 5000, 7);
                 for (double q : {-1.0, 0.5, 2.0}) {
                   const auto a = gibbs_dimension(w, q, sched);
                   const auto b = level_set_dimension_bound(w, q, sched);
                   worst = std::max({worst, std::abs(a.lower - b.lower), std::abs(a.upper - b.upper)});
                 }
                 return finish(out, worst, c.composition_tolerance);
               }});

  r.push_back({"legendre-homogeneous",
               "Legendre transform of a homogeneous spectrum at alpha=-tau'(q) equals tau(q) - q tau'(q)",
               {"legendre"},
               [](const VerifyConfig&, const Kernels& k) {
                 CheckResult out{"legendre-homogeneous", "", false, 0, 0, ""};
                 const auto grid = linspace(-10.0, 10.0, 20001);
                 double worst = 0.0;
                 for (double p : {0.1, 0.3, 0.45}) {
                   const auto values = sample_curve([&](double q) { return k.tau(p, q); }, grid);
                   for (double q : {-2.0, -0.5, 0.5, 1.0, 3.0}) {
                     const double alpha = -k.d1(p, q);
                     const auto pt = legendre(grid, values, alpha);
                     worst = std::max(worst, std::abs(pt.value - (k.tau(p, q) + alpha * q)));
                   }
                 }
                 return finish(out, worst, 1e-5);
               }});

  r.push_back({"oscillating-limits",
               "two coins spliced on superexponential blocks: limsup and liminf of tau_n(2) reach the two "
               "branches, and the maximum of the branches kinks exactly at q=0 and q=1",
               {"realize_sup", "tau_limits", "detect_kinks"},
               [](const VerifyConfig& c, const Kernels&) {
                 CheckResult out{"oscillating-limits", "", false, 0, 0, ""};
                 const auto w = detail::two_coin_schedule();
                 const auto lim = tau_limits(w, 2.0, DepthSchedule::linear(100, 100000), {100, 1e-3});
                 const double lim_dev = std::max(std::abs(lim.upper - tau_single(0.3, 2.0)),
                                                 std::abs(lim.lower - tau_single(0.4, 2.0)));
                 const SupTau sup({TauCurve::single(0.3), TauCurve::single(0.4)});
                 const auto kinks = detect_kinks(sup, linspace(-3.0, 4.0, 701)).kinks;
                 double kink_dev = kinks.size() == 2 ? 0.0 : 1.0;
                 if (kinks.size() == 2) {
                   kink_dev = std::max({std::abs(kinks[0].q), std::abs(kinks[1].q - 1.0),
                                        std::abs(kinks[1].gap - (binary_entropy(0.4) - binary_entropy(0.3)))});
                 }
                 std::ostringstream d;
                 d << "limit deviation " << lim_dev << ", kink deviation " << kink_dev;
                 CheckResult res = finish(out, lim_dev, c.limit_tolerance, d.str());
                 res.passed = res.passed && kink_dev < c.kink_tolerance;
                 return res;
               }});

  r.push_back({"subsequence-derivative-bracket",
               "slopes of tau_n along depths attaining the limsup lie between the one-sided derivatives",
               {"subsequence_derivative_bracket"},
               [](const VerifyConfig&, const Kernels&) {
                 CheckResult out{"subsequence-derivative-bracket", "", false, 0, 0, ""};
                 const auto w = detail::two_coin_schedule();
                 const auto sched = DepthSchedule::linear(100, 100000);
                 double worst = 0.0;
                 bool ok = true;
                 for (double q : {-1.0, 0.5, 2.0, 3.0}) {
                   const auto b = subsequence_derivative_bracket(w, q, sched, {100});
                   ok = ok && !b.violated;
                   worst = std::max({worst, b.left_derivative - b.subsequence_slope_min,
                                     b.subsequence_slope_max - b.right_derivative});
                 }
                 CheckResult res = finish(out, std::max(worst, 0.0), 1e-2);
                 res.passed = ok;
                 return res;
               }});

  r.push_back({"ratio-monotonicity",
               "(tau(p1,.) - tau(p2,.)) / (tau(p2,.) - tau(p3,.)) decreases on (1, inf)",
               {"ratio_is_decreasing"},
               [](const VerifyConfig& c, const Kernels&) {
                 CheckResult out{"ratio-monotonicity", "", false, 0, 0, ""};
                 std::mt19937_64 gen(c.seed + 5);
                 const auto grid = linspace(1.01, 8.0, 300);
                 std::size_t bad = 0;
                 for (int s = 0; s < 200; ++s) {
                   std::array<double, 3> p{};
                   for (auto& x : p) x = 0.01 + 0.48 * uniform01(gen);
                   std::sort(p.begin(), p.end());
                   if (p[1] - p[0] < 1e-3 || p[2] - p[1] < 1e-3) continue;
                   if (!ratio_is_decreasing(p[0], p[1], p[2], grid).decreasing()) ++bad;
                 }
                 return finish(out, static_cast<double>(bad), 0.5, std::to_string(bad) + " non-monotone triples");
               }});

  r.push_back({"single-crossing",
               "a two-term combination meets a homogeneous spectrum at most once on (1, inf)",
               {"single_crossing"},
               [](const VerifyConfig& c, const Kernels&) {
                 CheckResult out{"single-crossing", "", false, 0, 0, ""};
                 std::mt19937_64 gen(c.seed + 6);
                 const auto grid = linspace(1.001, 40.0, 4000);
                 double worst = 0.0;
                 for (int s = 0; s < 100; ++s) {
                   double a = 0.01 + 0.48 * uniform01(gen), b = 0.01 + 0.48 * uniform01(gen);
                   if (std::abs(a - b) < 1e-3) continue;
                   if (a > b) std::swap(a, b);
                   const double lam = 0.05 + 0.9 * uniform01(gen);
                   const double p0 = a + (b - a) * uniform01(gen);
                   const TauCurve curve({{lam, a}, {1.0 - lam, b}});
                   const auto rep = single_crossing(curve, p0, grid);
                   if (rep.kind == CrossingKind::single) worst = std::max(worst, rep.residual);
                 }
                 return finish(out, worst, 1e-10);
               }});

  r.push_back({"interpolation-positivity",
               "the three-parameter replacement of a two-term combination has strictly positive weights "
               "and matches it at both targets",
               {"find_matching_p", "solve_interpolation_system", "split_combination"},
               [](const VerifyConfig& c, const Kernels&) {
                 CheckResult out{"interpolation-positivity", "", false, 0, 0, ""};
                 std::mt19937_64 gen(c.seed + 7);
                 double worst = 0.0;
                 std::size_t failures = 0;
                 for (std::size_t s = 0; s < c.random_instances; ++s) {
                   const double p1 = 0.05 + 0.35 * uniform01(gen);
                   const double p2 = p1 + 0.02 + (0.47 - p1 - 0.02) * uniform01(gen);
                   const double lam = 0.1 + 0.8 * uniform01(gen);
                   const double q1 = 1.2 + 2.8 * uniform01(gen);
                   const double q2 = q1 + 0.5 + 3.5 * uniform01(gen);
                   const double p5 = p2 + (0.1 + 0.8 * uniform01(gen)) * (0.5 - p2);
                   try {
                     const TauCurve curve({{lam, p1}, {1.0 - lam, p2}});
                     SplitOptions so;
                     so.p_high = p5;
                     const auto split = split_combination(curve, q1, q2, so);
                     const auto& l = split.system.lambda;
                     worst = std::max({worst, split.system.max_residual, std::abs(l[0] + l[1] + l[2] - 1.0),
                                       std::abs(split.curve(q1) - curve(q1)), std::abs(split.curve(q2) - curve(q2))});
                   } catch (const ConstructionError&) {
                     ++failures;
                   }
                 }
                 CheckResult res = finish(out, worst, c.interpolation_tolerance,
                                          std::to_string(failures) + " instances without a positive solution");
                 res.passed = res.passed && failures == 0;
                 return res;
               }});

  r.push_back({"interpolation-limit",
               "as p5 decreases to p2 the weights tend to (lambda1, 0, lambda2)",
               {"solve_interpolation_system"},
               [](const VerifyConfig&, const Kernels&) {
                 CheckResult out{"interpolation-limit", "", false, 0, 0, ""};
                 const double p1 = 0.2, p2 = 0.4, lam = 0.5, q1 = 1.5, q2 = 6.0;
                 const TauCurve curve({{lam, p1}, {1.0 - lam, p2}});
                 const double p4 = find_matching_p(curve, q1);
                 double prev = std::numeric_limits<double>::infinity();
                 bool monotone = true;
                 double dev = 0.0;
                 for (int k = 2; k <= 6; ++k) {
                   const double p5 = p2 + std::pow(10.0, -k);
                   const auto s = solve_interpolation_system(p1, p4, p5, q1, q2, curve(q1), curve(q2));
                   dev = std::max({std::abs(s.lambda[0] - lam), std::abs(s.lambda[1]), std::abs(s.lambda[2] - (1.0 - lam))});
                   monotone = monotone && dev < prev;
                   prev = dev;
                 }
                 CheckResult res = finish(out, dev, 1e-3);
                 res.passed = res.passed && monotone;
                 return res;
               }});

  r.push_back({"quota-realization",
               "the interleaved realization of a combination has tau_N within k max|tau_i| / N of the curve",
               {"realize_curve"},
               [](const VerifyConfig&, const Kernels&) {
                 CheckResult out{"quota-realization", "", false, 0, 0, ""};
                 const TauCurve curve({{0.2, 0.1}, {0.3, 0.25}, {0.5, 0.45}});
                 const std::size_t N = 5000;
                 const auto w = realize_curve(curve, N);
                 double worst = 0.0;
                 for (double q : {-2.0, 0.5, 2.0, 5.0}) {
                   double m = 0.0;
                   for (const auto& c : curve.components()) m = std::max(m, std::abs(tau_single(c.p, q)));
                   for (Depth n = 1; n <= N; n += 37) {
                     const double env = 3.0 * m / static_cast<double>(n);
                     worst = std::max(worst, std::abs(tau_n(w, q, n) - curve(q)) / env);
                   }
                 }
                 return finish(out, worst, 1.0 + 1e-9, "worst ratio to the envelope");
               }});

  r.push_back({"dense-transitions",
               "staged construction yields kinks at every active target and its realized sequence "
               "attains the constructed maximum along block ends",
               {"build_dense_transitions", "detect_kinks", "realize_curve", "realize_sup"},
               [](const VerifyConfig& c, const Kernels&) {
                 CheckResult out{"dense-transitions", "", false, 0, 0, ""};
                 const auto rule = BlockRule::superexponential(2.0);
                 const auto state = build_dense_transitions(detail::construction_targets(), c.stages,
                                                            detail::construction_seed(), rule);
                 const auto active = state.active_targets();
                 const auto kinks = detect_kinks(state.sup(), linspace(1.001, state.q_upper(), 8000)).kinks;
                 double loc = kinks.size() == active.size() ? 0.0 : 1.0;
                 for (const auto& k : kinks) {
                   double best = std::numeric_limits<double>::infinity();
                   for (double t : active) best = std::min(best, std::abs(k.q - t));
                   loc = std::max(loc, best);
                   if (!(k.gap > 1e-8)) loc = 1.0;
                 }
                 const auto w = state.realize();
                 const auto ends = DepthSchedule::block_ends(rule, 10000, Depth{1} << 50);
                 // One q inside each dominance region of the maximum.
                 std::vector<double> probes{0.5 * (1.0 + active[0])};
                 for (std::size_t i = 0; i < active.size(); i += 2) {
                   probes.push_back(0.5 * (active[i] + (i + 2 < active.size() ? active[i + 2] : active[i + 1])));
                 }
                 double spot = 0.0;
                 for (double q : probes) {
                   const auto lim = tau_limits(w, q, ends);
                   spot = std::max(spot, std::abs(lim.upper - state.sup()(q)));
                 }
                 std::ostringstream d;
                 d << kinks.size() << " kinks, worst location error " << loc << ", worst spot deviation " << spot;
                 CheckResult res = finish(out, spot, c.construction_tolerance, d.str());
                 res.passed = res.passed && loc < 1e-4;
                 return res;
               }});

  for (auto& s : r) {
    auto run = s.run;
    const auto subject = s.subject;
    s.run = [run, subject](const VerifyConfig& c, const Kernels& k) {
      auto res = run(c, k);
      res.subject = subject;
      return res;
    };
  }
  return r;
}

// Validates the configuration, then runs every registered check. Errors in a
// check (exceptions) are reported as failures of that check.
inline VerifyReport run_verify_suite(const VerifyConfig& config) {
  config.validate();
  const Kernels kernels = perturbed_kernels(config.fault_injection);
  VerifyReport report;
  for (const auto& spec : verify_registry()) {
    try {
      report.checks.push_back(spec.run(config, kernels));
    } catch (const BudgetError&) {
      throw;
    } catch (const std::exception& e) {
      report.checks.push_back({spec.name, spec.subject, false, std::numeric_limits<double>::infinity(), 0.0,
                               std::string("error: ") + e.what()});
    }
  }
  return report;
}

}  // namespace cointoss
