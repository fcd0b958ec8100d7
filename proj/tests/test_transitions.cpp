#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cointoss/cointoss.hpp"
#include "oracles.hpp"

using namespace cointoss;

namespace {

const TauCurve kPair({{0.5, 0.2}, {0.5, 0.4}});

std::vector<double> grid_between(double a, double b, double step) {
  std::vector<double> g;
  for (double q = a; q <= b + 1e-12; q += step) g.push_back(q);
  return g;
}

// Combination of the first four components of `base` that vanishes at qa, qb
// and (through tau(p, 1) = 0 and a zero coefficient sum) at q = 0 and q = 1.
std::vector<double> null_direction(const TauCurve& base, double qa, double qb) {
  const auto& c = base.components();
  std::vector<double> g(c.size(), 0.0);
  for (int j = 0; j < 4; ++j) {
    std::array<std::array<long double, 3>, 3> m{};
    int col = 0;
    for (int k = 0; k < 4; ++k) {
      if (k == j) continue;
      m[0][col] = oracle::tau(c[k].p, qa);
      m[1][col] = oracle::tau(c[k].p, qb);
      m[2][col] = 1.0L;
      ++col;
    }
    g[j] = static_cast<double>((j % 2 == 0 ? 1.0L : -1.0L) * oracle::det3(m));
  }
  double scale = 0.0;
  for (double x : g) scale = std::max(scale, std::abs(x));
  for (double& x : g) x /= scale;
  return g;
}

double along(const TauCurve& base, const std::vector<double>& g, double q) {
  double s = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) s += g[j] * tau_single(base.components()[j].p, q);
  return s;
}

}  // namespace

TEST(RatioMonotone, Examples) {
  const auto r = ratio_is_decreasing(0.1, 0.2, 0.3, grid_between(1.01, 6.0, 0.01));
  EXPECT_TRUE(r.decreasing());
  for (std::size_t i = 0; i + 1 < r.ratios.size(); ++i) EXPECT_LT(r.ratios[i + 1], r.ratios[i]);
  const auto s = ratio_is_decreasing(0.2, 0.3, 0.4, {1.001, 6.0});
  EXPECT_GT(s.ratios.front(), s.ratios.back());
  const auto one = ratio_is_decreasing(0.2, 0.3, 0.4, {2.0});
  EXPECT_TRUE(one.decreasing());
  EXPECT_TRUE(one.violations.empty());
}

TEST(RatioMonotone, RandomTriples) {
  std::mt19937_64 gen(41);
  std::uniform_real_distribution<double> u(0.005, 0.495);
  const auto grid = grid_between(1.01, 8.0, 0.01);
  for (int t = 0; t < 200; ++t) {
    std::array<double, 3> p{u(gen), u(gen), u(gen)};
    std::sort(p.begin(), p.end());
    if (p[1] - p[0] < 1e-3 || p[2] - p[1] < 1e-3) continue;
    EXPECT_TRUE(ratio_is_decreasing(p[0], p[1], p[2], grid).decreasing()) << p[0] << " " << p[1] << " " << p[2];
  }
}

TEST(RatioMonotone, RejectsBadInput) {
  EXPECT_THROW(ratio_is_decreasing(0.3, 0.2, 0.1, {2.0}), std::invalid_argument);
  EXPECT_THROW(ratio_is_decreasing(0.1, 0.2, 0.3, {0.9}), std::invalid_argument);
}

TEST(SingleCrossing, Examples) {
  const auto grid = grid_between(1.01, 12.0, 0.01);
  EXPECT_EQ(single_crossing(kPair, 0.2, grid).kind, CrossingKind::none);
  EXPECT_EQ(single_crossing(kPair, 0.1, grid).kind, CrossingKind::none);
  EXPECT_EQ(single_crossing(kPair, 0.45, grid).kind, CrossingKind::none);
  // tau(p0, .) matches the pair at q = 3.
  const double p0 = find_matching_p(kPair, 3.0);
  const double d11 = kPair(1.1) - tau_single(p0, 1.1), d6 = kPair(6.0) - tau_single(p0, 6.0);
  ASSERT_LT(d11 * d6, 0.0);
  const auto r = single_crossing(kPair, p0, grid_between(1.1, 6.0, 0.05));
  EXPECT_EQ(r.kind, CrossingKind::single);
  EXPECT_NEAR(r.q0, 3.0, 1e-9);
  EXPECT_LT(r.residual, 1e-10);
}

TEST(SingleCrossing, CoarseGridIsAnError) {
  const double p0 = find_matching_p(kPair, 3.0);
  // One-cell grid whose endpoints differ in sign is fine; an empty bracket is not.
  EXPECT_EQ(single_crossing(kPair, p0, {1.1, 6.0}).kind, CrossingKind::single);
  EXPECT_THROW(single_crossing(TauCurve({{1.0, 0.2}}), p0, {1.1, 6.0}), std::invalid_argument);
}

TEST(FindMatchingP, Examples) {
  EXPECT_EQ(find_matching_p(TauCurve::single(0.27), 2.0), 0.27);
  const double p4 = find_matching_p(kPair, 1.5);
  EXPECT_GT(p4, 0.2);
  EXPECT_LT(p4, 0.4);
  EXPECT_LT(std::abs(static_cast<double>(oracle::tau(p4, 1.5)) - kPair(1.5)), 1e-12);
  // p -> tau(p, q1) strictly decreases on (0, 1/2) for q1 > 1, so the root is unique.
  double prev = tau_single(0.001, 1.5);
  for (double p = 0.002; p < 0.5; p += 0.001) {
    EXPECT_LT(tau_single(p, 1.5), prev);
    prev = tau_single(p, 1.5);
  }
  EXPECT_THROW(find_matching_p(kPair, 0.5), std::invalid_argument);
}

TEST(InterpolationSystem, WorkedInstanceAgainstCramer) {
  const double p4 = find_matching_p(kPair, 1.5);
  const auto s = solve_interpolation_system(0.2, p4, 0.45, 1.5, 3.0, kPair(1.5), kPair(3.0));
  const auto x = oracle::interpolation_weights({0.2, p4, 0.45}, 1.5, 3.0, kPair(1.5), kPair(3.0));
  for (int j = 0; j < 3; ++j) {
    EXPECT_GT(s.lambda[j], 0.0);
    EXPECT_NEAR(s.lambda[j], static_cast<double>(x[j]), 1e-10);
  }
  EXPECT_NEAR(s.lambda[0] + s.lambda[1] + s.lambda[2], 1.0, 1e-12);
  const auto c = s.curve();
  EXPECT_NEAR(c(1.5), kPair(1.5), 1e-10);
  EXPECT_NEAR(c(3.0), kPair(3.0), 1e-10);
  // Non-zero determinant: no kernel direction leaves every residual unchanged.
  std::array<std::array<long double, 3>, 3> a{};
  const std::array<double, 3> p{0.2, p4, 0.45};
  for (int j = 0; j < 3; ++j) {
    a[0][j] = oracle::tau(p[j], 1.5);
    a[1][j] = oracle::tau(p[j], 3.0);
    a[2][j] = 1.0L;
  }
  const double det = static_cast<double>(oracle::det3(a));
  EXPECT_GT(std::abs(det), 1e-6);
  EXPECT_NEAR(s.determinant, det, 1e-9 * std::abs(det) + 1e-15);
}

TEST(InterpolationSystem, RandomAdmissibleDraws) {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int solved = 0;
  for (int t = 0; t < 100; ++t) {
    const double p1 = 0.03 + 0.37 * u(gen);
    const double p2 = p1 + 0.02 + (0.48 - p1 - 0.02) * u(gen);
    const double l1 = 0.05 + 0.9 * u(gen);
    const double q1 = 1.1 + 2.0 * u(gen);
    const double q2 = q1 + 0.3 + 4.0 * u(gen);
    const double p5 = p2 + (0.1 + 0.8 * u(gen)) * (0.5 - p2);
    const TauCurve tau({{l1, p1}, {1 - l1, p2}});
    const double p4 = find_matching_p(tau, q1);
    const auto s = solve_interpolation_system(p1, p4, p5, q1, q2, tau(q1), tau(q2));
    for (double l : s.lambda) EXPECT_GT(l, 0.0);
    EXPECT_NEAR(s.lambda[0] + s.lambda[1] + s.lambda[2], 1.0, 1e-12);
    const auto c = s.curve();
    EXPECT_NEAR(c(q1), tau(q1), 1e-10);
    EXPECT_NEAR(c(q2), tau(q2), 1e-10);
    EXPECT_GT(std::abs(c.slope(q1) - tau.slope(q1)), 1e-8);
    EXPECT_GT(std::abs(c.slope(q2) - tau.slope(q2)), 1e-8);
    ++solved;
  }
  EXPECT_EQ(solved, 100);
}

TEST(InterpolationSystem, LimitFamilyTendsToOriginalWeights) {
  const double q1 = 1.5, q2 = 3.0;
  const double p4 = find_matching_p(kPair, q1);
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 2; k <= 6; ++k) {
    const double p5 = 0.4 + std::pow(10.0, -k);
    const auto s = solve_interpolation_system(0.2, p4, p5, q1, q2, kPair(q1), kPair(q2));
    const double dev = std::max({std::abs(s.lambda[0] - 0.5), std::abs(s.lambda[1]), std::abs(s.lambda[2] - 0.5)});
    EXPECT_LT(dev, prev) << k;
    prev = dev;
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(InterpolationSystem, Rejections) {
  EXPECT_THROW(solve_interpolation_system(0.3, 0.2, 0.45, 1.5, 3.0, 0, 0), std::invalid_argument);
  EXPECT_THROW(solve_interpolation_system(0.2, 0.3, 0.45, 3.0, 1.5, 0, 0), std::invalid_argument);
  // Targets no positive combination can reach.
  EXPECT_THROW(solve_interpolation_system(0.2, 0.3, 0.45, 1.5, 3.0, 5.0, -9.0), ConstructionError);
}

TEST(Split, TwoComponentExample) {
  SplitOptions o;
  o.p_high = 0.45;
  const auto r = split_combination(kPair, 1.5, 3.0, o);
  EXPECT_EQ(r.curve.size(), 3u);
  EXPECT_NEAR(r.curve(1.5), kPair(1.5), 1e-10);
  EXPECT_NEAR(r.curve(3.0), kPair(3.0), 1e-10);
  EXPECT_GT(std::abs(r.slope_gap_low), 1e-8);
  EXPECT_GT(std::abs(r.slope_gap_high), 1e-8);
  EXPECT_EQ(r.p_high, 0.45);
  // Above between the targets, below outside them.
  for (double q = 1.01; q < 5.0; q += 0.01) {
    if (std::abs(q - 1.5) < 0.02 || std::abs(q - 3.0) < 0.02) continue;
    const bool inside = q > 1.5 && q < 3.0;
    if (inside) {
      EXPECT_GT(r.curve(q), kPair(q)) << q;
    } else {
      EXPECT_LT(r.curve(q), kPair(q)) << q;
    }
  }
  EXPECT_EQ(r.inside_sign, 1);
}

TEST(Split, TrailingComponentsUntouched) {
  const TauCurve four({{0.3, 0.1}, {0.2, 0.25}, {0.15, 0.33}, {0.35, 0.45}});
  const auto r = split_combination(four, 1.4, 2.6);
  ASSERT_EQ(r.curve.size(), 5u);
  EXPECT_EQ(r.curve.components()[3], four.components()[2]);
  EXPECT_EQ(r.curve.components()[4], four.components()[3]);
  double mass = 0.0;
  for (int j = 0; j < 3; ++j) mass += r.curve.components()[j].lambda;
  EXPECT_NEAR(mass, 0.5, 1e-12);
  EXPECT_NEAR(r.curve(1.4), four(1.4), 1e-10);
  EXPECT_NEAR(r.curve(2.6), four(2.6), 1e-10);
}

TEST(Split, Rejections) {
  EXPECT_THROW(split_combination(TauCurve::single(0.2), 1.5, 3.0), std::invalid_argument);
  EXPECT_THROW(split_combination(kPair, 3.0, 1.5), std::invalid_argument);
  SplitOptions o;
  o.p_high = 0.3;
  EXPECT_THROW(split_combination(kPair, 1.5, 3.0, o), std::invalid_argument);
}

TEST(RealizeCurve, SingleComponentIsConstant) {
  const auto w = realize_curve(TauCurve::single(0.3), 10);
  EXPECT_EQ(w.kind(), WeightSequence::Kind::constant);
  EXPECT_EQ(w.at(12345), 0.3);
}

TEST(RealizeCurve, EvenHalvesExactAtEvenDepths) {
  const std::size_t n = 1000;
  const auto w = realize_curve(kPair, n);
  for (std::size_t d = 2; d <= n; d += 2) {
    const auto c = w.prefix_counts(d);
    EXPECT_EQ(c.at(0.2), d / 2);
    EXPECT_EQ(c.at(0.4), d / 2);
  }
  for (double q : {-2.0, 0.5, 3.0}) {
    const long double expect = 0.5L * oracle::tau(0.2, q) + 0.5L * oracle::tau(0.4, q);
    EXPECT_NEAR(tau_n(w, q, 500), static_cast<double>(expect), 1e-14);
  }
}

TEST(RealizeCurve, ThirdsOverNine) {
  const TauCurve c({{1.0 / 3.0, 0.15}, {2.0 / 3.0, 0.35}});
  const auto w = realize_curve(c, 9);
  const auto counts = w.prefix_counts(9);
  EXPECT_EQ(counts.at(0.15), 3u);
  EXPECT_EQ(counts.at(0.35), 6u);
  for (double q : {-1.0, 2.0, 5.0}) {
    const long double expect = (oracle::tau(0.15, q) + 2.0L * oracle::tau(0.35, q)) / 3.0L;
    EXPECT_NEAR(tau_n(w, q, 9), static_cast<double>(expect), 1e-14);
  }
  EXPECT_THROW(realize_curve(c, 1), std::invalid_argument);
}

TEST(RealizeCurve, PrefixEnvelope) {
  // lambda_i N is never an integer here, so every horizon carries rounding.
  const TauCurve c({{0.17345, 0.05}, {0.40721, 0.2}, {0.09113, 0.31}, {0.32821, 0.47}});
  const auto grid = grid_between(-3.0, 6.0, 0.25);
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t horizon : {100u, 1000u, 10000u}) {
    const auto w = realize_curve(c, horizon);
    double worst = 0.0;
    for (double q : grid) {
      double bound = 0.0;
      for (const auto& comp : c.components()) bound += std::abs(tau_single(comp.p, q));
      for (std::size_t n : {horizon / 10, horizon / 3, horizon}) {
        const double err = std::abs(tau_n(w, q, n) - c(q));
        // Every prefix holds floor or ceil of lambda_i n copies of p_i.
        EXPECT_LE(err, bound / static_cast<double>(n) + 1e-13) << horizon << " " << n << " " << q;
      }
      worst = std::max(worst, std::abs(tau_n(w, q, horizon) - c(q)));
    }
    EXPECT_LT(worst, previous);
    previous = worst;
  }
}

TEST(RealizeSup, IdenticalInputs) {
  const auto c = WeightSequence::constant(0.27);
  const auto w = realize_sup({c, c}, BlockRule::superexponential(2));
  for (Depth n : {1ULL, 18ULL, 100ULL, 530ULL, 66066ULL}) EXPECT_EQ(tau_n(w, 2.3, n), tau_n(c, 2.3, n));
  EXPECT_THROW(realize_sup({c}, BlockRule::superexponential(2)), std::invalid_argument);
}

TEST(RealizeSup, BlockEndsAlternateBetweenBranches) {
  const auto rule = BlockRule::geometric(4);
  const auto w = realize_sup({WeightSequence::constant(0.3), WeightSequence::constant(0.4)}, rule);
  const double a = tau_single(0.3, 2.0), b = tau_single(0.4, 2.0);
  for (std::size_t k = 2; k <= 10; ++k) {
    const double v = tau_n(w, 2.0, rule.end(k));
    const double prev = tau_n(w, 2.0, rule.end(k - 1));
    // Block k is 3/4 of the depth at its end; its branch pulls tau_n towards it.
    if (k % 2 == 1) {
      EXPECT_GT(v, prev);
      EXPECT_LT(std::abs(v - a), std::abs(v - b));
    } else {
      EXPECT_LT(v, prev);
      EXPECT_LT(std::abs(v - b), std::abs(v - a));
    }
  }
}

TEST(RealizeSup, LimsupOverBlockEndsApproachesMax) {
  const auto rule = BlockRule::superexponential(2);
  const auto w = realize_sup({WeightSequence::constant(0.3), WeightSequence::constant(0.4)}, rule);
  for (double q : {-2.0, 0.5, 3.0}) {
    const double top = std::max(tau_single(0.3, q), tau_single(0.4, q));
    double prev = std::numeric_limits<double>::infinity();
    for (Depth last : {Depth{1000}, Depth{100000}, Depth{100000000}, Depth{1} << 50}) {
      const auto lim = tau_limits(w, q, DepthSchedule::block_ends(rule, 10, last), {10, 0.0});
      const double gap = top - lim.upper;
      EXPECT_GE(gap, -1e-15);
      EXPECT_LE(gap, prev);
      prev = gap;
    }
    EXPECT_LT(prev, 1e-3 * std::abs(tau_single(0.3, q) - tau_single(0.4, q)) + 1e-15);
  }
}

TEST(SupTau, ValuesAndConvexity) {
  const SupTau sup({TauCurve::single(0.3), TauCurve::single(0.4), TauCurve({{0.5, 0.1}, {0.5, 0.45}})});
  EXPECT_NEAR(sup(0.0), 1.0, 1e-15);
  EXPECT_NEAR(sup(1.0), 0.0, 1e-15);
  for (double a = -5.0; a < 8.0; a += 0.37) {
    for (double h : {0.01, 0.3, 1.7}) EXPECT_LE(sup(a + h), 0.5 * (sup(a) + sup(a + 2 * h)) + 1e-14);
  }
  EXPECT_THROW(SupTau(std::vector<TauCurve>{}), std::invalid_argument);
}

TEST(DetectKinks, SingleCurveHasNone) {
  EXPECT_TRUE(detect_kinks(SupTau({kPair}), linspace(-5, 10, 1000)).kinks.empty());
}

TEST(DetectKinks, TwoConstantsKinkAtZeroAndOne) {
  const SupTau sup({TauCurve::single(0.3), TauCurve::single(0.4)});
  const auto r = detect_kinks(sup, linspace(-3.0, 5.0, 8001));
  ASSERT_EQ(r.kinks.size(), 2u);
  EXPECT_NEAR(r.kinks[0].q, 0.0, 1e-6);
  EXPECT_NEAR(r.kinks[1].q, 1.0, 1e-6);
  const double gap = static_cast<double>(oracle::entropy(0.4L) - oracle::entropy(0.3L));
  EXPECT_NEAR(gap, 0.970951 - 0.881291, 1e-6);
  EXPECT_NEAR(r.kinks[1].gap, gap, 1e-6);
  EXPECT_NEAR(r.kinks[1].left_slope, -static_cast<double>(oracle::entropy(0.4L)), 1e-6);
  // At q = 0 the slopes are log2(p(1-p)) / 2.
  EXPECT_NEAR(r.kinks[0].gap, 0.5 * std::log2(0.24 / 0.21), 1e-6);
  for (const auto& k : r.kinks) EXPECT_GT(k.gap, 0.0);
}

TEST(DetectKinks, GridTooCoarseNamesTheCell) {
  const SupTau sup({TauCurve::single(0.3), TauCurve::single(0.4)});
  try {
    detect_kinks(sup, {-1.0, 2.0, 3.0});
    FAIL() << "expected a grid error";
  } catch (const ConstructionError& e) {
    EXPECT_NE(std::string(e.what()).find("[-1, 2]"), std::string::npos) << e.what();
  }
  EXPECT_THROW(detect_kinks(sup, {0.0, 1.0}), std::invalid_argument);
}

TEST(Construction, OneStageHasNoKinks) {
  const auto s = build_dense_transitions({}, 1, kPair, BlockRule::superexponential(2));
  EXPECT_EQ(s.stage_count(), 1u);
  EXPECT_TRUE(s.active_targets().empty());
  EXPECT_TRUE(detect_kinks(s.sup(), linspace(1.001, 6.0, 2000)).kinks.empty());
}

TEST(Construction, TwoStagesKinkAtBothTargets) {
  const auto s = build_dense_transitions({1.5, 6.0}, 2, kPair, BlockRule::superexponential(2));
  const auto k = detect_kinks(s.sup(), linspace(1.001, s.q_upper(), 8000)).kinks;
  ASSERT_EQ(k.size(), 2u);
  EXPECT_NEAR(k[0].q, 1.5, 1e-4);
  EXPECT_NEAR(k[1].q, 6.0, 1e-4);
  ASSERT_EQ(s.stages.size(), 1u);
  EXPECT_EQ(s.stages[0].case_taken, 1);
  EXPECT_EQ(s.stages[0].owner, 0u);
  EXPECT_GT(s.stages[0].slope_gap_low, 0.0);
  EXPECT_LT(s.stages[0].slope_gap_high, 0.0);
}

TEST(Construction, ThreeStagesNestedKinks) {
  const auto s = build_dense_transitions({1.5, 6.0, 2.0, 4.0}, 3, kPair, BlockRule::superexponential(2));
  const auto active = s.active_targets();
  ASSERT_EQ(active.size(), 4u);
  const auto k = detect_kinks(s.sup(), linspace(1.001, s.q_upper(), 8000)).kinks;
  ASSERT_EQ(k.size(), 4u);
  std::vector<double> sorted = active;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(k[i].q, sorted[i], 1e-4);
    EXPECT_GT(k[i].gap, 1e-8);
  }
  for (const auto& st : s.stages) {
    EXPECT_TRUE(st.case_taken == 1 || st.case_taken == 2);
    for (double q : {st.q_low, st.q_high}) EXPECT_NEAR(s.curves[st.stage](q), s.sup()(q), 1e-10);
  }
}

TEST(Construction, RealizedSequenceCarriesTheMaximum) {
  const auto s = build_dense_transitions({1.5, 6.0, 2.0, 4.0}, 3, kPair, BlockRule::superexponential(2));
  const auto w = s.realize();
  const auto sched = DepthSchedule::block_ends(s.rule, 10000, Depth{1} << 50);
  for (double q : {1.7, 3.0, 5.0}) {
    EXPECT_NEAR(tau_limits(w, q, sched, {10000, 0.0}).upper, s.sup()(q), 1e-2) << q;
  }
}

TEST(Construction, ResumeMatchesDirectBuild) {
  const std::vector<double> t{1.5, 6.0, 2.0, 4.0, 2.5, 3.5};
  auto partial = build_dense_transitions(t, 2, kPair, BlockRule::superexponential(2));
  advance_construction(partial, 4);
  const auto direct = build_dense_transitions(t, 4, kPair, BlockRule::superexponential(2));
  EXPECT_EQ(partial.curves, direct.curves);
  EXPECT_EQ(partial.targets, direct.targets);
  EXPECT_EQ(partial.stages.size(), direct.stages.size());
}

TEST(Construction, Errors) {
  const auto rule = BlockRule::superexponential(2);
  EXPECT_THROW(build_dense_transitions({1.5, 6.0}, 9, kPair, rule), BudgetError);
  EXPECT_THROW(build_dense_transitions({1.5, 6.0, 1.4, 4.0}, 3, kPair, rule), ConstructionError);
  EXPECT_THROW(build_dense_transitions({1.5, 6.0, 2.0, 7.0}, 3, kPair, rule), ConstructionError);
  EXPECT_THROW(build_dense_transitions({0.9, 6.0}, 2, kPair, rule), ConstructionError);
  EXPECT_THROW(build_dense_transitions({1.5, 6.0, 2.0}, 2, kPair, rule), ConstructionError);
  EXPECT_THROW(build_dense_transitions({1.5, 6.0}, 3, kPair, rule), std::invalid_argument);
  EXPECT_NO_THROW(validate_nesting({1.5, 6.0, 2.0, 4.0, 2.5, 3.5}));
}

TEST(Construction, AmbiguousCaseIsAStageError) {
  const StageSplitter same = [](const TauCurve& owner, double, double, double) { return owner; };
  try {
    build_dense_transitions({1.5, 6.0}, 2, kPair, BlockRule::superexponential(2), {}, same);
    FAIL() << "expected an ambiguous-case error";
  } catch (const ConstructionError& e) {
    EXPECT_NE(std::string(e.what()).find("ambiguous"), std::string::npos) << e.what();
  }
}

// The default splitting never lands in the second case on these targets, so
// stage 3 is given a curve that dips below the owner between the targets:
// owner + eps * G with G a null combination of the owner's components.
class CaseTwo : public ::testing::Test {
 protected:
  static constexpr double kScale = 0.5;  // large enough that p5 must shrink three times
  const std::vector<double> targets{1.5, 6.0, 2.0, 4.0, 2.5, 3.5};

  StageSplitter injecting(const ConstructionOptions& o) const {
    const auto fallback = detail::default_splitter(o, targets[1] + (targets[1] - 1.0));
    return [fallback](const TauCurve& owner, double qa, double qb, double p5) {
      if (owner.size() < 4) return fallback(owner, qa, qb, p5);
      auto g = null_direction(owner, qa, qb);
      if (along(owner, g, 1.2) < 0) {
        for (double& x : g) x = -x;
      }
      const double eps = kScale * (p5 - owner.components()[1].p);
      std::vector<TauComponent> comps = owner.components();
      for (std::size_t j = 0; j < comps.size(); ++j) comps[j].lambda += eps * g[j];
      return TauCurve(comps);
    };
  }
};

TEST_F(CaseTwo, NullDirectionHasThePlannedSigns) {
  const auto base = build_dense_transitions(targets, 3, kPair, BlockRule::superexponential(2));
  const auto& owner = base.curves.back();
  ASSERT_EQ(owner.size(), 4u);
  auto g = null_direction(owner, 2.5, 3.5);
  if (along(owner, g, 1.2) < 0) {
    for (double& x : g) x = -x;
  }
  EXPECT_NEAR(along(owner, g, 2.5), 0.0, 1e-14);
  EXPECT_NEAR(along(owner, g, 3.5), 0.0, 1e-14);
  for (double q = 1.05; q < 11.0; q += 0.05) {
    if (std::abs(q - 2.5) < 0.05 || std::abs(q - 3.5) < 0.05) continue;
    const bool inside = q > 2.5 && q < 3.5;
    EXPECT_EQ(along(owner, g, q) < 0, inside) << q;
  }
}

TEST_F(CaseTwo, RepairMovesPreviousTargetsAndKeepsKinks) {
  ConstructionOptions o;
  const auto s = build_dense_transitions(targets, 4, kPair, BlockRule::superexponential(2), o, injecting(o));
  ASSERT_EQ(s.stages.size(), 3u);
  EXPECT_EQ(s.stages[0].case_taken, 1);
  EXPECT_EQ(s.stages[1].case_taken, 1);
  const auto& st = s.stages[2];
  EXPECT_EQ(st.case_taken, 2);
  EXPECT_LT(st.slope_gap_low, 0.0);
  EXPECT_GT(st.slope_gap_high, 0.0);
  EXPECT_GT(st.shrink_steps, 0u);
  ASSERT_TRUE(st.replaced_targets.has_value());
  // Replacements stay within 2^-3 of the smallest gap among the targets.
  const double bound = 0.5 / 8;
  EXPECT_LT(std::abs(st.replaced_targets->first - 2.0), bound);
  EXPECT_LT(std::abs(st.replaced_targets->second - 4.0), bound);
  EXPECT_NE(st.replaced_targets->first, 2.0);
  EXPECT_EQ(s.targets[2], st.replaced_targets->first);
  EXPECT_EQ(s.targets[3], st.replaced_targets->second);
  EXPECT_EQ(s.initial_targets, targets);
  EXPECT_NO_THROW(validate_nesting(s.targets));

  const auto active = s.active_targets();
  const auto k = detect_kinks(s.sup(), linspace(1.001, s.q_upper(), 20000)).kinks;
  ASSERT_EQ(k.size(), active.size());
  std::vector<double> sorted = active;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < k.size(); ++i) {
    EXPECT_NEAR(k[i].q, sorted[i], 1e-4);
    EXPECT_GT(k[i].gap, 1e-8);
  }
}

TEST_F(CaseTwo, ExhaustedShrinkBudgetIsAStageError) {
  ConstructionOptions o;
  o.shrink_budget = 0;
  try {
    build_dense_transitions(targets, 4, kPair, BlockRule::superexponential(2), o, injecting(o));
    FAIL() << "expected a repair failure";
  } catch (const ConstructionError& e) {
    EXPECT_NE(std::string(e.what()).find("stage 3"), std::string::npos) << e.what();
  }
}
