#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "cointoss/cointoss.hpp"
#include "cointoss/config.hpp"
#include "oracles.hpp"

using namespace cointoss;

namespace {

std::size_t bin_of(const AlphaBins& b, double alpha) {
  for (std::size_t i = 0; i < b.count; ++i) {
    if (alpha >= b.left(i) && alpha < b.right(i)) return i;
  }
  return b.count;
}

double binomial_log2(unsigned n, unsigned k) {
  return (std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)) / std::log(2.0);
}

}  // namespace

TEST(CoarseSpectrum, UniformHasOneBin) {
  const auto c = coarse_spectrum(WeightSequence::constant(0.5), 12, {});
  EXPECT_EQ(c.total(), 4096u);
  std::size_t occupied = 0;
  for (std::size_t i = 0; i < c.counts.size(); ++i) {
    if (c.counts[i] == 0) continue;
    ++occupied;
    EXPECT_LE(c.bins.left(i), 1.0 + 1e-12);
    EXPECT_GE(c.bins.right(i), 1.0 - 1e-12);
    EXPECT_DOUBLE_EQ(c.normalized(i), 1.0);
  }
  EXPECT_EQ(occupied, 1u);
}

TEST(CoarseSpectrum, ConstantBinsFollowBinomialCounts) {
  const unsigned n = 14;
  const AlphaBins bins{0.4, 1.8, 280};
  const auto c = coarse_spectrum(WeightSequence::constant(0.3), n, bins);
  EXPECT_EQ(c.total(), 1u << n);
  // k ones give exponent (-(n-k) log2 0.3 - k log2 0.7) / n and C(n,k) cylinders.
  std::vector<std::uint64_t> expect(bins.count, 0);
  for (unsigned k = 0; k <= n; ++k) {
    const long double zeros = n - k, ones = k;
    const double alpha = static_cast<double>((-zeros * std::log2(0.3L) - ones * std::log2(0.7L)) / n);
    expect[bin_of(bins, alpha)] += static_cast<std::uint64_t>(std::llround(std::exp2(binomial_log2(n, k))));
  }
  EXPECT_EQ(c.counts, expect);
  // The most populated exponent is -tau'(0) = -log2(0.21)/2, where the
  // spectrum reaches 1; at alpha = h(0.3) it only reaches h(0.3).
  const auto peak = std::max_element(c.counts.begin(), c.counts.end()) - c.counts.begin();
  const double a0 = -tau_single_d1(0.3, 0.0);
  EXPECT_NEAR(a0, -std::log2(0.21) / 2, 1e-12);
  EXPECT_LE(bins.left(peak), a0);
  EXPECT_GT(bins.right(peak), a0);
  EXPECT_NEAR(c.normalized(peak), binomial_log2(n, 7) / n, 1e-12);
  const double h = binary_entropy(0.3);
  const auto hb = bin_of(bins, h);
  const auto grid = linspace(-20, 20, 4001);
  const auto tau = sample_curve([](double q) { return tau_single(0.3, q); }, grid);
  if (c.counts[hb] > 0) {
    EXPECT_LE(c.normalized(hb), legendre(grid, tau, bins.right(hb)).value + 1e-12);
  }
  EXPECT_NEAR(legendre(grid, tau, h).value, h, 1e-4);
}

TEST(CoarseSpectrum, AlternatingWithinExtremalExponents) {
  std::vector<double> p;
  for (int j = 0; j < 14; ++j) p.push_back(j % 2 == 0 ? 0.3 : 0.4);
  const auto w = WeightSequence::explicit_list(p);
  double lo = 0.0, hi = 0.0;
  for (double x : p) {
    lo += -std::log2(std::max(x, 1 - x));
    hi += -std::log2(std::min(x, 1 - x));
  }
  lo /= 14;
  hi /= 14;
  const AlphaBins bins{0.0, 2.0, 200};
  const auto c = coarse_spectrum(w, 14, bins);
  EXPECT_EQ(c.below + c.above, 0u);
  for (std::size_t i = 0; i < bins.count; ++i) {
    if (c.counts[i] == 0) continue;
    EXPECT_GE(bins.right(i), lo - 1e-12);
    EXPECT_LE(bins.left(i), hi + 1e-12);
  }
  EXPECT_GT(c.counts[bin_of(bins, lo)], 0u);
  EXPECT_GT(c.counts[bin_of(bins, hi - 1e-12)], 0u);
}

TEST(CoarseSpectrum, ChernoffBoundHolds) {
  const auto grid = linspace(-20, 20, 801);
  for (const auto& w : {WeightSequence::constant(0.3), WeightSequence::periodic({0.1, 0.45, 0.3}),
                        WeightSequence::explicit_list({0.2, 0.4, 0.05, 0.33, 0.5, 0.12, 0.27, 0.41, 0.09, 0.36,
                                                       0.22, 0.48, 0.15, 0.3, 0.44, 0.07})}) {
    const unsigned n = 16;
    const AlphaBins bins{0.0, 4.5, 90};
    const auto c = coarse_spectrum(w, n, bins);
    EXPECT_EQ(c.total(), 1u << n);
    for (std::size_t i = 0; i < bins.count; ++i) {
      if (c.counts[i] == 0) continue;
      EXPECT_LE(c.normalized(i), 1.0);
      EXPECT_LE(c.normalized(i), coarse_spectrum_bound(w, n, bins, i, grid) + 1e-12) << i;
    }
  }
}

TEST(CoarseSpectrum, Rejections) {
  EXPECT_THROW(coarse_spectrum(WeightSequence::constant(0.3), 23, {}), BudgetError);
  EXPECT_THROW(coarse_spectrum(WeightSequence::constant(0.3), 0, {}), std::invalid_argument);
  EXPECT_THROW(coarse_spectrum(WeightSequence::constant(0.3), 4, {1.0, 1.0, 3}), std::invalid_argument);
}

TEST(VerifySuite, DefaultConfigurationPasses) {
  const auto report = run_verify_suite({});
  EXPECT_TRUE(report.passed());
  EXPECT_EQ(report.checks.size(), verify_registry().size());
  for (const auto& c : report.checks) {
    EXPECT_TRUE(c.passed) << c.name << ": residual " << c.residual << " tolerance " << c.tolerance << " " << c.detail;
    EXPECT_LT(c.residual, c.tolerance) << c.name;
  }
}

TEST(VerifySuite, EveryFaultIsCaught) {
  for (const auto& fault : fault_names()) {
    if (fault == "none") continue;
    VerifyConfig c;
    c.fault_injection = fault;
    const auto report = run_verify_suite(c);
    EXPECT_FALSE(report.passed()) << fault;
  }
  VerifyConfig bad;
  bad.fault_injection = "nonsense";
  EXPECT_THROW(run_verify_suite(bad), ConfigError);
}

TEST(VerifySuite, DepthAboveCapIsABudgetError) {
  VerifyConfig c;
  c.enumeration_depth = 22;
  EXPECT_THROW(run_verify_suite(c), BudgetError);
  c.enumeration_depth = 12;
  c.enumeration_cap = 12;
  EXPECT_THROW(run_verify_suite(c), BudgetError);
}

TEST(VerifySuite, RegistryCoversEveryOperation) {
  const std::vector<std::string> required{
      "cylinder_measure", "local_exponent", "tau_single", "tau_single_d1", "tau_single_d2", "tau_n", "tau_limits",
      "legendre", "entropy_dimension", "level_set_dimension_bound", "subsequence_derivative_bracket",
      "gibbs_reweight", "verify_consistency", "verify_tau_composition", "gibbs_dimension", "ratio_is_decreasing",
      "single_crossing", "find_matching_p", "solve_interpolation_system", "split_combination", "realize_curve",
      "realize_sup", "build_dense_transitions", "detect_kinks"};
  std::set<std::string> covered, names;
  for (const auto& spec : verify_registry()) {
    EXPECT_TRUE(names.insert(spec.name).second) << "duplicate check " << spec.name;
    EXPECT_FALSE(spec.subject.empty()) << spec.name;
    covered.insert(spec.covers.begin(), spec.covers.end());
  }
  for (const auto& op : required) EXPECT_TRUE(covered.count(op)) << op << " is not exercised by any check";
}

TEST(Io, NumbersRoundTrip) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, 1e-17}) {
    EXPECT_EQ(std::strtod(io::format_number(x).c_str(), nullptr), x);
  }
  EXPECT_EQ(io::format_number(0.5), "0.5");
  EXPECT_EQ(io::format_number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(io::format_number(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(io::format_number(std::nan("")), "nan");
}

TEST(Io, CsvTable) {
  io::CsvTable t({"q", "depth", "value"});
  t.row(0.5, Depth{12}, 0.25);
  t.row(-1.0, 3, "x");
  EXPECT_EQ(t.str(), "q,depth,value\n0.5,12,0.25\n-1,3,x\n");
  EXPECT_THROW(t.row(1.0, 2.0), std::logic_error);
}

TEST(Io, SequencesRoundTrip) {
  // Geometric(3) blocks end at 3, 12, 39: the explicit part serves depths 4..12.
  const auto listed = WeightSequence::explicit_list({0.2, 0.3, 0.4, 0.45, 0.05, 0.15, 0.25, 0.35, 0.12, 0.22, 0.32, 0.42});
  const auto inner =
      WeightSequence::block_schedule({WeightSequence::periodic({0.1, 0.35}), listed}, BlockRule::geometric(3));
  const std::vector<WeightSequence> seqs{
      WeightSequence::constant(0.3), inner, WeightSequence::gibbs(inner, -1.25),
      WeightSequence::diagonal({WeightSequence::constant(0.2), inner}, BlockRule::superexponential(1.5))};
  for (const auto& w : seqs) {
    const auto j = io::to_json(w);
    const auto back = io::sequence_from_json(io::parse_json(j.dump(), "test"));
    EXPECT_EQ(io::to_json(back), j);
    for (Depth n = 1; n <= 12; ++n) EXPECT_EQ(back.at(n), w.at(n));
  }
}

TEST(Io, SequenceSchemaErrors) {
  using io::json;
  EXPECT_THROW(io::sequence_from_json(json{{"kind", "constant"}}), ConfigError);
  EXPECT_THROW(io::sequence_from_json(json{{"kind", "constant"}, {"p", 1.5}}), ConfigError);
  EXPECT_THROW(io::sequence_from_json(json{{"kind", "wavelet"}}), ConfigError);
  EXPECT_THROW(io::sequence_from_json(json{{"kind", "periodic"}, {"weights", "0.3"}}), ConfigError);
  EXPECT_THROW(io::sequence_from_json(json{{"kind", "block_schedule"}, {"parts", json::array()}}), ConfigError);
  EXPECT_THROW(io::parse_json("{oops", "inline"), ConfigError);
  const auto curve = io::sequence_from_json(
      json{{"kind", "curve"}, {"components", io::to_json(TauCurve({{0.5, 0.2}, {0.5, 0.4}}))}, {"horizon", 8}});
  EXPECT_EQ(curve.kind(), WeightSequence::Kind::periodic);
  EXPECT_EQ(curve.prefix_counts(8).at(0.2), 4u);
}

TEST(Io, ConstructionStateRoundTrip) {
  const auto s = build_dense_transitions({1.5, 6.0, 2.0, 4.0}, 3, TauCurve({{0.5, 0.2}, {0.5, 0.4}}),
                                         BlockRule::superexponential(2));
  const auto j = io::to_json(s);
  const auto back = io::state_from_json(io::parse_json(j.dump(2), "state"));
  EXPECT_EQ(back.curves, s.curves);
  EXPECT_EQ(back.targets, s.targets);
  EXPECT_EQ(back.initial_targets, s.initial_targets);
  EXPECT_EQ(back.rule, s.rule);
  ASSERT_EQ(back.stages.size(), s.stages.size());
  for (std::size_t i = 0; i < s.stages.size(); ++i) {
    EXPECT_EQ(back.stages[i].case_taken, s.stages[i].case_taken);
    EXPECT_EQ(back.stages[i].p_high, s.stages[i].p_high);
    EXPECT_EQ(back.stages[i].slope_gap_low, s.stages[i].slope_gap_low);
  }
  EXPECT_EQ(io::to_json(back), j);
  const auto realized = io::sequence_from_json({{"kind", "construction"}, {"state", j}});
  const auto direct = s.realize();
  for (Depth n : {1ULL, 17ULL, 600ULL, 70000ULL}) EXPECT_EQ(realized.at(n), direct.at(n));
}

TEST(Io, BrokenStatesAreConfigErrors) {
  const auto s = build_dense_transitions({1.5, 6.0}, 2, TauCurve({{0.5, 0.2}, {0.5, 0.4}}),
                                         BlockRule::superexponential(2));
  auto j = io::to_json(s);
  auto no_curves = j;
  no_curves.erase("curves");
  EXPECT_THROW(io::state_from_json(no_curves), ConfigError);
  auto unnested = j;
  unnested["targets"] = {6.0, 1.5};
  EXPECT_THROW(io::state_from_json(unnested), ConfigError);
  auto mismatch = j;
  mismatch["stages"] = io::json::array();
  EXPECT_THROW(io::state_from_json(mismatch), ConfigError);
  auto bad_weights = j;
  bad_weights["curves"][0][0]["lambda"] = 0.9;
  EXPECT_THROW(io::state_from_json(bad_weights), ConfigError);
}

TEST(Io, GridsAndSchedules) {
  using io::json;
  EXPECT_EQ(io::grid_from_json(json{{"from", 0.0}, {"to", 1.0}, {"count", 5}}, "q"),
            (std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
  EXPECT_THROW(io::grid_from_json(json::array({2.0, 1.0}), "q"), ConfigError);
  EXPECT_EQ(io::schedule_from_json(json{{"linear", {{"first", 2}, {"last", 10}, {"step", 4}}}}).depths(),
            (std::vector<Depth>{2, 6, 10}));
  EXPECT_EQ(io::schedule_from_json(json{{"block_ends", {{"first", 10}, {"last", 100000}}}}).depths(),
            (std::vector<Depth>{18, 530, 66066}));
  EXPECT_THROW(io::schedule_from_json(json::array({5, 3})), ConfigError);
  EXPECT_THROW(io::schedule_from_json(json{{"spiral", 1}}), ConfigError);
}

TEST(RunConfig, Validation) {
  using io::json;
  EXPECT_THROW(RunConfig::from_json(json::array()), ConfigError);
  EXPECT_THROW(RunConfig::from_json(json{{"samples", 0}}), ConfigError);
  EXPECT_THROW(RunConfig::from_json(json{{"depth", 0}}), ConfigError);
  EXPECT_THROW(RunConfig::from_json(json{{"tolerances", {{"near", -1.0}}}}), ConfigError);
  EXPECT_THROW(RunConfig::from_json(json{{"alpha_bins", {{"from", 1}, {"to", 0}, {"count", 3}}}}), ConfigError);
  EXPECT_THROW(RunConfig::from_json(json{{"depth", "deep"}}), ConfigError);
  const auto c = RunConfig::from_json(json{{"sequence", {{"kind", "constant"}, {"p", 0.3}}},
                                           {"q", json::array({0.0, 1.0})},
                                           {"depth", 7},
                                           {"verify", {{"stages", 2}, {"fault_injection", "d1"}}}});
  EXPECT_EQ(c.sequence().at(3), 0.3);
  EXPECT_EQ(c.single_depth(), 7u);
  EXPECT_EQ(c.verify.stages, 2u);
  EXPECT_EQ(c.verify.fault_injection, "d1");
  EXPECT_THROW(c.schedule(), ConfigError);
  EXPECT_THROW(RunConfig{}.sequence(), ConfigError);
}
