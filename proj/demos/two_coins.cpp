// Two coins, 0.3 and 0.4, alternating on blocks of superexponential length.
// Along the block ends tau_n(2) swings between the two single-coin spectra,
// and the upper spectrum is their maximum with kinks at q = 0 and q = 1.

#include <cstdio>

#include "cointoss/cointoss.hpp"

using namespace cointoss;

int main() {
  const auto rule = BlockRule::superexponential(2);
  const auto w = WeightSequence::block_schedule({WeightSequence::constant(0.3), WeightSequence::constant(0.4)}, rule);

  std::printf("block end      tau_n(2)     tau_n(1/2)\n");
  for (std::size_t k = 1; k <= 6; ++k) {
    const Depth n = rule.end(k);
    std::printf("%12llu  %11.6f  %11.6f\n", static_cast<unsigned long long>(n), tau_n(w, 2.0, n), tau_n(w, 0.5, n));
  }
  std::printf("single coins:  tau(0.3, 2) = %.6f   tau(0.4, 2) = %.6f\n\n", tau_single(0.3, 2.0), tau_single(0.4, 2.0));

  const auto sched = DepthSchedule::block_ends(rule, 100, Depth{1} << 40);
  for (double q : {-1.0, 0.5, 2.0, 3.0}) {
    const auto lim = tau_limits(w, q, sched, {100, 1e-3});
    std::printf("q = %4.1f   liminf %.6f (n = %llu)   limsup %.6f (n = %llu)\n", q, lim.lower,
                static_cast<unsigned long long>(lim.lower_depth), lim.upper,
                static_cast<unsigned long long>(lim.upper_depth));
  }

  const SupTau upper({TauCurve::single(0.3), TauCurve::single(0.4)});
  std::printf("\nkinks of the upper spectrum\n");
  for (const auto& k : detect_kinks(upper, linspace(-3, 5, 8001)).kinks) {
    std::printf("  q = %+.6f   slopes %.6f -> %.6f   gap %.6f\n", k.q, k.left_slope, k.right_slope, k.gap);
  }
  std::printf("entropies h(0.3) = %.6f, h(0.4) = %.6f\n", binary_entropy(0.3), binary_entropy(0.4));

  // The same pair on geometric blocks: reachable depths, but the block
  // ratio does not diverge, so the swings never reach the coin spectra.
  const auto demo_rule = BlockRule::geometric(4);
  const auto v = WeightSequence::block_schedule({WeightSequence::constant(0.3), WeightSequence::constant(0.4)}, demo_rule);
  const auto lim = tau_limits(v, 2.0, DepthSchedule::block_ends(demo_rule, 100, Depth{1} << 30), {100, 1e-3});
  std::printf("\ngeometric blocks (weakly divergent): q = 2 liminf %.6f  limsup %.6f\n", lim.lower, lim.upper);
  return 0;
}
