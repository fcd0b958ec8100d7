// Staged construction: four stages split the spectrum of a two-coin mixture
// into nested pieces, each stage adding a pair of kinks inside the last pair.

#include <cstdio>

#include "cointoss/cointoss.hpp"

using namespace cointoss;

int main(int argc, char** argv) {
  const std::size_t stages = argc > 1 ? std::stoul(argv[1]) : 4;
  try {
    const auto state = build_dense_transitions({1.5, 6.0, 2.0, 4.0, 2.5, 3.5}, stages, TauCurve({{0.5, 0.2}, {0.5, 0.4}}),
                                               BlockRule::superexponential(2));
    for (const auto& st : state.stages) {
      std::printf("stage %zu: targets (%.4f, %.4f), case %d, p5 = %.6f after %zu halvings\n", st.stage, st.q_low,
                  st.q_high, st.case_taken, st.p_high, st.shrink_steps);
    }
    std::printf("\ncurves\n");
    for (std::size_t i = 0; i < state.curves.size(); ++i) {
      std::printf("  tau_%zu:", i + 1);
      for (const auto& c : state.curves[i].components()) std::printf("  %.5f x p=%.5f", c.lambda, c.p);
      std::printf("\n");
    }
    std::printf("\nkinks of the maximum\n");
    for (const auto& k : detect_kinks(state.sup(), linspace(1.001, state.q_upper(), 8000)).kinks) {
      std::printf("  q = %.6f   gap %.3e   curve %zu -> %zu\n", k.q, k.gap, k.left_owner + 1, k.right_owner + 1);
    }

    const auto w = state.realize();
    const auto sched = DepthSchedule::block_ends(state.rule, 10000, Depth{1} << 50);
    std::printf("\nrealized sequence, limsup over block ends vs the maximum\n");
    for (double q : {1.7, 2.2, 3.0, 5.0}) {
      std::printf("  q = %.1f   %.6f   %.6f\n", q, tau_limits(w, q, sched, {10000, 0.0}).upper, state.sup()(q));
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "construction failed: %s\n", e.what());
    return 1;
  }
  return 0;
}
