#include <doctest.h>

#include <cmath>

#include "qalign/backends.hpp"
#include "qalign/diagnostics.hpp"
#include "qalign/sampler.hpp"
#include "qalign/target.hpp"
#include "qalign/toy_spaces.hpp"

using namespace qalign;

TEST_SUITE("diagnostics") {
  TEST_CASE("four-sequence kernel entries by hand") {
    // From "A A" (r = 1) at beta = 1: cut 0 proposes any of the four (1/4 each), cut 1 proposes
    // "A A" or "A B" (1/2 each). Every move to a reward-0 state is accepted with exp(-1).
    TransitionKernel k = build_transition_kernel(four_sequence_space(), 1.0);
    auto idx = [&](const std::string& t) {
      for (std::size_t i = 0; i < k.support.size(); ++i) {
        if (k.support[i].text() == t) return i;
      }
      FAIL("missing state");
      return std::size_t{0};
    };
    const double e = std::exp(-1.0);
    std::size_t aa = idx("A A"), ab = idx("A B"), ba = idx("B A"), bb = idx("B B");
    CHECK(k.at(aa, ab) == doctest::Approx(0.5 * (0.25 + 0.5) * e));
    CHECK(k.at(aa, ba) == doctest::Approx(0.5 * 0.25 * e));
    CHECK(k.at(aa, bb) == doctest::Approx(0.5 * 0.25 * e));
    CHECK(k.at(bb, aa) == doctest::Approx(0.5 * 0.25));
    double row = 0.0;
    for (std::size_t j = 0; j < k.support.size(); ++j) row += k.at(aa, j);
    CHECK(row == doctest::Approx(1.0));
  }

  TEST_CASE("kernel is reversible with respect to the target") {
    for (double beta : {0.3, 1.0, 3.0}) {
      KernelCheck c = check_kernel(build_transition_kernel(thirty_sequence_space(), beta));
      CHECK(c.stationarity_l1 < 1e-12);
      CHECK(c.detailed_balance < 1e-12);
      CHECK(c.row_sum_error < 1e-12);
      CHECK(c.min_off_diagonal > 0.0);
      CHECK(c.min_diagonal > 0.0);
    }
  }

  TEST_CASE("a wrong length correction breaks stationarity") {
    AcceptanceRule flipped = [](double rp, double rc, double beta, std::size_t lp, std::size_t lc) {
      return acceptance_probability(rp, rc, beta, lc, lp);
    };
    KernelCheck c = check_kernel(build_transition_kernel(thirty_sequence_space(), 1.0, flipped));
    CHECK(c.stationarity_l1 > 1e-3);
    // Equal lengths: the correction is one either way.
    KernelCheck four = check_kernel(build_transition_kernel(four_sequence_space(), 1.0, flipped));
    CHECK(four.stationarity_l1 < 1e-12);
  }

  TEST_CASE("exact acceptance rate agrees with a long chain") {
    EnumerableSpace space = thirty_sequence_space();
    double exact = exact_acceptance_rate(build_transition_kernel(space, 1.0));
    ToyGenerator gen(space);
    ToyReward reward(space);
    RewardCache cache(reward);
    QAlignConfig c;
    c.steps = 100000;
    c.max_len = 4;
    c.seed = 4;
    ChainResult chain = qalign_chain(c, Prompt{"p", "p", std::nullopt, {}}, gen, cache);
    CHECK(chain.acceptance_rate == doctest::Approx(exact).epsilon(0.02));
  }

  TEST_CASE("diagnostics report") {
    EnumerableSpace space = four_sequence_space();
    ToyGenerator gen(space);
    ToyReward reward(space);
    RewardCache cache(reward);
    QAlignConfig c;
    c.steps = 999;
    c.max_len = 2;
    c.seed = 1;
    Prompt x{"p", "p", std::nullopt, {}};
    ChainResult chain = qalign_chain(c, x, gen, cache);
    ExactDistribution pi = exact_distribution(TargetSpec{BetaParam(1.0)}, x, score_space(space));
    DiagnosticsReport r = diagnostics(chain, &pi, 0.1, 10);
    CHECK(r.burn_in == 100);
    CHECK(r.reward_trace.size() == 1000);
    CHECK(r.tv_curve.size() == 10);
    CHECK(r.tv_curve.back().step == 999);
    REQUIRE(r.final_tv);
    CHECK(*r.final_tv == doctest::Approx(r.tv_curve.back().tv));
    CHECK(diagnostics(chain).tv_curve.empty());
  }
}
