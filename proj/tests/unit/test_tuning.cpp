#include <doctest.h>

#include "qalign/backends.hpp"
#include "qalign/diagnostics.hpp"
#include "qalign/toy_spaces.hpp"
#include "qalign/tuning.hpp"

using namespace qalign;

namespace {

std::vector<Prompt> pilots(int n) {
  std::vector<Prompt> out;
  for (int i = 0; i < n; ++i) out.push_back(Prompt{"pilot-" + std::to_string(i), "x", std::nullopt, {}});
  return out;
}

}  // namespace

TEST_SUITE("tuning") {
  TEST_CASE("calibrated toy space has a 50% exact acceptance rate at beta = 1") {
    double s = calibrate_tuning_scale(0.5, 1.0);
    CHECK(exact_acceptance_rate(build_transition_kernel(fixed_length_space(6, s), 1.0)) ==
          doctest::Approx(0.5).epsilon(1e-9));
  }

  TEST_CASE("pilot rate is deterministic and independent of the worker count") {
    EnumerableSpace space = fixed_length_space(6, 1.0);
    ToyGenerator gen(space);
    ToyReward reward(space);
    auto ps = pilots(6);
    TuneOptions one;
    one.max_len = 6;
    one.seed = 9;
    TuneOptions four = one;
    four.workers = 4;
    double a = pilot_acceptance_rate(ps, gen, reward, 0.8, one);
    CHECK(a == pilot_acceptance_rate(ps, gen, reward, 0.8, four));
    CHECK(a == pilot_acceptance_rate(ps, gen, reward, 0.8, one));
  }

  TEST_CASE("bisection lands within tolerance on a monotone problem") {
    EnumerableSpace space = fixed_length_space(6, 2.0);
    ToyGenerator gen(space);
    ToyReward reward(space);
    auto ps = pilots(16);
    TuneOptions o;
    o.max_len = 6;
    o.pilot_steps = 64;
    o.seed = 2;
    TuneResult r = tune_beta(ps, gen, reward, o);
    CHECK(std::abs(r.rate - 0.5) <= o.tolerance);
    CHECK_FALSE(r.warning);
    CHECK(r.trace.size() >= 2);
    CHECK(r.trace[0].beta > r.trace[1].beta);  // upper bracket first
    CHECK(pilot_acceptance_rate(ps, gen, reward, r.beta.value(), o) == r.rate);
  }

  TEST_CASE("unreachable target returns the closest beta with a warning") {
    EnumerableSpace space = fixed_length_space(6, 1.0);
    ToyGenerator gen(space);
    ToyReward reward(space);
    auto ps = pilots(4);
    TuneOptions o;
    o.max_len = 6;
    o.target_rate = 0.995;
    o.tolerance = 0.001;
    TuneResult r = tune_beta(ps, gen, reward, o);
    REQUIRE(r.warning);
    double best = 1.0;
    for (const auto& p : r.trace) best = std::min(best, std::abs(p.rate - o.target_rate));
    CHECK(std::abs(r.rate - o.target_rate) == doctest::Approx(best));
  }
}
