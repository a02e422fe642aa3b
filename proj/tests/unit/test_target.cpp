#include <doctest.h>

#include <cmath>

#include "qalign/target.hpp"
#include "qalign/toy_spaces.hpp"

using namespace qalign;

namespace {
const Prompt kPrompt{"p", "p", std::nullopt, {}};
}

TEST_SUITE("target") {
  TEST_CASE("four-sequence target by hand") {
    auto scored = score_space(four_sequence_space());
    for (double beta : {0.5, 1.0, 2.0}) {
      ExactDistribution pi = exact_distribution(TargetSpec{BetaParam(beta)}, kPrompt, scored);
      const double e = std::exp(1.0 / beta);
      CHECK(pi.probability("A A") == doctest::Approx(e / (e + 3.0)).epsilon(1e-14));
      CHECK(pi.probability("B B") == doctest::Approx(1.0 / (e + 3.0)).epsilon(1e-14));
      CHECK(pi.probability("C C") == 0.0);
      CHECK(partition_function(TargetSpec{BetaParam(beta)}, kPrompt, scored) ==
            doctest::Approx(0.25 * (e + 3.0)).epsilon(1e-14));
    }
  }

  TEST_CASE("target is proportional to p * exp(r / beta)") {
    EnumerableSpace space = thirty_sequence_space();
    auto scored = score_space(space);
    const double beta = 0.7;
    double z = 0.0;
    for (const auto& s : scored) z += std::exp(space.log_prob(s.seq.tokens()) + s.reward / beta);
    ExactDistribution pi = exact_distribution(TargetSpec{BetaParam(beta)}, kPrompt, scored);
    for (const auto& s : scored) {
      CHECK(pi.probability(s.seq.text()) ==
            doctest::Approx(std::exp(space.log_prob(s.seq.tokens()) + s.reward / beta) / z).epsilon(1e-12));
    }
  }

  TEST_CASE("density ratio ignores the normalizer") {
    auto scored = score_space(thirty_sequence_space());
    TargetSpec spec{BetaParam(2.0)};
    const auto& a = scored[3];
    const auto& b = scored[17];
    double ratio = log_unnormalized_density(spec, kPrompt, a) - log_unnormalized_density(spec, kPrompt, b);
    CHECK(log_target_ratio(spec, kPrompt, a, b) == doctest::Approx(ratio));
    CHECK(log_unnormalized_density(spec, kPrompt, a, DensityPart::reward_only) == doctest::Approx(a.reward / 2.0));
  }

  TEST_CASE("total variation of empirical counts") {
    auto scored = score_space(four_sequence_space());
    ExactDistribution pi = exact_distribution(TargetSpec{BetaParam(1.0)}, kPrompt, scored);
    std::unordered_map<std::string, double> counts;
    for (std::size_t i = 0; i < pi.size(); ++i) counts[pi.support()[i].text()] = 1000.0 * pi.probabilities()[i];
    CHECK(total_variation(pi, counts) == doctest::Approx(0.0).epsilon(1e-12));
    std::unordered_map<std::string, double> point{{"A B", 5.0}};
    CHECK(total_variation(pi, point) == doctest::Approx(1.0 - pi.probability("A B")).epsilon(1e-12));
  }

  TEST_CASE("incomplete spaces are rejected") {
    auto scored = score_space(four_sequence_space());
    scored.pop_back();
    CHECK_THROWS_AS(partition_function(TargetSpec{BetaParam(1.0)}, kPrompt, scored), Error);
  }
}
