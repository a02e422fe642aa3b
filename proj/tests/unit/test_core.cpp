#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "qalign/core.hpp"
#include "qalign/numeric.hpp"
#include "qalign/parallel.hpp"
#include "qalign/random.hpp"

using namespace qalign;

TEST_SUITE("core") {
  TEST_CASE("word units render space-joined and parse back") {
    Sequence s = Sequence::parse("  the   answer is\n42 ", UnitKind::word);
    CHECK(s.length() == 4);
    CHECK(s.text() == "the answer is 42");
    CHECK(Sequence::parse(s.text(), UnitKind::word) == s);
    CHECK(render(s.prefix(2), UnitKind::word) == "the answer");
  }

  TEST_CASE("character units split UTF-8 code points") {
    Sequence s = Sequence::parse("aé b", UnitKind::character);
    REQUIRE(s.length() == 4);
    CHECK(s.tokens()[1] == "é");
    CHECK(s.text() == "aé b");
  }

  TEST_CASE("unit names round-trip") {
    for (UnitKind u : {UnitKind::backend_token, UnitKind::word, UnitKind::character}) {
      CHECK(parse_unit_kind(to_string(u)) == u);
    }
    CHECK_THROWS_AS(parse_unit_kind("bytes"), Error);
  }

  TEST_CASE("beta must be positive and finite") {
    CHECK(BetaParam(0.25).value() == 0.25);
    CHECK_THROWS_AS(BetaParam(0.0), Error);
    CHECK_THROWS_AS(BetaParam(-1.0), Error);
    CHECK_THROWS_AS(BetaParam(std::numeric_limits<double>::infinity()), Error);
    CHECK_THROWS_AS(BetaParam(std::nan("")), Error);
  }

  TEST_CASE("mixture fit validation") {
    MixtureFit f;
    f.w1 = 0.3;
    f.w2 = 0.7;
    f.mu1 = 0.0;
    f.mu2 = 1.0;
    f.sigma1 = 0.5;
    f.sigma2 = 2.0;
    f.dominant_index = 2;
    CHECK_NOTHROW(f.validate());
    CHECK(f.dominant_weight() == 0.7);
    f.dominant_index = 1;  // not the larger-variance component
    CHECK_THROWS_AS(f.validate(), Error);
    f.dominant_index = 2;
    f.w2 = 0.8;
    CHECK_THROWS_AS(f.validate(), Error);
  }

  TEST_CASE("dominant component is the larger variance, ties to the larger mean") {
    CHECK(dominant_component(0.0, 1.0, 5.0, 0.5) == 1);
    CHECK(dominant_component(0.0, 0.5, 5.0, 1.0) == 2);
    CHECK(dominant_component(3.0, 1.0, 1.0, 1.0) == 1);
    CHECK(dominant_component(1.0, 1.0, 3.0, 1.0) == 2);
  }

  TEST_CASE("budget curve requires increasing FLOPs and metric in [0, 1]") {
    BudgetCurve c("qalign");
    c.add_point({100.0, 10, 0.5});
    CHECK_THROWS_AS(c.add_point({100.0, 12, 0.4}), Error);
    CHECK_THROWS_AS(c.add_point({200.0, 12, 1.5}), Error);
    c.add_point({200.0, 20, 0.25});
    CHECK(c.points().size() == 2);
  }

  TEST_CASE("chain record validation") {
    ChainRecord r{0, ScoredSequence{Sequence({"a"}, UnitKind::word), 0.0, std::nullopt}, std::nullopt, std::nullopt,
                  1.0, true, 1};
    CHECK_NOTHROW(r.validate());
    r.alpha = 1.5;
    CHECK_THROWS_AS(r.validate(), Error);
  }

  TEST_CASE("seed mixing is deterministic and spreads nearby inputs") {
    CHECK(mix_seed(1, 2) == mix_seed(1, 2));
    std::set<std::uint64_t> seen;
    for (std::uint64_t t = 0; t < 1000; ++t) seen.insert(mix_seed(42, t));
    CHECK(seen.size() == 1000);
    CHECK(mix_seed(42, std::string_view("a")) != mix_seed(42, std::string_view("b")));
  }

  TEST_CASE("uniform_index stays in range and is roughly uniform") {
    Rng rng(3);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) ++counts[uniform_index(rng, 7)];
    for (int c : counts) CHECK(std::abs(c - 10000) < 500);
  }

  TEST_CASE("log_sum_exp against direct summation") {
    std::vector<double> xs{0.1, -2.0, 3.5};
    double direct = std::log(std::exp(0.1) + std::exp(-2.0) + std::exp(3.5));
    CHECK(log_sum_exp(xs) == doctest::Approx(direct).epsilon(1e-14));
    std::vector<double> big{1000.0, 1000.0};
    CHECK(log_sum_exp(big) == doctest::Approx(1000.0 + std::log(2.0)));
  }

  TEST_CASE("parallel_for visits every index and rethrows the lowest failure") {
    std::vector<int> hit(100, 0);
    parallel_for(100, 4, [&](std::size_t i) { hit[i] += 1; });
    for (int h : hit) CHECK(h == 1);
    try {
      parallel_for(50, 3, [](std::size_t i) {
        if (i == 7 || i == 30) throw Error("fail " + std::to_string(i));
      });
      FAIL("expected an exception");
    } catch (const Error& e) {
      CHECK(std::string(e.what()) == "fail 7");
    }
  }
}
