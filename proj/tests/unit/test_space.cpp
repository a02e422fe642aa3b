#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>

#include "qalign/enumerable_space.hpp"
#include "qalign/random.hpp"
#include "qalign/toy_spaces.hpp"

using namespace qalign;

namespace {

std::vector<std::string> toks(const std::string& text) {
  std::vector<std::string> out;
  for (char c : text) {
    if (c != ' ') out.emplace_back(1, c);
  }
  return out;
}

}  // namespace

TEST_SUITE("space") {
  TEST_CASE("four-sequence space is uniform over length-2 strings") {
    EnumerableSpace s = four_sequence_space();
    auto all = s.enumerate();
    REQUIRE(all.size() == 4);
    for (const auto& y : all) CHECK(std::exp(s.log_prob(y.tokens())) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(s.reward(toks("AA")) == 1.0);
    CHECK(s.reward(toks("AB")) == 0.0);
  }

  TEST_CASE("thirty-sequence space probabilities by hand") {
    EnumerableSpace s = thirty_sequence_space();
    auto all = s.enumerate();
    REQUIRE(all.size() == 30);
    double total = 0.0;
    for (const auto& y : all) total += std::exp(s.log_prob(y.tokens()));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    // p(A) = 0.6 * stop(A) = 0.6 * 0.2
    CHECK(std::exp(s.log_prob(toks("A"))) == doctest::Approx(0.12).epsilon(1e-14));
    // p(A B) = 0.6 * 0.8 * 0.7 * stop(A B) = 0.6 * 0.8 * 0.7 * 0.45
    CHECK(std::exp(s.log_prob(toks("AB"))) == doctest::Approx(0.6 * 0.8 * 0.7 * 0.45).epsilon(1e-14));
    // p(B A B B): 0.4 * (1-0.5) * 0.5 * (1-0.35) * 0.2 * (1-0.35) * 0.5, then forced stop
    CHECK(std::exp(s.log_prob(toks("BABB"))) ==
          doctest::Approx(0.4 * 0.5 * 0.5 * 0.65 * 0.2 * 0.65 * 0.5).epsilon(1e-14));
  }

  TEST_CASE("suffix probability conditions on continuing past the cut") {
    EnumerableSpace s = thirty_sequence_space();
    // Oracle: p(y_{i:} | y_{<i}, |y| > i) = p(y) / P(prefix emitted and continued).
    for (const auto& y : s.enumerate()) {
      for (std::size_t cut = 0; cut < y.length(); ++cut) {
        double cont = 0.0;
        for (const auto& z : s.enumerate()) {
          if (z.length() > cut && std::equal(z.tokens().begin(), z.tokens().begin() + static_cast<long>(cut),
                                             y.tokens().begin())) {
            cont += std::exp(s.log_prob(z.tokens()));
          }
        }
        CHECK(std::exp(s.log_suffix_prob(y.tokens(), cut)) ==
              doctest::Approx(std::exp(s.log_prob(y.tokens())) / cont).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("sampling matches the exact probabilities") {
    EnumerableSpace s = thirty_sequence_space();
    Rng rng(11);
    std::map<std::string, int> counts;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      std::size_t generated = 0;
      Sequence y = s.sample({}, 4, rng, 1.0, generated);
      CHECK(generated == y.length());
      ++counts[y.text()];
    }
    double tv = 0.0;
    for (const auto& y : s.enumerate()) tv += std::abs(counts[y.text()] / double(n) - std::exp(s.log_prob(y.tokens())));
    CHECK(0.5 * tv < 0.01);
  }

  TEST_CASE("continuations emit at least one token") {
    EnumerableSpace s = thirty_sequence_space();
    Rng rng(5);
    std::vector<std::string> prefix{"A", "B"};
    for (int i = 0; i < 1000; ++i) {
      std::size_t generated = 0;
      Sequence y = s.sample(prefix, 4, rng, 1.0, generated);
      CHECK(y.length() >= 3);
      CHECK(generated == y.length() - 2);
    }
  }

  TEST_CASE("JSON round trip and shipped space files") {
    const std::pair<const char*, EnumerableSpace> shipped[] = {
        {"four_sequence.json", four_sequence_space()},
        {"thirty_sequence.json", thirty_sequence_space()},
        {"tuning_length6.json", fixed_length_space(6, calibrate_tuning_scale())}};
    for (const auto& [file, space] : shipped) {
      CAPTURE(file);
      EnumerableSpace back = EnumerableSpace::from_json(space.to_json());
      CHECK(back.to_json() == space.to_json());
      EnumerableSpace loaded = EnumerableSpace::load(std::string(QALIGN_SOURCE_DIR) + "/configs/spaces/" + file);
      CHECK(loaded.to_json() == space.to_json());
    }
  }

  TEST_CASE("invalid spaces are rejected") {
    EnumerableSpace s({"A", "B"}, 1, 2);
    CHECK_THROWS_AS(s.set_next_token("", {0.5, 0.4}), Error);
    CHECK_THROWS_AS(s.set_next_token("", {1.0}), Error);
    CHECK_THROWS_AS(s.set_stop("A", 1.5), Error);
    CHECK_THROWS_AS(EnumerableSpace({"A"}, 3, 2), Error);
    CHECK_THROWS_AS(EnumerableSpace::from_json(nlohmann::json::parse(R"({"vocabulary": []})")), Error);
  }

  TEST_CASE("reward expression") {
    EnumerableSpace s = fixed_length_space(5, 0.5);
    CHECK(s.reward(toks("AABAB")) == doctest::Approx(1.5));
    CHECK(s.support_size() == 32);
  }
}
