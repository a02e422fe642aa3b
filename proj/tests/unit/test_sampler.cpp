#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "qalign/backends.hpp"
#include "qalign/chain_io.hpp"
#include "qalign/sampler.hpp"
#include "qalign/toy_spaces.hpp"

using namespace qalign;
namespace fs = std::filesystem;

namespace {

const Prompt kPrompt{"p", "p", std::nullopt, {}};

QAlignConfig config(double beta, std::int64_t steps, std::int64_t max_len, std::uint64_t seed) {
  QAlignConfig c;
  c.beta = BetaParam(beta);
  c.steps = steps;
  c.max_len = max_len;
  c.seed = seed;
  return c;
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("qalign-unit-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_SUITE("sampler") {
  TEST_CASE("acceptance probability worked examples") {
    // Identical proposal: the ratio is exactly one.
    CHECK(acceptance_probability(0.3, 0.3, 1.0, 7, 7) == 1.0);
    // exp(-0.3) * 10 / 8
    CHECK(acceptance_probability(0.2, 0.5, 1.0, 8, 10) == doctest::Approx(std::exp(-0.3) * 1.25).epsilon(1e-14));
    CHECK(acceptance_probability(0.2, 0.5, 1.0, 8, 10) == doctest::Approx(0.92602).epsilon(1e-5));
    // exp(2) * 10 / 20 > 1
    CHECK(acceptance_probability(1.0, 0.0, 0.5, 20, 10) == 1.0);
    CHECK(acceptance_probability(-1e6, 0.0, 1.0, 1, 1) == 0.0);
  }

  TEST_CASE("chain bookkeeping") {
    EnumerableSpace space = thirty_sequence_space();
    ToyGenerator gen(space);
    ToyReward reward(space);
    RewardCache cache(reward);
    ChainResult c = qalign_chain(config(1.0, 300, 4, 9), kPrompt, gen, cache);
    REQUIRE(c.records.size() == 301);
    REQUIRE(c.states.size() == 301);
    std::int64_t generated = 0;
    std::size_t accepted = 0;
    for (std::size_t t = 0; t < c.records.size(); ++t) {
      const ChainRecord& r = c.records[t];
      CHECK(r.step == static_cast<std::int64_t>(t));
      CHECK(r.state.seq == c.states[t].seq);
      generated += r.tokens_generated;
      if (t == 0) continue;
      REQUIRE(r.proposal);
      REQUIRE(r.cut_index);
      const Sequence& prev = c.states[t - 1].seq;
      CHECK(*r.cut_index < prev.length());
      // The proposal keeps the prefix before the cut and regenerates at least one token.
      CHECK(std::equal(prev.tokens().begin(), prev.tokens().begin() + static_cast<long>(*r.cut_index),
                       r.proposal->seq.tokens().begin()));
      CHECK(r.tokens_generated == static_cast<std::int64_t>(r.proposal->seq.length() - *r.cut_index));
      CHECK(r.alpha == doctest::Approx(acceptance_probability(r.proposal->reward, c.states[t - 1].reward, 1.0,
                                                              r.proposal->seq.length(), prev.length())));
      if (r.accepted) {
        ++accepted;
        CHECK(r.state.seq == r.proposal->seq);
      } else {
        CHECK(r.state.seq == prev);
      }
    }
    CHECK(generated == c.ledger.generated_tokens);
    CHECK(c.acceptance_rate == doctest::Approx(accepted / 300.0));
    CHECK(c.accepted_states().size() == accepted + 1);
  }

  TEST_CASE("same seed, same chain; resume reproduces the uninterrupted run") {
    EnumerableSpace space = thirty_sequence_space();
    ToyGenerator gen(space);
    ToyReward reward(space);
    RewardCache cache_a(reward), cache_b(reward), cache_c(reward);
    ChainResult full = qalign_chain(config(0.5, 200, 4, 77), kPrompt, gen, cache_a);
    ChainResult again = qalign_chain(config(0.5, 200, 4, 77), kPrompt, gen, cache_b);
    std::vector<ChainRecord> head(full.records.begin(), full.records.begin() + 80);
    ChainResult resumed = qalign_chain(config(0.5, 200, 4, 77), kPrompt, gen, cache_c, {}, head);
    REQUIRE(resumed.records.size() == full.records.size());
    for (std::size_t t = 0; t < full.records.size(); ++t) {
      CHECK(to_json(full.records[t]) == to_json(again.records[t]));
      CHECK(to_json(full.records[t]) == to_json(resumed.records[t]));
    }
    CHECK(resumed.ledger.generated_tokens == full.ledger.generated_tokens);
  }

  TEST_CASE("chain files round-trip and tolerate a torn last line") {
    EnumerableSpace space = thirty_sequence_space();
    ToyGenerator gen(space);
    ToyReward reward(space);
    RewardCache cache(reward);
    fs::path dir = scratch("chain-io");
    fs::path file = dir / "chain_0.jsonl";
    {
      ChainWriter w(file, 0);
      qalign_chain(config(1.0, 25, 4, 3), kPrompt, gen, cache, [&](const ChainRecord& r) { w.append(r); });
    }
    auto records = read_chain(file, UnitKind::backend_token);
    CHECK(records.size() == 26);
    { std::ofstream(file, std::ios::app) << R"({"step": 26, "state": )"; }
    CHECK(read_chain(file, UnitKind::backend_token).size() == 26);
    ChainWriter w(file, 27);
    CHECK_THROWS_AS(w.append(records[3]), Error);
    fs::remove_all(dir);
  }

  TEST_CASE("independent samples: per-sample streams and extension") {
    EnumerableSpace space = thirty_sequence_space();
    ToyGenerator gen(space);
    SampleBatch all = independent_samples(kPrompt, gen, 40, 4, 5);
    SampleBatch tail = independent_samples(kPrompt, gen, 40, 4, 5, 25);
    REQUIRE(tail.samples.size() == 15);
    for (std::size_t k = 0; k < 15; ++k) CHECK(tail.samples[k] == all.samples[25 + k]);
    std::int64_t sum = 0;
    for (auto t : all.tokens_generated) sum += t;
    CHECK(sum == all.ledger.generated_tokens);
  }

  TEST_CASE("best-of-n picks the earliest maximal reward") {
    EnumerableSpace space = four_sequence_space();
    ToyGenerator gen(space);
    ToyReward reward(space);
    RewardCache cache(reward);
    BestOfN b = best_of_n(kPrompt, gen, cache, 16, 2, 1);
    SampleBatch batch = independent_samples(kPrompt, gen, 16, 2, 1);
    std::size_t first_best = 0;
    for (std::size_t i = 0; i < batch.samples.size(); ++i) {
      if (space.reward(batch.samples[i]) > space.reward(batch.samples[first_best])) first_best = i;
    }
    CHECK(b.index == first_best);
    CHECK(b.best.seq == batch.samples[first_best]);
  }

  TEST_CASE("per-chain seeds differ by prompt and index") {
    CHECK(chain_seed(1, "a", 0) == chain_seed(1, "a", 0));
    CHECK(chain_seed(1, "a", 0) != chain_seed(1, "b", 0));
    CHECK(chain_seed(1, "a", 0) != chain_seed(1, "a", 1));
    CHECK(chain_seed(1, "a", 0) != chain_seed(2, "a", 0));
  }

  TEST_CASE("compute ledger") {
    CHECK(ledger_expected_chain_tokens(1, 10) == 10.0);
    CHECK(ledger_expected_chain_tokens(3, 10) == 20.0);
    CHECK(ledger_expected_chain_tokens(1023, 100) == 51200.0);
    ComputeLedger l;
    l.generator_params = 1000;
    l.reward_params = 10;
    l.add_generated(5);
    l.add_scored(7);
    CHECK(l.flops() == doctest::Approx(2.0 * 1000 * 5 + 2.0 * 10 * 7));
  }

  TEST_CASE("reward cache charges misses only") {
    EnumerableSpace space = four_sequence_space();
    ToyReward reward(space, 3);
    RewardCache cache(reward);
    ComputeLedger l;
    Sequence y({"A", "A"}, UnitKind::backend_token);
    CHECK(cache.score(kPrompt, y, l) == 1.0);
    CHECK(cache.score(kPrompt, y, l) == 1.0);
    CHECK(l.scored_tokens == 2);
    CHECK(cache.size() == 1);
  }

  TEST_CASE("temperature mismatch is rejected") {
    EnumerableSpace space = four_sequence_space();
    ToyGenerator gen(space, 1, 0.7);
    QAlignConfig c = config(1.0, 5, 2, 0);
    c.temperature = 1.0;
    CHECK_THROWS_AS(c.validate(gen), Error);
  }
}
