#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qalign/backends.hpp"
#include "qalign/core.hpp"

namespace qalign {

/// min{1, exp((r(y) - r(y_t)) / beta) * |y_t| / |y|}, evaluated in log space.
double acceptance_probability(double reward_proposal, double reward_current, double beta, std::size_t len_proposal,
                              std::size_t len_current);

struct QAlignConfig {
  BetaParam beta{1.0};
  std::int64_t steps = 1;     // T
  std::int64_t max_len = 1;   // N
  std::uint64_t seed = 0;
  /// When set, the generator's temperature must equal it.
  std::optional<double> temperature;
  /// Replaces acceptance_probability(); only for fault-injection tests.
  std::function<double(double, double, double, std::size_t, std::size_t)> acceptance_override;

  void validate(const GenerationBackend& gen) const;
};

struct ChainResult {
  std::vector<ChainRecord> records;
  std::vector<ScoredSequence> states;  // y^0..y^T, rejected steps repeat the previous state
  double acceptance_rate = 0.0;
  ComputeLedger ledger;

  /// y^0 followed by every accepted proposal.
  std::vector<ScoredSequence> accepted_states() const;
};

/// Receives each record as soon as it is final, e.g. to persist it.
using RecordSink = std::function<void(const ChainRecord&)>;

/// Metropolis-Hastings over suffix-resampling proposals. Starts from y^0 drawn by the generator,
/// then for t = 1..T cuts at i ~ Uniform{0, ..., |y^t| - 1}, regenerates y_{i:} and accepts with
/// acceptance_probability(). Every step draws from its own stream seeded by (seed, t), so a chain
/// resumed from `resume_from` (a gapless prefix of its records) reproduces the uninterrupted run.
ChainResult qalign_chain(const QAlignConfig& cfg, const Prompt& x, GenerationBackend& gen, RewardCache& rewards,
                         const RecordSink& sink = {}, std::span<const ChainRecord> resume_from = {});

struct SampleBatch {
  std::vector<Sequence> samples;
  std::vector<std::int64_t> tokens_generated;
  std::size_t requested = 0;
  std::optional<std::string> error;  // set when the backend failed before the batch completed
  ComputeLedger ledger;
};

/// n independent full generations; sample k draws from the stream seeded by (seed, k).
/// `start` skips the first samples so a partially persisted batch can be extended.
SampleBatch independent_samples(const Prompt& x, GenerationBackend& gen, std::size_t n, std::int64_t max_len,
                                std::uint64_t seed, std::size_t start = 0);

struct BestOfN {
  ScoredSequence best;
  std::size_t index = 0;
  ComputeLedger ledger;
};

/// argmax-reward element of an independent batch, ties to the earliest index.
BestOfN best_of_n(const Prompt& x, GenerationBackend& gen, RewardCache& rewards, std::size_t n, std::int64_t max_len,
                  std::uint64_t seed);

/// Per-chain seed: hash(run_seed, prompt_id, chain_index).
std::uint64_t chain_seed(std::uint64_t run_seed, const std::string& prompt_id, std::uint64_t chain_index);

}  // namespace qalign
