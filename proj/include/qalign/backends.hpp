#pragma once

#include <cstdint>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>

#include "qalign/core.hpp"
#include "qalign/decision.hpp"
#include "qalign/enumerable_space.hpp"
#include "qalign/random.hpp"

namespace qalign {

/// Compute spent by a sampler. FLOPs use the 2 x parameters x tokens decode proxy, with
/// generation and reward scoring counted separately.
struct ComputeLedger {
  std::int64_t generator_params = 0;
  std::int64_t reward_params = 0;
  std::int64_t generated_tokens = 0;
  std::int64_t scored_tokens = 0;

  void add_generated(std::int64_t tokens);
  void add_scored(std::int64_t tokens);
  double flops() const;

  ComputeLedger& operator+=(const ComputeLedger& other);
};

/// Expected tokens generated by a chain of T steps over length-N responses: (T + 1) N / 2.
double ledger_expected_chain_tokens(std::int64_t steps, std::int64_t max_len);

struct Completion {
  Sequence sequence;
  std::int64_t tokens_generated = 0;
};

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;

  /// Continues `prefix` (possibly empty) by at most `max_new` units, sampling at temperature().
  virtual Completion complete(const Prompt& x, std::span<const std::string> prefix, std::int64_t max_new,
                              Rng& rng) = 0;

  virtual UnitKind unit_kind() const = 0;
  virtual std::int64_t param_count() const = 0;
  virtual double temperature() const = 0;

  virtual bool can_score_exact() const { return false; }
  virtual double log_prob(const Prompt& x, const Sequence& y) const;
};

class RewardBackend {
 public:
  virtual ~RewardBackend() = default;
  virtual double score(const Prompt& x, const Sequence& y) = 0;
  virtual std::int64_t param_count() const = 0;
  virtual bool deterministic() const { return true; }
};

/// Memoizes rewards by (prompt id, response text). Each miss charges the response length to
/// the caller's ledger; hits are free. Safe for concurrent use.
class RewardCache {
 public:
  explicit RewardCache(RewardBackend& backend) : backend_(backend) {}

  double score(const Prompt& x, const Sequence& y, ComputeLedger& ledger);
  std::optional<double> lookup(const Prompt& x, const Sequence& y) const;
  /// Inserts a known reward (e.g. restored from a checkpoint) and charges it like a miss.
  void prime(const Prompt& x, const Sequence& y, double reward, ComputeLedger& ledger);

  std::size_t size() const;
  RewardBackend& backend() noexcept { return backend_; }

 private:
  static std::string key(const Prompt& x, const Sequence& y);

  RewardBackend& backend_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, double> cache_;
};

/// Samples from an EnumerableSpace. Reports exact log-probabilities.
class ToyGenerator final : public GenerationBackend {
 public:
  explicit ToyGenerator(const EnumerableSpace& space, std::int64_t param_count = 1, double temperature = 1.0);

  Completion complete(const Prompt& x, std::span<const std::string> prefix, std::int64_t max_new,
                      Rng& rng) override;
  UnitKind unit_kind() const override { return space_.unit(); }
  std::int64_t param_count() const override { return param_count_; }
  double temperature() const override { return temperature_; }
  bool can_score_exact() const override { return true; }
  double log_prob(const Prompt& x, const Sequence& y) const override;

  const EnumerableSpace& space() const noexcept { return space_; }

 private:
  const EnumerableSpace& space_;
  std::int64_t param_count_;
  double temperature_;
};

/// Reward table or expression of an EnumerableSpace.
class ToyReward final : public RewardBackend {
 public:
  explicit ToyReward(const EnumerableSpace& space, std::int64_t param_count = 1)
      : space_(space), param_count_(param_count) {}

  double score(const Prompt&, const Sequence& y) override { return space_.reward(y); }
  std::int64_t param_count() const override { return param_count_; }

 private:
  const EnumerableSpace& space_;
  std::int64_t param_count_;
};

/// r(y, x) = 1 if the extracted answer of y equals the prompt's gold answer, else 0.
class ExactMatchReward final : public RewardBackend {
 public:
  explicit ExactMatchReward(AnswerExtractor extractor, std::string gold_key = "gold")
      : extractor_(extractor), gold_key_(std::move(gold_key)) {}

  double score(const Prompt& x, const Sequence& y) override;
  std::int64_t param_count() const override { return 0; }

 private:
  AnswerExtractor extractor_;
  std::string gold_key_;
};

}  // namespace qalign
