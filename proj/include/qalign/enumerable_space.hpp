#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qalign/core.hpp"
#include "qalign/random.hpp"

namespace qalign {

/// Closed-form reward used when a space is too large for an explicit table.
struct RewardExpression {
  enum class Kind { constant, count, length };
  Kind kind = Kind::constant;
  std::string token;  // for count
  double scale = 1.0;
  double offset = 0.0;

  double evaluate(std::span<const std::string> tokens) const;
};

/// A finite autoregressive language model over a small vocabulary, used as an exact oracle.
///
/// A sequence is generated token by token. After the k-th token (k >= 1) the model stops with
/// probability stop(prefix); stopping is forced at max_length and forbidden below min_length.
/// Tables are keyed by the rendered prefix ("" is the empty prefix); "*" is the fallback entry.
///
/// Continuations always emit at least one token. A suffix resampled from cut index i is
/// therefore distributed as p(y_{i:} | y_{<i}, |y| > i); the conditioning factor depends only on
/// the shared prefix, so it cancels from the Metropolis-Hastings ratio.
class EnumerableSpace {
 public:
  static constexpr std::size_t kMaxEnumerableVocabulary = 4;
  static constexpr std::size_t kMaxEnumerableLength = 6;

  EnumerableSpace(std::vector<std::string> vocabulary, std::size_t min_length, std::size_t max_length);

  /// JSON schema: {"vocabulary": [...], "min_length": k, "max_length": n,
  ///   "next_token": {prefix: [p...]}, "stop": {prefix: s},
  ///   "rewards": {text: r, "*": default} | "reward_expression": {"kind", "token", "scale", "offset"}}
  static EnumerableSpace from_json(const nlohmann::json& j);
  static EnumerableSpace load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  void set_next_token(const std::string& prefix_key, std::vector<double> probs);
  void set_stop(const std::string& prefix_key, double stop_probability);
  void set_reward(const std::string& text, double reward);
  void set_default_reward(double reward);
  void set_reward_expression(RewardExpression expr);

  const std::vector<std::string>& vocabulary() const noexcept { return vocabulary_; }
  std::size_t min_length() const noexcept { return min_length_; }
  std::size_t max_length() const noexcept { return max_length_; }
  UnitKind unit() const noexcept { return UnitKind::backend_token; }

  std::vector<double> next_token_probs(std::span<const std::string> prefix, double temperature = 1.0) const;
  /// Probability of stopping right after `prefix` (prefix.size() >= 1).
  double stop_probability(std::span<const std::string> prefix, double temperature = 1.0) const;

  double log_prob(std::span<const std::string> tokens, double temperature = 1.0) const;
  /// log P(the model emits `prefix` and then continues past it). 0 for the empty prefix.
  double log_continue_prob(std::span<const std::string> prefix, double temperature = 1.0) const;
  /// log p(y_{i:} | y_{<i}, |y| > i).
  double log_suffix_prob(std::span<const std::string> tokens, std::size_t cut, double temperature = 1.0) const;

  double reward(std::span<const std::string> tokens) const;
  double reward(const Sequence& seq) const { return reward(seq.tokens()); }

  /// Extends `prefix` by at least one token (unless it is already at max_length), emitting at
  /// most `max_new` new tokens. A continuation cut off by `max_new` is returned as is.
  Sequence sample(std::span<const std::string> prefix, std::size_t max_new, Rng& rng, double temperature,
                  std::size_t& generated) const;

  /// Every sequence in the support, ordered by length then lexicographically by vocabulary
  /// index. Throws when the space exceeds the enumeration caps.
  std::vector<Sequence> enumerate() const;
  std::size_t support_size() const;

 private:
  static EnumerableSpace from_json_unchecked(const nlohmann::json& j);
  const std::vector<double>& lookup_next(const std::string& key) const;
  double lookup_stop(const std::string& key) const;
  std::size_t token_index(const std::string& token) const;

  std::vector<std::string> vocabulary_;
  std::size_t min_length_;
  std::size_t max_length_;
  std::map<std::string, std::vector<double>> next_token_;
  std::map<std::string, double> stop_;
  std::map<std::string, double> rewards_;
  std::optional<double> default_reward_;
  std::optional<RewardExpression> reward_expression_;
};

}  // namespace qalign
