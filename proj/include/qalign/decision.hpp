#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qalign/core.hpp"

namespace qalign {

inline constexpr std::string_view kNoAnswer = "<no-answer>";

enum class AnswerExtractor { boxed_latex, last_number, choice_letter, identity };

std::string_view to_string(AnswerExtractor kind);
AnswerExtractor parse_answer_extractor(std::string_view name);

/// Trims, drops surrounding `$`, and canonicalizes numbers ("1,234.50" -> "1234.5").
std::string normalize_answer(std::string_view raw);

/// Deterministic answer string, or kNoAnswer when nothing matches.
std::string extract_answer(AnswerExtractor kind, std::string_view text);

/// ROUGE-1 F1 over lowercased, punctuation-stripped, whitespace-split unigrams.
/// Two empty token lists score 1; exactly one empty list scores 0.
double rouge1_f1(std::string_view a, std::string_view b);
double rouge1_f1(const Sequence& a, const Sequence& b);

enum class UtilityKind { exact_match, rouge1_f1 };

std::string_view to_string(UtilityKind kind);
UtilityKind parse_utility(std::string_view name);

/// u(y, y') in [0, 1] with u(y, y) maximal.
class Utility {
 public:
  Utility(UtilityKind kind, AnswerExtractor extractor) : kind_(kind), extractor_(extractor) {}

  double operator()(const Sequence& a, const Sequence& b) const;

  UtilityKind kind() const noexcept { return kind_; }
  AnswerExtractor extractor() const noexcept { return extractor_; }

 private:
  UtilityKind kind_;
  AnswerExtractor extractor_;
};

/// Self-normalized importance weights exp(r_i / beta) / sum_j exp(r_j / beta).
class ISWeights {
 public:
  explicit ISWeights(std::vector<double> weights);
  const std::vector<double>& values() const noexcept { return weights_; }
  std::size_t size() const noexcept { return weights_.size(); }
  /// Shannon entropy in nats.
  double entropy() const;

 private:
  std::vector<double> weights_;
};

ISWeights is_weights(std::span<const double> rewards, double beta);

struct MbrResult {
  std::size_t index = 0;
  double expected_utility = 0.0;
};

/// argmax_{y in samples} sum_t w_t u(y, y^t), ties to the lowest index. Uniform weights when
/// none are given. Exact match collapses to counting over extracted answers.
MbrResult mbr_select(std::span<const Sequence> samples, const std::optional<ISWeights>& weights,
                     const Utility& utility);

/// argmax reward, ties to the earliest index.
std::size_t argmax_reward(std::span<const double> rewards);

struct DecisionReport {
  std::string method;
  std::size_t n_samples = 0;
  std::string selected_text;
  std::string selected_answer;
  double expected_utility = 0.0;
  double weights_entropy = 0.0;

  nlohmann::ordered_json to_json() const;
};

}  // namespace qalign
