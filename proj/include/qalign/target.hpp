#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "qalign/core.hpp"
#include "qalign/enumerable_space.hpp"

namespace qalign {

/// The aligned distribution pi_beta(y|x) proportional to p_LM(y|x) * exp(r(y, x) / beta).
struct TargetSpec {
  BetaParam beta;
  std::string reward_backend_ref = "reward";
  std::string base_backend_ref = "generator";

  void validate() const;
};

enum class DensityPart { full, reward_only };

/// log p_LM(y|x) + r(y, x) / beta. With DensityPart::reward_only the base term is dropped.
double log_unnormalized_density(const TargetSpec& spec, const Prompt& x, const ScoredSequence& y,
                                DensityPart part = DensityPart::full);

/// Z_beta(x) over a complete finite space. Throws unless base probabilities sum to 1 +- 1e-9.
double partition_function(const TargetSpec& spec, const Prompt& x, std::span<const ScoredSequence> space);
double log_partition_function(const TargetSpec& spec, const Prompt& x, std::span<const ScoredSequence> space);

class ExactDistribution {
 public:
  ExactDistribution(std::vector<Sequence> support, std::vector<double> probabilities);

  const std::vector<Sequence>& support() const noexcept { return support_; }
  const std::vector<double>& probabilities() const noexcept { return probs_; }
  std::size_t size() const noexcept { return support_.size(); }
  /// Probability of the sequence with this rendered text; 0 outside the support.
  double probability(const std::string& text) const;

 private:
  std::vector<Sequence> support_;
  std::vector<double> probs_;
  std::unordered_map<std::string, std::size_t> index_;
};

ExactDistribution exact_distribution(const TargetSpec& spec, const Prompt& x, std::span<const ScoredSequence> space);

/// log pi(y) - log pi(y_t). When `include_base` is false only the reward difference over beta
/// is returned (the base terms cancel against the suffix proposal ratio).
double log_target_ratio(const TargetSpec& spec, const Prompt& x, const ScoredSequence& y, const ScoredSequence& y_t,
                        bool include_base = true);

/// Every sequence of an enumerable space with its reward and base log-probability.
std::vector<ScoredSequence> score_space(const EnumerableSpace& space, double temperature = 1.0);

/// Total variation distance between an empirical histogram (text -> count) and an exact target.
double total_variation(const ExactDistribution& exact, const std::unordered_map<std::string, double>& counts);

}  // namespace qalign
