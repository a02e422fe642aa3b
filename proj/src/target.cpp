#include "qalign/target.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qalign/numeric.hpp"

namespace qalign {

namespace {

constexpr double kNormTolerance = 1e-9;

void check_normalized(std::span<const ScoredSequence> space) {
  if (space.empty()) throw Error("empty sequence space");
  std::vector<double> logs;
  logs.reserve(space.size());
  for (const auto& s : space) {
    if (!s.logprob_base) throw Error("space sequence '" + s.seq.text() + "' lacks a base log-probability");
    logs.push_back(*s.logprob_base);
  }
  double total = std::exp(log_sum_exp(logs));
  if (std::abs(total - 1.0) > kNormTolerance) {
    throw Error("space probabilities sum to " + std::to_string(total) + ", not 1");
  }
}

std::vector<double> log_weights(const TargetSpec& spec, const Prompt& x, std::span<const ScoredSequence> space) {
  std::vector<double> out;
  out.reserve(space.size());
  for (const auto& s : space) out.push_back(log_unnormalized_density(spec, x, s));
  return out;
}

}  // namespace

void TargetSpec::validate() const {
  if (reward_backend_ref.empty() || base_backend_ref.empty()) throw Error("target spec references an unnamed backend");
}

double log_unnormalized_density(const TargetSpec& spec, const Prompt&, const ScoredSequence& y, DensityPart part) {
  double tilt = y.reward / spec.beta.value();
  if (part == DensityPart::reward_only) return tilt;
  if (!y.logprob_base) throw Error("full density requested for '" + y.seq.text() + "' without a base log-probability");
  return *y.logprob_base + tilt;
}

double log_partition_function(const TargetSpec& spec, const Prompt& x, std::span<const ScoredSequence> space) {
  check_normalized(space);
  return log_sum_exp(log_weights(spec, x, space));
}

double partition_function(const TargetSpec& spec, const Prompt& x, std::span<const ScoredSequence> space) {
  return std::exp(log_partition_function(spec, x, space));
}

ExactDistribution::ExactDistribution(std::vector<Sequence> support, std::vector<double> probabilities)
    : support_(std::move(support)), probs_(std::move(probabilities)) {
  if (support_.size() != probs_.size()) throw Error("support and probabilities differ in size");
  for (std::size_t i = 0; i < support_.size(); ++i) {
    if (!index_.emplace(support_[i].text(), i).second) throw Error("duplicate sequence in support");
  }
}

double ExactDistribution::probability(const std::string& text) const {
  auto it = index_.find(text);
  return it == index_.end() ? 0.0 : probs_[it->second];
}

ExactDistribution exact_distribution(const TargetSpec& spec, const Prompt& x, std::span<const ScoredSequence> space) {
  double log_z = log_partition_function(spec, x, space);
  std::vector<Sequence> support;
  std::vector<double> probs;
  support.reserve(space.size());
  probs.reserve(space.size());
  for (const auto& s : space) {
    support.push_back(s.seq);
    probs.push_back(std::exp(log_unnormalized_density(spec, x, s) - log_z));
  }
  return ExactDistribution(std::move(support), std::move(probs));
}

double log_target_ratio(const TargetSpec& spec, const Prompt&, const ScoredSequence& y, const ScoredSequence& y_t,
                        bool include_base) {
  double ratio = (y.reward - y_t.reward) / spec.beta.value();
  if (include_base) {
    if (!y.logprob_base || !y_t.logprob_base) throw Error("log_target_ratio needs base log-probabilities");
    ratio += *y.logprob_base - *y_t.logprob_base;
  }
  return ratio;
}

std::vector<ScoredSequence> score_space(const EnumerableSpace& space, double temperature) {
  std::vector<ScoredSequence> out;
  for (auto& seq : space.enumerate()) {
    double lp = space.log_prob(seq.tokens(), temperature);
    double r = space.reward(seq);
    out.push_back(ScoredSequence{std::move(seq), r, lp});
  }
  return out;
}

double total_variation(const ExactDistribution& exact, const std::unordered_map<std::string, double>& counts) {
  double total = 0.0;
  for (const auto& [_, c] : counts) total += c;
  if (total <= 0.0) return 1.0;
  double l1 = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    auto it = counts.find(exact.support()[i].text());
    double emp = it == counts.end() ? 0.0 : it->second / total;
    l1 += std::abs(emp - exact.probabilities()[i]);
  }
  for (const auto& [text, c] : counts) {
    if (exact.probability(text) == 0.0) l1 += c / total;
  }
  return 0.5 * l1;
}

}  // namespace qalign
