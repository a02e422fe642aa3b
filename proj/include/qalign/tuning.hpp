#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qalign/backends.hpp"
#include "qalign/core.hpp"

namespace qalign {

struct TuneOptions {
  double target_rate = 0.5;
  double tolerance = 0.05;
  int max_rounds = 12;
  double log_beta_min = -6.0;  // natural log
  double log_beta_max = 6.0;
  std::int64_t pilot_steps = 32;
  std::int64_t max_len = 64;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

struct TunePoint {
  double beta = 0.0;
  double rate = 0.0;
};

struct TuneResult {
  BetaParam beta{1.0};
  double rate = 0.0;
  int rounds = 0;  // bisection rounds after the two bracket evaluations
  std::vector<TunePoint> trace;
  std::optional<std::string> warning;
};

/// Mean acceptance rate of one pilot chain per prompt at this beta. Chains use the same seeds
/// at every beta (common random numbers), so the estimate is a deterministic function of beta.
double pilot_acceptance_rate(std::span<const Prompt> pilots, GenerationBackend& gen, RewardBackend& reward,
                             double beta, const TuneOptions& options);

/// Bisection over log(beta) for a target mean acceptance rate. The upper bracket is evaluated
/// first, then the lower one; either is returned directly when already within tolerance. When
/// the rate is non-monotone beyond tolerance, or the target lies outside the bracket, the beta
/// with the closest rate is returned with a warning.
TuneResult tune_beta(std::span<const Prompt> pilots, GenerationBackend& gen, RewardBackend& reward,
                     const TuneOptions& options = {});

}  // namespace qalign
