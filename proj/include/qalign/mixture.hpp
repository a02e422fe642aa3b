#pragma once

#include <cstdint>
#include <span>

#include "qalign/core.hpp"

namespace qalign {

struct MixtureFitOptions {
  int restarts = 5;
  int max_iterations = 500;
  double tolerance = 1e-8;  // on the change in total log-likelihood
  std::uint64_t seed = 0x5eed;
};

/// Two-component 1-D Gaussian mixture fitted by EM. Each restart is initialized by k-means++
/// (then Lloyd iterations); the restart with the best log-likelihood wins. Component variances
/// are floored at 1e-6 * var(data). Components are ordered by mean.
MixtureFit fit_reward_mixture(std::span<const double> rewards, const MixtureFitOptions& options = {});

double mixture_log_likelihood(const MixtureFit& fit, std::span<const double> data);
double gaussian_log_likelihood(std::span<const double> data);  // at the MLE mean/variance

}  // namespace qalign
