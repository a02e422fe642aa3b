#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "qalign/core.hpp"

namespace qalign {

/// Location/scale of the Gumbel law approximating the maximum of n rewards drawn from the
/// dominant mixture component; n_d = w_d * n.
struct GumbelApprox {
  double a_n = 0.0;
  double b_n = 1.0;
  double n_d = 0.0;
};

/// Throws when n_d <= e.
GumbelApprox gumbel_approx(const MixtureFit& fit, double n);
/// Same, for a single Normal component (mu_d, sigma_d) with effective count n_d.
GumbelApprox gumbel_approx(double mu_d, double sigma_d, double n_d);

/// sqrt(2 ln m) - (ln ln m + ln 4 pi) / (2 sqrt(2 ln m)).
double gumbel_location_factor(double n_d);

/// Smallest integer n with w_d * n > e for this fit.
std::int64_t minimum_gumbel_n(const MixtureFit& fit);

/// Tilt whose aligned dominant-component mode sits at a_n: sigma_d / gumbel_location_factor(n_d).
/// Throws, naming the minimum n, when the factor is not positive.
double beta_star(const MixtureFit& fit, double n);
double beta_star(double sigma_d, double n_d);

/// Standard Gumbel CDF exp(-exp(-x)).
double gumbel_cdf(double x);

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF. The sample is sorted
/// in place.
template <class Cdf>
double ks_statistic(std::vector<double>& sample, Cdf cdf);

/// Finite reward distribution: strictly increasing support values with their probabilities.
struct DiscretePmf {
  std::vector<double> values;
  std::vector<double> probs;

  /// Throws unless values strictly increase, probs are non-negative and sum to 1 +- 1e-9.
  void validate() const;
};

/// Distribution of max(r_1, ..., r_n) for n i.i.d. draws: P(max = v) = F(v)^n - F(v-)^n.
DiscretePmf bon_max_density(const DiscretePmf& pmf, int n);

/// Reward mixture under pi_beta: each Normal component is shifted to mu_i + sigma_i^2 / beta
/// and reweighted by C_i = exp(mu_i / beta + sigma_i^2 / (2 beta^2)) (handled in log space).
struct AlignedRewardMixture {
  double w_pi_1 = 0.5, w_pi_2 = 0.5;
  double mu_pi_1 = 0.0, mu_pi_2 = 0.0;
  double sigma1 = 1.0, sigma2 = 1.0;
  int dominant_index = 1;

  /// Mean (= mode) of the dominant component after tilting.
  double dominant_mode() const { return dominant_index == 1 ? mu_pi_1 : mu_pi_2; }
};

AlignedRewardMixture aligned_reward_mixture(const MixtureFit& fit, double beta);

// ---------------------------------------------------------------------------------------------

template <class Cdf>
double ks_statistic(std::vector<double>& sample, Cdf cdf) {
  if (sample.empty()) throw Error("KS statistic of an empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    double f = cdf(sample[i]);
    d = std::max(d, std::max(static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n));
  }
  return d;
}

}  // namespace qalign
