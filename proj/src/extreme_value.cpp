#include "qalign/extreme_value.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace qalign {

double gumbel_location_factor(double n_d) {
  if (!(n_d > 1.0)) throw Error("Gumbel location needs n_d > 1");
  const double s = std::sqrt(2.0 * std::log(n_d));
  return s - (std::log(std::log(n_d)) + std::log(4.0 * std::numbers::pi)) / (2.0 * s);
}

std::int64_t minimum_gumbel_n(const MixtureFit& fit) {
  return static_cast<std::int64_t>(std::floor(std::numbers::e / fit.dominant_weight())) + 1;
}

GumbelApprox gumbel_approx(const MixtureFit& fit, double n) {
  fit.validate();
  const double n_d = fit.dominant_weight() * n;
  if (!(n_d > std::numbers::e)) {
    throw Error("Gumbel approximation needs w_d * n > e (n_d = " + std::to_string(n_d) + "); use n >= " +
                std::to_string(minimum_gumbel_n(fit)));
  }
  return gumbel_approx(fit.dominant_mean(), fit.dominant_sigma(), n_d);
}

GumbelApprox gumbel_approx(double mu_d, double sigma_d, double n_d) {
  if (!(sigma_d > 0.0)) throw Error("Gumbel approximation needs sigma_d > 0");
  if (!(n_d > std::numbers::e)) throw Error("Gumbel approximation needs n_d > e");
  GumbelApprox g;
  g.n_d = n_d;
  g.a_n = mu_d + sigma_d * gumbel_location_factor(n_d);
  g.b_n = sigma_d / std::sqrt(2.0 * std::log(n_d));
  return g;
}

double beta_star(const MixtureFit& fit, double n) {
  fit.validate();
  const double n_d = fit.dominant_weight() * n;
  double factor = n_d > std::numbers::e ? gumbel_location_factor(n_d) : 0.0;
  if (!(factor > 0.0)) {
    throw Error("beta* is undefined for n = " + std::to_string(n) + " (n_d = " + std::to_string(n_d) +
                "); the minimum n for this fit is " + std::to_string(minimum_gumbel_n(fit)));
  }
  return fit.dominant_sigma() / factor;
}

double beta_star(double sigma_d, double n_d) {
  if (!(sigma_d > 0.0)) throw Error("beta* needs sigma_d > 0");
  double factor = n_d > std::numbers::e ? gumbel_location_factor(n_d) : 0.0;
  if (!(factor > 0.0)) {
    throw Error("beta* is undefined for n_d = " + std::to_string(n_d) + "; the minimum n_d is " +
                std::to_string(static_cast<std::int64_t>(std::floor(std::numbers::e)) + 1));
  }
  return sigma_d / factor;
}

double gumbel_cdf(double x) { return std::exp(-std::exp(-x)); }

void DiscretePmf::validate() const {
  if (values.empty() || values.size() != probs.size()) throw Error("pmf needs matching, non-empty values and probs");
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0 && !(values[i] > values[i - 1])) throw Error("pmf support must be strictly increasing");
    if (!(probs[i] >= 0.0)) throw Error("pmf probabilities must be non-negative");
    sum += probs[i];
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error("pmf is not normalized (sum = " + std::to_string(sum) + ")");
}

DiscretePmf bon_max_density(const DiscretePmf& pmf, int n) {
  pmf.validate();
  if (n < 1) throw Error("best-of-n needs n >= 1");
  DiscretePmf out;
  out.values = pmf.values;
  out.probs.resize(pmf.probs.size());
  double below = 0.0;  // F(v-)
  for (std::size_t i = 0; i < pmf.probs.size(); ++i) {
    double upto = std::min(1.0, below + pmf.probs[i]);
    out.probs[i] = std::pow(upto, n) - std::pow(below, n);
    below = upto;
  }
  return out;
}

AlignedRewardMixture aligned_reward_mixture(const MixtureFit& fit, double beta) {
  fit.validate();
  const double b = BetaParam(beta).value();
  const double log_c1 = fit.mu1 / b + fit.sigma1 * fit.sigma1 / (2.0 * b * b);
  const double log_c2 = fit.mu2 / b + fit.sigma2 * fit.sigma2 / (2.0 * b * b);
  const double l1 = std::log(fit.w1) + log_c1;
  const double l2 = std::log(fit.w2) + log_c2;
  const double m = std::max(l1, l2);
  const double z = std::exp(l1 - m) + std::exp(l2 - m);

  AlignedRewardMixture a;
  a.w_pi_1 = std::exp(l1 - m) / z;
  a.w_pi_2 = std::exp(l2 - m) / z;
  a.mu_pi_1 = fit.mu1 + fit.sigma1 * fit.sigma1 / b;
  a.mu_pi_2 = fit.mu2 + fit.sigma2 * fit.sigma2 / b;
  a.sigma1 = fit.sigma1;
  a.sigma2 = fit.sigma2;
  a.dominant_index = fit.dominant_index;
  return a;
}

}  // namespace qalign
