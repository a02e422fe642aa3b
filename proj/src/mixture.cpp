#include "qalign/mixture.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "qalign/random.hpp"

namespace qalign {

namespace {

constexpr std::size_t kMinSamples = 20;
constexpr int kLloydIterations = 20;

struct Params {
  std::array<double, 2> w{0.5, 0.5};
  std::array<double, 2> mu{0.0, 0.0};
  std::array<double, 2> var{1.0, 1.0};
};

double log_normal(double x, double mu, double var) {
  double d = x - mu;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

double log_mix(double x, const Params& p, double& l0, double& l1) {
  l0 = std::log(p.w[0]) + log_normal(x, p.mu[0], p.var[0]);
  l1 = std::log(p.w[1]) + log_normal(x, p.mu[1], p.var[1]);
  double m = std::max(l0, l1);
  return m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
}

double total_ll(std::span<const double> data, const Params& p) {
  double ll = 0.0;
  double l0, l1;
  for (double x : data) ll += log_mix(x, p, l0, l1);
  return ll;
}

Params kmeans_init(std::span<const double> data, Rng& rng, double var_floor) {
  // k-means++ seeding for k = 2.
  std::array<double, 2> c{};
  c[0] = data[uniform_index(rng, data.size())];
  std::vector<double> d2(data.size());
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    d2[i] = (data[i] - c[0]) * (data[i] - c[0]);
    total += d2[i];
  }
  double u = uniform01(rng) * total;
  std::size_t pick = data.size() - 1;
  for (std::size_t i = 0; i < data.size(); ++i) {
    u -= d2[i];
    if (u < 0.0) {
      pick = i;
      break;
    }
  }
  c[1] = data[pick];

  std::vector<int> label(data.size(), 0);
  for (int it = 0; it < kLloydIterations; ++it) {
    std::array<double, 2> sum{};
    std::array<double, 2> cnt{};
    for (std::size_t i = 0; i < data.size(); ++i) {
      label[i] = std::abs(data[i] - c[0]) <= std::abs(data[i] - c[1]) ? 0 : 1;
      sum[label[i]] += data[i];
      cnt[label[i]] += 1.0;
    }
    for (int k = 0; k < 2; ++k) {
      if (cnt[k] > 0) c[k] = sum[k] / cnt[k];
    }
  }

  Params p;
  std::array<double, 2> cnt{};
  std::array<double, 2> ss{};
  for (std::size_t i = 0; i < data.size(); ++i) {
    cnt[label[i]] += 1.0;
    ss[label[i]] += (data[i] - c[label[i]]) * (data[i] - c[label[i]]);
  }
  const double n = static_cast<double>(data.size());
  for (int k = 0; k < 2; ++k) {
    // An empty cluster keeps a token share so EM can still move it.
    p.w[k] = std::clamp(cnt[k] / n, 1.0 / n, 1.0 - 1.0 / n);
    p.mu[k] = c[k];
    p.var[k] = cnt[k] > 1 ? std::max(ss[k] / cnt[k], var_floor) : std::max(var_floor, 1e-2 * var_floor * 1e6);
  }
  double s = p.w[0] + p.w[1];
  p.w[0] /= s;
  p.w[1] /= s;
  return p;
}

std::pair<Params, int> run_em(std::span<const double> data, Params p, const MixtureFitOptions& opt, double var_floor,
                              double& ll_out) {
  const std::size_t n = data.size();
  std::vector<double> resp(n);
  double prev = total_ll(data, p);
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    double l0, l1;
    for (std::size_t i = 0; i < n; ++i) {
      double lm = log_mix(data[i], p, l0, l1);
      resp[i] = std::exp(l0 - lm);
    }
    std::array<double, 2> nk{};
    std::array<double, 2> sx{};
    for (std::size_t i = 0; i < n; ++i) {
      nk[0] += resp[i];
      nk[1] += 1.0 - resp[i];
      sx[0] += resp[i] * data[i];
      sx[1] += (1.0 - resp[i]) * data[i];
    }
    const double tiny = 1e-12 * static_cast<double>(n);
    if (nk[0] < tiny || nk[1] < tiny) break;  // a component vanished; keep the last valid state
    Params next;
    for (int k = 0; k < 2; ++k) {
      next.mu[k] = sx[k] / nk[k];
      next.w[k] = nk[k] / static_cast<double>(n);
    }
    std::array<double, 2> sv{};
    for (std::size_t i = 0; i < n; ++i) {
      double d0 = data[i] - next.mu[0];
      double d1 = data[i] - next.mu[1];
      sv[0] += resp[i] * d0 * d0;
      sv[1] += (1.0 - resp[i]) * d1 * d1;
    }
    for (int k = 0; k < 2; ++k) next.var[k] = std::max(sv[k] / nk[k], var_floor);
    p = next;
    double ll = total_ll(data, p);
    bool done = std::abs(ll - prev) < opt.tolerance;
    prev = ll;
    if (done) {
      ++it;
      break;
    }
  }
  ll_out = prev;
  return {p, it};
}

}  // namespace

MixtureFit fit_reward_mixture(std::span<const double> rewards, const MixtureFitOptions& options) {
  if (rewards.size() < kMinSamples) throw Error("mixture fit needs at least 20 rewards");
  double mean = 0.0;
  for (double r : rewards) {
    if (!std::isfinite(r)) throw Error("mixture fit got a non-finite reward");
    mean += r;
  }
  mean /= static_cast<double>(rewards.size());
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(rewards.size());
  if (!(var > 0.0)) throw Error("degenerate rewards: all values equal, a two-component fit is undefined");
  const double var_floor = 1e-6 * var;

  Rng rng(options.seed);
  bool have = false;
  Params best;
  double best_ll = -std::numeric_limits<double>::infinity();
  int best_iters = 0;
  for (int restart = 0; restart < std::max(1, options.restarts); ++restart) {
    Params init = kmeans_init(rewards, rng, var_floor);
    double ll = 0.0;
    auto [p, iters] = run_em(rewards, init, options, var_floor, ll);
    if (!have || ll > best_ll) {
      have = true;
      best = p;
      best_ll = ll;
      best_iters = iters;
    }
  }

  const int lo = best.mu[0] <= best.mu[1] ? 0 : 1;
  const int hi = 1 - lo;
  MixtureFit fit;
  fit.w1 = best.w[lo];
  fit.w2 = 1.0 - fit.w1;
  fit.mu1 = best.mu[lo];
  fit.mu2 = best.mu[hi];
  fit.sigma1 = std::sqrt(best.var[lo]);
  fit.sigma2 = std::sqrt(best.var[hi]);
  fit.dominant_index = dominant_component(fit.mu1, fit.sigma1, fit.mu2, fit.sigma2);
  fit.log_likelihood = best_ll;
  fit.iterations = best_iters;
  return fit;
}

double mixture_log_likelihood(const MixtureFit& fit, std::span<const double> data) {
  Params p;
  p.w = {fit.w1, fit.w2};
  p.mu = {fit.mu1, fit.mu2};
  p.var = {fit.sigma1 * fit.sigma1, fit.sigma2 * fit.sigma2};
  return total_ll(data, p);
}

double gaussian_log_likelihood(std::span<const double> data) {
  if (data.empty()) return 0.0;
  double mean = 0.0;
  for (double x : data) mean += x;
  mean /= static_cast<double>(data.size());
  double var = 0.0;
  for (double x : data) var += (x - mean) * (x - mean);
  var /= static_cast<double>(data.size());
  double ll = 0.0;
  for (double x : data) ll += log_normal(x, mean, var);
  return ll;
}

}  // namespace qalign
