#include "qalign/tuning.hpp"

#include <algorithm>
#include <cmath>

#include "qalign/parallel.hpp"
#include "qalign/sampler.hpp"

namespace qalign {

double pilot_acceptance_rate(std::span<const Prompt> pilots, GenerationBackend& gen, RewardBackend& reward,
                             double beta, const TuneOptions& options) {
  if (pilots.empty()) throw Error("beta tuning needs at least one pilot prompt");
  RewardCache cache(reward);
  std::vector<double> rates(pilots.size());
  parallel_for(pilots.size(), options.workers, [&](std::size_t i) {
    QAlignConfig cfg;
    cfg.beta = BetaParam(beta);
    cfg.steps = options.pilot_steps;
    cfg.max_len = options.max_len;
    cfg.seed = chain_seed(options.seed, pilots[i].id, 0);
    rates[i] = qalign_chain(cfg, pilots[i], gen, cache).acceptance_rate;
  });
  double sum = 0.0;
  for (double r : rates) sum += r;  // fixed order keeps the mean bit-stable
  return sum / static_cast<double>(rates.size());
}

TuneResult tune_beta(std::span<const Prompt> pilots, GenerationBackend& gen, RewardBackend& reward,
                     const TuneOptions& options) {
  if (pilots.empty()) throw Error("beta tuning needs at least one pilot prompt");
  if (!(options.log_beta_min < options.log_beta_max)) throw Error("empty beta search interval");
  if (options.max_rounds < 0) throw Error("max_rounds must be non-negative");

  TuneResult res;
  auto best = [&]() {
    const TunePoint* b = &res.trace.front();
    for (const auto& p : res.trace) {
      if (std::abs(p.rate - options.target_rate) < std::abs(b->rate - options.target_rate)) b = &p;
    }
    return *b;
  };
  auto finish = [&](TunePoint p, std::optional<std::string> warning) {
    res.beta = BetaParam(p.beta);
    res.rate = p.rate;
    res.warning = std::move(warning);
    return res;
  };
  auto eval = [&](double log_beta) {
    TunePoint p{std::exp(log_beta), 0.0};
    p.rate = pilot_acceptance_rate(pilots, gen, reward, p.beta, options);
    res.trace.push_back(p);
    return p;
  };
  auto close = [&](const TunePoint& p) { return std::abs(p.rate - options.target_rate) <= options.tolerance; };

  double a = options.log_beta_min;
  double b = options.log_beta_max;
  TunePoint hi = eval(b);
  if (close(hi)) return finish(hi, std::nullopt);
  TunePoint lo = eval(a);
  if (close(lo)) return finish(lo, std::nullopt);

  const double lo_rate = std::min(lo.rate, hi.rate);
  const double hi_rate = std::max(lo.rate, hi.rate);
  if (lo.rate > hi.rate + options.tolerance) {
    return finish(best(), "acceptance rate decreases with beta on this pilot set; returning the closest beta");
  }
  if (options.target_rate > hi_rate || options.target_rate < lo_rate) {
    return finish(best(), "target acceptance rate is outside the range reachable in the beta interval");
  }

  bool monotone = true;
  double r_a = lo.rate;
  double r_b = hi.rate;
  while (res.rounds < options.max_rounds) {
    const double mid = 0.5 * (a + b);
    TunePoint p = eval(mid);
    ++res.rounds;
    if (p.rate < r_a - options.tolerance || p.rate > r_b + options.tolerance) monotone = false;
    if (close(p)) {
      return finish(p, monotone ? std::nullopt
                                : std::optional<std::string>("acceptance rate is non-monotone in beta beyond "
                                                             "tolerance"));
    }
    if (p.rate < options.target_rate) {
      a = mid;
      r_a = p.rate;
    } else {
      b = mid;
      r_b = p.rate;
    }
  }
  return finish(best(), monotone ? "bisection did not reach the target tolerance; returning the closest beta"
                                 : "acceptance rate is non-monotone in beta beyond tolerance; returning the "
                                   "closest beta");
}

}  // namespace qalign
