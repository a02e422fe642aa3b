#include "qalign/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace qalign {

AcceptanceRule default_acceptance_rule() {
  return [](double rp, double rc, double beta, std::size_t lp, std::size_t lc) {
    return acceptance_probability(rp, rc, beta, lp, lc);
  };
}

TransitionKernel build_transition_kernel(const EnumerableSpace& space, double beta, const AcceptanceRule& rule,
                                         double temperature) {
  const TargetSpec spec{BetaParam(beta)};
  const Prompt x{"kernel", "kernel", std::nullopt, {}};
  std::vector<ScoredSequence> scored = score_space(space, temperature);
  ExactDistribution pi = exact_distribution(spec, x, scored);

  TransitionKernel k;
  k.support = pi.support();
  k.target = pi.probabilities();
  const std::size_t n = k.size();
  k.matrix.assign(n * n, 0.0);
  k.accept_mass.assign(n, 0.0);

  for (std::size_t from = 0; from < n; ++from) {
    const auto y = scored[from].seq.tokens();
    const double pick = 1.0 / static_cast<double>(y.size());
    for (std::size_t cut = 0; cut < y.size(); ++cut) {
      for (std::size_t to = 0; to < n; ++to) {
        const auto yp = scored[to].seq.tokens();
        if (yp.size() <= cut || !std::equal(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(cut), yp.begin())) {
          continue;
        }
        const double q = std::exp(space.log_suffix_prob(yp, cut, temperature));
        if (q == 0.0) continue;
        const double alpha = std::clamp(rule(scored[to].reward, scored[from].reward, beta, yp.size(), y.size()), 0.0, 1.0);
        const double mass = pick * q;
        k.matrix[from * n + to] += mass * alpha;
        k.matrix[from * n + from] += mass * (1.0 - alpha);
        k.accept_mass[from] += mass * alpha;
      }
    }
  }
  return k;
}

KernelCheck check_kernel(const TransitionKernel& kernel) {
  const std::size_t n = kernel.size();
  KernelCheck c;
  c.min_off_diagonal = n > 1 ? std::numeric_limits<double>::infinity() : 0.0;
  c.min_diagonal = std::numeric_limits<double>::infinity();
  std::vector<double> pik(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double kij = kernel.at(i, j);
      row += kij;
      pik[j] += kernel.target[i] * kij;
      if (i == j) {
        c.min_diagonal = std::min(c.min_diagonal, kij);
      } else {
        c.min_off_diagonal = std::min(c.min_off_diagonal, kij);
        c.detailed_balance =
            std::max(c.detailed_balance, std::abs(kernel.target[i] * kij - kernel.target[j] * kernel.at(j, i)));
      }
    }
    c.row_sum_error = std::max(c.row_sum_error, std::abs(row - 1.0));
  }
  for (std::size_t j = 0; j < n; ++j) c.stationarity_l1 += std::abs(pik[j] - kernel.target[j]);
  return c;
}

double exact_acceptance_rate(const TransitionKernel& kernel) {
  double rate = 0.0;
  for (std::size_t i = 0; i < kernel.size(); ++i) rate += kernel.target[i] * kernel.accept_mass[i];
  return rate;
}

DiagnosticsReport diagnostics(const ChainResult& chain, const ExactDistribution* exact, double burn_in_fraction,
                              std::size_t tv_points) {
  DiagnosticsReport rep;
  rep.acceptance_rate = chain.acceptance_rate;
  rep.reward_trace.reserve(chain.states.size());
  for (const auto& s : chain.states) rep.reward_trace.push_back(s.reward);
  if (exact == nullptr || chain.states.empty()) return rep;

  const std::size_t total = chain.states.size();
  rep.burn_in = static_cast<std::size_t>(std::floor(std::clamp(burn_in_fraction, 0.0, 1.0) * static_cast<double>(total)));
  if (rep.burn_in >= total) rep.burn_in = total - 1;
  const std::size_t kept = total - rep.burn_in;
  const std::size_t points = std::max<std::size_t>(1, std::min(tv_points, kept));

  std::unordered_map<std::string, double> counts;
  std::size_t next_point = 1;
  for (std::size_t t = rep.burn_in; t < total; ++t) {
    counts[chain.states[t].seq.text()] += 1.0;
    const std::size_t seen = t - rep.burn_in + 1;
    // Evaluate at seen = ceil(k * kept / points), k = 1..points; the last one is the full chain.
    if (seen * points >= next_point * kept) {
      rep.tv_curve.push_back(TvPoint{static_cast<std::int64_t>(t), total_variation(*exact, counts)});
      ++next_point;
    }
  }
  rep.final_tv = rep.tv_curve.back().tv;
  return rep;
}

}  // namespace qalign
