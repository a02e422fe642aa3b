#include "qalign/verify.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <thread>
#include <unistd.h>
#include <unordered_map>

#include "qalign/backends.hpp"
#include "qalign/decision.hpp"
#include "qalign/diagnostics.hpp"
#include "qalign/extreme_value.hpp"
#include "qalign/harness.hpp"
#include "qalign/mixture.hpp"
#include "qalign/numeric.hpp"
#include "qalign/sampler.hpp"
#include "qalign/target.hpp"
#include "qalign/toy_spaces.hpp"
#include "qalign/tuning.hpp"

namespace fs = std::filesystem;

namespace qalign {

namespace {

std::string f(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::string g6(double v) { return f("%.6g", v); }

struct Context {
  const VerifyOptions& opt;
  AcceptanceRule rule;
  bool unnormalized_is = false;

  std::uint64_t seed(std::string_view tag) const { return mix_seed(opt.seed, tag); }
};

const Prompt& toy_prompt() {
  static const Prompt x{"toy", "toy", std::nullopt, {}};
  return x;
}

// ---------------------------------------------------------------------------------------------
// 1. exact stationarity and detailed balance of the explicit kernel

void criterion_stationarity(const Context& c, CriterionResult& out) {
  out.name = "exact stationarity & detailed balance";
  out.pass = true;
  const std::pair<const char*, EnumerableSpace> spaces[] = {{"4-sequence", four_sequence_space()},
                                                            {"30-sequence", thirty_sequence_space()}};
  for (const auto& [label, space] : spaces) {
    for (double beta : {0.5, 1.0, 2.0}) {
      KernelCheck k = check_kernel(build_transition_kernel(space, beta, c.rule));
      bool ok = k.stationarity_l1 < 1e-9 && k.detailed_balance < 1e-9 && k.min_off_diagonal > 0.0 &&
                k.min_diagonal > 0.0 && k.row_sum_error < 1e-9;
      out.pass = out.pass && ok;
      out.details.push_back(std::string(label) + " beta=" + g6(beta) + ": |piK-pi|_1=" + f("%.3e", k.stationarity_l1) +
                            " balance=" + f("%.3e", k.detailed_balance) + " (< 1e-9), min K(y,y')=" +
                            f("%.3e", k.min_off_diagonal) + ", min K(y,y)=" + f("%.3e", k.min_diagonal) + " (> 0)" +
                            (ok ? "" : "  <-- FAIL"));
    }
  }
}

// ---------------------------------------------------------------------------------------------
// 2. ergodic convergence of the actual sampler

void criterion_ergodic(const Context& c, CriterionResult& out) {
  out.name = "ergodic convergence (TV < 0.05 at T = 20000)";
  out.pass = true;
  const std::pair<const char*, EnumerableSpace> spaces[] = {{"4-sequence", four_sequence_space()},
                                                            {"30-sequence", thirty_sequence_space()}};
  for (const auto& [label, space] : spaces) {
    ToyGenerator gen(space);
    ToyReward reward(space);
    for (double beta : {0.5, 1.0, 2.0}) {
      RewardCache cache(reward);
      QAlignConfig qc;
      qc.beta = BetaParam(beta);
      qc.steps = 20000;
      qc.max_len = static_cast<std::int64_t>(space.max_length());
      qc.seed = c.seed(std::string("ergodic/") + label + "/" + g6(beta));
      qc.acceptance_override = c.rule;
      ChainResult chain = qalign_chain(qc, toy_prompt(), gen, cache);
      ExactDistribution exact = exact_distribution(TargetSpec{BetaParam(beta)}, toy_prompt(), score_space(space));
      DiagnosticsReport rep = diagnostics(chain, &exact, 0.1, 10);
      bool ok = *rep.final_tv < 0.05;
      out.pass = out.pass && ok;
      out.details.push_back(std::string(label) + " beta=" + g6(beta) + ": TV=" + f("%.4f", *rep.final_tv) +
                            " (< 0.05), acceptance=" + f("%.3f", rep.acceptance_rate) + (ok ? "" : "  <-- FAIL"));
    }
  }
}

// ---------------------------------------------------------------------------------------------
// 3. importance-sampling consistency and WMV = exact MBR

struct WeightedMass {
  std::unordered_map<std::string, double> by_text;
};

WeightedMass weighted_mass(const Context& c, const std::vector<Sequence>& samples, const std::vector<double>& rewards,
                           double beta) {
  WeightedMass m;
  if (c.unnormalized_is) {
    const double n = static_cast<double>(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) m.by_text[samples[i].text()] += std::exp(rewards[i] / beta) / n;
  } else {
    ISWeights w = is_weights(rewards, beta);
    for (std::size_t i = 0; i < samples.size(); ++i) m.by_text[samples[i].text()] += w.values()[i];
  }
  return m;
}

void criterion_wmv(const Context& c, CriterionResult& out) {
  out.name = "WMV / importance-sampling consistency";
  const EnumerableSpace space = thirty_sequence_space();
  const double beta = 1.0;
  ToyGenerator gen(space);
  SampleBatch batch = independent_samples(toy_prompt(), gen, 100000, static_cast<std::int64_t>(space.max_length()),
                                          c.seed("wmv/base"));
  const std::vector<ScoredSequence> scored = score_space(space);

  // (a) E_pi[u(y, .)] for every candidate y. With exact-match utility over distinct answers this
  // is the target mass of y's answer.
  std::vector<double> rewards;
  for (const auto& s : batch.samples) rewards.push_back(space.reward(s));
  WeightedMass est = weighted_mass(c, batch.samples, rewards, beta);
  ExactDistribution exact = exact_distribution(TargetSpec{BetaParam(beta)}, toy_prompt(), scored);
  double worst = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    auto it = est.by_text.find(exact.support()[i].text());
    double e = it == est.by_text.end() ? 0.0 : it->second;
    worst = std::max(worst, std::abs(e - exact.probabilities()[i]));
  }
  const bool a_ok = worst <= 0.01;
  out.details.push_back("max |IS estimate - exact expected utility| over 30 candidates = " + f("%.4f", worst) +
                        " (<= 0.01, n = 1e5)" + (a_ok ? "" : "  <-- FAIL"));

  // (b) 100 random reward tables: WMV selection vs. exact MBR selection.
  Rng rng(c.seed("wmv/tables"));
  const Utility utility(UtilityKind::exact_match, AnswerExtractor::identity);
  int agree = 0;
  for (int table = 0; table < 100; ++table) {
    std::unordered_map<std::string, double> r_of;
    std::vector<ScoredSequence> rescored = scored;
    for (auto& s : rescored) {
      s.reward = 3.0 * uniform01(rng);
      r_of[s.seq.text()] = s.reward;
    }
    std::vector<double> r;
    r.reserve(batch.samples.size());
    for (const auto& s : batch.samples) r.push_back(r_of.at(s.text()));

    std::string selected;
    if (c.unnormalized_is) {
      WeightedMass m = weighted_mass(c, batch.samples, r, beta);
      selected = std::max_element(m.by_text.begin(), m.by_text.end(), [](auto& x, auto& y) {
                   return x.second < y.second || (x.second == y.second && x.first > y.first);
                 })->first;
    } else {
      MbrResult m = mbr_select(batch.samples, is_weights(r, beta), utility);
      selected = batch.samples[m.index].text();
    }
    ExactDistribution pi = exact_distribution(TargetSpec{BetaParam(beta)}, toy_prompt(), rescored);
    auto best = std::max_element(pi.probabilities().begin(), pi.probabilities().end()) - pi.probabilities().begin();
    if (pi.support()[static_cast<std::size_t>(best)].text() == selected) ++agree;
  }
  const bool b_ok = agree >= 95;
  out.details.push_back("WMV selection == exact MBR selection on " + std::to_string(agree) + "/100 random tables (>= 95)" +
                        (b_ok ? "" : "  <-- FAIL"));
  out.pass = a_ok && b_ok;
}

// ---------------------------------------------------------------------------------------------
// 4. best-of-n max-reward distribution

DiscretePmf random_pmf(Rng& rng, std::size_t size) {
  DiscretePmf p;
  double v = -1.0;
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    v += 0.1 + uniform01(rng);
    p.values.push_back(v);
    p.probs.push_back(0.05 + uniform01(rng));
    total += p.probs.back();
  }
  for (double& q : p.probs) q /= total;
  return p;
}

std::vector<double> enumerate_max(const DiscretePmf& p, int n) {
  const std::size_t m = p.values.size();
  std::vector<double> out(m, 0.0);
  std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
  while (true) {
    double prob = 1.0;
    std::size_t top = 0;
    for (std::size_t k : idx) {
      prob *= p.probs[k];
      top = std::max(top, k);
    }
    out[top] += prob;
    std::size_t pos = 0;
    while (pos < idx.size() && ++idx[pos] == m) idx[pos++] = 0;
    if (pos == idx.size()) break;
  }
  return out;
}

void criterion_bon(const Context& c, CriterionResult& out) {
  out.name = "best-of-n max-reward density";
  Rng rng(c.seed("bon"));
  double worst_exact = 0.0;
  for (std::size_t size = 1; size <= 5; ++size) {
    for (int rep = 0; rep < 4; ++rep) {
      DiscretePmf p = random_pmf(rng, size);
      for (int n : {1, 2, 3}) {
        DiscretePmf d = bon_max_density(p, n);
        std::vector<double> e = enumerate_max(p, n);
        for (std::size_t i = 0; i < size; ++i) worst_exact = std::max(worst_exact, std::abs(d.probs[i] - e[i]));
      }
    }
  }
  const bool exact_ok = worst_exact <= 1e-12;
  out.details.push_back("max |closed form - tuple enumeration| for n in {1,2,3}, support <= 5: " +
                        f("%.3e", worst_exact) + " (<= 1e-12)" + (exact_ok ? "" : "  <-- FAIL"));

  bool mc_ok = true;
  DiscretePmf p = random_pmf(rng, 5);
  for (int n : {4, 8}) {
    DiscretePmf d = bon_max_density(p, n);
    std::vector<double> counts(5, 0.0);
    const int trials = 100000;
    for (int t = 0; t < trials; ++t) {
      std::size_t top = 0;
      for (int k = 0; k < n; ++k) top = std::max(top, sample_categorical(rng, p.probs));
      counts[top] += 1.0;
    }
    double tv = 0.0;
    for (std::size_t i = 0; i < 5; ++i) tv += std::abs(counts[i] / trials - d.probs[i]);
    tv *= 0.5;
    bool ok = tv <= 0.01;
    mc_ok = mc_ok && ok;
    out.details.push_back("n=" + std::to_string(n) + ": TV(closed form, Monte-Carlo 1e5) = " + f("%.4f", tv) +
                          " (<= 0.01)" + (ok ? "" : "  <-- FAIL"));
  }
  out.pass = exact_ok && mc_ok;
}

// ---------------------------------------------------------------------------------------------
// 5. Gumbel approximation of the normalized maximum

void criterion_gumbel(const Context& c, CriterionResult& out) {
  out.name = "Gumbel approximation (KS < 0.05 for n >= 32, decreasing over {8, 32, 128})";
  Rng rng(c.seed("gumbel"));
  std::normal_distribution<double> z(0.0, 1.0);
  std::map<int, double> ks;
  for (int n : {8, 16, 32, 64, 128}) {
    GumbelApprox g = gumbel_approx(0.0, 1.0, n);
    std::vector<double> sample;
    sample.reserve(10000);
    for (int t = 0; t < 10000; ++t) {
      double m = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < n; ++k) m = std::max(m, z(rng));
      sample.push_back((m - g.a_n) / g.b_n);
    }
    ks[n] = ks_statistic(sample, gumbel_cdf);
  }
  bool below = true;
  for (auto& [n, d] : ks) {
    bool ok = n < 32 || d < 0.05;
    below = below && ok;
    out.details.push_back("n=" + std::to_string(n) + ": KS=" + f("%.4f", d) + (n >= 32 ? " (< 0.05)" : "") +
                          (ok ? "" : "  <-- FAIL"));
  }
  const bool decreasing = ks[8] > ks[32] && ks[32] > ks[128];
  out.details.push_back(std::string("KS decreasing over {8, 32, 128}: ") + (decreasing ? "yes" : "no  <-- FAIL"));
  out.pass = below && decreasing;
}

// ---------------------------------------------------------------------------------------------
// 6. mode matching identity and the variance mismatch

std::vector<double> planted(Rng& rng, double w1, double mu1, double s1, double mu2, double s2, int n) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(uniform01(rng) < w1 ? mu1 + s1 * z(rng) : mu2 + s2 * z(rng));
  return out;
}

void criterion_mode_matching(const Context& c, CriterionResult& out) {
  out.name = "mode matching sigma_d^2 / beta* = a_n - mu_d; var(max) < sigma_d^2";
  Rng rng(c.seed("mode"));
  std::vector<MixtureFit> fits;
  fits.push_back(fit_reward_mixture(planted(rng, 0.3, -1.0, 0.5, 2.0, 1.0, 10000)));
  fits.push_back(fit_reward_mixture(planted(rng, 0.5, 0.0, 1.5, 3.0, 0.6, 10000)));
  fits.push_back(fit_reward_mixture(planted(rng, 0.8, 1.0, 0.7, 1.5, 0.4, 10000)));

  double worst_identity = 0.0;
  double worst_mode = 0.0;
  bool var_ok = true;
  std::normal_distribution<double> z(0.0, 1.0);
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const MixtureFit& fit = fits[i];
    for (double n : {1e2, 1e3, 1e4}) {
      const double bs = beta_star(fit, n);
      const GumbelApprox g = gumbel_approx(fit, n);
      const double sd = fit.dominant_sigma();
      worst_identity = std::max(worst_identity, std::abs(sd * sd / bs - (g.a_n - fit.dominant_mean())));
      worst_mode = std::max(worst_mode, std::abs(aligned_reward_mixture(fit, bs).dominant_mode() - g.a_n));
    }
    for (int n : {32, 64, 128}) {
      std::vector<double> maxima;
      for (int t = 0; t < 10000; ++t) {
        double m = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < n; ++k) {
          m = std::max(m, uniform01(rng) < fit.w1 ? fit.mu1 + fit.sigma1 * z(rng) : fit.mu2 + fit.sigma2 * z(rng));
        }
        maxima.push_back(m);
      }
      double mean = 0.0, var = 0.0;
      for (double m : maxima) mean += m;
      mean /= static_cast<double>(maxima.size());
      for (double m : maxima) var += (m - mean) * (m - mean);
      var /= static_cast<double>(maxima.size() - 1);
      const double sd2 = fit.dominant_sigma() * fit.dominant_sigma();
      bool ok = var < sd2;
      var_ok = var_ok && ok;
      out.details.push_back("fit " + std::to_string(i + 1) + " n=" + std::to_string(n) + ": var(max)=" + f("%.4f", var) +
                            " < sigma_d^2=" + f("%.4f", sd2) + (ok ? "" : "  <-- FAIL"));
    }
  }
  const bool id_ok = worst_identity <= 1e-9 && worst_mode <= 1e-9;
  out.details.insert(out.details.begin(), "max |sigma_d^2/beta* - (a_n - mu_d)| = " + f("%.3e", worst_identity) +
                                              ", max |aligned mode - a_n| = " + f("%.3e", worst_mode) +
                                              " (<= 1e-9; 3 fits x n in {1e2,1e3,1e4})" + (id_ok ? "" : "  <-- FAIL"));
  out.pass = id_ok && var_ok;
}

// ---------------------------------------------------------------------------------------------
// 7. token accounting

void criterion_tokens(const Context& c, CriterionResult& out) {
  out.name = "token/FLOPs accounting ((T+1)N/2 within 5%, chain/independent ~ 0.5 within 10%)";
  out.pass = true;
  const std::pair<std::pair<int, int>, double> formula[] = {{{1, 10}, 10.0}, {{3, 10}, 20.0}, {{1023, 100}, 51200.0}};
  for (const auto& [tn, want] : formula) {
    bool ok = ledger_expected_chain_tokens(tn.first, tn.second) == want;
    out.pass = out.pass && ok;
    if (!ok) out.details.push_back("formula (T,N)=(" + std::to_string(tn.first) + "," + std::to_string(tn.second) + ") wrong");
  }
  const int chains = 100;
  for (int n : {16, 64}) {
    const EnumerableSpace space = fixed_length_space(static_cast<std::size_t>(n), 0.05);
    ToyGenerator gen(space);
    ToyReward reward(space);
    for (int t : {63, 255}) {
      double total = 0.0;
      double indep = 0.0;
      for (int k = 0; k < chains; ++k) {
        RewardCache cache(reward);
        QAlignConfig qc;
        qc.beta = BetaParam(1.0);
        qc.steps = t;
        qc.max_len = n;
        qc.seed = c.seed("tokens/" + std::to_string(n) + "/" + std::to_string(t) + "/" + std::to_string(k));
        total += static_cast<double>(qalign_chain(qc, toy_prompt(), gen, cache).ledger.generated_tokens);
        indep += static_cast<double>(
            independent_samples(toy_prompt(), gen, static_cast<std::size_t>(t) + 1, n, qc.seed).ledger.generated_tokens);
      }
      total /= chains;
      indep /= chains;
      const double expected = ledger_expected_chain_tokens(t, n);
      const double rel = std::abs(total - expected) / expected;
      const double ratio = total / indep;
      const bool ok_tokens = rel <= 0.05;
      const bool ok_ratio = std::abs(ratio - 0.5) <= 0.05;
      out.pass = out.pass && ok_tokens && ok_ratio;
      out.details.push_back("N=" + std::to_string(n) + " T=" + std::to_string(t) + ": mean chain tokens " +
                            f("%.1f", total) + " vs (T+1)N/2 = " + f("%.1f", expected) + " (rel. err " +
                            f("%.4f", rel) + ", <= 0.05" + (ok_tokens ? ")" : ")  <-- FAIL") +
                            "; chain/independent = " + f("%.4f", ratio) + " (0.5 +- 0.05)" +
                            (ok_ratio ? "" : "  <-- FAIL"));
    }
  }
}

// ---------------------------------------------------------------------------------------------
// 8. beta tuning to a 50% acceptance rate

double mean_acceptance(const EnumerableSpace& space, double beta, int chains, std::int64_t steps, std::uint64_t seed) {
  ToyGenerator gen(space);
  ToyReward reward(space);
  double sum = 0.0;
  for (int k = 0; k < chains; ++k) {
    RewardCache cache(reward);
    QAlignConfig qc;
    qc.beta = BetaParam(beta);
    qc.steps = steps;
    qc.max_len = static_cast<std::int64_t>(space.max_length());
    qc.seed = mix_seed(seed, static_cast<std::uint64_t>(k));
    sum += qalign_chain(qc, toy_prompt(), gen, cache).acceptance_rate;
  }
  return sum / chains;
}

void criterion_tuning(const Context& c, CriterionResult& out) {
  out.name = "acceptance-rate tuning";
  const double scale = calibrate_tuning_scale(0.5, 1.0);
  const EnumerableSpace space = fixed_length_space(6, scale);
  const double measured = mean_acceptance(space, 1.0, 8, 5000, c.seed("tune/measure"));
  const bool space_ok = std::abs(measured - 0.5) <= 0.03;
  out.details.push_back("toy space r = " + f("%.6f", scale) + " * count(A), length 6: measured acceptance at beta=1 = " +
                        f("%.4f", measured) + " (0.5 +- 0.03)" + (space_ok ? "" : "  <-- FAIL"));

  ToyGenerator gen(space);
  ToyReward reward(space);
  std::vector<Prompt> pilots;
  for (int i = 0; i < 8; ++i) pilots.push_back(Prompt{"pilot-" + std::to_string(i), "pilot", std::nullopt, {}});
  TuneOptions to;
  to.max_len = 6;
  to.seed = c.seed("tune/pilots");
  to.workers = 4;
  TuneResult tr = tune_beta(pilots, gen, reward, to);
  const double beta = tr.beta.value();
  const bool beta_ok = beta >= 0.5 && beta <= 2.0;
  out.details.push_back("tune_beta (8 pilots x 32 steps, " + std::to_string(tr.trace.size()) + " evaluations) -> beta = " +
                        f("%.4f", beta) + " (in [0.5, 2]), pilot rate " + f("%.4f", tr.rate) +
                        (tr.warning ? "; warning: " + *tr.warning : "") + (beta_ok ? "" : "  <-- FAIL"));

  const double deployed = mean_acceptance(space, beta, 1, 4096, c.seed("tune/deploy"));
  const bool deploy_ok = std::abs(deployed - 0.5) <= 0.07;
  out.details.push_back("deployed chain (T = 4096) acceptance = " + f("%.4f", deployed) + " (0.5 +- 0.07)" +
                        (deploy_ok ? "" : "  <-- FAIL"));
  out.pass = space_ok && beta_ok && deploy_ok;
}

// ---------------------------------------------------------------------------------------------
// 9. acceptance probability unit vector

void criterion_alpha(const Context& c, CriterionResult& out) {
  out.name = "acceptance probability examples and reward-shift invariance";
  struct Case {
    double rp, rc, beta;
    std::size_t lp, lc;
    double want;
  };
  const Case cases[] = {{0.3, 0.3, 1.0, 7, 7, 1.0}, {0.2, 0.5, 1.0, 8, 10, 0.92602}, {1.0, 0.0, 0.5, 20, 10, 1.0}};
  bool ok_cases = true;
  for (const auto& k : cases) {
    double a = c.rule(k.rp, k.rc, k.beta, k.lp, k.lc);
    bool ok = std::abs(a - k.want) <= 1e-5;
    ok_cases = ok_cases && ok;
    out.details.push_back("r(y)=" + g6(k.rp) + " r(y_t)=" + g6(k.rc) + " beta=" + g6(k.beta) + " |y|=" +
                          std::to_string(k.lp) + " |y_t|=" + std::to_string(k.lc) + ": alpha=" + f("%.6f", a) +
                          " (want " + g6(k.want) + " +- 1e-5)" + (ok ? "" : "  <-- FAIL"));
  }

  Rng rng(c.seed("alpha"));
  int exact_mismatch = 0;
  double worst_rel = 0.0;
  for (int i = 0; i < 10000; ++i) {
    // Dyadic grid: sums and differences are exact, so alpha must not move at all.
    double rp = static_cast<double>(static_cast<int>(uniform_index(rng, 513)) - 256) / 64.0;
    double rc = static_cast<double>(static_cast<int>(uniform_index(rng, 513)) - 256) / 64.0;
    double shift = static_cast<double>(static_cast<int>(uniform_index(rng, 2049)) - 1024) / 64.0;
    double beta = std::ldexp(1.0, static_cast<int>(uniform_index(rng, 7)) - 3);
    std::size_t lp = 1 + uniform_index(rng, 50), lc = 1 + uniform_index(rng, 50);
    if (c.rule(rp + shift, rc + shift, beta, lp, lc) != c.rule(rp, rc, beta, lp, lc)) ++exact_mismatch;
    // Arbitrary reals: invariant up to rounding of the shifted rewards.
    double xp = 4.0 * uniform01(rng) - 2.0, xc = 4.0 * uniform01(rng) - 2.0, s = 20.0 * uniform01(rng) - 10.0;
    double b = 0.1 + 9.9 * uniform01(rng);
    double a0 = c.rule(xp, xc, b, lp, lc);
    double a1 = c.rule(xp + s, xc + s, b, lp, lc);
    worst_rel = std::max(worst_rel, std::abs(a1 - a0) / a0);
  }
  const bool ok_shift = exact_mismatch == 0 && worst_rel <= 1e-12;
  out.details.push_back("reward shift: " + std::to_string(exact_mismatch) +
                        "/10000 exact mismatches on a dyadic grid; max relative change for arbitrary reals " +
                        f("%.2e", worst_rel) + " (<= 1e-12)" + (ok_shift ? "" : "  <-- FAIL"));
  out.pass = ok_cases && ok_shift;
}

// ---------------------------------------------------------------------------------------------
// 10. end-to-end determinism through HTTP record and fixture replay

/// Stand-in for a completions + reward server: answers are a deterministic function of the
/// request body and how often that body has been seen.
class SyntheticServer {
 public:
  SyntheticServer() {
    server_.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json body = nlohmann::json::parse(req.body);
      std::uint64_t h = next_hash(req.body);
      static const char* words[] = {"so", "the", "answer", "is", "3", "4", "7", "12", "then", "we", "add"};
      const auto max_tokens = body.at("max_tokens").get<std::uint64_t>();
      std::uint64_t k = 1 + h % std::min<std::uint64_t>(max_tokens, 5);
      std::string text;
      for (std::uint64_t i = 0; i < k; ++i) {
        h = splitmix64(h);
        text += std::string(" ") + words[h % std::size(words)];
      }
      nlohmann::json out{{"choices", nlohmann::json::array({nlohmann::json{{"text", text}, {"index", 0}}})}};
      res.set_content(out.dump(), "application/json");
    });
    server_.Post("/score", [this](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json body = nlohmann::json::parse(req.body);
      std::uint64_t h = hash_string(body.at("response").get<std::string>());
      nlohmann::json out{{"reward", static_cast<double>(h % 1000) / 250.0}};
      res.set_content(out.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw Error("cannot bind a local port for the synthetic server");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~SyntheticServer() {
    server_.stop();
    thread_.join();
  }
  int port() const { return port_; }

 private:
  std::uint64_t next_hash(const std::string& body) {
    std::lock_guard lock(mutex_);
    return mix_seed(hash_string(body), static_cast<std::uint64_t>(seen_[body]++));
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mutex_;
  std::map<std::string, int> seen_;
};

void criterion_determinism(const Context& c, CriterionResult& out) {
  out.name = "end-to-end determinism (HTTP record -> fixture run + curve, twice)";
  fs::path scratch = c.opt.scratch_dir.value_or(fs::temp_directory_path() /
                                                ("qalign-verify-" + std::to_string(::getpid())));
  const bool own_scratch = !c.opt.scratch_dir.has_value();
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  {
    std::ofstream p(scratch / "prompts.jsonl");
    p << R"({"id": "q1", "question": "Tom has 3 apples and buys 4 more. How many apples?", "gold": "7"})" << "\n"
      << R"({"id": "q2", "question": "What is 3 times 4?", "gold": "12"})" << "\n"
      << R"({"id": "q3", "question": "What is 2 plus 2?", "gold": "4"})" << "\n";
  }
  SyntheticServer server;
  auto write_config = [&](const std::string& method) {
    fs::path cfg = scratch / (method + ".toml");
    std::ofstream o(cfg);
    o << "run_id = \"e2e-" << method << "\"\n"
      << "method = \"" << method << "\"\n"
      << "seed = " << (c.opt.seed % 100000) << "\n"
      << "prompts = \"prompts.jsonl\"\n"
      << "template_id = \"gsm8k\"\n"
      << "budget_schedule = [1, 2, 4, 8]\n"
      << "beta = 1.0\n"
      << "steps = 7\n"
      << "max_len = 12\n"
      << "utility = \"exact_match\"\n"
      << "extractor = \"last_number\"\n"
      << "[generator]\nkind = \"http\"\nbase_url = \"http://127.0.0.1:" << server.port() << "\"\n"
      << "model = \"synthetic\"\nparam_count = 1000\nunit = \"word\"\nrecord = true\nmax_retries = 0\n"
      << "[reward]\nkind = \"http\"\nbase_url = \"http://127.0.0.1:" << server.port() << "\"\n"
      << "param_count = 100\nrecord = true\nmax_retries = 0\n";
    return cfg;
  };

  bool ok = true;
  std::vector<fs::path> recorded;
  for (const char* method : {"qalign", "wmv"}) {
    fs::path cfg_path = write_config(method);
    RunOptions ro;
    ro.runs_root = scratch / "recorded";
    ro.config_source = cfg_path;
    recorded.push_back(cmd_run(RunConfig::load(cfg_path), ro));
  }
  std::vector<fs::path> replay_a, replay_b;
  for (const auto& dir : recorded) {
    ReplayResult a = cmd_replay(dir, scratch / "replay_a");
    ReplayResult b = cmd_replay(dir, scratch / "replay_b");
    replay_a.push_back(a.replay_dir);
    replay_b.push_back(b.replay_dir);
    const bool same = a.identical() && b.identical();
    ok = ok && same;
    out.details.push_back(dir.filename().string() + ": fixture replays reproduce the recorded run byte for byte: " +
                          (same ? "yes" : "no (" + std::to_string(a.mismatches.size() + b.mismatches.size()) +
                                              " differing files)  <-- FAIL"));
  }
  CurveResult ca = cmd_curve(replay_a, scratch / "curve_a");
  CurveResult cb = cmd_curve(replay_b, scratch / "curve_b");
  CurveResult cr = cmd_curve(recorded, scratch / "curve_recorded");
  const bool curves = same_bytes(ca.csv, cb.csv) && same_bytes(ca.svg, cb.svg) && same_bytes(ca.csv, cr.csv);
  ok = ok && curves;
  out.details.push_back(std::string("curve.csv / curve.svg identical across executions: ") +
                        (curves ? "yes" : "no  <-- FAIL"));
  out.pass = ok;
  if (own_scratch) fs::remove_all(scratch);
}

}  // namespace

std::vector<CriterionResult> run_verify(const VerifyOptions& options) {
  Context ctx{options, default_acceptance_rule()};
  if (options.mutation) {
    if (*options.mutation == "flip-length-ratio") {
      ctx.rule = [](double rp, double rc, double beta, std::size_t lp, std::size_t lc) {
        return acceptance_probability(rp, rc, beta, lc, lp);
      };
    } else if (*options.mutation == "unnormalized-is") {
      ctx.unnormalized_is = true;
    } else {
      throw Error("unknown mutation '" + *options.mutation + "'");
    }
  }
  using Fn = void (*)(const Context&, CriterionResult&);
  const Fn criteria[] = {criterion_stationarity, criterion_ergodic,  criterion_wmv,
                         criterion_bon,          criterion_gumbel,   criterion_mode_matching,
                         criterion_tokens,       criterion_tuning,   criterion_alpha,
                         criterion_determinism};
  std::vector<CriterionResult> results;
  for (int id = 1; id <= 10; ++id) {
    if (!options.only.empty() && !options.only.count(id)) continue;
    CriterionResult r;
    r.id = id;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[id - 1](ctx, r);
    } catch (const std::exception& e) {
      r.pass = false;
      r.details.push_back(std::string("error: ") + e.what());
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    results.push_back(std::move(r));
  }
  return results;
}

nlohmann::ordered_json verify_report_json(const std::vector<CriterionResult>& results,
                                          const std::optional<std::string>& mutation) {
  nlohmann::ordered_json j;
  j["mutation"] = mutation ? nlohmann::ordered_json(*mutation) : nlohmann::ordered_json(nullptr);
  bool all = true;
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    all = all && r.pass;
    nlohmann::ordered_json e;
    e["id"] = r.id;
    e["name"] = r.name;
    e["pass"] = r.pass;
    e["details"] = r.details;
    list.push_back(e);
  }
  j["all_pass"] = all;
  j["criteria"] = list;
  return j;
}

std::string verify_report_text(const std::vector<CriterionResult>& results) {
  std::string out;
  for (const auto& r : results) {
    out += std::string(r.pass ? "[PASS] " : "[FAIL] ") + std::to_string(r.id) + " " + r.name + " (" +
           f("%.1f", r.seconds) + " s)\n";
    for (const auto& d : r.details) out += "         " + d + "\n";
  }
  return out;
}

}  // namespace qalign
