#include "qalign/sampler.hpp"

#include <algorithm>
#include <cmath>

namespace qalign {

double acceptance_probability(double reward_proposal, double reward_current, double beta, std::size_t len_proposal,
                              std::size_t len_current) {
  if (len_proposal == 0 || len_current == 0) throw Error("acceptance needs non-empty sequences");
  double log_ratio = (reward_proposal - reward_current) / BetaParam(beta).value() +
                     std::log(static_cast<double>(len_current)) - std::log(static_cast<double>(len_proposal));
  if (log_ratio >= 0.0) return 1.0;
  return std::exp(log_ratio);
}

void QAlignConfig::validate(const GenerationBackend& gen) const {
  if (steps < 1) throw Error("QAlign needs T >= 1 steps");
  if (max_len < 1) throw Error("QAlign needs max_len N >= 1");
  if (temperature && *temperature != gen.temperature()) {
    throw Error("proposal temperature " + std::to_string(gen.temperature()) +
                " differs from the configured sampling temperature " + std::to_string(*temperature));
  }
}

std::vector<ScoredSequence> ChainResult::accepted_states() const {
  std::vector<ScoredSequence> out;
  for (const auto& r : records) {
    if (r.step == 0 || r.accepted) out.push_back(r.state);
  }
  return out;
}

namespace {

ScoredSequence scored(const Prompt& x, const GenerationBackend& gen, Sequence seq, double reward) {
  std::optional<double> lp;
  if (gen.can_score_exact()) lp = gen.log_prob(x, seq);
  return ScoredSequence{std::move(seq), reward, lp};
}

}  // namespace

ChainResult qalign_chain(const QAlignConfig& cfg, const Prompt& x, GenerationBackend& gen, RewardCache& rewards,
                         const RecordSink& sink, std::span<const ChainRecord> resume_from) {
  cfg.validate(gen);
  const auto total = static_cast<std::size_t>(cfg.steps) + 1;
  if (resume_from.size() > total) throw Error("checkpoint holds more records than the configured chain length");

  ChainResult res;
  res.ledger.generator_params = gen.param_count();
  res.ledger.reward_params = rewards.backend().param_count();
  res.records.reserve(total);
  res.states.reserve(total);

  std::int64_t accepted = 0;
  for (const auto& rec : resume_from) {
    if (rec.step != static_cast<std::int64_t>(res.records.size())) throw Error("checkpoint records are not gapless");
    res.ledger.add_generated(rec.tokens_generated);
    if (rec.step == 0) {
      rewards.prime(x, rec.state.seq, rec.state.reward, res.ledger);
    } else {
      rewards.prime(x, rec.proposal->seq, rec.proposal->reward, res.ledger);
      if (rec.accepted) ++accepted;
    }
    res.records.push_back(rec);
    res.states.push_back(rec.state);
  }

  auto emit = [&](ChainRecord rec) {
    if (sink) sink(rec);
    res.states.push_back(rec.state);
    res.records.push_back(std::move(rec));
  };

  if (res.records.empty()) {
    Rng rng(mix_seed(cfg.seed, std::uint64_t{0}));
    Completion c = gen.complete(x, {}, cfg.max_len, rng);
    res.ledger.add_generated(c.tokens_generated);
    double r = rewards.score(x, c.sequence, res.ledger);
    emit(ChainRecord{.step = 0,
                     .state = scored(x, gen, std::move(c.sequence), r),
                     .proposal = std::nullopt,
                     .cut_index = std::nullopt,
                     .alpha = 1.0,
                     .accepted = true,
                     .tokens_generated = c.tokens_generated});
  }

  const std::function<double(double, double, double, std::size_t, std::size_t)> rule =
      cfg.acceptance_override ? cfg.acceptance_override : acceptance_probability;
  for (auto t = static_cast<std::int64_t>(res.records.size()); t <= cfg.steps; ++t) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(t)));
    const ScoredSequence current = res.states.back();
    const std::size_t cut = uniform_index(rng, current.seq.length());
    const std::int64_t max_new = std::max<std::int64_t>(1, cfg.max_len - static_cast<std::int64_t>(cut));
    Completion c = gen.complete(x, current.seq.prefix(cut), max_new, rng);
    res.ledger.add_generated(c.tokens_generated);

    // Regenerating the current response is always accepted and needs no reward call.
    const bool same = c.sequence == current.seq;
    const double r = same ? current.reward : rewards.score(x, c.sequence, res.ledger);
    ScoredSequence proposal = same ? current : scored(x, gen, std::move(c.sequence), r);

    const double alpha =
        rule(proposal.reward, current.reward, cfg.beta.value(), proposal.seq.length(), current.seq.length());
    const bool accept = uniform01(rng) < alpha;
    if (accept) ++accepted;
    emit(ChainRecord{.step = t,
                     .state = accept ? proposal : current,
                     .proposal = std::move(proposal),
                     .cut_index = cut,
                     .alpha = alpha,
                     .accepted = accept,
                     .tokens_generated = c.tokens_generated});
  }
  res.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(cfg.steps);
  return res;
}

SampleBatch independent_samples(const Prompt& x, GenerationBackend& gen, std::size_t n, std::int64_t max_len,
                                std::uint64_t seed, std::size_t start) {
  if (n < 1) throw Error("independent sampling needs n >= 1");
  SampleBatch batch;
  batch.requested = n;
  batch.ledger.generator_params = gen.param_count();
  for (std::size_t k = start; k < n; ++k) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(k)));
    try {
      Completion c = gen.complete(x, {}, max_len, rng);
      batch.ledger.add_generated(c.tokens_generated);
      batch.tokens_generated.push_back(c.tokens_generated);
      batch.samples.push_back(std::move(c.sequence));
    } catch (const Error& e) {
      batch.error = "sample " + std::to_string(k) + ": " + e.what();
      break;
    }
  }
  return batch;
}

BestOfN best_of_n(const Prompt& x, GenerationBackend& gen, RewardCache& rewards, std::size_t n, std::int64_t max_len,
                  std::uint64_t seed) {
  SampleBatch batch = independent_samples(x, gen, n, max_len, seed);
  if (batch.samples.empty()) throw Error(batch.error.value_or("best-of-n produced no samples"));
  ComputeLedger ledger = batch.ledger;
  ledger.reward_params = rewards.backend().param_count();
  std::vector<double> r;
  r.reserve(batch.samples.size());
  for (const auto& s : batch.samples) r.push_back(rewards.score(x, s, ledger));
  std::size_t best = argmax_reward(r);
  return BestOfN{scored(x, gen, batch.samples[best], r[best]), best, ledger};
}

std::uint64_t chain_seed(std::uint64_t run_seed, const std::string& prompt_id, std::uint64_t chain_index) {
  return mix_seed(mix_seed(run_seed, prompt_id), chain_index);
}

}  // namespace qalign
