#include "qalign/backends.hpp"

#include <cmath>

namespace qalign {

void ComputeLedger::add_generated(std::int64_t tokens) {
  if (tokens < 0) throw Error("negative generated token count");
  generated_tokens += tokens;
}

void ComputeLedger::add_scored(std::int64_t tokens) {
  if (tokens < 0) throw Error("negative scored token count");
  scored_tokens += tokens;
}

double ComputeLedger::flops() const {
  return 2.0 * static_cast<double>(generator_params) * static_cast<double>(generated_tokens) +
         2.0 * static_cast<double>(reward_params) * static_cast<double>(scored_tokens);
}

ComputeLedger& ComputeLedger::operator+=(const ComputeLedger& other) {
  generated_tokens += other.generated_tokens;
  scored_tokens += other.scored_tokens;
  return *this;
}

double ledger_expected_chain_tokens(std::int64_t steps, std::int64_t max_len) {
  if (steps < 1 || max_len < 1) throw Error("expected chain tokens need T >= 1 and N >= 1");
  return static_cast<double>(steps + 1) * static_cast<double>(max_len) / 2.0;
}

double GenerationBackend::log_prob(const Prompt&, const Sequence&) const {
  throw Error("backend cannot report exact log-probabilities");
}

std::string RewardCache::key(const Prompt& x, const Sequence& y) {
  std::string k = x.id;
  k.push_back('\x1f');
  k += y.text();
  return k;
}

std::optional<double> RewardCache::lookup(const Prompt& x, const Sequence& y) const {
  std::lock_guard lock(mutex_);
  auto it = cache_.find(key(x, y));
  if (it == cache_.end()) return std::nullopt;
  return it->second;
}

double RewardCache::score(const Prompt& x, const Sequence& y, ComputeLedger& ledger) {
  if (auto hit = lookup(x, y)) return *hit;
  // The backend call runs unlocked; concurrent misses on one key both store (last writer wins).
  double r = backend_.score(x, y);
  if (!std::isfinite(r)) throw Error("reward backend returned a non-finite score for '" + y.text() + "'");
  {
    std::lock_guard lock(mutex_);
    cache_[key(x, y)] = r;
  }
  ledger.add_scored(static_cast<std::int64_t>(y.length()));
  return r;
}

void RewardCache::prime(const Prompt& x, const Sequence& y, double reward, ComputeLedger& ledger) {
  std::lock_guard lock(mutex_);
  if (cache_.emplace(key(x, y), reward).second) ledger.add_scored(static_cast<std::int64_t>(y.length()));
}

std::size_t RewardCache::size() const {
  std::lock_guard lock(mutex_);
  return cache_.size();
}

ToyGenerator::ToyGenerator(const EnumerableSpace& space, std::int64_t param_count, double temperature)
    : space_(space), param_count_(param_count), temperature_(temperature) {
  if (!(temperature > 0.0)) throw Error("temperature must be positive");
}

Completion ToyGenerator::complete(const Prompt&, std::span<const std::string> prefix, std::int64_t max_new,
                                  Rng& rng) {
  if (max_new < 1) throw Error("max_new must be at least 1");
  std::size_t generated = 0;
  Sequence seq = space_.sample(prefix, static_cast<std::size_t>(max_new), rng, temperature_, generated);
  return Completion{std::move(seq), static_cast<std::int64_t>(generated)};
}

double ToyGenerator::log_prob(const Prompt&, const Sequence& y) const {
  return space_.log_prob(y.tokens(), temperature_);
}

double ExactMatchReward::score(const Prompt& x, const Sequence& y) {
  auto it = x.metadata.find(gold_key_);
  if (it == x.metadata.end()) throw Error("prompt '" + x.id + "' has no '" + gold_key_ + "' answer");
  std::string gold = normalize_answer(it->second);
  return extract_answer(extractor_, y.text()) == gold ? 1.0 : 0.0;
}

}  // namespace qalign
