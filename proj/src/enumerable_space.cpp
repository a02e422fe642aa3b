#include "qalign/enumerable_space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace qalign {

namespace {

constexpr double kNormTolerance = 1e-9;

std::vector<double> temper(const std::vector<double>& probs, double temperature) {
  if (temperature == 1.0) return probs;
  std::vector<double> out(probs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    out[i] = probs[i] > 0.0 ? std::pow(probs[i], 1.0 / temperature) : 0.0;
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

std::string key_of(std::span<const std::string> prefix) { return render(prefix, UnitKind::backend_token); }

RewardExpression::Kind parse_kind(const std::string& s) {
  if (s == "constant") return RewardExpression::Kind::constant;
  if (s == "count") return RewardExpression::Kind::count;
  if (s == "length") return RewardExpression::Kind::length;
  throw Error("unknown reward expression kind '" + s + "'");
}

std::string kind_name(RewardExpression::Kind k) {
  switch (k) {
    case RewardExpression::Kind::constant:
      return "constant";
    case RewardExpression::Kind::count:
      return "count";
    case RewardExpression::Kind::length:
      return "length";
  }
  return "constant";
}

}  // namespace

double RewardExpression::evaluate(std::span<const std::string> tokens) const {
  double base = 0.0;
  switch (kind) {
    case Kind::constant:
      base = 0.0;
      break;
    case Kind::count:
      base = static_cast<double>(std::count(tokens.begin(), tokens.end(), token));
      break;
    case Kind::length:
      base = static_cast<double>(tokens.size());
      break;
  }
  return scale * base + offset;
}

EnumerableSpace::EnumerableSpace(std::vector<std::string> vocabulary, std::size_t min_length,
                                 std::size_t max_length)
    : vocabulary_(std::move(vocabulary)), min_length_(min_length), max_length_(max_length) {
  if (vocabulary_.empty()) throw Error("enumerable space needs a non-empty vocabulary");
  if (min_length_ < 1 || max_length_ < min_length_) throw Error("invalid length bounds");
  for (const auto& t : vocabulary_) {
    if (t.empty() || split_units(t, UnitKind::word).size() != 1) throw Error("invalid vocabulary token '" + t + "'");
  }
  std::vector<std::string> sorted = vocabulary_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw Error("duplicate vocabulary token");
  next_token_["*"] = std::vector<double>(vocabulary_.size(), 1.0 / static_cast<double>(vocabulary_.size()));
  stop_["*"] = 0.0;
}

EnumerableSpace EnumerableSpace::from_json(const nlohmann::json& j) {
  try {
    return from_json_unchecked(j);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed enumerable space: ") + e.what());
  }
}

EnumerableSpace EnumerableSpace::from_json_unchecked(const nlohmann::json& j) {
  EnumerableSpace space(j.at("vocabulary").get<std::vector<std::string>>(), j.at("min_length").get<std::size_t>(),
                        j.at("max_length").get<std::size_t>());
  if (j.contains("next_token")) {
    for (const auto& [key, probs] : j.at("next_token").items()) {
      space.set_next_token(key, probs.get<std::vector<double>>());
    }
  }
  if (j.contains("stop")) {
    for (const auto& [key, s] : j.at("stop").items()) space.set_stop(key, s.get<double>());
  }
  if (j.contains("rewards")) {
    for (const auto& [key, r] : j.at("rewards").items()) {
      if (key == "*") {
        space.set_default_reward(r.get<double>());
      } else {
        space.set_reward(key, r.get<double>());
      }
    }
  }
  if (j.contains("reward_expression")) {
    const auto& e = j.at("reward_expression");
    RewardExpression expr;
    expr.kind = parse_kind(e.at("kind").get<std::string>());
    expr.token = e.value("token", std::string());
    expr.scale = e.value("scale", 1.0);
    expr.offset = e.value("offset", 0.0);
    space.set_reward_expression(expr);
  }
  return space;
}

EnumerableSpace EnumerableSpace::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open space file " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed space file " + path.string() + ": " + e.what());
  }
}

nlohmann::json EnumerableSpace::to_json() const {
  nlohmann::json j;
  j["vocabulary"] = vocabulary_;
  j["min_length"] = min_length_;
  j["max_length"] = max_length_;
  j["next_token"] = next_token_;
  j["stop"] = stop_;
  nlohmann::json rewards = rewards_;
  if (default_reward_) rewards["*"] = *default_reward_;
  if (!rewards.empty()) j["rewards"] = rewards;
  if (reward_expression_) {
    j["reward_expression"] = {{"kind", kind_name(reward_expression_->kind)},
                              {"token", reward_expression_->token},
                              {"scale", reward_expression_->scale},
                              {"offset", reward_expression_->offset}};
  }
  return j;
}

void EnumerableSpace::set_next_token(const std::string& prefix_key, std::vector<double> probs) {
  if (probs.size() != vocabulary_.size()) throw Error("next-token row for '" + prefix_key + "' has wrong size");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw Error("negative next-token probability for '" + prefix_key + "'");
    total += p;
  }
  if (std::abs(total - 1.0) > kNormTolerance) throw Error("next-token row for '" + prefix_key + "' does not sum to 1");
  next_token_[prefix_key] = std::move(probs);
}

void EnumerableSpace::set_stop(const std::string& prefix_key, double stop_probability) {
  if (!(stop_probability >= 0.0 && stop_probability <= 1.0)) throw Error("stop probability outside [0, 1]");
  stop_[prefix_key] = stop_probability;
}

void EnumerableSpace::set_reward(const std::string& text, double reward) {
  if (!std::isfinite(reward)) throw Error("non-finite reward for '" + text + "'");
  rewards_[text] = reward;
}

void EnumerableSpace::set_default_reward(double reward) {
  if (!std::isfinite(reward)) throw Error("non-finite default reward");
  default_reward_ = reward;
}

void EnumerableSpace::set_reward_expression(RewardExpression expr) { reward_expression_ = std::move(expr); }

const std::vector<double>& EnumerableSpace::lookup_next(const std::string& key) const {
  auto it = next_token_.find(key);
  return it != next_token_.end() ? it->second : next_token_.at("*");
}

double EnumerableSpace::lookup_stop(const std::string& key) const {
  auto it = stop_.find(key);
  return it != stop_.end() ? it->second : stop_.at("*");
}

std::size_t EnumerableSpace::token_index(const std::string& token) const {
  auto it = std::find(vocabulary_.begin(), vocabulary_.end(), token);
  if (it == vocabulary_.end()) throw Error("token '" + token + "' is not in the vocabulary");
  return static_cast<std::size_t>(it - vocabulary_.begin());
}

std::vector<double> EnumerableSpace::next_token_probs(std::span<const std::string> prefix, double temperature) const {
  if (next_token_.size() == 1) return temper(next_token_.at("*"), temperature);
  return temper(lookup_next(key_of(prefix)), temperature);
}

double EnumerableSpace::stop_probability(std::span<const std::string> prefix, double temperature) const {
  if (prefix.size() < min_length_) return 0.0;
  if (prefix.size() >= max_length_) return 1.0;
  double s = stop_.size() == 1 ? stop_.at("*") : lookup_stop(key_of(prefix));
  if (temperature == 1.0 || s == 0.0 || s == 1.0) return s;
  double a = std::pow(s, 1.0 / temperature);
  double b = std::pow(1.0 - s, 1.0 / temperature);
  return a / (a + b);
}

double EnumerableSpace::log_continue_prob(std::span<const std::string> prefix, double temperature) const {
  if (prefix.size() >= max_length_) return -std::numeric_limits<double>::infinity();
  double lp = 0.0;
  for (std::size_t k = 0; k < prefix.size(); ++k) {
    auto probs = next_token_probs(prefix.first(k), temperature);
    lp += std::log(probs[token_index(prefix[k])]);
    lp += std::log1p(-stop_probability(prefix.first(k + 1), temperature));
  }
  return lp;
}

double EnumerableSpace::log_prob(std::span<const std::string> tokens, double temperature) const {
  if (tokens.size() < min_length_ || tokens.size() > max_length_) return -std::numeric_limits<double>::infinity();
  double lp = 0.0;
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    auto probs = next_token_probs(tokens.first(k), temperature);
    lp += std::log(probs[token_index(tokens[k])]);
    double s = stop_probability(tokens.first(k + 1), temperature);
    lp += (k + 1 == tokens.size()) ? std::log(s) : std::log1p(-s);
  }
  return lp;
}

double EnumerableSpace::log_suffix_prob(std::span<const std::string> tokens, std::size_t cut, double temperature) const {
  if (cut >= tokens.size()) throw Error("cut index must be below the sequence length");
  return log_prob(tokens, temperature) - log_continue_prob(tokens.first(cut), temperature);
}

double EnumerableSpace::reward(std::span<const std::string> tokens) const {
  if (!rewards_.empty()) {
    auto it = rewards_.find(key_of(tokens));
    if (it != rewards_.end()) return it->second;
  }
  if (reward_expression_) return reward_expression_->evaluate(tokens);
  if (default_reward_) return *default_reward_;
  throw Error("no reward defined for '" + key_of(tokens) + "'");
}

Sequence EnumerableSpace::sample(std::span<const std::string> prefix, std::size_t max_new, Rng& rng,
                                 double temperature, std::size_t& generated) const {
  std::vector<std::string> tokens(prefix.begin(), prefix.end());
  generated = 0;
  if (tokens.size() >= max_length_ || max_new == 0) {
    if (tokens.empty()) throw Error("cannot complete an empty prefix with max_new = 0");
    return Sequence(std::move(tokens), unit());
  }
  while (generated < max_new) {
    auto probs = next_token_probs(tokens, temperature);
    tokens.push_back(vocabulary_[sample_categorical(rng, probs)]);
    ++generated;
    double s = stop_probability(tokens, temperature);
    if (s >= 1.0 || (s > 0.0 && uniform01(rng) < s)) break;
  }
  return Sequence(std::move(tokens), unit());
}

std::size_t EnumerableSpace::support_size() const {
  std::size_t total = 0;
  std::size_t level = 1;
  for (std::size_t len = 1; len <= max_length_; ++len) {
    level *= vocabulary_.size();
    if (len >= min_length_) total += level;
  }
  return total;
}

std::vector<Sequence> EnumerableSpace::enumerate() const {
  if (vocabulary_.size() > kMaxEnumerableVocabulary || max_length_ > kMaxEnumerableLength) {
    throw Error("space exceeds the enumeration caps (vocabulary <= 4, max_length <= 6)");
  }
  std::vector<Sequence> out;
  std::vector<std::vector<std::string>> level{{}};
  for (std::size_t len = 1; len <= max_length_; ++len) {
    std::vector<std::vector<std::string>> next;
    next.reserve(level.size() * vocabulary_.size());
    for (const auto& p : level) {
      for (const auto& t : vocabulary_) {
        auto q = p;
        q.push_back(t);
        next.push_back(std::move(q));
      }
    }
    level = std::move(next);
    if (len >= min_length_) {
      for (const auto& toks : level) {
        if (std::isfinite(log_prob(toks))) out.emplace_back(toks, unit());
      }
    }
  }
  return out;
}

}  // namespace qalign
