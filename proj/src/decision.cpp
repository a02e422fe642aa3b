#include "qalign/decision.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <regex>
#include <unordered_map>

#include "qalign/numeric.hpp"

namespace qalign {

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::optional<std::string> canonical_number(const std::string& s) {
  static const std::regex number(R"(^[+-]?(\d[\d,]*)?(\.\d+)?$)");
  if (s.empty() || !std::regex_match(s, number) || s.find_first_of("0123456789") == std::string::npos) {
    return std::nullopt;
  }
  std::string out;
  bool negative = false;
  for (char c : s) {
    if (c == '-') {
      negative = true;
    } else if (c != ',' && c != '+') {
      out.push_back(c);
    }
  }
  if (auto dot = out.find('.'); dot != std::string::npos) {
    while (!out.empty() && out.back() == '0') out.pop_back();
    if (!out.empty() && out.back() == '.') out.pop_back();
  }
  std::size_t lead = 0;
  while (lead + 1 < out.size() && out[lead] == '0' && out[lead + 1] != '.') ++lead;
  out.erase(0, lead);
  if (out.empty() || out[0] == '.') out.insert(out.begin(), '0');
  if (negative && out != "0") out.insert(out.begin(), '-');
  return out;
}

std::string extract_boxed(std::string_view text) {
  static constexpr std::string_view kTag = "\\boxed{";
  std::size_t pos = text.rfind(kTag);
  if (pos == std::string_view::npos) return std::string(kNoAnswer);
  std::size_t i = pos + kTag.size();
  int depth = 1;
  std::string inner;
  for (; i < text.size(); ++i) {
    char c = text[i];
    if (c == '{') ++depth;
    if (c == '}' && --depth == 0) break;
    inner.push_back(c);
  }
  if (depth != 0) return std::string(kNoAnswer);
  std::string out = normalize_answer(inner);
  return out.empty() ? std::string(kNoAnswer) : out;
}

std::string extract_last_number(std::string_view text) {
  static const std::regex number(R"(-?\d[\d,]*(\.\d+)?)");
  std::string s(text);
  std::string last;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), number); it != std::sregex_iterator(); ++it) {
    last = it->str();
  }
  if (last.empty()) return std::string(kNoAnswer);
  while (!last.empty() && last.back() == ',') last.pop_back();
  return canonical_number(last).value_or(std::string(kNoAnswer));
}

std::string extract_choice(std::string_view text) {
  for (std::size_t k = text.size(); k-- > 0;) {
    char c = text[k];
    bool before_ok = k == 0 || !is_alnum(text[k - 1]);
    bool after_ok = k + 1 == text.size() || !is_alnum(text[k + 1]);
    if (!before_ok || !after_ok) continue;
    if (c >= 'A' && c <= 'D') return std::string(1, c);
    if (c >= 'a' && c <= 'd' && k + 1 < text.size() && text[k + 1] == ')') {
      return std::string(1, static_cast<char>(c - 'a' + 'A'));
    }
  }
  return std::string(kNoAnswer);
}

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

std::vector<std::string> rouge_tokens(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (char c : text) {
    auto u = static_cast<unsigned char>(c);
    if (std::ispunct(u)) continue;
    cleaned.push_back(static_cast<char>(std::tolower(u)));
  }
  return split_units(cleaned, UnitKind::word);
}

using Bag = std::map<std::string, int>;

Bag bag_of(std::string_view text) {
  Bag bag;
  for (auto& t : rouge_tokens(text)) ++bag[t];
  return bag;
}

int bag_size(const Bag& b) {
  int n = 0;
  for (const auto& [_, c] : b) n += c;
  return n;
}

double rouge_from_bags(const Bag& a, int na, const Bag& b, int nb) {
  if (na == 0 && nb == 0) return 1.0;
  if (na == 0 || nb == 0) return 0.0;
  int overlap = 0;
  const Bag& small = a.size() <= b.size() ? a : b;
  const Bag& large = a.size() <= b.size() ? b : a;
  for (const auto& [tok, c] : small) {
    auto it = large.find(tok);
    if (it != large.end()) overlap += std::min(c, it->second);
  }
  if (overlap == 0) return 0.0;
  double p = static_cast<double>(overlap) / nb;
  double r = static_cast<double>(overlap) / na;
  return 2.0 * p * r / (p + r);
}

}  // namespace

std::string_view to_string(AnswerExtractor kind) {
  switch (kind) {
    case AnswerExtractor::boxed_latex:
      return "boxed_latex";
    case AnswerExtractor::last_number:
      return "last_number";
    case AnswerExtractor::choice_letter:
      return "choice_letter";
    case AnswerExtractor::identity:
      return "identity";
  }
  return "identity";
}

AnswerExtractor parse_answer_extractor(std::string_view name) {
  if (name == "boxed_latex") return AnswerExtractor::boxed_latex;
  if (name == "last_number") return AnswerExtractor::last_number;
  if (name == "choice_letter") return AnswerExtractor::choice_letter;
  if (name == "identity") return AnswerExtractor::identity;
  throw Error("unknown answer extractor '" + std::string(name) + "'");
}

std::string normalize_answer(std::string_view raw) {
  std::string s = trim(raw);
  while (!s.empty() && s.back() == '.') s.pop_back();
  while (s.size() >= 2 && s.front() == '$' && s.back() == '$') {
    s = trim(std::string_view(s).substr(1, s.size() - 2));
    while (!s.empty() && s.back() == '.') s.pop_back();
  }
  if (auto n = canonical_number(s)) return *n;
  return collapse_whitespace(s);
}

std::string extract_answer(AnswerExtractor kind, std::string_view text) {
  switch (kind) {
    case AnswerExtractor::boxed_latex:
      return extract_boxed(text);
    case AnswerExtractor::last_number:
      return extract_last_number(text);
    case AnswerExtractor::choice_letter:
      return extract_choice(text);
    case AnswerExtractor::identity: {
      std::string s = collapse_whitespace(text);
      return s.empty() ? std::string(kNoAnswer) : s;
    }
  }
  return std::string(kNoAnswer);
}

double rouge1_f1(std::string_view a, std::string_view b) {
  Bag ba = bag_of(a);
  Bag bb = bag_of(b);
  return rouge_from_bags(ba, bag_size(ba), bb, bag_size(bb));
}

double rouge1_f1(const Sequence& a, const Sequence& b) { return rouge1_f1(a.text(), b.text()); }

std::string_view to_string(UtilityKind kind) {
  return kind == UtilityKind::exact_match ? "exact_match" : "rouge1_f1";
}

UtilityKind parse_utility(std::string_view name) {
  if (name == "exact_match") return UtilityKind::exact_match;
  if (name == "rouge1_f1" || name == "rouge1") return UtilityKind::rouge1_f1;
  throw Error("unknown utility '" + std::string(name) + "'");
}

double Utility::operator()(const Sequence& a, const Sequence& b) const {
  if (kind_ == UtilityKind::rouge1_f1) return rouge1_f1(a, b);
  return extract_answer(extractor_, a.text()) == extract_answer(extractor_, b.text()) ? 1.0 : 0.0;
}

ISWeights::ISWeights(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw Error("importance weights need at least one sample");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0 && w <= 1.0)) throw Error("importance weight outside [0, 1]");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12 * static_cast<double>(weights_.size())) {
    throw Error("importance weights do not sum to 1");
  }
}

double ISWeights::entropy() const {
  double h = 0.0;
  for (double w : weights_) {
    if (w > 0.0) h -= w * std::log(w);
  }
  return h;
}

ISWeights is_weights(std::span<const double> rewards, double beta) {
  BetaParam b(beta);
  std::vector<double> scaled;
  scaled.reserve(rewards.size());
  for (double r : rewards) {
    if (!std::isfinite(r)) throw Error("non-finite reward passed to is_weights");
    scaled.push_back(r / b.value());
  }
  // Shift by the max rather than the log-sum-exp: at large |r / beta| the latter carries an
  // absolute rounding error that would show up in the normalization.
  const double m = *std::max_element(scaled.begin(), scaled.end());
  std::vector<double> w;
  w.reserve(scaled.size());
  double total = 0.0;
  for (double s : scaled) total += w.emplace_back(std::exp(s - m));
  for (double& x : w) x /= total;
  return ISWeights(std::move(w));
}

MbrResult mbr_select(std::span<const Sequence> samples, const std::optional<ISWeights>& weights,
                     const Utility& utility) {
  if (samples.empty()) throw Error("mbr_select needs at least one sample");
  if (weights && weights->size() != samples.size()) throw Error("weight count does not match sample count");
  const std::size_t n = samples.size();
  auto w = [&](std::size_t t) { return weights ? weights->values()[t] : 1.0 / static_cast<double>(n); };

  std::vector<double> expected(n, 0.0);
  if (utility.kind() == UtilityKind::exact_match) {
    std::vector<std::string> answers;
    answers.reserve(n);
    for (const auto& s : samples) answers.push_back(extract_answer(utility.extractor(), s.text()));
    std::unordered_map<std::string, double> mass;
    if (weights) {
      for (std::size_t t = 0; t < n; ++t) mass[answers[t]] += w(t);
    } else {
      for (std::size_t t = 0; t < n; ++t) mass[answers[t]] += 1.0;
      for (auto& [_, m] : mass) m /= static_cast<double>(n);
    }
    for (std::size_t i = 0; i < n; ++i) expected[i] = mass[answers[i]];
  } else {
    std::vector<Bag> bags;
    std::vector<int> sizes;
    bags.reserve(n);
    for (const auto& s : samples) {
      bags.push_back(bag_of(s.text()));
      sizes.push_back(bag_size(bags.back()));
    }
    for (std::size_t i = 0; i < n; ++i) {
      expected[i] += w(i);  // u(y, y) = 1
      for (std::size_t j = i + 1; j < n; ++j) {
        double u = rouge_from_bags(bags[i], sizes[i], bags[j], sizes[j]);
        expected[i] += w(j) * u;
        expected[j] += w(i) * u;
      }
    }
  }
  MbrResult best{0, expected[0]};
  for (std::size_t i = 1; i < n; ++i) {
    if (expected[i] > best.expected_utility) best = {i, expected[i]};
  }
  return best;
}

std::size_t argmax_reward(std::span<const double> rewards) {
  if (rewards.empty()) throw Error("argmax over an empty reward list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < rewards.size(); ++i) {
    if (rewards[i] > rewards[best]) best = i;
  }
  return best;
}

nlohmann::ordered_json DecisionReport::to_json() const {
  nlohmann::ordered_json j;
  j["method"] = method;
  j["n_samples"] = n_samples;
  j["selected_text"] = selected_text;
  j["selected_answer"] = selected_answer;
  j["expected_utility"] = expected_utility;
  j["weights_entropy"] = weights_entropy;
  return j;
}

}  // namespace qalign
