#include "qalign/core.hpp"

#include <cctype>
#include <cmath>

namespace qalign {

std::string_view to_string(UnitKind unit) {
  switch (unit) {
    case UnitKind::backend_token:
      return "backend_token";
    case UnitKind::word:
      return "word";
    case UnitKind::character:
      return "character";
  }
  return "word";
}

UnitKind parse_unit_kind(std::string_view name) {
  if (name == "backend_token" || name == "backend-token") return UnitKind::backend_token;
  if (name == "word") return UnitKind::word;
  if (name == "character") return UnitKind::character;
  throw Error("unknown unit kind '" + std::string(name) + "'");
}

void Prompt::validate() const {
  if (id.empty()) throw Error("prompt id must be non-empty");
  if (text.empty()) throw Error("prompt '" + id + "' has empty text");
}

namespace {

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

bool has_space(std::string_view s) {
  for (unsigned char c : s) {
    if (std::isspace(c)) return true;
  }
  return false;
}

void check_unit(const std::string& token, UnitKind unit) {
  if (token.empty()) throw Error("empty token unit");
  if (unit == UnitKind::character) {
    if (utf8_length(static_cast<unsigned char>(token[0])) != token.size()) {
      throw Error("character unit '" + token + "' is not a single code point");
    }
  } else if (has_space(token)) {
    throw Error("token unit '" + token + "' contains whitespace");
  }
}

}  // namespace

std::string render(std::span<const std::string> tokens, UnitKind unit) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0 && unit != UnitKind::character) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::string render(const Sequence& seq) { return seq.text(); }

std::vector<std::string> split_units(std::string_view text, UnitKind unit) {
  std::vector<std::string> out;
  if (unit == UnitKind::character) {
    std::size_t i = 0;
    while (i < text.size()) {
      std::size_t n = std::min(utf8_length(static_cast<unsigned char>(text[i])), text.size() - i);
      out.emplace_back(text.substr(i, n));
      i += n;
    }
    return out;
  }
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

Sequence::Sequence(std::vector<std::string> tokens, UnitKind unit)
    : tokens_(std::move(tokens)), unit_(unit) {
  if (tokens_.empty()) throw Error("a sequence needs at least one token unit");
  for (const auto& t : tokens_) check_unit(t, unit_);
  text_ = qalign::render(tokens_, unit_);
}

Sequence Sequence::parse(std::string_view text, UnitKind unit) {
  return Sequence(split_units(text, unit), unit);
}

std::span<const std::string> Sequence::prefix(std::size_t count) const {
  if (count > tokens_.size()) throw Error("prefix longer than sequence");
  return std::span<const std::string>(tokens_).first(count);
}

void ChainRecord::validate() const {
  if (step < 0) throw Error("chain step must be non-negative");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("alpha outside [0, 1]");
  if (tokens_generated < 0) throw Error("negative tokens_generated");
  if (step == 0) {
    if (proposal || !accepted) throw Error("step 0 must carry no proposal and be accepted");
    return;
  }
  if (!proposal) throw Error("step " + std::to_string(step) + " has no proposal");
  if (accepted && !(proposal->seq == state.seq)) {
    throw Error("accepted step " + std::to_string(step) + " does not hold its proposal");
  }
}

BetaParam::BetaParam(double beta) : beta_(beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw Error("beta must be positive and finite, got " + std::to_string(beta));
  }
}

int dominant_component(double mu1, double sigma1, double mu2, double sigma2) {
  double v1 = sigma1 * sigma1;
  double v2 = sigma2 * sigma2;
  if (v1 != v2) return v1 > v2 ? 1 : 2;
  return mu2 > mu1 ? 2 : 1;
}

void MixtureFit::validate() const {
  if (!(w1 > 0.0 && w1 < 1.0 && w2 > 0.0 && w2 < 1.0)) throw Error("mixture weights outside (0, 1)");
  if (std::abs(w1 + w2 - 1.0) > 1e-9) throw Error("mixture weights do not sum to 1");
  if (!(sigma1 > 0.0 && sigma2 > 0.0)) throw Error("mixture sigmas must be positive");
  if (dominant_index != dominant_component(mu1, sigma1, mu2, sigma2)) {
    throw Error("dominant_index does not match the largest-variance rule");
  }
}

void BudgetCurve::add_point(BudgetPoint point) {
  if (!points_.empty() && !(point.flops > points_.back().flops)) {
    throw Error("budget curve flops must be strictly increasing");
  }
  if (!(point.metric >= 0.0 && point.metric <= 1.0)) throw Error("budget metric outside [0, 1]");
  points_.push_back(point);
}

}  // namespace qalign
