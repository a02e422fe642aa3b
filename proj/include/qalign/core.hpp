#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qalign {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unit in which a backend measures |y|. Fixed for the lifetime of a run.
enum class UnitKind { backend_token, word, character };

std::string_view to_string(UnitKind unit);
UnitKind parse_unit_kind(std::string_view name);

struct Prompt {
  std::string id;
  std::string text;
  std::optional<std::string> template_id;
  std::map<std::string, std::string> metadata;

  /// Throws when text or id is empty.
  void validate() const;
};

/// Tokenized response. Immutable once built; `text()` is the rendering of `tokens()`.
class Sequence {
 public:
  Sequence(std::vector<std::string> tokens, UnitKind unit);

  /// Inverse of render() for the given unit kind.
  static Sequence parse(std::string_view text, UnitKind unit);

  std::span<const std::string> tokens() const noexcept { return tokens_; }
  std::span<const std::string> prefix(std::size_t count) const;
  std::size_t length() const noexcept { return tokens_.size(); }
  const std::string& text() const noexcept { return text_; }
  UnitKind unit() const noexcept { return unit_; }

  friend bool operator==(const Sequence& a, const Sequence& b) {
    return a.unit_ == b.unit_ && a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  UnitKind unit_;
  std::string text_;
};

/// Word and backend-token units are joined by a single space; characters are concatenated.
std::string render(std::span<const std::string> tokens, UnitKind unit);
std::string render(const Sequence& seq);

/// Splits text into units: whitespace-separated for word/backend_token, UTF-8 code points
/// for character.
std::vector<std::string> split_units(std::string_view text, UnitKind unit);

struct ScoredSequence {
  Sequence seq;
  double reward = 0.0;
  std::optional<double> logprob_base;
};

struct ChainRecord {
  std::int64_t step = 0;
  ScoredSequence state;
  std::optional<ScoredSequence> proposal;
  std::optional<std::size_t> cut_index;
  double alpha = 1.0;
  bool accepted = true;
  std::int64_t tokens_generated = 0;

  void validate() const;
};

/// Inverse temperature of the reward tilt. Strictly positive and finite.
class BetaParam {
 public:
  explicit BetaParam(double beta);
  double value() const noexcept { return beta_; }

 private:
  double beta_;
};

struct MixtureFit {
  double w1 = 0.5, w2 = 0.5;
  double mu1 = 0.0, mu2 = 0.0;
  double sigma1 = 1.0, sigma2 = 1.0;
  int dominant_index = 1;  // 1 or 2
  double log_likelihood = 0.0;
  int iterations = 0;

  double dominant_weight() const { return dominant_index == 1 ? w1 : w2; }
  double dominant_mean() const { return dominant_index == 1 ? mu1 : mu2; }
  double dominant_sigma() const { return dominant_index == 1 ? sigma1 : sigma2; }

  void validate() const;
};

/// Index (1-based) of the component with the largest variance; ties go to the larger mean.
int dominant_component(double mu1, double sigma1, double mu2, double sigma2);

struct BudgetPoint {
  double flops = 0.0;
  std::int64_t tokens = 0;
  double metric = 0.0;
};

class BudgetCurve {
 public:
  explicit BudgetCurve(std::string method_label) : method_label_(std::move(method_label)) {}

  /// Throws unless flops exceed the previous point and metric is in [0, 1].
  void add_point(BudgetPoint point);

  const std::vector<BudgetPoint>& points() const noexcept { return points_; }
  const std::string& method_label() const noexcept { return method_label_; }

 private:
  std::string method_label_;
  std::vector<BudgetPoint> points_;
};

}  // namespace qalign
