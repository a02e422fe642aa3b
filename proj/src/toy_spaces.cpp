#include "qalign/toy_spaces.hpp"

#include <algorithm>

#include "qalign/diagnostics.hpp"

namespace qalign {

EnumerableSpace four_sequence_space() {
  EnumerableSpace s({"A", "B"}, 2, 2);
  s.set_reward("A A", 1.0);
  s.set_default_reward(0.0);
  return s;
}

EnumerableSpace thirty_sequence_space() {
  EnumerableSpace s({"A", "B"}, 1, 4);
  s.set_next_token("", {0.6, 0.4});
  s.set_next_token("A", {0.3, 0.7});
  s.set_next_token("B A", {0.8, 0.2});
  s.set_next_token("*", {0.5, 0.5});
  s.set_stop("A", 0.2);
  s.set_stop("B", 0.5);
  s.set_stop("A B", 0.45);
  s.set_stop("*", 0.35);
  // Irregular but reproducible: 0.8 per A, -0.3 per token, +0.5 when ending in B.
  for (const auto& seq : s.enumerate()) {
    auto t = seq.tokens();
    double a = static_cast<double>(std::count(t.begin(), t.end(), std::string("A")));
    double r = 0.8 * a - 0.3 * static_cast<double>(t.size()) + (t.back() == "B" ? 0.5 : 0.0);
    s.set_reward(seq.text(), r);
  }
  return s;
}

EnumerableSpace fixed_length_space(std::size_t length, double scale) {
  EnumerableSpace s({"A", "B"}, length, length);
  s.set_reward_expression(RewardExpression{RewardExpression::Kind::count, "A", scale, 0.0});
  return s;
}

double calibrate_tuning_scale(double target_rate, double beta) {
  auto rate = [&](double scale) {
    return exact_acceptance_rate(build_transition_kernel(fixed_length_space(6, scale), beta));
  };
  double lo = 0.0, hi = 1.0;
  while (rate(hi) > target_rate) {
    hi *= 2.0;
    if (hi > 1e3) throw Error("cannot reach the target acceptance rate");
  }
  for (int i = 0; i < 60; ++i) {
    double mid = 0.5 * (lo + hi);
    (rate(mid) > target_rate ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace qalign
