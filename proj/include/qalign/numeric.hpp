#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace qalign {

/// log(sum_i exp(x_i)), shifted by the maximum so large arguments do not overflow.
inline double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - m);
  return m + std::log(sum);
}

}  // namespace qalign
