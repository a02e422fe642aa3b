#pragma once

#include <cstddef>

#include "qalign/enumerable_space.hpp"

namespace qalign {

/// Length-2 sequences over {A, B}, uniform tokens, r(A A) = 1 and 0 otherwise.
EnumerableSpace four_sequence_space();

/// Sequences of length 1..4 over {A, B} (30 in total) with prefix-dependent token and stop
/// probabilities and an irregular reward table.
EnumerableSpace thirty_sequence_space();

/// Fixed length N over {A, B}, uniform tokens, r = scale * count(A).
EnumerableSpace fixed_length_space(std::size_t length, double scale);

/// Reward scale of fixed_length_space(6, .) at which the exact stationary acceptance rate at
/// beta = 1 equals `target_rate` (found by bisection on the exact kernel).
double calibrate_tuning_scale(double target_rate = 0.5, double beta = 1.0);

}  // namespace qalign
