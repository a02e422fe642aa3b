#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "qalign/enumerable_space.hpp"
#include "qalign/sampler.hpp"
#include "qalign/target.hpp"

namespace qalign {

/// alpha(r_proposal, r_current, beta, |proposal|, |current|). The default is
/// acceptance_probability(); tests substitute deliberately broken rules.
using AcceptanceRule = std::function<double(double, double, double, std::size_t, std::size_t)>;

AcceptanceRule default_acceptance_rule();

/// Full transition matrix of the suffix-resampling chain on an enumerable space:
/// K(y -> y') = sum_i (1/|y|) q_i(y'|y) alpha_i(y, y') plus the rejected mass on the diagonal.
struct TransitionKernel {
  std::vector<Sequence> support;
  std::vector<double> target;       // exact pi_beta over `support`
  std::vector<double> matrix;       // row-major, size n * n
  std::vector<double> accept_mass;  // per state: probability the next proposal is accepted

  std::size_t size() const noexcept { return support.size(); }
  double at(std::size_t from, std::size_t to) const { return matrix[from * support.size() + to]; }
};

TransitionKernel build_transition_kernel(const EnumerableSpace& space, double beta,
                                         const AcceptanceRule& rule = default_acceptance_rule(),
                                         double temperature = 1.0);

struct KernelCheck {
  double stationarity_l1 = 0.0;     // ||pi K - pi||_1
  double detailed_balance = 0.0;    // max |pi(y) K(y,y') - pi(y') K(y',y)|
  double row_sum_error = 0.0;       // max |sum_y' K(y,y') - 1|
  double min_off_diagonal = 0.0;    // irreducibility witness
  double min_diagonal = 0.0;        // aperiodicity witness
};

KernelCheck check_kernel(const TransitionKernel& kernel);

/// Stationary acceptance rate: sum_y pi(y) * accept_mass(y).
double exact_acceptance_rate(const TransitionKernel& kernel);

struct TvPoint {
  std::int64_t step = 0;
  double tv = 0.0;
};

struct DiagnosticsReport {
  double acceptance_rate = 0.0;
  std::vector<double> reward_trace;   // r(y^t), t = 0..T
  std::size_t burn_in = 0;            // states discarded before the TV curve
  std::vector<TvPoint> tv_curve;      // empty without an exact target
  std::optional<double> final_tv;
};

/// Acceptance rate and reward trace of a chain; with an exact target also the TV distance of the
/// post-burn-in empirical distribution, evaluated at `tv_points` evenly spaced steps.
DiagnosticsReport diagnostics(const ChainResult& chain, const ExactDistribution* exact = nullptr,
                              double burn_in_fraction = 0.1, std::size_t tv_points = 50);

}  // namespace qalign
