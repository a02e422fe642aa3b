#include <doctest.h>

#include <cmath>
#include <random>

#include "qalign/mixture.hpp"
#include "qalign/random.hpp"

using namespace qalign;

namespace {

std::vector<double> planted(std::uint64_t seed, double w1, double mu1, double s1, double mu2, double s2, int n) {
  Rng rng(seed);
  std::normal_distribution<double> z;
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(uniform01(rng) < w1 ? mu1 + s1 * z(rng) : mu2 + s2 * z(rng));
  return out;
}

}  // namespace

TEST_SUITE("mixture") {
  TEST_CASE("recovers well-separated planted components") {
    auto data = planted(1, 0.3, -2.0, 0.5, 3.0, 1.0, 20000);
    MixtureFit f = fit_reward_mixture(data);
    CHECK(f.mu1 < f.mu2);
    CHECK(f.w1 == doctest::Approx(0.3).epsilon(0.03));
    CHECK(f.mu1 == doctest::Approx(-2.0).epsilon(0.03));
    CHECK(f.mu2 == doctest::Approx(3.0).epsilon(0.03));
    CHECK(f.sigma1 == doctest::Approx(0.5).epsilon(0.05));
    CHECK(f.sigma2 == doctest::Approx(1.0).epsilon(0.05));
    CHECK(f.dominant_index == 2);
    CHECK_NOTHROW(f.validate());
  }

  TEST_CASE("likelihood is consistent and never below a single Gaussian") {
    auto data = planted(2, 0.6, 0.0, 1.0, 1.0, 0.3, 5000);
    MixtureFit f = fit_reward_mixture(data);
    CHECK(f.log_likelihood == doctest::Approx(mixture_log_likelihood(f, data)).epsilon(1e-9));
    CHECK(f.log_likelihood >= gaussian_log_likelihood(data) - 1e-6);
    // Direct evaluation as an oracle.
    double ll = 0.0;
    const double c = 1.0 / std::sqrt(2.0 * M_PI);
    for (double x : data) {
      ll += std::log(f.w1 * c / f.sigma1 * std::exp(-0.5 * std::pow((x - f.mu1) / f.sigma1, 2)) +
                     f.w2 * c / f.sigma2 * std::exp(-0.5 * std::pow((x - f.mu2) / f.sigma2, 2)));
    }
    CHECK(mixture_log_likelihood(f, data) == doctest::Approx(ll).epsilon(1e-10));
  }

  TEST_CASE("deterministic for a fixed seed") {
    auto data = planted(3, 0.5, 0.0, 1.0, 2.0, 1.0, 2000);
    MixtureFit a = fit_reward_mixture(data);
    MixtureFit b = fit_reward_mixture(data);
    CHECK(a.mu1 == b.mu1);
    CHECK(a.log_likelihood == b.log_likelihood);
  }

  TEST_CASE("degenerate input is rejected") {
    std::vector<double> few(10, 1.0);
    CHECK_THROWS_AS(fit_reward_mixture(few), Error);
    std::vector<double> constant(100, 1.0);
    CHECK_THROWS_AS(fit_reward_mixture(constant), Error);
    std::vector<double> bad(100, 0.0);
    bad[5] = std::nan("");
    CHECK_THROWS_AS(fit_reward_mixture(bad), Error);
  }

  TEST_CASE("two-valued data is handled by the variance floor") {
    std::vector<double> data;
    for (int i = 0; i < 100; ++i) data.push_back(i % 4 == 0 ? 1.0 : 0.0);
    MixtureFit f = fit_reward_mixture(data);
    CHECK(std::isfinite(f.log_likelihood));
    CHECK(f.w1 == doctest::Approx(0.75).epsilon(1e-6));
  }
}
