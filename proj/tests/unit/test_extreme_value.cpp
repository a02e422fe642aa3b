#include <doctest.h>

#include <cmath>
#include <random>

#include "qalign/extreme_value.hpp"
#include "qalign/random.hpp"

using namespace qalign;

namespace {

// Independent statement of the normalizing constants.
double oracle_factor(double m) {
  const double l = std::sqrt(2.0 * std::log(m));
  return l - (std::log(std::log(m)) + std::log(4.0 * M_PI)) / (2.0 * l);
}

MixtureFit fit(double w1, double mu1, double s1, double mu2, double s2) {
  MixtureFit f;
  f.w1 = w1;
  f.w2 = 1.0 - w1;
  f.mu1 = mu1;
  f.mu2 = mu2;
  f.sigma1 = s1;
  f.sigma2 = s2;
  f.dominant_index = dominant_component(mu1, s1, mu2, s2);
  return f;
}

}  // namespace

TEST_SUITE("extreme_value") {
  TEST_CASE("standard normal, n = 100") {
    GumbelApprox g = gumbel_approx(0.0, 1.0, 100.0);
    CHECK(g.a_n == doctest::Approx(2.3663).epsilon(1e-4));
    CHECK(g.b_n == doctest::Approx(0.3295).epsilon(1e-3));
    CHECK(beta_star(1.0, 100.0) == doctest::Approx(0.42260).epsilon(1e-4));
    CHECK(g.a_n == doctest::Approx(oracle_factor(100.0)).epsilon(1e-14));
    CHECK(g.b_n == doctest::Approx(1.0 / std::sqrt(2.0 * std::log(100.0))).epsilon(1e-14));
  }

  TEST_CASE("mixture version uses n_d = w_d n and the dominant component") {
    MixtureFit f = fit(0.25, 5.0, 2.0, 0.0, 0.5);
    REQUIRE(f.dominant_index == 1);
    GumbelApprox g = gumbel_approx(f, 400.0);
    CHECK(g.n_d == doctest::Approx(100.0));
    CHECK(g.a_n == doctest::Approx(5.0 + 2.0 * oracle_factor(100.0)).epsilon(1e-14));
    CHECK(beta_star(f, 400.0) == doctest::Approx(2.0 / oracle_factor(100.0)).epsilon(1e-14));
  }

  TEST_CASE("small effective counts are rejected with the minimum n") {
    MixtureFit f = fit(0.1, 0.0, 1.0, 1.0, 0.2);
    CHECK(minimum_gumbel_n(f) == 28);  // 0.1 n > e
    CHECK_THROWS_AS(gumbel_approx(f, 20.0), Error);
    CHECK_THROWS_AS(beta_star(f, 20.0), Error);
    CHECK_NOTHROW(beta_star(f, 28.0));
    try {
      beta_star(f, 20.0);
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("28") != std::string::npos);
    }
  }

  TEST_CASE("best-of-n density: two-point example and enumeration") {
    DiscretePmf p{{0.0, 1.0}, {0.5, 0.5}};
    DiscretePmf m = bon_max_density(p, 2);
    CHECK(m.probs[0] == doctest::Approx(0.25));
    CHECK(m.probs[1] == doctest::Approx(0.75));
    DiscretePmf q{{-1.0, 0.0, 2.0}, {0.2, 0.5, 0.3}};
    DiscretePmf m3 = bon_max_density(q, 3);
    // P(max <= v) = F(v)^3
    CHECK(m3.probs[0] == doctest::Approx(0.008));
    CHECK(m3.probs[1] == doctest::Approx(0.343 - 0.008));
    CHECK(m3.probs[2] == doctest::Approx(1.0 - 0.343));
    CHECK_THROWS_AS(bon_max_density(DiscretePmf{{1.0, 0.0}, {0.5, 0.5}}, 2), Error);
  }

  TEST_CASE("aligned mixture by direct integration") {
    MixtureFit f = fit(0.4, 0.0, 1.0, 2.0, 0.5);
    const double beta = 0.8;
    AlignedRewardMixture a = aligned_reward_mixture(f, beta);
    // Oracle: numerically integrate w_i N(r; mu_i, s_i) exp(r / beta) over r.
    auto mass = [&](double w, double mu, double s) {
      double total = 0.0;
      const double h = 1e-3;
      for (double r = mu - 12 * s; r <= mu + 12 * s; r += h) {
        total += w * std::exp(-0.5 * std::pow((r - mu) / s, 2)) / (s * std::sqrt(2 * M_PI)) * std::exp(r / beta) * h;
      }
      return total;
    };
    double m1 = mass(0.4, 0.0, 1.0), m2 = mass(0.6, 2.0, 0.5);
    CHECK(a.w_pi_1 == doctest::Approx(m1 / (m1 + m2)).epsilon(1e-6));
    CHECK(a.mu_pi_1 == doctest::Approx(1.0 / beta));
    CHECK(a.mu_pi_2 == doctest::Approx(2.0 + 0.25 / beta));
    CHECK(a.dominant_mode() == a.mu_pi_1);
  }

  TEST_CASE("mode matching identity") {
    MixtureFit f = fit(0.7, 0.0, 1.3, 4.0, 0.6);
    for (double n : {50.0, 500.0, 5000.0}) {
      double b = beta_star(f, n);
      GumbelApprox g = gumbel_approx(f, n);
      CHECK(f.dominant_sigma() * f.dominant_sigma() / b == doctest::Approx(g.a_n - f.dominant_mean()).epsilon(1e-12));
      CHECK(aligned_reward_mixture(f, b).dominant_mode() == doctest::Approx(g.a_n).epsilon(1e-12));
    }
  }

  TEST_CASE("KS statistic") {
    std::vector<double> one{0.0};
    CHECK(ks_statistic(one, [](double) { return 0.5; }) == doctest::Approx(0.5));
    Rng rng(1);
    std::vector<double> u;
    for (int i = 0; i < 20000; ++i) u.push_back(uniform01(rng));
    CHECK(ks_statistic(u, [](double x) { return x; }) < 0.015);
    CHECK(gumbel_cdf(0.0) == doctest::Approx(std::exp(-1.0)));
  }
}
