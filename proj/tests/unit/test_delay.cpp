#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "sdmm/delay.hpp"
#include "sdmm/quadrature.hpp"

using namespace sdmm;
using doctest::Approx;

TEST_CASE("waiting times for fixed delays") {
  const std::vector<double> ones{1, 1, 1};
  const auto a = waiting_times(ones, 2);
  CHECK(a.t_sc == 0.5);
  CHECK(a.t_ss == 1.0);
  CHECK(a.sc_d == 3);

  const std::vector<double> spread{4, 1, 2};
  const auto b = waiting_times(spread, 2);
  CHECK(b.t_sc == 2.0);
  CHECK(b.t_ss == 2.0);
  CHECK(b.sc_d == 2);  // tie between d = 2 and d = 3
  CHECK(b.sorted == std::vector<double>{1, 2, 4});

  const std::vector<double> silent{1, 2, INFINITY};
  CHECK(waiting_times(silent, 2).t_sc == 2.0);
}

TEST_CASE("sampled waiting times never exceed the ramp waiting time") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10000; ++i) {
    const auto s = sample_delays(6, 3, DelayModel{1.0, 0.0}, rng);
    CHECK(s.t_sc <= s.t_ss);
    CHECK(s.times.size() == 6);
  }
  const auto shifted = sample_delays(4, 2, DelayModel{1.0, 0.5}, rng);
  for (double t : shifted.times) CHECK(t >= 0.5);
  CHECK_THROWS(DelayModel({0.0, 0.0}).validate());
  CHECK_THROWS(DelayModel({1.0, -1.0}).validate());
}

TEST_CASE("harmonic numbers") {
  CHECK(harmonic(0) == 0.0);
  CHECK(harmonic(1) == 1.0);
  for (std::size_t n : {2u, 10u, 100u, 1000u}) {
    CHECK(harmonic(n) == Approx(oracle::harmonic_diff(0, n)).epsilon(1e-15));
  }
}

TEST_CASE("ramp mean waiting time") {
  CHECK(mean_ss(3, 2, 1.0) == Approx(5.0 / 6).epsilon(1e-14));
  CHECK(mean_ss(4, 2, 1.0) == Approx(7.0 / 12).epsilon(1e-14));
  CHECK(mean_ss(4, 2, 2.0) == Approx(7.0 / 24).epsilon(1e-14));
}

TEST_CASE("upper bound values") {
  const auto u = upper_bound(4, 2, 1.0);
  CHECK(u.value == Approx(13.0 / 24).epsilon(1e-14));
  CHECK(u.d == 3);
  CHECK(upper_bound(6, 4, 1.0).value == Approx(0.316667).epsilon(2e-6));
  const auto u8 = upper_bound(8, 2, 1.0);
  CHECK(std::abs(u8.value - 0.211508) < 5e-6);
  CHECK(u8.d == 4);
  // equals mean_ss when d = k wins
  for (std::size_t n = 3; n <= 20; ++n) {
    for (std::size_t k = 2; k < n; ++k) {
      const auto b = upper_bound(n, k, 1.0);
      if (b.d == k) CHECK(b.value == Approx(mean_ss(n, k, 1.0)).epsilon(1e-14));
      CHECK(b.value <= mean_ss(n, k, 1.0) * (1 + 1e-14));
    }
  }
}

TEST_CASE("upper bound factors through order-statistic means") {
  for (std::size_t n = 3; n <= 30; ++n) {
    for (std::size_t k = 2; k < n; ++k) {
      double best = INFINITY;
      for (std::size_t d = k; d <= n; ++d) {
        best = std::min(best, double(k - 1) / double(d - 1) * order_statistic_mean(d, n, k, 1.0));
        CHECK(order_statistic_mean(d, n, k, 1.0) ==
              Approx(oracle::harmonic_diff(n - d, n) / double(k - 1)).epsilon(1e-13));
      }
      CHECK(std::abs(best - upper_bound(n, k, 1.0).value) <= 1e-12);
    }
  }
}

TEST_CASE("lower bound values") {
  const auto l = lower_bound(4, 2, 1.0);
  CHECK(l.value == Approx(5.0 / 21).epsilon(1e-14));
  CHECK(l.d == 2);
  CHECK(lower_bound_term(3, 4, 2, 1.0) == Approx(5.0 / 21).epsilon(1e-14));
  CHECK(std::abs(lower_bound(6, 4, 1.0).value - 0.205688) < 5e-6);
  CHECK(std::abs(lower_bound(30, 28, 1.0).value - 0.086034) < 5e-6);
  CHECK(lower_bound(4, 2, 2.0).value == Approx(5.0 / 42).epsilon(1e-14));
}

TEST_CASE("lower bound agrees with the exact alternating sum") {
  for (std::size_t n = 3; n <= 30; ++n) {
    for (std::size_t k = 2; k < n; ++k) {
      for (std::size_t d = k; d <= n; ++d) {
        const double want = oracle::lower_bound_alternating_term(d, n, k);
        REQUIRE(lower_bound_term(d, n, k, 1.0) == Approx(want).epsilon(1e-12));
      }
      CHECK(lower_bound(n, k, 1.0).value == Approx(oracle::lower_bound_alternating(n, k, 1.0)).epsilon(1e-12));
      CHECK(lower_bound(n, k, 1.0).value <= upper_bound(n, k, 1.0).value);
    }
  }
}

TEST_CASE("survival_lower") {
  for (std::size_t d = 2; d <= 4; ++d) CHECK(survival_lower(0.0, d, 4, 2, 1.0) == Approx(1.0).epsilon(1e-14));
  const double integral =
      integrate_adaptive([](double t) { return survival_lower(t, 3, 4, 2, 1.0); }, 0.0, 60.0, 1e-11);
  CHECK(std::abs(integral - 5.0 / 21) < 1e-8);
  for (std::size_t d = 3; d <= 5; ++d) {
    const double in = integrate_adaptive([&](double t) { return survival_lower(t, d, 5, 3, 1.0); }, 0.0,
                                         60.0, 1e-11);
    CHECK(std::abs(in - lower_bound_term(d, 5, 3, 1.0)) < 1e-8);
  }
}

TEST_CASE("survival_lower sits below the simulated survival function, (5,3)") {
  std::mt19937_64 rng(5);
  const std::size_t reps = 200000;
  std::vector<double> tsc(reps);
  for (auto& v : tsc) v = sample_delays(5, 3, DelayModel{1.0, 0.0}, rng).t_sc;
  for (double t = 0.05; t < 1.5; t += 0.05) {
    double above = 0;
    for (double v : tsc) above += v > t;
    const double p = above / reps;
    const double sigma = std::sqrt(std::max(p * (1 - p), 1e-12) / reps);
    for (std::size_t d = 3; d <= 5; ++d) CHECK(p >= survival_lower(t, d, 5, 3, 1.0) - 3 * sigma);
  }
}

TEST_CASE("exact means") {
  CHECK(std::abs(exact_mean_one_parity(2, 1.0) - 2.0 / 3) < 1e-12);
  CHECK(std::abs(exact_mean_one_parity(2, 2.0) - 1.0 / 3) < 1e-12);
  CHECK(mean_ss(3, 2, 1.0) / exact_mean_one_parity(2, 1.0) == Approx(1.25).epsilon(1e-12));
  CHECK(std::abs(exact_mean_two_parity(2, 1.0) - 26.0 / 63) < 1e-12);
  CHECK(std::abs(exact_mean_two_parity(4, 1.0) - 0.287090) < 5e-6);
  CHECK(std::abs(exact_mean_two_parity(28, 1.0) - 0.092070) < 5e-6);
  CHECK_FALSE(exact_mean(7, 4, 1.0));
  CHECK(*exact_mean(4, 2, 1.0) == exact_mean_two_parity(2, 1.0));
  CHECK(*exact_mean(3, 2, 1.0) == exact_mean_one_parity(2, 1.0));
  // large k: still between the bounds and decreasing
  for (std::size_t k : {63u, 64u, 65u, 66u, 150u}) {
    const double e = exact_mean_two_parity(k, 1.0);
    CHECK(e > exact_mean_two_parity(k + 1, 1.0));
    CHECK(e >= lower_bound(k + 2, k, 1.0).value);
    CHECK(e <= upper_bound(k + 2, k, 1.0).value);
  }
}

TEST_CASE("exact means lie between the bounds and match quadrature") {
  for (std::size_t k = 2; k <= 40; ++k) {
    for (std::size_t r : {1u, 2u}) {
      const std::size_t n = k + r;
      const double e = *exact_mean(n, k, 1.0);
      CHECK(e >= lower_bound(n, k, 1.0).value - 1e-12);
      CHECK(e <= upper_bound(n, k, 1.0).value + 1e-12);
    }
  }
  for (std::size_t k = 2; k <= 6; ++k) {
    CHECK(std::abs(mean_tsc_quadrature(k + 1, k, 1.0) - exact_mean_one_parity(k, 1.0)) < 1e-5);
    CHECK(std::abs(mean_tsc_quadrature(k + 2, k, 1.0) - exact_mean_two_parity(k, 1.0)) < 1e-5);
  }
}

TEST_CASE("quadrature CDF") {
  CHECK(cdf_tsc(0.0, 4, 2, 1.0) == Approx(0.0).epsilon(1e-12));
  double prev = 0.0;
  for (int i = 1; i <= 60; ++i) {
    const double t = 0.05 * i;
    const double c = cdf_tsc(t, 4, 2, 1.0);
    CHECK(c >= prev - 1e-9);
    CHECK(c <= 1.0 + 1e-9);
    prev = c;
  }
  CHECK(cdf_tsc(40.0, 4, 2, 1.0) == Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(mean_tsc_quadrature(4, 2, 1.0) - 26.0 / 63) < 1e-4);
  CHECK_THROWS(cdf_tsc(0.5, 7, 4, 1.0));
  CHECK_THROWS(cdf_tsc(-1.0, 4, 2, 1.0));
}

TEST_CASE("Monte Carlo CDF agrees with quadrature") {
  CdfOptions mc;
  mc.method = CdfMethod::MonteCarlo;
  mc.reps = 200000;
  for (double t : {0.1, 0.3, 0.6, 1.0}) {
    const double q = cdf_tsc(t, 5, 3, 1.0);
    const double m = cdf_tsc(t, 5, 3, 1.0, mc);
    CHECK(std::abs(q - m) < 4 * std::sqrt(0.25 / mc.reps));
  }
  // Monte Carlo has no dimension limit
  CHECK(cdf_tsc(0.2, 9, 3, 1.0, mc) > 0.0);
}

TEST_CASE("Monte Carlo means") {
  const auto a = mc_mean(4, 2, DelayModel{1.0, 0.0}, 200000, 42, 1);
  const auto b = mc_mean(4, 2, DelayModel{1.0, 0.0}, 200000, 42, 4);
  CHECK(a.mean_sc == b.mean_sc);
  CHECK(a.ci95_sc == b.ci95_sc);
  CHECK(a.mean_ss == b.mean_ss);
  CHECK(std::abs(a.mean_sc - 26.0 / 63) < 2 * a.ci95_sc);
  CHECK(std::abs(a.mean_ss - 7.0 / 12) < 2 * a.ci95_ss);
  CHECK(a.mean_sc <= a.mean_ss);
  CHECK(a.reps == 200000);
  const auto c = mc_mean(4, 2, DelayModel{1.0, 0.0}, 200000, 43, 1);
  CHECK(c.mean_sc != a.mean_sc);
  CHECK_THROWS(mc_mean(4, 2, DelayModel{1.0, 0.0}, 0, 1));
}

TEST_CASE("bounds sandwich the simulated mean") {
  for (std::size_t k = 2; k <= 8; ++k) {
    for (std::size_t n = k + 1; n <= 2 * k + 8; ++n) {
      const auto m = mc_mean(n, k, DelayModel{1.0, 0.0}, 20000, 1000 * n + k);
      CHECK(lower_bound(n, k, 1.0).value <= m.mean_sc + 2 * m.ci95_sc);
      CHECK(m.mean_sc - 2 * m.ci95_sc <= upper_bound(n, k, 1.0).value);
    }
  }
}

TEST_CASE("advantage fades for constant parity") {
  double prev = INFINITY;
  for (std::size_t k : {4u, 8u, 16u, 32u}) {
    const double ss = mean_ss(k + 2, k, 1.0);
    const double gap = (ss - exact_mean_two_parity(k, 1.0)) / ss;
    CHECK(gap < prev);
    prev = gap;
  }
}

TEST_CASE("log envelope") {
  CHECK(approx_upper(4, 2, 1.0) == Approx(std::log(5.0) / 3).epsilon(1e-14));
  CHECK(approx_upper(4, 2, 2.0) == Approx(std::log(5.0) / 6).epsilon(1e-14));
  // Each d < n term dominates the matching upper-bound term.
  for (std::size_t n = 3; n <= 64; ++n) {
    for (std::size_t d = 2; d < n; ++d) {
      const double env = std::log(double(n + 1) / double(n - d)) / double(d - 1);
      CHECK(env >= upper_bound_term(d, n, 1.0));
    }
  }
  // The full minimum does not dominate: the d = n term loses because H_n > log(n + 1).
  CHECK(approx_upper(4, 2, 1.0) < upper_bound(4, 2, 1.0).value);
}

TEST_CASE("fixed-rate envelope") {
  CHECK(fixed_rate_bound(100, 0.5, 0.5, 1.0) == Approx(std::log(2.0) / 49).epsilon(1e-14));
  CHECK(fixed_rate_bound(200, 0.5, 0.5, 1.0) < fixed_rate_bound(100, 0.5, 0.5, 1.0));
  CHECK_THROWS(fixed_rate_bound(100, 0.5, 0.4, 1.0));
  CHECK_THROWS(fixed_rate_bound(100, 0.5, 1.0, 1.0));
  CHECK_THROWS(fixed_rate_bound(1, 0.5, 0.5, 1.0));
  for (double rate : {0.25, 0.5}) {
    for (std::size_t n : {8u, 16u, 32u}) {
      const std::size_t k = static_cast<std::size_t>(rate * n);
      double best = INFINITY;
      for (double c = rate; c < 0.999; c += 0.001) {
        if (n * c > 1.0) best = std::min(best, fixed_rate_bound(n, rate, c, 1.0));
      }
      CHECK(upper_bound(n, k, 1.0).value <= best);
    }
  }
}

TEST_CASE("savings metrics") {
  CHECK(savings(3, 2, 1.0, SavingsMetric::RatioMinusOne, SavingsSource::Exact) == Approx(0.25).epsilon(1e-12));
  CHECK(savings(4, 2, 1.0, SavingsMetric::NormalizedDiff, SavingsSource::Exact) ==
        Approx(1 - (26.0 / 63) / (7.0 / 12)).epsilon(1e-12));
  CHECK(savings(4, 2, 1.0, SavingsMetric::RatioMinusOne, SavingsSource::Exact) ==
        Approx((7.0 / 12) / (26.0 / 63) - 1).epsilon(1e-12));
  CHECK(savings(1.0, 1.0, SavingsMetric::NormalizedDiff) == 0.0);
  CHECK(savings(1.0, 1.0, SavingsMetric::RatioMinusOne) == 0.0);
  CHECK_THROWS(savings(7, 4, 1.0, SavingsMetric::NormalizedDiff, SavingsSource::Exact));
  const double mc = savings(4, 2, 1.0, SavingsMetric::NormalizedDiff, SavingsSource::MonteCarlo, 200000, 3);
  CHECK(std::abs(mc - 0.2925) < 0.02);
}

TEST_CASE("Renyi representation") {
  const std::vector<double> z{2.0};
  CHECK(renyi_transform(z, 4) == 0.5);
  CHECK_THROWS(renyi_transform(std::vector<double>(5, 1.0), 4));

  const std::size_t n = 5, k = 3, reps = 100000;
  std::mt19937_64 rng(10);
  std::exponential_distribution<double> expo(double(k - 1));
  for (std::size_t d = 3; d <= 5; ++d) {
    std::vector<double> direct(reps), renyi(reps);
    for (std::size_t i = 0; i < reps; ++i) {
      std::vector<double> t(n);
      for (auto& v : t) v = expo(rng);
      std::nth_element(t.begin(), t.begin() + (d - 1), t.end());
      direct[i] = t[d - 1];
      std::vector<double> zs(d);
      for (auto& v : zs) v = expo(rng);
      renyi[i] = renyi_transform(zs, n);
    }
    double mean = 0;
    for (double v : renyi) mean += v;
    mean /= reps;
    CHECK(mean == Approx(order_statistic_mean(d, n, k, 1.0)).epsilon(0.01));
    CHECK(oracle::ks_distance(direct, renyi) < 0.02);
  }
}

TEST_CASE("bounds report") {
  const auto r = bounds_report(4, 2, DelayModel{1.0, 0.0}, 10000, 1);
  CHECK(r.upper.value == Approx(13.0 / 24));
  CHECK(r.lower.value == Approx(5.0 / 21));
  REQUIRE(r.exact);
  REQUIRE(r.mc);
  CHECK(r.lower.value <= *r.exact);
  CHECK(*r.exact <= r.upper.value);
  CHECK_THROWS(bounds_report(4, 2, DelayModel{1.0, 0.2}));
}
