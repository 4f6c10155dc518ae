#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "erw/enumeration.hpp"
#include "erw/observables.hpp"
#include "erw/stats.hpp"
#include "erw/walk.hpp"

using namespace erw;

TEST(StepLaw, Examples) {
  EXPECT_DOUBLE_EQ(step_up_probability(0.75, 0, 2), 0.5);
  EXPECT_DOUBLE_EQ(step_up_probability(0.75, 2, 2), 0.75);
  EXPECT_DOUBLE_EQ(step_up_probability(0.75, -2, 2), 0.25);
  for (int k = -5; k <= 5; k += 2) EXPECT_DOUBLE_EQ(step_up_probability(0.5, k, 5), 0.5);
  EXPECT_DOUBLE_EQ(step_up_probability(1.0, 1, 1), 1.0);
  EXPECT_DOUBLE_EQ(step_up_probability(0.75, 3, 7), 0.5 + 3.0 / 28.0);
}

TEST(StepLaw, RejectsBadArguments) {
  EXPECT_THROW(step_up_probability(0.75, 0, 0), ConfigError);
  EXPECT_THROW(step_up_probability(0.75, 3, 2), ConfigError);
}

TEST(StepLaw, RangeBetweenOneMinusPAndP) {
  for (double p : {0.1, 0.5, 0.75, 0.9})
    for (int n = 1; n <= 8; ++n)
      for (int s = -n; s <= n; s += 2) {
        const double u = step_up_probability(p, s, n);
        EXPECT_GE(u, std::min(p, 1 - p) - 1e-15);
        EXPECT_LE(u, std::max(p, 1 - p) + 1e-15);
      }
}

TEST(Samplers, MemoryExamples) {
  Rng rng(11);
  const std::int8_t one[] = {1};
  const std::int8_t two[] = {1, 1};
  const std::int8_t mixed[] = {1, -1};
  int up1 = 0, up2 = 0, upm = 0;
  const int N = 200000;
  for (int i = 0; i < N; ++i) {
    up1 += sample_step_memory(rng, one, 0.75) > 0;
    up2 += sample_step_memory(rng, two, 0.75) > 0;
    upm += sample_step_memory(rng, mixed, 0.75) > 0;
  }
  const double se = std::sqrt(0.25 / N);
  EXPECT_NEAR(up1 / double(N), 0.75, 4 * se);
  EXPECT_NEAR(up2 / double(N), 0.75, 4 * se);
  EXPECT_NEAR(upm / double(N), 0.5, 4 * se);
  EXPECT_THROW(sample_step_memory(rng, std::span<const std::int8_t>{}, 0.75), ConfigError);
}

TEST(Samplers, UrnExamples) {
  Rng rng(12);
  int up0 = 0, upm = 0, full = 0;
  const int N = 200000;
  for (int i = 0; i < N; ++i) {
    up0 += sample_step_urn(rng, 0.75, 0, 4) > 0;
    upm += sample_step_urn(rng, 0.75, -2, 2) > 0;
    full += sample_step_urn(rng, 1.0, 1, 1) > 0;
  }
  const double se = std::sqrt(0.25 / N);
  EXPECT_NEAR(up0 / double(N), 0.5, 4 * se);
  EXPECT_NEAR(upm / double(N), 0.25, 4 * se);
  EXPECT_EQ(full, N);
}

// Exact law of the next memory-sampled step given (s, n): marginalizing over
// all histories with that endpoint, each weighted by its probability, gives
// the urn law.
TEST(Samplers, ExactEquivalenceOverHistories) {
  for (int n = 1; n <= 12; ++n) {
    const auto law = exact_enumeration(0.75, 0.5, n);
    std::map<std::int64_t, std::pair<double, double>> acc;  // s -> (mass, mass*P(up))
    for (std::uint32_t mask = 0; mask < (1U << n); ++mask) {
      const double w = law.path_probability[mask];
      if (w == 0.0) continue;
      const int ups = std::popcount(mask);
      const double past_up = double(ups) / n;
      const double pu = 0.75 * past_up + 0.25 * (1.0 - past_up);
      const std::int64_t s = 2 * ups - n;
      acc[s].first += w;
      acc[s].second += w * pu;
    }
    for (const auto& [s, v] : acc)
      EXPECT_NEAR(v.second / v.first, step_up_probability(0.75, s, n), 1e-12);
  }
}

TEST(Coefficients, Values) {
  const Coefficients c(1000);
  EXPECT_DOUBLE_EQ(c.a(0), 0.0);
  EXPECT_DOUBLE_EQ(c.a_sq_prefix(0), 0.0);
  EXPECT_NEAR(c.a(1), 1.1283791670955125739, 1e-15);
  EXPECT_NEAR(c.a(2), 0.75225277806367504926, 1e-15);
  EXPECT_NEAR(c.a(10), 0.32020375888099552726, 1e-15);
  EXPECT_NEAR(c.a(100), 0.10012507763609312105, 1e-15);
  EXPECT_NEAR(c.a(1000), 0.031626729695657517688, 1e-15);
  EXPECT_NEAR(c.a_sq_prefix(10), 3.3451390412360776359, 1e-13);
  EXPECT_NEAR(c.a_sq_prefix(1000), 7.92532245989512731, 1e-12);
  EXPECT_NEAR(coefficient_at(1000000), 0.0010000001250000078125, 1e-15);
  EXPECT_NEAR(c.a(100) * 10.0, 1.0, 2e-3);
  EXPECT_THROW(c.a(1001), RangeError);
  EXPECT_THROW(c.a(-1), RangeError);
}

TEST(Coefficients, Invariants) {
  const Coefficients c(100000);
  for (std::int64_t n = 1; n <= 100000; ++n) {
    const double r = c.a(n) * std::sqrt(double(n));
    ASSERT_GE(r, 1.0 - 1e-15) << n;
    ASSERT_LE(r, 1.0 + 0.25 / n + 1e-15) << n;
    if (n > 1) {
      ASSERT_LT(c.a(n), c.a(n - 1));
      ASSERT_GT(c.a_sq_prefix(n), c.a_sq_prefix(n - 1));
    }
  }
  // A_{2n} - A_n - log 2 -> 0
  double prev = 1.0;
  for (std::int64_t n : {100, 1000, 10000, 50000}) {
    const double d = std::fabs(c.a_sq_prefix(2 * n) - c.a_sq_prefix(n) - std::log(2.0));
    EXPECT_LT(d, prev);
    prev = d;
  }
  EXPECT_LT(prev, 1e-4);
  const Coefficients empty(0);
  EXPECT_EQ(empty.max_index(), 0);
  EXPECT_DOUBLE_EQ(empty.a_sq_prefix(0), 0.0);
}

TEST(Martingale, Values) {
  const Coefficients c(10);
  EXPECT_DOUBLE_EQ(martingale_value(c, 0, 0).m, 0.0);
  EXPECT_NEAR(martingale_value(c, 1, 1).m, 2.0 / std::sqrt(std::numbers::pi), 1e-15);
  EXPECT_NEAR(martingale_value(c, 2, -2).m, -8.0 / (3.0 * std::sqrt(std::numbers::pi)), 1e-15);
  EXPECT_THROW(martingale_value(c, 11, 1), RangeError);
  EXPECT_THROW(martingale_value(c, 2, 4), ConfigError);
}

TEST(Martingale, SecondMomentOracleMatchesEnumeration) {
  const Coefficients c(14);
  const auto e = second_moment_oracle(c, 12);
  EXPECT_DOUBLE_EQ(e[0], 0.0);
  EXPECT_NEAR(e[1], 4.0 / std::numbers::pi, 1e-15);
  EXPECT_NEAR(e[10], 3.0030842491841654248, 1e-13);
  for (int n = 1; n <= 12; ++n) {
    const auto law = exact_enumeration(0.75, 0.5, n);
    const double an = c.a(n);
    const double m2 = law.expectation([&](std::span<const std::int64_t> pos) {
      const double m = an * double(pos.back());
      return m * m;
    });
    EXPECT_NEAR(m2, e[static_cast<std::size_t>(n)], 1e-12) << n;
  }
}

TEST(Martingale, ConditionalIdentityExact) {
  const Coefficients c(13);
  for (int n = 1; n <= 12; ++n)
    for (std::uint32_t mask = 0; mask < (1U << n); ++mask) {
      const auto s = path_positions(mask, n).back();
      const double u = step_up_probability(0.75, s, n);
      const double next = c.a(n + 1) * (u * double(s + 1) + (1 - u) * double(s - 1));
      ASSERT_NEAR(next, c.a(n) * double(s), 1e-12);
    }
}

TEST(Enumeration, Examples) {
  const auto l1 = exact_enumeration(0.75, 0.3, 1);
  EXPECT_DOUBLE_EQ(l1.prob_s(1), 0.3);
  const auto l2 = exact_enumeration(0.75, 0.5, 2);
  EXPECT_NEAR(l2.prob_s(0), 0.25, 1e-15);
  EXPECT_NEAR(l2.prob_s(2) + l2.prob_s(-2), 0.75, 1e-15);
  const auto l4 = exact_enumeration(0.75, 0.5, 4);
  EXPECT_NEAR(l4.r_law[2], 0.25, 1e-15);
  EXPECT_NEAR(l4.r_law[4], 5.0 / 64.0, 1e-15);
  double ez = 0;
  for (std::size_t z = 0; z < l4.z_law.size(); ++z) ez += double(z) * l4.z_law[z];
  EXPECT_NEAR(ez, 83.0 / 192.0, 1e-12);
  const auto l10 = exact_enumeration(0.75, 0.5, 10);
  EXPECT_NEAR(l10.prob_s(0), 42320191.0 / 371589120.0, 1e-14);
  EXPECT_NEAR(l10.r_censored, 0.5818694018813038, 1e-14);
  for (int n = 1; n <= kEnumerationCap; ++n)
    EXPECT_NEAR(exact_enumeration(0.75, 0.5, n).total, 1.0, 1e-12);
  EXPECT_THROW(exact_enumeration(0.75, 0.5, kEnumerationCap + 1), ConfigError);
  EXPECT_THROW(exact_enumeration(0.75, 0.5, 0), ConfigError);
}

TEST(Params, Validation) {
  EXPECT_THROW((WalkParams{1.5, 0.5, 10, 0}.validate()), ConfigError);
  EXPECT_THROW((WalkParams{0.75, -0.1, 10, 0}.validate()), ConfigError);
  EXPECT_THROW((WalkParams{0.75, 0.5, 0, 0}.validate()), ConfigError);
  EXPECT_THROW((WalkParams{0.75, 0.5, kMaxHorizon + 1, 0}.validate()), ConfigError);
  EXPECT_TRUE((WalkState{4, 2, false}.consistent()));
  EXPECT_FALSE((WalkState{4, 1, false}.consistent()));
  EXPECT_FALSE((WalkState{2, 4, false}.consistent()));
}

TEST(Simulation, TrivialCases) {
  const std::int64_t cp[] = {1};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto obs = simulate_walk(WalkParams{0.75, 1.0, 1, seed}, cp);
    EXPECT_EQ(obs.s[0], 1);
  }
  const std::int64_t bad[] = {5};
  EXPECT_THROW(simulate_walk(WalkParams{0.75, 0.5, 4, 0}, bad), ConfigError);
}

TEST(Simulation, ZeroAtTwo) {
  const std::int64_t cp[] = {2};
  const int N = 200000;
  int zero = 0;
  Rng rng(5);
  for (int i = 0; i < N; ++i) zero += simulate_walk(WalkParams{0.75, 0.5, 2, 0}, cp, rng).s[0] == 0;
  EXPECT_NEAR(zero / double(N), 0.25, 4 * std::sqrt(0.25 * 0.75 / N));
}

// Every branch of run_walk (p = 3/4 integer form, p = 1/2, generic threshold,
// memory) against the exact law of S(8).
class RunWalkLaw : public ::testing::TestWithParam<std::tuple<double, double, Sampler>> {};

TEST_P(RunWalkLaw, MatchesEnumeration) {
  const auto [p, q, sampler] = GetParam();
  const int n = 8;
  const auto law = exact_enumeration(p, q, n);
  std::vector<std::int64_t> counts(2 * n + 1, 0);
  Rng rng(99);
  for (int i = 0; i < 100000; ++i) {
    const auto s = run_walk(WalkParams{p, q, n, 0}, rng, sampler, [](std::int64_t, std::int64_t) {});
    ++counts[static_cast<std::size_t>(s + n)];
  }
  const auto t = stats::chi_square_gof(counts, law.s_law);
  EXPECT_GT(t.p_value, 1e-4) << "p=" << p << " q=" << q;
}

INSTANTIATE_TEST_SUITE_P(
    Branches, RunWalkLaw,
    ::testing::Values(std::tuple{0.75, 0.5, Sampler::urn}, std::tuple{0.5, 0.5, Sampler::urn},
                      std::tuple{0.6, 0.5, Sampler::urn}, std::tuple{0.9, 0.2, Sampler::urn},
                      std::tuple{0.3, 0.5, Sampler::urn}, std::tuple{0.0, 0.5, Sampler::urn},
                      std::tuple{1.0, 0.7, Sampler::urn}, std::tuple{0.75, 0.5, Sampler::memory},
                      std::tuple{0.2, 0.9, Sampler::memory}));

TEST(Simulation, SamplersAgreeOnS12) {
  const int n = 12;
  const auto law = exact_enumeration(0.75, 0.5, n);
  for (Sampler sm : {Sampler::urn, Sampler::memory}) {
    std::vector<std::int64_t> counts(2 * n + 1, 0);
    Rng rng(sm == Sampler::urn ? 1 : 2);
    for (int i = 0; i < 100000; ++i)
      ++counts[static_cast<std::size_t>(
          run_walk(WalkParams{0.75, 0.5, n, 0}, rng, sm, [](std::int64_t, std::int64_t) {}) + n)];
    EXPECT_GT(stats::chi_square_gof(counts, law.s_law).p_value, 1e-4);
  }
}

TEST(Simulation, PathwiseInvariants) {
  const Coefficients c(5001);
  Rng rng(3);
  for (int r = 0; r < 20; ++r) {
    std::int64_t prev_s = 0;
    double prev_m = 0.0;
    run_walk(WalkParams{0.75, 0.5, 5000, 0}, rng, Sampler::urn, [&](std::int64_t n, std::int64_t s) {
      ASSERT_LE(std::abs(s), n);
      ASSERT_EQ((n - s) % 2, 0);
      if (s == 0) ASSERT_EQ(n % 2, 0);
      ASSERT_EQ(std::abs(s - prev_s), 1);
      const double m = c.a(n) * double(s);
      ASSERT_LE(std::fabs(m - prev_m), 2.0 * c.a(n) + 1e-12);
      prev_s = s;
      prev_m = m;
    });
  }
}

TEST(Simulation, FourthMomentGrowsLikeLogSquared) {
  std::vector<double> ratio;
  for (std::int64_t n : {100, 1000, 10000}) {
    Rng rng(static_cast<std::uint64_t>(n));
    const double an = coefficient_at(n);
    double acc = 0;
    const int R = 4000;
    for (int i = 0; i < R; ++i) {
      const auto s = run_walk(WalkParams{0.75, 0.5, n, 0}, rng, Sampler::urn, [](std::int64_t, std::int64_t) {});
      const double m = an * double(s);
      acc += m * m * m * m;
    }
    ratio.push_back(acc / R / std::pow(std::log(double(n)), 2));
  }
  for (double r : ratio) EXPECT_LT(r, 10.0);
  EXPECT_LT(ratio.back(), 2.0 * ratio.front());
}
