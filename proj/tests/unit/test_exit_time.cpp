#include <gtest/gtest.h>

#include <cmath>

#include "erw/exit_time.hpp"
#include "erw/numeric.hpp"
#include "erw/stats.hpp"

using namespace erw;

TEST(ExitProblem, SideProbability) {
  EXPECT_DOUBLE_EQ(exit_side_probability({1.0, 0.0}), 0.5);
  EXPECT_DOUBLE_EQ(exit_side_probability({1.0, 0.5}), 0.75);
  EXPECT_DOUBLE_EQ(exit_side_probability({2.0, -1.0}), 0.25);
  EXPECT_THROW(exit_side_probability({1.0, 1.0}), ConfigError);
  EXPECT_THROW(exit_side_probability({0.0, 0.0}), ConfigError);
}

TEST(ExitProblem, ExpectedTime) {
  EXPECT_DOUBLE_EQ(expected_exit_time({1.0, 0.0}), 1.0);
  EXPECT_NEAR(expected_exit_time({1.0, 0.99}), 0.0199, 1e-15);
  const double a = 0.3, m = 0.8, h = 3.5;
  EXPECT_NEAR(expected_exit_time({a, m / (2 * h)}), a * a - m * m / (4 * h * h), 1e-15);
  EXPECT_THROW(expected_exit_time({1.0, -1.5}), ConfigError);
}

TEST(ExitProblem, ModeParsing) {
  EXPECT_EQ(parse_exit_mode("A"), ExitMode::spectral);
  EXPECT_EQ(parse_exit_mode("discretized"), ExitMode::discretized);
  EXPECT_THROW(parse_exit_mode("C"), ConfigError);
}

// Unconditional CDF of the symmetric unit exit, from the sine series evaluated
// in extended precision.
TEST(ExitCdf, MatchesFrozenSeries) {
  const std::pair<double, double> ref[] = {
      {0.1, 0.0031308045160051}, {0.5, 0.314554233109648}, {1.0, 0.629222570200476}, {2.0, 0.892022955555891}};
  for (const auto& [t, f] : ref) EXPECT_NEAR(detail::conditional_exit_cdf(0.5, t / 4.0).cdf, f, 1e-12) << t;
}

TEST(ExitCdf, SeriesAgreeAtCrossover) {
  for (double u : {0.01, 0.2, 0.5, 0.8, 0.99}) {
    const double t = detail::kCrossover;
    const auto below = detail::conditional_exit_cdf(u, t * (1 - 1e-12));
    const auto above = detail::conditional_exit_cdf(u, t);
    EXPECT_NEAR(below.cdf, above.cdf, 1e-10) << u;
    EXPECT_NEAR(below.density, above.density, 1e-8 * std::max(1.0, above.density)) << u;
  }
}

TEST(ExitCdf, InversionRoundTrip) {
  for (double u : {0.005, 0.1, 0.5, 0.9, 0.995})
    for (double w : {1e-6, 0.01, 0.3, 0.5, 0.9, 0.999999}) {
      const double t = detail::invert_conditional_exit_cdf(u, w);
      EXPECT_NEAR(detail::conditional_exit_cdf(u, t).cdf, w, 1e-10) << u << " " << w;
    }
}

TEST(ExitSampling, SymmetricMoments) {
  Rng rng(101);
  RunningMoments m;
  std::int64_t up = 0;
  const int N = 1000000;
  for (int i = 0; i < N; ++i) {
    const auto e = sample_exit({1.0, 0.0}, rng);
    m.add(e.time);
    up += e.side > 0;
  }
  EXPECT_NEAR(m.mean(), 1.0, 4 * m.std_error());
  EXPECT_NEAR(m.variance(), 2.0 / 3.0, 0.01);
  EXPECT_NEAR(up / double(N), 0.5, 3 * std::sqrt(0.25 / N));
}

TEST(ExitSampling, OffCentreMeanAndSide) {
  Rng rng(102);
  for (const ExitProblem p : {ExitProblem{1.0, 0.5}, ExitProblem{2.0, -1.0}, ExitProblem{0.3, 0.29}}) {
    RunningMoments m;
    std::int64_t up = 0;
    const int N = 200000;
    for (int i = 0; i < N; ++i) {
      const auto e = sample_exit(p, rng);
      m.add(e.time);
      up += e.side > 0;
    }
    const double ps = exit_side_probability(p);
    EXPECT_NEAR(m.mean(), expected_exit_time(p), 4 * m.std_error());
    EXPECT_NEAR(up / double(N), ps, 4 * std::sqrt(ps * (1 - ps) / N));
  }
}

TEST(ExitSampling, BrownianScaling) {
  Rng ra(103), rb(104);
  std::vector<double> big, small;
  for (int i = 0; i < 50000; ++i) {
    big.push_back(sample_exit({2.0, 1.0}, ra).time);
    small.push_back(4.0 * sample_exit({1.0, 0.5}, rb).time);
  }
  EXPECT_GT(stats::ks_two_sample(big, small).p_value, 1e-3);
}

TEST(ExitSampling, DiscretizedOracle) {
  Rng rng(105);
  RunningMoments m;
  std::int64_t up = 0;
  const int N = 100000;
  for (int i = 0; i < N; ++i) {
    const auto e = sample_exit({1.0, 0.5}, rng, ExitMode::discretized, {64.0});
    m.add(e.time);
    up += e.side > 0;
  }
  EXPECT_NEAR(m.mean(), 0.75, 4 * m.std_error() + 2e-3);
  EXPECT_NEAR(up / double(N), 0.75, 4 * std::sqrt(0.1875 / N));

  RunningMoments near;
  for (int i = 0; i < 2000; ++i) near.add(sample_exit({1.0, 0.99}, rng, ExitMode::discretized, {64.0}).time);
  EXPECT_NEAR(near.mean(), 0.0199, 4 * near.std_error() + 5e-4);
  EXPECT_THROW(sample_exit({1.0, 0.0}, rng, ExitMode::discretized, {16.0}), ConfigError);
}

TEST(ExitSampling, DiscretizedNodesReachBarrier) {
  Rng rng(106);
  double last_t = 0, last_b = 0;
  std::size_t nodes = 0;
  const auto e = sample_exit_discretized({1.0, 0.2}, rng, 64.0, true, [&](double t, double b) {
    EXPECT_GT(t, last_t);
    last_t = t;
    last_b = b;
    ++nodes;
  });
  EXPECT_GT(nodes, 0u);
  EXPECT_DOUBLE_EQ(std::fabs(last_b), 1.0);
  EXPECT_DOUBLE_EQ(e.time, last_t);
  EXPECT_EQ(e.side > 0, last_b > 0);
}
