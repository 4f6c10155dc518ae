#pragma once

// Goodness-of-fit helpers shared by the verification commands and tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "erw/error.hpp"

namespace erw::stats {

struct TestResult {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};

/// Pearson chi-square of observed counts against cell probabilities. Cells
/// with expected count below min_expected are pooled into one cell (in order).
/// Observed counts in zero-probability cells make the test reject outright.
inline TestResult chi_square_gof(std::span<const std::int64_t> observed,
                                 std::span<const double> probs, double min_expected = 5.0) {
  ERW_REQUIRE(ConfigError, observed.size() == probs.size(), "chi-square: size mismatch");
  double total = 0.0;
  for (auto o : observed) total += static_cast<double>(o);
  ERW_REQUIRE(ConfigError, total > 0.0, "chi-square: no observations");

  std::vector<double> obs_cells;
  std::vector<double> exp_cells;
  double pool_obs = 0.0;
  double pool_exp = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = probs[i] * total;
    const auto o = static_cast<double>(observed[i]);
    if (probs[i] <= 0.0) {
      if (o > 0.0) return {INFINITY, 0.0, 0.0};
      continue;
    }
    if (e < min_expected) {
      pool_obs += o;
      pool_exp += e;
      if (pool_exp >= min_expected) {
        obs_cells.push_back(pool_obs);
        exp_cells.push_back(pool_exp);
        pool_obs = pool_exp = 0.0;
      }
    } else {
      obs_cells.push_back(o);
      exp_cells.push_back(e);
    }
  }
  if (pool_exp > 0.0) {
    if (exp_cells.empty()) {
      obs_cells.push_back(pool_obs);
      exp_cells.push_back(pool_exp);
    } else {
      obs_cells.back() += pool_obs;
      exp_cells.back() += pool_exp;
    }
  }
  TestResult r;
  for (std::size_t i = 0; i < obs_cells.size(); ++i) {
    const double d = obs_cells[i] - exp_cells[i];
    r.statistic += d * d / exp_cells[i];
  }
  r.dof = static_cast<double>(obs_cells.size()) - 1.0;
  if (r.dof < 1.0) return {r.statistic, 0.0, 1.0};
  r.p_value = boost::math::cdf(
      boost::math::complement(boost::math::chi_squared_distribution<double>(r.dof), r.statistic));
  return r;
}

/// Two-sample chi-square test of homogeneity on paired cell counts. Cells
/// whose pooled count is below min_count are merged.
inline TestResult chi_square_homogeneity(std::span<const std::int64_t> a,
                                         std::span<const std::int64_t> b,
                                         double min_count = 10.0) {
  ERW_REQUIRE(ConfigError, a.size() == b.size(), "homogeneity: size mismatch");
  double na = 0.0, nb = 0.0;
  for (auto x : a) na += static_cast<double>(x);
  for (auto x : b) nb += static_cast<double>(x);
  ERW_REQUIRE(ConfigError, na > 0.0 && nb > 0.0, "homogeneity: empty sample");

  std::vector<std::pair<double, double>> cells;
  double pa = 0.0, pb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto ca = static_cast<double>(a[i]);
    const auto cb = static_cast<double>(b[i]);
    if (ca + cb == 0.0) continue;
    if (ca + cb < min_count) {
      pa += ca;
      pb += cb;
      if (pa + pb >= min_count) {
        cells.emplace_back(pa, pb);
        pa = pb = 0.0;
      }
    } else {
      cells.emplace_back(ca, cb);
    }
  }
  if (pa + pb > 0.0) {
    if (cells.empty())
      cells.emplace_back(pa, pb);
    else {
      cells.back().first += pa;
      cells.back().second += pb;
    }
  }
  TestResult r;
  const double n = na + nb;
  for (const auto& [ca, cb] : cells) {
    const double col = ca + cb;
    const double ea = col * na / n;
    const double eb = col * nb / n;
    r.statistic += (ca - ea) * (ca - ea) / ea + (cb - eb) * (cb - eb) / eb;
  }
  r.dof = static_cast<double>(cells.size()) - 1.0;
  if (r.dof < 1.0) return {r.statistic, 0.0, 1.0};
  r.p_value = boost::math::cdf(
      boost::math::complement(boost::math::chi_squared_distribution<double>(r.dof), r.statistic));
  return r;
}

/// Kolmogorov limiting survival Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

/// Two-sample Kolmogorov-Smirnov statistic with asymptotic p-value (Stephens'
/// effective-size correction).
inline TestResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  ERW_REQUIRE(ConfigError, !a.empty() && !b.empty(), "two-sample KS needs nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  return {d, 0.0, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)};
}

/// One-sample KS p-value for statistic d at sample size n.
inline double ks_one_sample_p(double d, std::size_t n) {
  const double rn = std::sqrt(static_cast<double>(n));
  return kolmogorov_q((rn + 0.12 + 0.11 / rn) * d);
}

}  // namespace erw::stats
