#pragma once

// Exact law of short walks by enumerating every sign sequence.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "erw/error.hpp"
#include "erw/walk.hpp"

namespace erw {

inline constexpr int kEnumerationCap = 14;

/// Path k is encoded as a bitmask: bit i set iff step i+1 is +1.
struct ExactLaw {
  double p = 0.75;
  double q = 0.5;
  int n = 0;
  std::vector<double> path_probability;  // size 2^n
  std::vector<double> s_law;             // P(S(n) = s) at index s + n
  std::vector<double> z_law;             // P(Z(n) = z), z = 0..n/2
  std::vector<double> g_law;             // P(G(n) = g), g = 0..n
  std::vector<double> r_law;             // P(R = k), k = 0..n
  double r_censored = 0.0;               // P(R > n)
  double total = 0.0;

  double prob_s(std::int64_t s) const {
    if (s < -n || s > n) return 0.0;
    return s_law[static_cast<std::size_t>(s + n)];
  }

  /// Sum of f(positions) * P(path) over all paths; positions[k] = S(k).
  double expectation(const std::function<double(std::span<const std::int64_t>)>& f) const;
};

/// Positions S(0..n) of the path encoded by mask.
inline std::vector<std::int64_t> path_positions(std::uint32_t mask, int n) {
  std::vector<std::int64_t> pos(static_cast<std::size_t>(n) + 1, 0);
  for (int k = 0; k < n; ++k)
    pos[static_cast<std::size_t>(k) + 1] =
        pos[static_cast<std::size_t>(k)] + (((mask >> k) & 1U) ? 1 : -1);
  return pos;
}

/// Probability of one sign path under (p, q), as a product of step laws.
inline double path_probability(double p, double q, std::uint32_t mask, int n) {
  double prob = 1.0;
  std::int64_t s = 0;
  for (int k = 0; k < n; ++k) {
    const bool up = (mask >> k) & 1U;
    const double pu = k == 0 ? q : step_up_probability(p, s, k);
    prob *= up ? pu : 1.0 - pu;
    s += up ? 1 : -1;
  }
  return prob;
}

inline ExactLaw exact_enumeration(double p, double q, int n) {
  ERW_REQUIRE(ConfigError, n >= 1, "exact_enumeration needs n >= 1");
  ERW_REQUIRE(ConfigError, n <= kEnumerationCap,
              "exact_enumeration refuses n=" + std::to_string(n) + " above the cap of " +
                  std::to_string(kEnumerationCap));
  WalkParams{p, q, n, 0}.validate();

  ExactLaw law;
  law.p = p;
  law.q = q;
  law.n = n;
  const std::uint32_t paths = 1U << n;
  law.path_probability.assign(paths, 0.0);
  law.s_law.assign(2 * static_cast<std::size_t>(n) + 1, 0.0);
  law.z_law.assign(static_cast<std::size_t>(n) / 2 + 1, 0.0);
  law.g_law.assign(static_cast<std::size_t>(n) + 1, 0.0);
  law.r_law.assign(static_cast<std::size_t>(n) + 1, 0.0);

  CompensatedSum<long double> total;
  for (std::uint32_t mask = 0; mask < paths; ++mask) {
    const double prob = path_probability(p, q, mask, n);
    law.path_probability[mask] = prob;
    total += prob;

    const auto pos = path_positions(mask, n);
    std::size_t zeros = 0;
    std::size_t last = 0;
    std::size_t first = 0;
    for (std::size_t k = 1; k < pos.size(); ++k) {
      if (pos[k] != 0) continue;
      ++zeros;
      last = k;
      if (first == 0) first = k;
    }
    law.s_law[static_cast<std::size_t>(pos.back() + n)] += prob;
    law.z_law[zeros] += prob;
    law.g_law[last] += prob;
    if (first == 0)
      law.r_censored += prob;
    else
      law.r_law[first] += prob;
  }
  law.total = static_cast<double>(total.value());
  return law;
}

inline double ExactLaw::expectation(
    const std::function<double(std::span<const std::int64_t>)>& f) const {
  CompensatedSum<long double> acc;
  for (std::uint32_t mask = 0; mask < path_probability.size(); ++mask) {
    const auto pos = path_positions(mask, n);
    acc += static_cast<long double>(path_probability[mask]) * f(pos);
  }
  return static_cast<double>(acc.value());
}

}  // namespace erw
