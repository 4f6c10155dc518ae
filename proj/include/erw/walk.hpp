#pragma once

// Elephant random walk: step law, samplers, martingale coefficients.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "erw/error.hpp"
#include "erw/numeric.hpp"
#include "erw/rng.hpp"

namespace erw {

inline constexpr std::int64_t kMaxHorizon = std::int64_t{1} << 62;

struct WalkParams {
  double p = 0.75;          // memory parameter
  double q = 0.5;           // P(first step = +1)
  std::int64_t horizon = 1; // number of steps
  std::uint64_t seed = 0;

  void validate() const {
    ERW_REQUIRE(ConfigError, p >= 0.0 && p <= 1.0,
                "memory parameter p must lie in [0,1], got " + std::to_string(p));
    ERW_REQUIRE(ConfigError, q >= 0.0 && q <= 1.0,
                "first-step probability q must lie in [0,1], got " + std::to_string(q));
    ERW_REQUIRE(ConfigError, horizon >= 1,
                "horizon must be >= 1, got " + std::to_string(horizon));
    ERW_REQUIRE(ConfigError, horizon <= kMaxHorizon,
                "horizon above 2^62 is not supported");
  }
};

struct WalkState {
  std::int64_t n = 0;
  std::int64_t s = 0;
  bool keep_history = false;

  bool consistent() const noexcept {
    const std::int64_t mag = s < 0 ? -s : s;
    return mag <= n && ((n - s) % 2 == 0);
  }
};

enum class Sampler { urn, memory };

/// P(step n+1 = +1 | S(n) = s) for n >= 1. A uniformly chosen past step is
/// +1 with probability (n+s)/(2n) and is then repeated with probability p.
inline double step_up_probability(double p, std::int64_t s, std::int64_t n) {
  ERW_REQUIRE(ConfigError, n >= 1,
              "step law is defined for n >= 1; the first step follows q");
  ERW_REQUIRE(ConfigError, (s < 0 ? -s : s) <= n, "|s| must not exceed n");
  return 0.5 + (2.0 * p - 1.0) * static_cast<double>(s) /
                   (2.0 * static_cast<double>(n));
}

/// Draws the next step by picking a uniform past index and repeating it with
/// probability p (reversing it otherwise). O(n) memory form.
template <class Urbg>
int sample_step_memory(Urbg& rng, std::span<const std::int8_t> history, double p) {
  ERW_REQUIRE(ConfigError, !history.empty(), "step history must be nonempty");
  std::uniform_int_distribution<std::size_t> pick(0, history.size() - 1);
  const int past = history[pick(rng)];
  std::bernoulli_distribution repeat(p);
  return repeat(rng) ? past : -past;
}

/// O(1) memory equivalent of sample_step_memory, driven by (s, n) only.
inline int sample_step_urn(Rng& rng, double p, std::int64_t s, std::int64_t n) {
  return rng.uniform() < step_up_probability(p, s, n) ? 1 : -1;
}

/// Drives one replica, calling visit(n, S(n)) for n = 1..horizon.
/// Returns S(horizon). The urn branch is the hot loop of every ensemble.
template <class Visit>
std::int64_t run_walk(const WalkParams& params, Rng& rng, Sampler sampler,
                      Visit&& visit) {
  std::int64_t s = rng.uniform() < params.q ? 1 : -1;
  visit(std::int64_t{1}, s);
  const std::int64_t horizon = params.horizon;
  if (sampler == Sampler::urn) {
    if (params.p == 0.75) {
      // j uniform on [0, 4n) from the high word of r * 4n; up iff j < 2n + s.
      for (std::int64_t n = 1; n < horizon; ++n) {
        const auto range = static_cast<unsigned __int128>(4 * n);
        const auto j = static_cast<std::int64_t>((rng() * range) >> 64);
        s += (j < 2 * n + s) ? 1 : -1;
        visit(n + 1, s);
      }
    } else if (params.p == 0.5) {
      for (std::int64_t n = 1; n < horizon; ++n) {
        s += (rng() >> 63) ? 1 : -1;
        visit(n + 1, s);
      }
    } else {
      // up iff u 2n < n + c s, solved for s so that the floating-point work
      // stays off the dependency chain through s.
      const double c = 2.0 * params.p - 1.0;
      const double inv_c = 1.0 / c;
      constexpr double lim = 0x1p62;
      double dn = 1.0;
      const bool positive = c > 0.0;
      for (std::int64_t n = 1; n < horizon; ++n) {
        const double raw = (rng.uniform() * (dn + dn) - dn) * inv_c;
        dn += 1.0;
        // c > 0: up iff raw < s.  c < 0: up iff raw > s.
        const double t = std::clamp(positive ? std::floor(raw) : std::ceil(raw), -lim, lim);
        const auto ti = static_cast<std::int64_t>(t);
        const bool up = positive ? ti < s : ti > s;
        s += up ? 1 : -1;
        visit(n + 1, s);
      }
    }
  } else {
    std::vector<std::int8_t> history;
    history.reserve(static_cast<std::size_t>(horizon));
    history.push_back(static_cast<std::int8_t>(s));
    for (std::int64_t n = 1; n < horizon; ++n) {
      const int step = sample_step_memory(rng, std::span<const std::int8_t>(history),
                                          params.p);
      history.push_back(static_cast<std::int8_t>(step));
      s += step;
      visit(n + 1, s);
    }
  }
  return s;
}

/// Table of a_n = Gamma(n)/Gamma(n+1/2) (a_0 = 0) and A_n = sum_{i<=n} a_i^2.
class Coefficients {
public:
  Coefficients() : a_{0.0}, a_sq_prefix_{0.0} {}

  /// Builds a_1..a_max by a_{n+1} = a_n n/(n+1/2) from a_1 = 2/sqrt(pi).
  explicit Coefficients(std::int64_t max_index) : Coefficients() {
    ERW_REQUIRE(ConfigError, max_index >= 0, "coefficient table size must be >= 0");
    const auto count = static_cast<std::size_t>(max_index);
    a_.reserve(count + 1);
    a_sq_prefix_.reserve(count + 1);
    long double a = 2.0L / std::sqrt(std::numbers::pi_v<long double>);
    CompensatedSum<long double> total;
    for (std::size_t n = 1; n <= count; ++n) {
      a_.push_back(static_cast<double>(a));
      total += a * a;
      a_sq_prefix_.push_back(static_cast<double>(total.value()));
      const auto ln = static_cast<long double>(n);
      a = a * ln / (ln + 0.5L);
    }
  }

  std::int64_t max_index() const noexcept {
    return static_cast<std::int64_t>(a_.size()) - 1;
  }

  double a(std::int64_t n) const {
    check(n);
    return a_[static_cast<std::size_t>(n)];
  }
  /// A_n; A_0 = 0.
  double a_sq_prefix(std::int64_t n) const {
    check(n);
    return a_sq_prefix_[static_cast<std::size_t>(n)];
  }

  std::span<const double> a_values() const noexcept { return a_; }
  std::span<const double> a_sq_values() const noexcept { return a_sq_prefix_; }

private:
  void check(std::int64_t n) const {
    if (n < 0 || n > max_index())
      throw RangeError("coefficient index " + std::to_string(n) +
                       " outside table [0, " + std::to_string(max_index()) + "]");
  }
  std::vector<double> a_;
  std::vector<double> a_sq_prefix_;
};

inline Coefficients coefficients(std::int64_t max_index) {
  return Coefficients(max_index);
}

/// a_n alone, by the same recurrence, without storing the table.
inline double coefficient_at(std::int64_t n) {
  if (n <= 0) return 0.0;
  long double a = 2.0L / std::sqrt(std::numbers::pi_v<long double>);
  for (std::int64_t k = 1; k < n; ++k) {
    const auto lk = static_cast<long double>(k);
    a = a * lk / (lk + 0.5L);
  }
  return static_cast<double>(a);
}

struct MartingaleValue {
  double m = 0.0;
};

/// M(n) = a_n S(n) at the critical memory parameter.
inline MartingaleValue martingale_value(const Coefficients& coeffs, std::int64_t n,
                                        std::int64_t s) {
  ERW_REQUIRE(ConfigError, n >= 0 && (s < 0 ? -s : s) <= n, "|s| must not exceed n");
  if (n > coeffs.max_index())
    throw RangeError("martingale_value: n=" + std::to_string(n) +
                     " exceeds coefficient table");
  return {coeffs.a(n) * static_cast<double>(s)};
}

/// E[M(n)^2] for n = 0..max_n at p = 3/4. The centred increment
/// -M(n)/(2n+1) +/- a_{n+1} gives
///   E[M(n+1)^2] = (1 - (2n+1)^-2) E[M(n)^2] + a_{n+1}^2.
inline std::vector<double> second_moment_oracle(const Coefficients& coeffs,
                                                std::int64_t max_n) {
  ERW_REQUIRE(ConfigError, max_n >= 1, "second_moment_oracle needs max_n >= 1");
  if (max_n > coeffs.max_index())
    throw RangeError("second_moment_oracle: table shorter than max_n");
  std::vector<double> out(static_cast<std::size_t>(max_n) + 1, 0.0);
  long double e = 0.0L;
  for (std::int64_t n = 0; n < max_n; ++n) {
    const long double k = 2.0L * static_cast<long double>(n) + 1.0L;
    const long double a = coeffs.a(n + 1);
    e = (1.0L - 1.0L / (k * k)) * e + a * a;
    out[static_cast<std::size_t>(n) + 1] = static_cast<double>(e);
  }
  return out;
}

}  // namespace erw
