#pragma once

// Zero statistics of a walk stream: Z(n), G(n), R. Limit-law references,
// KS distance and the tail estimator used to check them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "erw/error.hpp"
#include "erw/walk.hpp"

namespace erw {

/// Z(n) = #{1 <= k <= n : S(k) = 0}.
struct ZeroObserver {
  std::int64_t count = 0;
  void on_step(std::int64_t, std::int64_t s) noexcept { count += (s == 0); }
};

/// G(n) = max{k <= n : S(k) = 0}, with S(0) = 0 as the floor.
struct LastExitObserver {
  std::int64_t last = 0;
  void on_step(std::int64_t n, std::int64_t s) noexcept {
    if (s == 0) last = n;
  }
};

/// R = inf{k >= 1 : S(k) = 0}; empty while censored.
struct FirstReturnObserver {
  std::optional<std::int64_t> time;
  void on_step(std::int64_t n, std::int64_t s) noexcept {
    if (s == 0 && !time) time = n;
  }
};

inline ZeroObserver zero_observer() { return {}; }
inline LastExitObserver last_exit_observer() { return {}; }
inline FirstReturnObserver first_return_observer() { return {}; }

struct WalkObservables {
  std::int64_t horizon = 0;
  std::vector<std::int64_t> checkpoints;
  std::vector<std::int64_t> s;  // S at each checkpoint
  std::vector<std::int64_t> z;
  std::vector<std::int64_t> g;
  std::optional<std::int64_t> r;  // empty = censored at horizon
  double m_final = 0.0;           // M(horizon) = a_horizon S(horizon)

  bool r_censored() const noexcept { return !r.has_value(); }

  /// Survival at checkpoint j: R > checkpoints[j].
  bool survived(std::size_t j) const noexcept {
    return !r || *r > checkpoints[j];
  }

  /// Throws if any structural invariant of the record is violated.
  void check_invariants() const {
    const auto fail = [](const std::string& what) {
      throw std::logic_error("WalkObservables invariant violated: " + what);
    };
    if (z.size() != checkpoints.size() || g.size() != checkpoints.size() ||
        s.size() != checkpoints.size())
      fail("field sizes differ");
    for (std::size_t j = 0; j < checkpoints.size(); ++j) {
      const auto n = checkpoints[j];
      if (j > 0 && (checkpoints[j] < checkpoints[j - 1] || z[j] < z[j - 1] || g[j] < g[j - 1]))
        fail("not monotone across checkpoints");
      if (g[j] > n || g[j] % 2 != 0) fail("G(n) must be even and <= n");
      if ((z[j] == 0) != (g[j] == 0) || (z[j] == 0) != survived(j))
        fail("Z(n) = 0, G(n) = 0 and R > n must coincide");
      if (std::abs(s[j]) > n || (n - s[j]) % 2 != 0) fail("parity of S(n)");
    }
    if (r && (*r % 2 != 0 || *r > horizon)) fail("R must be even and <= horizon");
  }
};

struct SimulationOptions {
  Sampler sampler = Sampler::urn;
  /// Optional shared table; a_horizon is recomputed by recurrence otherwise.
  const Coefficients* coeffs = nullptr;
};

/// Streams one replica, recording S, Z, G at each checkpoint and R.
/// extra observers receive on_step(n, S(n)) for every step.
template <class... Extra>
WalkObservables simulate_walk(const WalkParams& params,
                              std::span<const std::int64_t> checkpoints,
                              Rng& rng, const SimulationOptions& options = {},
                              Extra&... extra) {
  params.validate();
  for (std::size_t j = 0; j < checkpoints.size(); ++j) {
    ERW_REQUIRE(ConfigError, checkpoints[j] >= 1,
                "checkpoints must be >= 1");
    ERW_REQUIRE(ConfigError, checkpoints[j] <= params.horizon,
                "checkpoint " + std::to_string(checkpoints[j]) + " beyond horizon " +
                    std::to_string(params.horizon));
    ERW_REQUIRE(ConfigError, j == 0 || checkpoints[j] >= checkpoints[j - 1],
                "checkpoints must be sorted");
  }

  WalkObservables obs;
  obs.horizon = params.horizon;
  obs.checkpoints.assign(checkpoints.begin(), checkpoints.end());
  obs.s.reserve(checkpoints.size());
  obs.z.reserve(checkpoints.size());
  obs.g.reserve(checkpoints.size());

  ZeroObserver zeros;
  LastExitObserver last;
  FirstReturnObserver first;
  std::size_t next = 0;
  const std::size_t n_cp = checkpoints.size();
  std::int64_t next_n = n_cp ? checkpoints[0] : -1;

  const std::int64_t s_final =
      run_walk(params, rng, options.sampler, [&](std::int64_t n, std::int64_t s) {
        if (s == 0) {
          ++zeros.count;
          last.last = n;
          if (!first.time) first.time = n;
        }
        (extra.on_step(n, s), ...);
        while (n == next_n) {
          obs.s.push_back(s);
          obs.z.push_back(zeros.count);
          obs.g.push_back(last.last);
          ++next;
          next_n = next < n_cp ? checkpoints[next] : -1;
        }
      });

  obs.r = first.time;
  const double a_h = options.coeffs && options.coeffs->max_index() >= params.horizon
                         ? options.coeffs->a(params.horizon)
                         : coefficient_at(params.horizon);
  obs.m_final = a_h * static_cast<double>(s_final);
  return obs;
}

inline WalkObservables simulate_walk(const WalkParams& params,
                                     std::span<const std::int64_t> checkpoints,
                                     const SimulationOptions& options = {}) {
  Rng rng(params.seed);
  return simulate_walk(params, checkpoints, rng, options);
}

/// First return time within the horizon, stopping as soon as it occurs.
inline std::optional<std::int64_t> first_return_time(const WalkParams& params, Rng& rng) {
  params.validate();
  std::int64_t s = rng.uniform() < params.q ? 1 : -1;
  const std::int64_t horizon = params.horizon;
  if (params.p == 0.75) {
    for (std::int64_t n = 1; n < horizon; ++n) {
      const auto range = static_cast<unsigned __int128>(4 * n);
      const auto j = static_cast<std::int64_t>((rng() * range) >> 64);
      s += (j < 2 * n + s) ? 1 : -1;
      if (s == 0) return n + 1;
    }
    return std::nullopt;
  }
  for (std::int64_t n = 1; n < horizon; ++n) {
    s += sample_step_urn(rng, params.p, s, n);
    if (s == 0) return n + 1;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Reference laws

/// lim P(Z(n) <= n^a) = (2/pi) arcsin(sqrt(2a)), a in [0, 1/2]; clamped outside.
inline double arcsine_cdf_half(double a) noexcept {
  if (!(a > 0.0)) return 0.0;
  if (a >= 0.5) return 1.0;
  return 2.0 / std::numbers::pi * std::asin(std::sqrt(2.0 * a));
}

/// Arcsine law on [0, 1]; clamped outside.
inline double arcsine_cdf(double x) noexcept {
  if (!(x > 0.0)) return 0.0;
  if (x >= 1.0) return 1.0;
  return 2.0 / std::numbers::pi * std::asin(std::sqrt(x));
}

class EmpiricalDistribution {
public:
  explicit EmpiricalDistribution(std::vector<double> values) : v_(std::move(values)) {
    ERW_REQUIRE(ConfigError, !v_.empty(), "empirical distribution needs at least one sample");
    std::sort(v_.begin(), v_.end());
  }

  std::size_t size() const noexcept { return v_.size(); }
  std::span<const double> sorted() const noexcept { return v_; }

  /// F(x) = #{v <= x} / n.
  double cdf(double x) const noexcept {
    const auto it = std::upper_bound(v_.begin(), v_.end(), x);
    return static_cast<double>(it - v_.begin()) / static_cast<double>(v_.size());
  }

  /// Type-7 quantile (linear interpolation between order statistics).
  double quantile(double prob) const noexcept {
    const double h = (static_cast<double>(v_.size()) - 1.0) * std::clamp(prob, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v_.size() - 1);
    return v_[lo] + (h - static_cast<double>(lo)) * (v_[hi] - v_[lo]);
  }

  double median() const noexcept { return quantile(0.5); }

private:
  std::vector<double> v_;
};

/// sup |F_hat - F| over the sorted sample, checking both one-sided plotting
/// positions i/n and (i-1)/n at every order statistic.
template <class Cdf>
double ks_distance_sorted(std::span<const double> sorted, Cdf&& cdf) {
  ERW_REQUIRE(ConfigError, !sorted.empty(), "ks_distance needs a nonempty sample");
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    d = std::max(d, std::max(static_cast<double>(i + 1) / n - f,
                             f - static_cast<double>(i) / n));
  }
  return d;
}

template <class Cdf>
double ks_distance(const EmpiricalDistribution& emp, Cdf&& cdf) {
  return ks_distance_sorted(emp.sorted(), std::forward<Cdf>(cdf));
}

// ---------------------------------------------------------------------------
// Log-scale statistics on the geometric checkpoint grid n^t

/// round(n_base^t) for each t; t must lie in [0, 1].
inline std::vector<std::int64_t> geometric_checkpoints(std::int64_t n_base,
                                                       std::span<const double> t_grid) {
  ERW_REQUIRE(ConfigError, n_base >= 2, "n_base must be >= 2");
  std::vector<std::int64_t> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) {
    ERW_REQUIRE(ConfigError, t >= 0.0 && t <= 1.0, "t must lie in [0, 1]");
    out.push_back(std::max<std::int64_t>(
        1, std::llround(std::pow(static_cast<double>(n_base), t))));
  }
  return out;
}

inline std::vector<double> uniform_t_grid(int points = 21) {
  ERW_REQUIRE(ConfigError, points >= 2, "t grid needs at least two points");
  std::vector<double> t(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) t[static_cast<std::size_t>(i)] = static_cast<double>(i) / (points - 1);
  return t;
}

struct ScaledPoint {
  double t = 0.0;
  std::int64_t n = 0;
  std::optional<double> log_z;      // log Z(n^t) / log n_base; empty when Z = 0
  std::optional<double> log_g;      // log G(n^t) / log n_base; empty when G = 0
  std::optional<double> log_ratio;  // log Z / log G; only when Z > 1 and G > 1, t > 0
  bool no_return = false;           // Z = 0, i.e. R > n^t
};

/// log Z(n^t) / log G(n^t) for one checkpoint. t = 0 is rejected: both
/// arguments are degenerate there.
inline std::optional<double> log_ratio_statistic(std::int64_t z, std::int64_t g, double t) {
  ERW_REQUIRE(ConfigError, t > 0.0, "log Z / log G is not defined at t = 0");
  if (z > 1 && g > 1)
    return std::log(static_cast<double>(z)) / std::log(static_cast<double>(g));
  return std::nullopt;
}

/// Per-checkpoint triples for one replica. The observables' checkpoints must
/// contain round(n_base^t) for every t in t_grid.
inline std::vector<ScaledPoint> scaled_statistics(const WalkObservables& obs,
                                                  std::int64_t n_base,
                                                  std::span<const double> t_grid) {
  const auto targets = geometric_checkpoints(n_base, t_grid);
  const double log_base = std::log(static_cast<double>(n_base));
  std::vector<ScaledPoint> out;
  out.reserve(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    const auto it = std::lower_bound(obs.checkpoints.begin(), obs.checkpoints.end(), targets[i]);
    ERW_REQUIRE(ConfigError, it != obs.checkpoints.end() && *it == targets[i],
                "observables lack checkpoint n=" + std::to_string(targets[i]));
    const auto j = static_cast<std::size_t>(it - obs.checkpoints.begin());
    ScaledPoint pt;
    pt.t = t_grid[i];
    pt.n = targets[i];
    const auto z = obs.z[j];
    const auto g = obs.g[j];
    pt.no_return = (z == 0);
    if (z > 0) pt.log_z = std::log(static_cast<double>(z)) / log_base;
    if (g > 0) pt.log_g = std::log(static_cast<double>(g)) / log_base;
    if (pt.t > 0.0) pt.log_ratio = log_ratio_statistic(z, g, pt.t);
    out.push_back(pt);
  }
  return out;
}

// ---------------------------------------------------------------------------
// First-return tail

/// (2/pi) sqrt(2 / log n): asymptotic P(R > n) at the critical point.
inline double tail_theory(double n) {
  ERW_REQUIRE(ConfigError, n > 1.0, "tail theory needs n > 1");
  return 2.0 / std::numbers::pi * std::sqrt(2.0 / std::log(n));
}

inline constexpr double kTailConstant = 2.0 * std::numbers::sqrt2 / std::numbers::pi;

struct Interval {
  double low = 0.0;
  double high = 1.0;
};

/// Wilson score interval for a binomial proportion.
inline Interval wilson_interval(std::int64_t successes, std::int64_t trials, double confidence) {
  ERW_REQUIRE(ConfigError, trials >= 1, "Wilson interval needs at least one trial");
  ERW_REQUIRE(ConfigError, successes >= 0 && successes <= trials, "successes out of range");
  ERW_REQUIRE(ConfigError, confidence > 0.0 && confidence < 1.0, "confidence must lie in (0,1)");
  const double z = boost::math::quantile(boost::math::normal_distribution<double>(),
                                         0.5 + confidence / 2.0);
  const double n = static_cast<double>(trials);
  const double ph = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double centre = (ph + z2 / (2.0 * n)) / (1.0 + z2 / n);
  const double half = z / (1.0 + z2 / n) * std::sqrt(ph * (1.0 - ph) / n + z2 / (4.0 * n * n));
  // clamp away rounding so that low <= ph <= high holds at the extremes
  return {std::clamp(std::min(centre - half, ph), 0.0, 1.0),
          std::clamp(std::max(centre + half, ph), 0.0, 1.0)};
}

struct TailEstimate {
  std::int64_t n = 0;
  std::int64_t survivors = 0;
  std::int64_t replicas = 0;
  double p_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 1.0;
  double theory = 0.0;

  friend bool operator==(const TailEstimate&, const TailEstimate&) = default;
};

inline TailEstimate tail_estimate(std::int64_t survivors, std::int64_t replicas, std::int64_t n,
                                  double confidence = 0.95) {
  ERW_REQUIRE(ConfigError, n > 1, "tail_estimate needs n > 1 (log n must be positive)");
  ERW_REQUIRE(ConfigError, replicas >= 1, "tail_estimate needs at least one replica");
  TailEstimate est;
  est.n = n;
  est.survivors = survivors;
  est.replicas = replicas;
  est.p_hat = static_cast<double>(survivors) / static_cast<double>(replicas);
  const auto ci = wilson_interval(survivors, replicas, confidence);
  est.ci_low = ci.low;
  est.ci_high = ci.high;
  est.theory = tail_theory(static_cast<double>(n));
  return est;
}

// ---------------------------------------------------------------------------
// Diffusive regime contrast

/// ECDF of Z(n)/sqrt(n) from per-replica zero counts at p < 3/4.
inline EmpiricalDistribution diffusive_baseline(std::span<const std::int64_t> zero_counts,
                                                std::int64_t n, double p) {
  ERW_REQUIRE(ConfigError, p < 0.75, "diffusive baseline requires p < 3/4");
  ERW_REQUIRE(ConfigError, n >= 1, "n must be >= 1");
  std::vector<double> v;
  v.reserve(zero_counts.size());
  const double root = std::sqrt(static_cast<double>(n));
  for (auto z : zero_counts) v.push_back(static_cast<double>(z) / root);
  return EmpiricalDistribution(std::move(v));
}

}  // namespace erw
