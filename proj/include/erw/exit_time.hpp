#pragma once

// Exit of Brownian motion started at y from the interval (-x, x).
//
// Mode A samples the side exactly, then the exit time given the side by
// inverting the conditional distribution function. With the interval mapped
// to (0, 1) and the start at u, the joint law of (exit at 1, tau <= t) is
//
//   small t:  F(u,t) = sum_{j>=0} erfc((2j+1-u)/sqrt(2t)) - erfc((2j+1+u)/sqrt(2t))
//   large t:  F(u,t) = u - sum_{k>=1} 2/(k pi) (-1)^{k+1} sin(k pi u) exp(-k^2 pi^2 t / 2)
//
// and the conditional law given the side is F(u,t)/u. Mode B walks a Gaussian
// grid with Brownian-bridge crossing corrections and is the independent
// check on mode A.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

#include <boost/math/special_functions/erf.hpp>

#include "erw/error.hpp"
#include "erw/rng.hpp"

namespace erw {

struct ExitProblem {
  double x = 1.0;  // half-width
  double y = 0.0;  // start, |y| < x

  void validate() const {
    ERW_REQUIRE(ConfigError, x > 0.0 && std::isfinite(x), "exit problem needs x > 0");
    ERW_REQUIRE(ConfigError, std::fabs(y) < x, "exit problem needs |y| < x");
  }
};

enum class ExitMode { spectral, discretized };

inline ExitMode parse_exit_mode(std::string_view s) {
  if (s == "A" || s == "a" || s == "spectral") return ExitMode::spectral;
  if (s == "B" || s == "b" || s == "discretized") return ExitMode::discretized;
  throw ConfigError("unknown exit sampling mode '" + std::string(s) + "' (expected A or B)");
}

inline const char* exit_mode_name(ExitMode m) { return m == ExitMode::spectral ? "A" : "B"; }

struct ExitSample {
  int side = 1;       // +1: exit at +x
  double time = 0.0;  // Brownian time units
};

/// Probability of leaving through +x: (x + y) / (2x).
inline double exit_side_probability(const ExitProblem& prob) {
  prob.validate();
  return (prob.x + prob.y) / (2.0 * prob.x);
}

/// E[tau] = x^2 - y^2.
inline double expected_exit_time(const ExitProblem& prob) {
  prob.validate();
  return prob.x * prob.x - prob.y * prob.y;
}

namespace detail {

inline constexpr double kSeriesTolerance = 1e-12;
inline constexpr double kCrossover = 0.15;
inline constexpr int kMaxTerms = 10000;

struct CdfValue {
  double cdf = 0.0;      // conditional CDF F(u,t)/u
  double density = 0.0;  // its t-derivative
};

[[noreturn]] inline void series_failure(const char* which, double u, double t, int terms) {
  std::ostringstream os;
  os << "exit-time " << which << " series did not converge (u=" << u << ", t=" << t
     << ", terms=" << terms << ")";
  throw NumericalError(os.str());
}

/// Conditional CDF and density of the exit time from (0,1) started at u,
/// given exit at 1. Normalized time units.
inline CdfValue conditional_exit_cdf(double u, double t) {
  if (t <= 0.0) return {0.0, 0.0};
  constexpr double pi = std::numbers::pi;
  if (t < kCrossover) {
    const double root = std::sqrt(2.0 * t);
    const double dens_scale = 1.0 / std::sqrt(2.0 * pi * t * t * t);
    double f = 0.0;
    double d = 0.0;
    for (int j = 0;; ++j) {
      const double a = 2.0 * j + 1.0 - u;
      const double b = 2.0 * j + 1.0 + u;
      const double ea = std::erfc(a / root);
      f += ea - std::erfc(b / root);
      d += dens_scale * (a * std::exp(-a * a / (2.0 * t)) - b * std::exp(-b * b / (2.0 * t)));
      // remaining terms are bounded by the next leading erfc
      if (std::erfc((a + 2.0) / root) < kSeriesTolerance * u) break;
      if (j > kMaxTerms) series_failure("small-time", u, t, j);
    }
    return {f / u, d / u};
  }
  double s = 0.0;
  double d = 0.0;
  for (int k = 1;; ++k) {
    const double kp = k * pi;
    const double decay = std::exp(-kp * kp * t / 2.0);
    const double sign = (k % 2) ? 1.0 : -1.0;
    const double sn = std::sin(kp * u);
    s += 2.0 / kp * sign * sn * decay;
    d += kp * sign * sn * decay;
    const double next = (k + 1) * pi;
    if (2.0 / next * std::exp(-next * next * t / 2.0) < kSeriesTolerance * u) break;
    if (k > kMaxTerms) series_failure("large-time", u, t, k);
  }
  return {1.0 - s / u, d / u};
}

/// Solves conditional_exit_cdf(u, t) = w for t by safeguarded Newton.
inline double invert_conditional_exit_cdf(double u, double w) {
  constexpr double pi = std::numbers::pi;
  // Starting point from the dominant term of whichever series applies.
  double t;
  const double lead = 2.0 * std::sin(pi * u) / (pi * u);
  if (1.0 - w < 0.5 * lead) {
    t = 2.0 / (pi * pi) * std::log(lead / (1.0 - w));
  } else {
    const double arg = std::clamp(w * u, 1e-300, 1.0);
    const double e = boost::math::erfc_inv(arg);
    t = (1.0 - u) * (1.0 - u) / (2.0 * e * e);
  }
  if (!(t > 0.0) || !std::isfinite(t)) t = (1.0 - u * u) / 3.0;

  double lo = 0.0;
  double hi = INFINITY;
  for (int it = 0; it < 200; ++it) {
    const auto [c, dens] = conditional_exit_cdf(u, t);
    const double err = c - w;
    if (err > 0.0)
      hi = std::min(hi, t);
    else
      lo = std::max(lo, t);
    if (std::fabs(err) <= 1e-15) return t;
    double next = dens > 0.0 ? t - err / dens : NAN;
    if (!(next > lo && next < hi)) next = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * t;
    if (std::fabs(next - t) <= 1e-14 * t) return next;
    t = next;
  }
  std::ostringstream os;
  os << "exit-time inversion did not converge (u=" << u << ", w=" << w << ", bracket=[" << lo
     << ", " << hi << "])";
  throw NumericalError(os.str());
}

inline ExitSample sample_spectral(const ExitProblem& prob, Rng& rng) {
  const double up = (prob.x + prob.y) / (2.0 * prob.x);
  const int side = rng.uniform() < up ? 1 : -1;
  const double u = side > 0 ? up : 1.0 - up;
  const double w = rng.uniform_open();
  const double width = 2.0 * prob.x;
  return {side, width * width * invert_conditional_exit_cdf(u, w)};
}

}  // namespace detail

/// Discretized exit (mode B). sink(t, b) receives every grid node after the
/// start, including the exit node, whose value is snapped to the barrier.
/// Exit time is the end of the step in which the crossing was detected when
/// record_nodes is set (so it coincides with a grid node), else the step
/// midpoint.
struct DiscretizedExitConfig {
  double refinement = 256.0;  // dt = (x - |y|)^2 / refinement, refinement >= 64
};

template <class Sink>
ExitSample sample_exit_discretized(const ExitProblem& prob, Rng& rng, double refinement,
                                   bool exit_on_node, Sink&& sink) {
  ERW_REQUIRE(ConfigError, refinement >= 64.0, "mode B refinement must be >= 64");
  const double x = prob.x;
  const double gap = x - std::fabs(prob.y);
  const double dt = gap * gap / refinement;
  const double sd = std::sqrt(dt);
  std::normal_distribution<double> gauss;
  double b = prob.y;
  double t = 0.0;
  for (;;) {
    const double b1 = b + sd * gauss(rng);
    t += dt;
    int side = 0;
    if (b1 >= x) {
      side = 1;
    } else if (b1 <= -x) {
      side = -1;
    } else {
      const double pu = std::exp(-2.0 * (x - b) * (x - b1) / dt);
      const double pd = std::exp(-2.0 * (x + b) * (x + b1) / dt);
      const double v = rng.uniform();
      if (v < pu)
        side = 1;
      else if (v < pu + pd)
        side = -1;
    }
    if (side != 0) {
      const double at = exit_on_node ? t : t - 0.5 * dt;
      sink(t, side * x);
      return {side, at};
    }
    sink(t, b1);
    b = b1;
  }
}

/// One exit (side, time) draw.
inline ExitSample sample_exit(const ExitProblem& prob, Rng& rng,
                              ExitMode mode = ExitMode::spectral,
                              DiscretizedExitConfig cfg = {}) {
  prob.validate();
  if (mode == ExitMode::spectral) return detail::sample_spectral(prob, rng);
  return sample_exit_discretized(prob, rng, cfg.refinement, false, [](double, double) {});
}

}  // namespace erw
