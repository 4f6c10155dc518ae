#pragma once

// Brownian embedding of the critical walk. M(n) = a_n S(n) is realized as
// B(T_n): from B(T_n) = m the next stopping time is the first exit of
// B - B(T_n) from (-m/(2n+1) - a_{n+1}, -m/(2n+1) + a_{n+1}). Recentred, that
// is an exit of (-a_{n+1}, a_{n+1}) started at y = m/(2n+1); leaving through
// the top is an up-step of the walk.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "erw/error.hpp"
#include "erw/exit_time.hpp"
#include "erw/numeric.hpp"
#include "erw/walk.hpp"

namespace erw {

struct EmbeddingState {
  std::int64_t n = 0;
  std::int64_t s = 0;        // embedded walk position, m / a_n
  double m = 0.0;            // M(n) = B(T_n)
  double t = 0.0;            // T_n
  double a_n = 0.0;
  double a_sq_prefix = 0.0;  // A_n
};

struct EmbeddingOptions {
  ExitMode mode = ExitMode::spectral;
  DiscretizedExitConfig discretized{};
};

/// Exit problem for the step n -> n+1 from the state at n.
inline ExitProblem embedding_exit_problem(const Coefficients& coeffs, std::int64_t n, double m) {
  const double x = coeffs.a(n + 1);
  const double y = m / (2.0 * static_cast<double>(n) + 1.0);
  return {x, y};
}

namespace detail {
inline void check_embedding_params(const WalkParams& params, const Coefficients& coeffs) {
  params.validate();
  ERW_REQUIRE(ConfigError, params.p == 0.75, "the embedding is defined at p = 3/4 only");
  ERW_REQUIRE(ConfigError, params.q == 0.5,
              "the embedding starts with a symmetric exit, so q must be 1/2");
  if (coeffs.max_index() < params.horizon)
    throw RangeError("coefficient table (" + std::to_string(coeffs.max_index()) +
                     ") shorter than horizon " + std::to_string(params.horizon));
}
}  // namespace detail

/// Runs the embedding chain, calling visit(state, delta_t) for n = 1..horizon.
template <class Visit>
EmbeddingState embed_walk(const WalkParams& params, const Coefficients& coeffs, Rng& rng,
                          const EmbeddingOptions& opts, Visit&& visit) {
  detail::check_embedding_params(params, coeffs);
  EmbeddingState st;
  CompensatedSum<long double> clock;
  for (std::int64_t n = 0; n < params.horizon; ++n) {
    const auto prob = embedding_exit_problem(coeffs, n, st.m);
    const auto ex = sample_exit(prob, rng, opts.mode, opts.discretized);
    clock += ex.time;
    st.n = n + 1;
    st.s += ex.side;
    st.a_n = coeffs.a(st.n);
    st.m = st.a_n * static_cast<double>(st.s);
    st.t = static_cast<double>(clock.value());
    st.a_sq_prefix = coeffs.a_sq_prefix(st.n);
    visit(static_cast<const EmbeddingState&>(st), ex.time);
  }
  return st;
}

/// Whole chain including the state at n = 0.
inline std::vector<EmbeddingState> embed_walk(const WalkParams& params,
                                              const Coefficients& coeffs, Rng& rng,
                                              const EmbeddingOptions& opts = {}) {
  std::vector<EmbeddingState> out;
  out.reserve(static_cast<std::size_t>(params.horizon) + 1);
  out.push_back(EmbeddingState{});
  embed_walk(params, coeffs, rng, opts,
             [&](const EmbeddingState& st, double) { out.push_back(st); });
  return out;
}

// ---------------------------------------------------------------------------
// Discretized embedded path

inline constexpr std::int64_t kMaxPathHorizon = 4096;

struct DiscretePath {
  std::vector<double> t;
  std::vector<double> b;
  std::vector<std::size_t> stopping_node;  // node index of T_n, n = 0..horizon
};

struct EmbeddedPath {
  std::vector<EmbeddingState> states;  // n = 0..horizon
  DiscretePath path;
  double refinement = 64.0;
};

/// Embedding driven by the discretized sampler with every grid node kept, so
/// each T_n is a grid node and B(T_n) = a_n S(n) exactly.
inline EmbeddedPath embed_walk_with_path(const WalkParams& params, const Coefficients& coeffs,
                                         Rng& rng, double refinement = 64.0) {
  detail::check_embedding_params(params, coeffs);
  ERW_REQUIRE(ConfigError, params.horizon <= kMaxPathHorizon,
              "full-path excursion analysis is limited to horizon <= 4096");
  EmbeddedPath out;
  out.refinement = refinement;
  out.states.push_back(EmbeddingState{});
  auto& path = out.path;
  path.t.push_back(0.0);
  path.b.push_back(0.0);
  path.stopping_node.push_back(0);

  EmbeddingState st;
  CompensatedSum<long double> clock;
  for (std::int64_t n = 0; n < params.horizon; ++n) {
    const auto prob = embedding_exit_problem(coeffs, n, st.m);
    const double start = static_cast<double>(clock.value());
    const double shift = st.m - prob.y;
    const auto ex = sample_exit_discretized(prob, rng, refinement, true, [&](double dt, double z) {
      path.t.push_back(start + dt);
      path.b.push_back(shift + z);
    });
    clock += ex.time;
    st.n = n + 1;
    st.s += ex.side;
    st.a_n = coeffs.a(st.n);
    st.m = st.a_n * static_cast<double>(st.s);
    st.t = static_cast<double>(clock.value());
    st.a_sq_prefix = coeffs.a_sq_prefix(st.n);
    path.t.back() = st.t;
    path.b.back() = st.m;
    path.stopping_node.push_back(path.t.size() - 1);
    out.states.push_back(st);
  }
  return out;
}

// ---------------------------------------------------------------------------
// alpha(t) = a_{n+1} on [T_n, T_{n+1})

class AlphaProcess {
public:
  AlphaProcess(std::vector<double> breakpoints, std::vector<double> values)
      : breaks_(std::move(breakpoints)), values_(std::move(values)) {
    ERW_REQUIRE(ConfigError, !breaks_.empty() && breaks_.size() == values_.size(),
                "alpha process needs one value per breakpoint");
  }

  /// Right-continuous; defined on [T_0, T_N].
  double operator()(double t) const {
    if (t < breaks_.front() || t > breaks_.back())
      throw RangeError("alpha(t): t=" + std::to_string(t) + " outside [T_0, T_N]");
    const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
    return values_[static_cast<std::size_t>(it - breaks_.begin()) - 1];
  }

  /// -2 log alpha(t) / t, which tends to 1 along typical paths.
  double asymptotic_check(double t) const {
    ERW_REQUIRE(ConfigError, t > 0.0, "asymptotic check needs t > 0");
    return -2.0 * std::log((*this)(t)) / t;
  }

  std::span<const double> breakpoints() const noexcept { return breaks_; }
  std::span<const double> values() const noexcept { return values_; }

private:
  std::vector<double> breaks_;  // T_0 .. T_N
  std::vector<double> values_;  // a_1 .. a_{N+1}
};

inline AlphaProcess alpha_process(std::span<const EmbeddingState> states,
                                  const Coefficients& coeffs) {
  ERW_REQUIRE(ConfigError, !states.empty(), "alpha process needs at least one state");
  std::vector<double> b, v;
  b.reserve(states.size());
  v.reserve(states.size());
  for (const auto& st : states) {
    b.push_back(st.t);
    if (st.n + 1 > coeffs.max_index())
      throw RangeError("alpha process: coefficient table lacks a_" + std::to_string(st.n + 1));
    v.push_back(coeffs.a(st.n + 1));
  }
  return AlphaProcess(std::move(b), std::move(v));
}

// ---------------------------------------------------------------------------
// Excursions of the discretized path

struct ExcursionInterval {
  double l = 0.0;
  double r = 0.0;
  double height = 0.0;
  double alpha_at_l = 0.0;
  bool counts = false;
};

/// Splits the path on [0, horizon_time] at its zeros: exact zero nodes, and
/// sign changes between neighbouring nodes located by linear interpolation.
/// Each grid step must not exceed alpha^2 / min_refinement at its left node.
inline std::vector<ExcursionInterval> extract_excursions(const DiscretePath& path,
                                                         const AlphaProcess& alpha,
                                                         double horizon_time,
                                                         double min_refinement = 16.0) {
  ERW_REQUIRE(ConfigError, path.t.size() == path.b.size() && !path.t.empty(),
              "malformed path");
  for (std::size_t i = 1; i < path.t.size() && path.t[i] <= horizon_time; ++i) {
    const double a = alpha(path.t[i - 1]);
    const double allowed = a * a / min_refinement;
    const double dt = path.t[i] - path.t[i - 1];
    if (dt > allowed)
      throw ConfigError("grid too coarse for excursion counting at t=" +
                        std::to_string(path.t[i - 1]) + ": dt " + std::to_string(dt) +
                        ", required <= " + std::to_string(allowed));
  }

  std::vector<ExcursionInterval> out;
  double left = path.t[0];
  double height = 0.0;
  const auto close = [&](double right) {
    if (height > 0.0) {
      ExcursionInterval ex;
      ex.l = left;
      ex.r = right;
      ex.height = height;
      ex.alpha_at_l = alpha(left);
      ex.counts = ex.height >= ex.alpha_at_l;
      out.push_back(ex);
    }
  };
  for (std::size_t i = 1; i < path.t.size() && path.t[i] <= horizon_time; ++i) {
    const double b0 = path.b[i - 1];
    const double b1 = path.b[i];
    if (b1 == 0.0) {
      close(path.t[i]);
      left = path.t[i];
      height = 0.0;
    } else if (b0 != 0.0 && ((b0 > 0.0) != (b1 > 0.0))) {
      const double tz = path.t[i - 1] + (path.t[i] - path.t[i - 1]) * b0 / (b0 - b1);
      close(tz);
      left = tz;
      height = std::fabs(b1);
    } else {
      height = std::max(height, std::fabs(b1));
    }
  }
  return out;
}

/// Excursions inside [0, horizon_time] whose height reaches alpha at their
/// left end.
inline std::int64_t count_qualifying_excursions(const DiscretePath& path,
                                                const AlphaProcess& alpha, double horizon_time,
                                                double min_refinement = 16.0) {
  const auto ex = extract_excursions(path, alpha, horizon_time, min_refinement);
  return std::count_if(ex.begin(), ex.end(), [](const ExcursionInterval& e) { return e.counts; });
}

struct ZeroInclusionReport {
  std::int64_t walk_zeros = 0;
  std::int64_t walk_zeros_missed = 0;    // T_n with S(n) = 0 that is not a path zero
  std::int64_t path_zeros = 0;
  std::int64_t path_zeros_outside = 0;   // path zero outside every [T_n, T_{n+1}) with S(n) = 0
};

/// Checks {T_n : S(n) = 0} within the path zeros, which in turn lie within
/// the union of [T_n, T_{n+1}) over S(n) = 0.
inline ZeroInclusionReport check_zero_inclusion(const EmbeddedPath& ep) {
  ZeroInclusionReport rep;
  const auto& path = ep.path;
  const auto& states = ep.states;
  for (std::size_t n = 1; n < states.size(); ++n) {
    if (states[n].s != 0) continue;
    ++rep.walk_zeros;
    if (path.b[path.stopping_node[n]] != 0.0) ++rep.walk_zeros_missed;
  }
  std::vector<double> breaks;
  breaks.reserve(states.size());
  for (const auto& st : states) breaks.push_back(st.t);
  const auto inside_zero_window = [&](double tz) {
    const auto it = std::upper_bound(breaks.begin(), breaks.end(), tz);
    if (it == breaks.begin()) return false;
    const auto k = static_cast<std::size_t>(it - breaks.begin()) - 1;
    return states[k].s == 0;
  };
  for (std::size_t i = 1; i < path.t.size(); ++i) {
    const double b0 = path.b[i - 1];
    const double b1 = path.b[i];
    std::optional<double> tz;
    if (b1 == 0.0)
      tz = path.t[i];
    else if (b0 != 0.0 && ((b0 > 0.0) != (b1 > 0.0)))
      tz = path.t[i - 1] + (path.t[i] - path.t[i - 1]) * b0 / (b0 - b1);
    if (!tz) continue;
    ++rep.path_zeros;
    if (!inside_zero_window(*tz)) ++rep.path_zeros_outside;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Concentration diagnostics
//
// V(n) = sum_{j=1}^{n-1} B(T_j)^2 / (4 (j+1/2)^2) is the compensator of the
// conditional exit-time defect, so N(n) = T_n - A_n + V(n) is a martingale.

struct EmbeddingDiagnostics {
  std::int64_t n = 0;
  double v = 0.0;
  double nn = 0.0;                // N(n)
  double t_minus_a = 0.0;         // T_n - A_n
  double sup_abs_t_minus_a = 0.0; // sup_{l<=n} |T_l - A_l|
  double sup_n_sq = 0.0;          // sup_{l<=n} N(l)^2
};

class DiagnosticsAccumulator {
public:
  void add(const EmbeddingState& st) {
    ERW_REQUIRE(ConfigError, st.n == d_.n + 1, "diagnostics need consecutive states");
    d_.n = st.n;
    d_.v = pending_v_;
    d_.t_minus_a = st.t - st.a_sq_prefix;
    d_.nn = d_.t_minus_a + d_.v;
    d_.sup_abs_t_minus_a = std::max(d_.sup_abs_t_minus_a, std::fabs(d_.t_minus_a));
    d_.sup_n_sq = std::max(d_.sup_n_sq, d_.nn * d_.nn);
    const double k = static_cast<double>(st.n) + 0.5;
    pending_v_ += st.m * st.m / (4.0 * k * k);
  }
  const EmbeddingDiagnostics& current() const noexcept { return d_; }

private:
  EmbeddingDiagnostics d_;
  double pending_v_ = 0.0;
};

inline EmbeddingDiagnostics diagnostics(std::span<const EmbeddingState> states) {
  DiagnosticsAccumulator acc;
  for (const auto& st : states)
    if (st.n > 0) acc.add(st);
  return acc.current();
}

/// Indicator of sup_{l<=n} |T_l - A_l| >= eps log n for each eps.
inline std::vector<bool> concentration_report(const EmbeddingDiagnostics& d,
                                              std::span<const double> eps) {
  ERW_REQUIRE(ConfigError, d.n >= 2, "concentration report needs n >= 2");
  const double ln = std::log(static_cast<double>(d.n));
  std::vector<bool> out;
  out.reserve(eps.size());
  for (double e : eps) out.push_back(d.sup_abs_t_minus_a >= e * ln);
  return out;
}

}  // namespace erw
