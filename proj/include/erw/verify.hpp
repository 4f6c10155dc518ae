#pragma once

// Verification procedures behind the verify-* commands and the acceptance
// suite. Each returns a CriterionResult: named checks with observed values
// and bounds, plus table rows for the report.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "erw/embedding.hpp"
#include "erw/ensemble.hpp"
#include "erw/enumeration.hpp"
#include "erw/exit_time.hpp"
#include "erw/observables.hpp"
#include "erw/stats.hpp"
#include "erw/walk.hpp"

namespace erw {

struct Check {
  std::string name;
  double value = 0.0;
  std::string bound;
  bool ok = false;
};

struct CriterionResult {
  CriterionResult() = default;
  CriterionResult(int id_, std::string title_) : id(id_), title(std::move(title_)) {}

  int id = 0;
  std::string title;
  std::vector<Check> checks;
  std::vector<std::string> table;

  bool pass() const {
    return !checks.empty() &&
           std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.ok; });
  }
  void add(std::string name, double value, std::string bound, bool ok) {
    checks.push_back({std::move(name), value, std::move(bound), ok});
  }
};

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

/// Default bounds; every field can be overridden from the command line.
struct Tolerances {
  double oracle_se = 4.0;
  double oracle_exact = 1e-12;
  double chi2_p_min = 1e-3;
  double moment_rel = 0.05;
  double ks_g_max = 0.15;
  double ks_z_max = 0.20;
  double quarter_dev = 0.15;
  double ratio_median_low = 0.40;
  double ratio_median_high = 0.60;
  double ratio_band_low = 0.35;
  double ratio_band_high = 0.65;
  double ratio_band_share = 0.60;
  double tail_low = 0.55;
  double tail_high = 1.35;
  double drift_se = 3.0;
  double exit_mean_rel = 0.01;
  double exit_var_rel = 0.03;
  double t_minus_a_max = 0.05;
  double sup_n_factor_low = 5.0;
  double sup_n_factor_high = 20.0;
  double excursion_match_min = 0.99;
};

// ---------------------------------------------------------------------------
// 1. enumeration oracle against simulation

struct OracleConfig {
  std::uint64_t seed = 1;
  std::int64_t replicas = 1000000;
  int n = 12;
};

inline CriterionResult verify_oracle_exactness(const OracleConfig& cfg, const Tolerances& tol = {}) {
  CriterionResult res{1, "oracle exactness: simulated laws of S(n), Z(n), G(n), R vs enumeration"};
  const int nmax = cfg.n;
  std::vector<std::int64_t> cps(static_cast<std::size_t>(nmax));
  for (int k = 1; k <= nmax; ++k) cps[static_cast<std::size_t>(k - 1)] = k;
  // counts[n][cell]
  std::vector<std::vector<std::int64_t>> s_cnt(nmax + 1), z_cnt(nmax + 1), g_cnt(nmax + 1);
  for (int k = 1; k <= nmax; ++k) {
    s_cnt[k].assign(2 * static_cast<std::size_t>(k) + 1, 0);
    z_cnt[k].assign(static_cast<std::size_t>(k) / 2 + 1, 0);
    g_cnt[k].assign(static_cast<std::size_t>(k) + 1, 0);
  }
  std::vector<std::int64_t> r_cnt(static_cast<std::size_t>(nmax) + 1, 0);
  std::int64_t r_cens = 0;
  const WalkParams params{0.75, 0.5, nmax, 0};
  for (std::int64_t i = 0; i < cfg.replicas; ++i) {
    Rng rng = derive_stream(cfg.seed, static_cast<std::uint64_t>(i));
    const auto obs = simulate_walk(params, cps, rng);
    for (int k = 1; k <= nmax; ++k) {
      const auto j = static_cast<std::size_t>(k - 1);
      ++s_cnt[k][static_cast<std::size_t>(obs.s[j] + k)];
      ++z_cnt[k][static_cast<std::size_t>(obs.z[j])];
      ++g_cnt[k][static_cast<std::size_t>(obs.g[j])];
    }
    if (obs.r) ++r_cnt[static_cast<std::size_t>(*obs.r)]; else ++r_cens;
  }

  const double N = static_cast<double>(cfg.replicas);
  double worst = 0.0;
  std::int64_t cells = 0;
  std::int64_t breaches = 0;
  const auto cell = [&](double p, std::int64_t count) {
    ++cells;
    const double ph = static_cast<double>(count) / N;
    if (p <= 0.0) {
      if (count != 0) ++breaches, worst = INFINITY;
      return;
    }
    const double z = std::fabs(ph - p) / std::sqrt(p * (1.0 - p) / N);
    worst = std::max(worst, z);
    if (z > tol.oracle_se) ++breaches;
  };
  double worst_total = 0.0;
  ExactLaw law;
  for (int k = 1; k <= nmax; ++k) {
    law = exact_enumeration(0.75, 0.5, k);
    worst_total = std::max(worst_total, std::fabs(law.total - 1.0));
    for (std::size_t c = 0; c < law.s_law.size(); ++c) cell(law.s_law[c], s_cnt[k][c]);
    for (std::size_t c = 0; c < law.z_law.size(); ++c) cell(law.z_law[c], z_cnt[k][c]);
    for (std::size_t c = 0; c < law.g_law.size(); ++c) cell(law.g_law[c], g_cnt[k][c]);
  }
  for (std::size_t c = 1; c < law.r_law.size(); ++c) cell(law.r_law[c], r_cnt[c]);
  cell(law.r_censored, r_cens);

  // E[M(n+1) | history] - M(n) over every history of length n < nmax
  const Coefficients coeffs(nmax);
  double worst_mart = 0.0;
  for (int k = 1; k < nmax; ++k) {
    for (std::uint32_t mask = 0; mask < (1U << k); ++mask) {
      const auto pos = path_positions(mask, k);
      const auto s = pos.back();
      const double up = step_up_probability(0.75, s, k);
      const double next = up * coeffs.a(k + 1) * static_cast<double>(s + 1) +
                          (1.0 - up) * coeffs.a(k + 1) * static_cast<double>(s - 1);
      worst_mart = std::max(worst_mart, std::fabs(next - coeffs.a(k) * static_cast<double>(s)));
    }
  }

  res.table.push_back("cells compared: " + std::to_string(cells) + ", replicas " +
                      std::to_string(cfg.replicas) + ", n <= " + std::to_string(nmax));
  res.add("cells beyond " + fmt("%g", tol.oracle_se) + " standard errors", static_cast<double>(breaches),
          "== 0", breaches == 0);
  res.table.push_back("largest |p_hat - p| / se: " + fmt("%.3f", worst));
  res.add("max |sum of enumeration probabilities - 1|", worst_total,
          "<= " + fmt("%g", tol.oracle_exact), worst_total <= tol.oracle_exact);
  res.add("max |E[M(n+1)|history] - M(n)|", worst_mart, "<= " + fmt("%g", tol.oracle_exact),
          worst_mart <= tol.oracle_exact);
  return res;
}

// ---------------------------------------------------------------------------
// 2. memory-index sampler vs urn sampler

struct SamplerConfig {
  std::uint64_t seed = 2;
  std::int64_t replicas = 100000;
  int n = 10;
};

inline constexpr std::uint64_t kMemoryStreamKey = 0x6d656d6f72790000ULL;

inline std::vector<std::int64_t> path_law_counts(Sampler sampler, std::uint64_t seed,
                                                 std::int64_t replicas, int n) {
  std::vector<std::int64_t> counts(std::size_t{1} << n, 0);
  const WalkParams params{0.75, 0.5, n, 0};
  for (std::int64_t i = 0; i < replicas; ++i) {
    Rng rng = derive_stream(seed, static_cast<std::uint64_t>(i));
    std::uint32_t mask = 0;
    std::int64_t prev = 0;
    run_walk(params, rng, sampler, [&](std::int64_t k, std::int64_t s) {
      if (s > prev) mask |= 1U << (k - 1);
      prev = s;
    });
    ++counts[mask];
  }
  return counts;
}

inline CriterionResult verify_sampler_equivalence(const SamplerConfig& cfg,
                                                  const Tolerances& tol = {}) {
  CriterionResult res{2, "sampler equivalence: memory-index vs urn on the law of S(1..n)"};
  const auto urn = path_law_counts(Sampler::urn, cfg.seed, cfg.replicas, cfg.n);
  const auto mem = path_law_counts(Sampler::memory, cfg.seed ^ kMemoryStreamKey, cfg.replicas, cfg.n);
  const auto t = stats::chi_square_homogeneity(urn, mem);
  res.table.push_back("chi-square " + fmt("%.2f", t.statistic) + " on " + fmt("%g", t.dof) + " dof");
  res.add("homogeneity p-value", t.p_value, "> " + fmt("%g", tol.chi2_p_min), t.p_value > tol.chi2_p_min);
  return res;
}

// ---------------------------------------------------------------------------
// 3. second moments

struct MomentConfig {
  std::uint64_t seed = 3;
  std::int64_t replicas = 100000;
  std::vector<std::int64_t> n_list = {1000, 10000};
};

inline CriterionResult verify_second_moments(const MomentConfig& cfg, const Tolerances& tol = {}) {
  CriterionResult res{3, "second-moment recursion: simulated E[M(n)^2] vs oracle"};
  auto ns = cfg.n_list;
  std::sort(ns.begin(), ns.end());
  const auto nmax = ns.back();
  const Coefficients coeffs(nmax);
  const auto oracle = second_moment_oracle(coeffs, nmax);
  std::vector<RunningMoments> mom(ns.size());
  const WalkParams params{0.75, 0.5, nmax, 0};
  for (std::int64_t i = 0; i < cfg.replicas; ++i) {
    Rng rng = derive_stream(cfg.seed, static_cast<std::uint64_t>(i));
    std::size_t j = 0;
    run_walk(params, rng, Sampler::urn, [&](std::int64_t n, std::int64_t s) {
      if (j < ns.size() && n == ns[j]) {
        const double m = coeffs.a(n) * static_cast<double>(s);
        mom[j++].add(m * m);
      }
    });
  }
  for (std::size_t j = 0; j < ns.size(); ++j) {
    const double o = oracle[static_cast<std::size_t>(ns[j])];
    const double rel = std::fabs(mom[j].mean() - o) / o;
    res.table.push_back("n=" + std::to_string(ns[j]) + "  simulated " + fmt("%.5f", mom[j].mean()) +
                        " +- " + fmt("%.5f", mom[j].std_error()) + "  oracle " + fmt("%.5f", o));
    res.add("relative error at n=" + std::to_string(ns[j]), rel, "<= " + fmt("%g", tol.moment_rel),
            rel <= tol.moment_rel);
  }
  return res;
}

// ---------------------------------------------------------------------------
// 4-5. arcsine laws and the joint ratio

struct ArcsineConfig {
  std::uint64_t seed = 4;
  std::int64_t replicas = 5000;
  std::vector<std::int64_t> n_bases = {100, 10000, 1000000};
  unsigned workers = 1;
};

struct ArcsineRun {
  std::int64_t n_base = 0;
  EnsembleSummary summary;
  const CheckpointSummary& at_one() const { return summary.per_checkpoint.back(); }
};

inline std::vector<ArcsineRun> run_arcsine_ensembles(const ArcsineConfig& cfg) {
  std::vector<ArcsineRun> runs;
  for (auto nb : cfg.n_bases) {
    EnsembleSpec spec;
    spec.master_seed = cfg.seed;
    spec.replicas = cfg.replicas;
    spec.n_base = nb;
    spec.workers = cfg.workers;
    runs.push_back({nb, run_ensemble(spec)});
  }
  return runs;
}

inline CriterionResult verify_arcsine_laws(const std::vector<ArcsineRun>& runs,
                                           const Tolerances& tol = {}) {
  CriterionResult res{4, "arcsine laws for log G(n)/log n and log Z(n)/log n"};
  res.table.push_back("n_base      replicas  G>0    KS(log G/log n)  Z>0    KS(log Z/log n)  P(Z<=n^1/4)");
  for (const auto& r : runs) {
    const auto& c = r.at_one();
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-10lld  %-8lld  %-5lld  %-15.4f  %-5lld  %-15.4f  %.4f",
                  static_cast<long long>(r.n_base), static_cast<long long>(r.summary.provenance.replicas),
                  static_cast<long long>(c.g->count), c.g->ks.value_or(NAN),
                  static_cast<long long>(c.z->count), c.z->ks.value_or(NAN),
                  static_cast<double>(*c.z_below_quarter) / static_cast<double>(r.summary.provenance.replicas));
    res.table.push_back(buf);
  }
  res.table.push_back("finite-dimensional KS across t at the largest n_base (log G, log Z vs scaled references):");
  for (const auto& c : runs.back().summary.per_checkpoint) {
    if (c.t <= 0.0) continue;
    char buf[128];
    std::snprintf(buf, sizeof buf, "  t=%.2f  n=%-8lld  KS_G=%.4f  KS_Z=%.4f", c.t,
                  static_cast<long long>(c.n), c.g->ks.value_or(NAN), c.z->ks.value_or(NAN));
    res.table.push_back(buf);
  }
  const auto& last = runs.back().at_one();
  const double ks_g = last.g->ks.value_or(1.0);
  const double ks_z = last.z->ks.value_or(1.0);
  const std::string nb = std::to_string(runs.back().n_base);
  res.add("KS(log G/log n, arcsine) at n_base=" + nb, ks_g, "<= " + fmt("%g", tol.ks_g_max), ks_g <= tol.ks_g_max);
  res.add("KS(log Z/log n, half arcsine) at n_base=" + nb, ks_z, "<= " + fmt("%g", tol.ks_z_max), ks_z <= tol.ks_z_max);
  for (std::size_t i = 1; i < runs.size(); ++i) {
    const auto& a = runs[i - 1].at_one();
    const auto& b = runs[i].at_one();
    const std::string span = std::to_string(runs[i - 1].n_base) + " -> " + std::to_string(runs[i].n_base);
    const double dg = b.g->ks.value_or(1.0) - a.g->ks.value_or(1.0);
    const double dz = b.z->ks.value_or(1.0) - a.z->ks.value_or(1.0);
    res.add("change of KS(log G) " + span, dg, "< 0", dg < 0.0);
    res.add("change of KS(log Z) " + span, dz, "< 0", dz < 0.0);
  }
  const double pq = static_cast<double>(*last.z_below_quarter) /
                    static_cast<double>(runs.back().summary.provenance.replicas);
  res.add("|P(Z(n) <= n^1/4) - 1/2| at n_base=" + nb, std::fabs(pq - 0.5),
          "<= " + fmt("%g", tol.quarter_dev), std::fabs(pq - 0.5) <= tol.quarter_dev);
  return res;
}

inline CriterionResult verify_joint_ratio(const std::vector<ArcsineRun>& runs,
                                          const Tolerances& tol = {}) {
  CriterionResult res{5, "joint ratio log Z(n)/log G(n) concentrates at 1/2"};
  res.table.push_back("n_base      kept   excluded  median   q25      q75      IQR      share in band");
  for (const auto& r : runs) {
    const auto& c = *r.at_one().ratio;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-10lld  %-5lld  %-8lld  %-7.4f  %-7.4f  %-7.4f  %-7.4f  %.4f",
                  static_cast<long long>(r.n_base), static_cast<long long>(c.count),
                  static_cast<long long>(c.excluded), c.median.value_or(NAN), c.q25.value_or(NAN),
                  c.q75.value_or(NAN), c.q75.value_or(NAN) - c.q25.value_or(NAN),
                  c.band_fraction.value_or(NAN));
    res.table.push_back(buf);
  }
  const auto& last = *runs.back().at_one().ratio;
  const std::string nb = std::to_string(runs.back().n_base);
  const double med = last.median.value_or(NAN);
  res.add("median at n_base=" + nb, med,
          "in [" + fmt("%g", tol.ratio_median_low) + ", " + fmt("%g", tol.ratio_median_high) + "]",
          med >= tol.ratio_median_low && med <= tol.ratio_median_high);
  const double share = last.band_fraction.value_or(0.0);
  res.add("share in [" + fmt("%g", tol.ratio_band_low) + ", " + fmt("%g", tol.ratio_band_high) +
              "] at n_base=" + nb,
          share, ">= " + fmt("%g", tol.ratio_band_share), share >= tol.ratio_band_share);
  if (runs.size() >= 2) {
    const auto& prev = *runs[runs.size() - 2].at_one().ratio;
    const double iqr_prev = prev.q75.value_or(NAN) - prev.q25.value_or(NAN);
    const double iqr_last = last.q75.value_or(NAN) - last.q25.value_or(NAN);
    res.add("change of IQR " + std::to_string(runs[runs.size() - 2].n_base) + " -> " + nb,
            iqr_last - iqr_prev, "< 0", iqr_last < iqr_prev);
  }
  return res;
}

// ---------------------------------------------------------------------------
// 6. first-return tail

struct TailConfig {
  std::uint64_t seed = 6;
  std::int64_t replicas = 100000;
  std::vector<std::int64_t> n_list = {100, 10000, 1000000};
  unsigned workers = 1;
};

inline EnsembleSummary run_tail_ensemble(const TailConfig& cfg) {
  auto ns = cfg.n_list;
  std::sort(ns.begin(), ns.end());
  ERW_REQUIRE(ConfigError, !ns.empty() && ns.front() >= 2, "tail n values must be >= 2");
  EnsembleSpec spec;
  spec.master_seed = cfg.seed;
  spec.replicas = cfg.replicas;
  spec.n_base = ns.back();
  spec.tail_only = true;
  spec.workers = cfg.workers;
  spec.t_grid.clear();
  const double lb = std::log(static_cast<double>(ns.back()));
  for (auto n : ns) {
    const double t = n == ns.back() ? 1.0 : std::log(static_cast<double>(n)) / lb;
    if (!spec.t_grid.empty() && t <= spec.t_grid.back()) continue;
    spec.t_grid.push_back(t);
  }
  const auto cps = geometric_checkpoints(spec.n_base, spec.t_grid);
  for (std::size_t i = 0; i < cps.size(); ++i)
    ERW_REQUIRE(ConfigError, cps[i] == ns[i],
                "n=" + std::to_string(ns[i]) + " is not reproducible on the log grid");
  return run_ensemble(spec);
}

inline CriterionResult verify_tail(const EnsembleSummary& s, const Tolerances& tol = {}) {
  CriterionResult res{6, "first-return tail: sqrt(log n) P(R > n) vs 2 sqrt(2)/pi"};
  res.table.push_back("n          survivors  p_hat     ci_low    ci_high   theory    sqrt(log n)*p_hat  2sqrt2/pi");
  std::vector<std::pair<std::int64_t, double>> scaled;
  for (const auto& c : s.per_checkpoint) {
    if (!c.tail) continue;
    const auto& t = *c.tail;
    const double x = std::sqrt(std::log(static_cast<double>(t.n))) * t.p_hat;
    scaled.emplace_back(t.n, x);
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-9lld  %-9lld  %.6f  %.6f  %.6f  %.6f  %.6f           %.6f",
                  static_cast<long long>(t.n), static_cast<long long>(t.survivors), t.p_hat,
                  t.ci_low, t.ci_high, t.theory, x, kTailConstant);
    res.table.push_back(buf);
    res.add("sqrt(log n) p_hat at n=" + std::to_string(t.n), x,
            "in [" + fmt("%g", tol.tail_low) + ", " + fmt("%g", tol.tail_high) + "]",
            x >= tol.tail_low && x <= tol.tail_high);
  }
  if (scaled.size() >= 2) {
    const double d0 = std::fabs(scaled.front().second - kTailConstant);
    const double d1 = std::fabs(scaled.back().second - kTailConstant);
    res.table.push_back("distance to 2sqrt2/pi: " + fmt("%.6f", d0) + " at n=" +
                        std::to_string(scaled.front().first) + ", " + fmt("%.6f", d1) + " at n=" +
                        std::to_string(scaled.back().first));
    res.add("distance at n=" + std::to_string(scaled.back().first) + " minus distance at n=" +
                std::to_string(scaled.front().first),
            d1 - d0, "<= 0", d1 <= d0);
  }
  return res;
}

// ---------------------------------------------------------------------------
// 7. embedding exactness

struct EmbeddingExactConfig {
  std::uint64_t seed = 7;
  std::int64_t replicas = 100000;
  int n = 10;
  std::int64_t ks_draws = 100000;
  std::int64_t moment_draws = 1000000;
  double refinement = 256.0;
};

inline CriterionResult verify_embedding_exactness(const EmbeddingExactConfig& cfg,
                                                  const Tolerances& tol = {}) {
  CriterionResult res{7, "embedding exactness: sign law, conditional drift of T, exit samplers"};
  const Coefficients coeffs(cfg.n + 1);
  const WalkParams params{0.75, 0.5, cfg.n, 0};
  std::vector<std::int64_t> counts(std::size_t{1} << cfg.n, 0);
  std::vector<RunningMoments> drift(static_cast<std::size_t>(cfg.n));
  for (std::int64_t i = 0; i < cfg.replicas; ++i) {
    Rng rng = derive_stream(cfg.seed, static_cast<std::uint64_t>(i));
    std::uint32_t mask = 0;
    double m_prev = 0.0;
    std::int64_t s_prev = 0;
    embed_walk(params, coeffs, rng, {}, [&](const EmbeddingState& st, double dt) {
      const auto k = st.n - 1;
      const double x = coeffs.a(st.n);
      const double h = static_cast<double>(k) + 0.5;
      drift[static_cast<std::size_t>(k)].add(dt - (x * x - m_prev * m_prev / (4.0 * h * h)));
      if (st.s > s_prev) mask |= 1U << k;
      s_prev = st.s;
      m_prev = st.m;
    });
    ++counts[mask];
  }
  const auto law = exact_enumeration(0.75, 0.5, cfg.n);
  const auto gof = stats::chi_square_gof(counts, law.path_probability);
  res.table.push_back("sign-path law at n=" + std::to_string(cfg.n) + ": chi-square " +
                      fmt("%.2f", gof.statistic) + " on " + fmt("%g", gof.dof) + " dof");
  res.add("sign-path law chi-square p-value", gof.p_value, "> " + fmt("%g", tol.chi2_p_min),
          gof.p_value > tol.chi2_p_min);
  double worst = 0.0;
  for (std::size_t k = 0; k < drift.size(); ++k) {
    const double z = std::fabs(drift[k].mean()) / drift[k].std_error();
    worst = std::max(worst, z);
    res.table.push_back("step " + std::to_string(k) + " -> " + std::to_string(k + 1) +
                        ": mean(dT - predicted) " + fmt("%+.5f", drift[k].mean()) + " +- " +
                        fmt("%.5f", drift[k].std_error()));
  }
  res.add("max |mean(dT - a^2 + m^2/(4(n+1/2)^2))| / se over steps", worst,
          "<= " + fmt("%g", tol.drift_se), worst <= tol.drift_se);

  // MODE A against MODE B
  for (const ExitProblem prob : {ExitProblem{1.0, 0.0}, ExitProblem{1.0, 0.5}}) {
    Rng ra = derive_stream(cfg.seed + 1, 0);
    Rng rb = derive_stream(cfg.seed + 2, 0);
    std::vector<double> a, b;
    a.reserve(static_cast<std::size_t>(cfg.ks_draws));
    b.reserve(static_cast<std::size_t>(cfg.ks_draws));
    DiscretizedExitConfig dc{cfg.refinement};
    for (std::int64_t i = 0; i < cfg.ks_draws; ++i) {
      a.push_back(sample_exit(prob, ra, ExitMode::spectral, dc).time);
      b.push_back(sample_exit(prob, rb, ExitMode::discretized, dc).time);
    }
    const auto ks = stats::ks_two_sample(std::move(a), std::move(b));
    const std::string where = "(x=" + fmt("%g", prob.x) + ", y=" + fmt("%g", prob.y) + ")";
    res.table.push_back("mode A vs mode B exit times " + where + ": D=" + fmt("%.5f", ks.statistic));
    res.add("two-sample KS p-value " + where, ks.p_value, "> " + fmt("%g", tol.chi2_p_min),
            ks.p_value > tol.chi2_p_min);
  }

  Rng rm = derive_stream(cfg.seed + 3, 0);
  RunningMoments mt;
  for (std::int64_t i = 0; i < cfg.moment_draws; ++i)
    mt.add(sample_exit({1.0, 0.0}, rm, ExitMode::spectral).time);
  const double mean_rel = std::fabs(mt.mean() - 1.0);
  const double var_rel = std::fabs(mt.variance() - 2.0 / 3.0) / (2.0 / 3.0);
  res.table.push_back("mode A at (1, 0): mean " + fmt("%.5f", mt.mean()) + ", variance " +
                      fmt("%.5f", mt.variance()) + " over " + std::to_string(cfg.moment_draws) + " draws");
  res.add("relative error of mean exit time at (1, 0)", mean_rel, "<= " + fmt("%g", tol.exit_mean_rel),
          mean_rel <= tol.exit_mean_rel);
  res.add("relative error of exit-time variance at (1, 0)", var_rel, "<= " + fmt("%g", tol.exit_var_rel),
          var_rel <= tol.exit_var_rel);
  return res;
}

// ---------------------------------------------------------------------------
// 8. concentration of T_n

struct ConcentrationConfig {
  std::uint64_t seed = 8;
  std::int64_t replicas = 1000;
  std::int64_t n_mean = 10000;
  std::int64_t n_sup_low = 1000;
  std::int64_t n_sup_high = 100000;
  unsigned workers = 1;
  ExitMode mode = ExitMode::spectral;
};

inline EmbeddingSummary run_embedding_ensemble(std::uint64_t seed, std::int64_t replicas,
                                               std::int64_t n, unsigned workers, ExitMode mode,
                                               bool excursions = false, double refinement = 64.0) {
  EnsembleSpec spec;
  spec.master_seed = seed;
  spec.replicas = replicas;
  spec.direct = false;
  spec.embedding = true;
  spec.embed_n = n;
  spec.exit_mode = mode;
  spec.excursion_check = excursions;
  spec.path_refinement = refinement;
  spec.workers = workers;
  spec.block_size = 64;
  return *run_ensemble(spec).embedding;
}

inline CriterionResult verify_concentration(const ConcentrationConfig& cfg,
                                            const Tolerances& tol = {}) {
  CriterionResult res{8, "concentration of T_n around A_n and decay of sup N(l)^2"};
  const auto mid = run_embedding_ensemble(cfg.seed, cfg.replicas, cfg.n_mean, cfg.workers, cfg.mode);
  const auto lo = run_embedding_ensemble(cfg.seed + 1, cfg.replicas, cfg.n_sup_low, cfg.workers, cfg.mode);
  const auto hi = run_embedding_ensemble(cfg.seed + 2, cfg.replicas, cfg.n_sup_high, cfg.workers, cfg.mode);
  res.table.push_back("n          A_n        mean(T_n-A_n)  var(T_n-A_n)  mean V(n)  mean N(n) +- se     mean sup N^2  prop42 freq (eps)");
  for (const auto* e : {&lo, &mid, &hi}) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-9lld  %-9.5f  %-+13.5f  %-12.5f  %-9.5f  %+.5f +- %.5f  %-12.5f",
                  static_cast<long long>(e->n), e->a_sq_prefix, e->mean_T_minus_A, e->var_T_minus_A,
                  e->mean_V, e->mean_N, e->se_N, e->mean_sup_N_sq);
    std::string row = buf;
    for (std::size_t i = 0; i < e->eps.size(); ++i)
      row += " " + fmt("%.3f", e->prop42_freq[i]) + "(" + fmt("%g", e->eps[i]) + ")";
    res.table.push_back(row);
  }
  const double dev = std::fabs(mid.mean_T_minus_A);
  res.add("|mean(T_n) - A_n| at n=" + std::to_string(cfg.n_mean), dev, "<= " + fmt("%g", tol.t_minus_a_max),
          dev <= tol.t_minus_a_max);
  const double factor = lo.mean_sup_N_sq / hi.mean_sup_N_sq;
  res.add("mean sup N^2 ratio n=" + std::to_string(cfg.n_sup_low) + " over n=" + std::to_string(cfg.n_sup_high),
          factor, "in [" + fmt("%g", tol.sup_n_factor_low) + ", " + fmt("%g", tol.sup_n_factor_high) + "]",
          factor >= tol.sup_n_factor_low && factor <= tol.sup_n_factor_high);
  return res;
}

// ---------------------------------------------------------------------------
// 9. excursion counting

struct ExcursionConfig {
  std::uint64_t seed = 9;
  std::int64_t replicas = 1000;
  std::int64_t n = 512;
  double refinement = 64.0;
  unsigned workers = 1;
};

inline CriterionResult verify_excursions(const ExcursionConfig& cfg, const Tolerances& tol = {}) {
  CriterionResult res{9, "qualifying excursion count equals the coupled Z(n)"};
  const auto coarse = run_embedding_ensemble(cfg.seed, cfg.replicas, cfg.n, cfg.workers,
                                             ExitMode::discretized, true, cfg.refinement);
  const auto fine = run_embedding_ensemble(cfg.seed, cfg.replicas, cfg.n, cfg.workers,
                                           ExitMode::discretized, true, 2.0 * cfg.refinement);
  const double r = static_cast<double>(cfg.replicas);
  const double match = static_cast<double>(*coarse.excursion_matches) / r;
  const double miss_coarse = 1.0 - match;
  const double miss_fine = 1.0 - static_cast<double>(*fine.excursion_matches) / r;
  res.table.push_back("refinement " + fmt("%g", cfg.refinement) + ": matches " +
                      std::to_string(*coarse.excursion_matches) + "/" + std::to_string(cfg.replicas));
  res.table.push_back("refinement " + fmt("%g", 2.0 * cfg.refinement) + ": matches " +
                      std::to_string(*fine.excursion_matches) + "/" + std::to_string(cfg.replicas));
  res.add("match rate at n=" + std::to_string(cfg.n), match, ">= " + fmt("%g", tol.excursion_match_min),
          match >= tol.excursion_match_min);
  res.add("mismatch rate with dt halved minus mismatch rate", miss_fine - miss_coarse, "<= 0",
          miss_fine <= miss_coarse);
  return res;
}

}  // namespace erw
