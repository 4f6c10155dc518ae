#pragma once

// Parallel Monte Carlo engine. Replicas are independent given their derived
// stream; blocks of replicas are computed by a pool of workers and folded in
// replica-index order, so the summary depends only on the EnsembleSpec.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "erw/column_store.hpp"
#include "erw/embedding.hpp"
#include "erw/error.hpp"
#include "erw/exit_time.hpp"
#include "erw/numeric.hpp"
#include "erw/observables.hpp"
#include "erw/rng.hpp"
#include "erw/summary.hpp"
#include "erw/walk.hpp"

namespace erw {

struct EnsembleSpec {
  std::uint64_t master_seed = 1;
  std::int64_t replicas = 1000;
  double p = 0.75;
  double q = 0.5;
  std::int64_t n_base = 10000;
  std::vector<double> t_grid = uniform_t_grid();

  bool direct = true;
  bool tail_only = false;  // direct walks stop at the first return; no Z/G columns
  bool embedding = false;
  std::int64_t embed_n = 1000;
  bool excursion_check = false;
  double path_refinement = 64.0;
  ExitMode exit_mode = ExitMode::spectral;
  double exit_refinement = 256.0;
  std::vector<double> prop42_eps = {0.25, 0.5, 1.0};
  double ratio_band_low = 0.35;
  double ratio_band_high = 0.65;
  double confidence = 0.95;
  std::string output_dir;  // empty: nothing is written

  // Execution controls; none of these change the summary.
  std::int64_t block_size = 1024;
  bool resume = false;
  std::size_t spill_threshold = std::size_t{1} << 24;
  unsigned workers = 1;
  std::optional<std::int64_t> stop_after_blocks;
  std::function<void(std::int64_t)> replica_hook;
  std::function<void(std::int64_t, std::int64_t)> progress;

  void validate() const {
    ERW_REQUIRE(ConfigError, replicas >= 1, "replicas must be >= 1");
    ERW_REQUIRE(ConfigError, p >= 0.0 && p <= 1.0, "p must lie in [0, 1]");
    ERW_REQUIRE(ConfigError, q >= 0.0 && q <= 1.0, "q must lie in [0, 1]");
    ERW_REQUIRE(ConfigError, n_base >= 2, "n_base must be >= 2");
    ERW_REQUIRE(ConfigError, !t_grid.empty(), "t grid must not be empty");
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
      ERW_REQUIRE(ConfigError, t_grid[i] >= 0.0 && t_grid[i] <= 1.0, "t grid must lie in [0, 1]");
      ERW_REQUIRE(ConfigError, i == 0 || t_grid[i] > t_grid[i - 1],
                  "t grid must be sorted and unique");
    }
    ERW_REQUIRE(ConfigError, direct || embedding, "nothing to run: enable direct or embedding");
    if (embedding) {
      ERW_REQUIRE(ConfigError, p == 0.75 && q == 0.5, "embedding runs need p = 0.75, q = 0.5");
      ERW_REQUIRE(ConfigError, embed_n >= 2, "embed_n must be >= 2");
      ERW_REQUIRE(ConfigError, !excursion_check || embed_n <= kMaxPathHorizon,
                  "excursion check limited to embed_n <= 4096");
      ERW_REQUIRE(ConfigError, exit_refinement >= 64.0, "exit refinement must be >= 64");
      ERW_REQUIRE(ConfigError, path_refinement >= 64.0, "path refinement must be >= 64");
    }
    ERW_REQUIRE(ConfigError, !excursion_check || embedding, "excursion check needs embedding");
    ERW_REQUIRE(ConfigError, confidence > 0.0 && confidence < 1.0, "confidence must lie in (0, 1)");
    ERW_REQUIRE(ConfigError, ratio_band_low < ratio_band_high, "ratio band is empty");
    ERW_REQUIRE(ConfigError, block_size >= 1, "block size must be >= 1");
  }

  /// Result-defining fields only.
  nlohmann::json canonical() const {
    return {{"master_seed", master_seed},
            {"replicas", replicas},
            {"p", p},
            {"q", q},
            {"n_base", n_base},
            {"t_grid", t_grid},
            {"direct", direct},
            {"tail_only", tail_only},
            {"embedding", embedding},
            {"embed_n", embed_n},
            {"excursion_check", excursion_check},
            {"path_refinement", path_refinement},
            {"exit_mode", exit_mode_name(exit_mode)},
            {"exit_refinement", exit_refinement},
            {"prop42_eps", prop42_eps},
            {"ratio_band", {ratio_band_low, ratio_band_high}},
            {"confidence", confidence},
            {"sidecars", !output_dir.empty()},
            {"code_version", kCodeVersion}};
  }

  std::string hash() const { return fnv1a_hex(canonical().dump()); }
};

/// Per-replica output. Direct part: Z and G at each checkpoint (empty in
/// tail-only runs) and R (-1 when censored). Embedding part at embed_n.
struct ReplicaRecord {
  std::vector<std::int64_t> z;
  std::vector<std::int64_t> g;
  std::int64_t r = -1;
  double t_minus_a = 0.0;
  double v = 0.0;
  double nn = 0.0;
  double sup_abs_t_minus_a = 0.0;
  double sup_n_sq = 0.0;
  double alpha_check = 0.0;
  std::int8_t excursion_match = -1;  // -1 not checked

  friend bool operator==(const ReplicaRecord&, const ReplicaRecord&) = default;

  void write(std::string& out) const {
    const auto put = [&](const void* p, std::size_t n) {
      out.append(static_cast<const char*>(p), n);
    };
    const auto k = static_cast<std::uint32_t>(z.size());
    put(&k, 4);
    put(z.data(), 8 * z.size());
    put(g.data(), 8 * g.size());
    put(&r, 8);
    for (double d : {t_minus_a, v, nn, sup_abs_t_minus_a, sup_n_sq, alpha_check}) put(&d, 8);
    put(&excursion_match, 1);
  }

  static ReplicaRecord read(const char*& p, const char* end) {
    const auto need = [&](std::size_t n) {
      if (static_cast<std::size_t>(end - p) < n) throw FormatError("truncated replica record");
    };
    const auto get = [&](void* dst, std::size_t n) {
      need(n);
      std::memcpy(dst, p, n);
      p += n;
    };
    ReplicaRecord rec;
    std::uint32_t k = 0;
    get(&k, 4);
    rec.z.resize(k);
    rec.g.resize(k);
    get(rec.z.data(), 8 * std::size_t{k});
    get(rec.g.data(), 8 * std::size_t{k});
    get(&rec.r, 8);
    for (double* d : {&rec.t_minus_a, &rec.v, &rec.nn, &rec.sup_abs_t_minus_a, &rec.sup_n_sq,
                      &rec.alpha_check})
      get(d, 8);
    get(&rec.excursion_match, 1);
    return rec;
  }
};

/// Stream key for the embedding part, distinct from the direct walk's.
inline constexpr std::uint64_t kEmbeddingStreamKey = 0x656d62656464696eULL;

/// Shared read-only inputs of a run.
struct EnsembleContext {
  std::vector<std::int64_t> checkpoints;
  std::optional<Coefficients> coeffs;

  explicit EnsembleContext(const EnsembleSpec& spec)
      : checkpoints(geometric_checkpoints(spec.n_base, spec.t_grid)) {
    std::int64_t need = spec.embedding ? spec.embed_n + 1 : 0;
    if (spec.direct && spec.n_base <= (std::int64_t{1} << 24)) need = std::max(need, spec.n_base);
    if (need > 0) coeffs.emplace(need);
  }
};

inline ReplicaRecord run_replica(const EnsembleSpec& spec, const EnsembleContext& ctx,
                                 std::int64_t index) {
  ReplicaRecord rec;
  const auto idx = static_cast<std::uint64_t>(index);
  if (spec.direct) {
    WalkParams params{spec.p, spec.q, spec.n_base, derive_seed(spec.master_seed, idx)};
    Rng rng = derive_stream(spec.master_seed, idx);
    if (spec.tail_only) {
      const auto r = first_return_time(params, rng);
      rec.r = r ? *r : -1;
    } else {
      SimulationOptions opt;
      opt.coeffs = ctx.coeffs ? &*ctx.coeffs : nullptr;
      const auto obs = simulate_walk(params, ctx.checkpoints, rng, opt);
      rec.z = obs.z;
      rec.g = obs.g;
      rec.r = obs.r ? *obs.r : -1;
    }
  }
  if (spec.embedding) {
    const auto& coeffs = *ctx.coeffs;
    WalkParams params{0.75, 0.5, spec.embed_n, 0};
    Rng rng = derive_stream(spec.master_seed ^ kEmbeddingStreamKey, idx);
    EmbeddingDiagnostics d;
    double t_n = 0.0;
    if (spec.excursion_check) {
      const auto ep = embed_walk_with_path(params, coeffs, rng, spec.path_refinement);
      d = diagnostics(ep.states);
      t_n = ep.states.back().t;
      const auto alpha = alpha_process(ep.states, coeffs);
      const auto counted = count_qualifying_excursions(ep.path, alpha, t_n);
      std::int64_t zeros = 0;
      for (std::size_t n = 1; n < ep.states.size(); ++n) zeros += ep.states[n].s == 0;
      rec.excursion_match = counted == zeros ? 1 : 0;
    } else {
      DiagnosticsAccumulator acc;
      EmbeddingOptions opt;
      opt.mode = spec.exit_mode;
      opt.discretized.refinement = spec.exit_refinement;
      const auto last = embed_walk(params, coeffs, rng, opt,
                                   [&](const EmbeddingState& st, double) { acc.add(st); });
      d = acc.current();
      t_n = last.t;
    }
    rec.t_minus_a = d.t_minus_a;
    rec.v = d.v;
    rec.nn = d.nn;
    rec.sup_abs_t_minus_a = d.sup_abs_t_minus_a;
    rec.sup_n_sq = d.sup_n_sq;
    rec.alpha_check = -2.0 * std::log(coeffs.a(spec.embed_n + 1)) / t_n;
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Checkpoint log: header, then one record per completed block.

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'E', 'R', 'W', 'C', 'K', 'P', 'T', '1'};

struct CheckpointLog {
  std::filesystem::path path;
  std::ofstream out;

  static std::string header(const EnsembleSpec& spec) {
    std::string h(kCheckpointMagic, 8);
    h += spec.hash();
    const auto bs = static_cast<std::uint64_t>(spec.block_size);
    h.append(reinterpret_cast<const char*>(&bs), 8);
    return h;
  }

  /// Reads the valid prefix of an existing log; returns the payloads.
  static std::vector<std::string> replay(const std::filesystem::path& path,
                                         const EnsembleSpec& spec, std::uint64_t& valid_bytes) {
    std::vector<std::string> blocks;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    const auto want = header(spec);
    std::string got(want.size(), '\0');
    in.read(got.data(), static_cast<std::streamsize>(got.size()));
    if (!in || got != want)
      throw FormatError("checkpoint " + path.string() + " belongs to a different spec");
    valid_bytes = want.size();
    for (;;) {
      std::uint64_t index = 0, len = 0, sum = 0;
      in.read(reinterpret_cast<char*>(&index), 8);
      in.read(reinterpret_cast<char*>(&len), 8);
      if (!in || index != blocks.size() || len > (std::uint64_t{1} << 34)) break;
      std::string payload(len, '\0');
      in.read(payload.data(), static_cast<std::streamsize>(len));
      in.read(reinterpret_cast<char*>(&sum), 8);
      if (!in) break;
      Fnv1a h;
      h.update(payload);
      if (h.value() != sum) break;
      blocks.push_back(std::move(payload));
      valid_bytes += 24 + len;
    }
    return blocks;
  }

  void open_fresh(const EnsembleSpec& spec) {
    out.open(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create checkpoint " + path.string());
    const auto h = header(spec);
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    out.flush();
  }

  void open_append(std::uint64_t valid_bytes) {
    std::filesystem::resize_file(path, valid_bytes);
    out.open(path, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot reopen checkpoint " + path.string());
  }

  void append(std::uint64_t index, const std::string& payload) {
    const std::uint64_t len = payload.size();
    Fnv1a h;
    h.update(payload);
    const std::uint64_t sum = h.value();
    out.write(reinterpret_cast<const char*>(&index), 8);
    out.write(reinterpret_cast<const char*>(&len), 8);
    out.write(payload.data(), static_cast<std::streamsize>(len));
    out.write(reinterpret_cast<const char*>(&sum), 8);
    out.flush();
    if (!out) throw IoError("failed writing checkpoint " + path.string());
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Fold

class EnsembleAccumulator {
public:
  EnsembleAccumulator(const EnsembleSpec& spec, const EnsembleContext& ctx,
                      std::filesystem::path spill_dir)
      : spec_(spec), ctx_(ctx), k_(ctx.checkpoints.size()),
        store_(3 * k_ + 1, spec.spill_threshold, std::move(spill_dir)),
        censored_(k_, 0), below_quarter_(k_, 0), prop42_(spec.prop42_eps.size(), 0),
        log_base_(std::log(static_cast<double>(spec.n_base))) {}

  void add(const ReplicaRecord& rec) {
    ++replicas_;
    if (spec_.direct) {
      for (std::size_t j = 0; j < k_; ++j)
        if (rec.r < 0 || rec.r > ctx_.checkpoints[j]) ++censored_[j];
      if (!spec_.tail_only) {
        for (std::size_t j = 0; j < k_; ++j) {
          const auto z = rec.z[j];
          const auto g = rec.g[j];
          const double n = static_cast<double>(ctx_.checkpoints[j]);
          if (static_cast<double>(z) <= std::pow(n, 0.25)) ++below_quarter_[j];
          if (z > 0) store_.push(3 * j, std::log(static_cast<double>(z)) / log_base_);
          if (g > 0) store_.push(3 * j + 1, std::log(static_cast<double>(g)) / log_base_);
          if (spec_.t_grid[j] > 0.0)
            if (const auto r = log_ratio_statistic(z, g, spec_.t_grid[j]))
              store_.push(3 * j + 2, *r);
        }
      }
    }
    if (spec_.embedding) {
      t_minus_a_.add(rec.t_minus_a);
      v_.add(rec.v);
      n_.add(rec.nn);
      sup_n_sq_.add(rec.sup_n_sq);
      alpha_.add(rec.alpha_check);
      store_.push(3 * k_, rec.t_minus_a);
      const double ln = std::log(static_cast<double>(spec_.embed_n));
      for (std::size_t e = 0; e < spec_.prop42_eps.size(); ++e)
        if (rec.sup_abs_t_minus_a >= spec_.prop42_eps[e] * ln) ++prop42_[e];
      if (rec.excursion_match >= 0) excursion_matches_ += rec.excursion_match;
    }
  }

  std::int64_t replicas() const noexcept { return replicas_; }

  EnsembleSummary finish() {
    EnsembleSummary s;
    auto& pv = s.provenance;
    pv.seed = spec_.master_seed;
    pv.replicas = replicas_;
    pv.p = spec_.p;
    pv.q = spec_.q;
    pv.n_base = spec_.n_base;
    pv.t_grid = spec_.t_grid;
    pv.spec_hash = spec_.hash();
    const std::filesystem::path out_dir = spec_.output_dir;
    const bool sidecars = !spec_.output_dir.empty();

    if (spec_.direct) {
      for (std::size_t j = 0; j < k_; ++j) {
        CheckpointSummary c;
        c.t = spec_.t_grid[j];
        c.n = ctx_.checkpoints[j];
        c.censored = censored_[j];
        if (c.n > 1) c.tail = tail_estimate(censored_[j], replicas_, c.n, spec_.confidence);
        if (!spec_.tail_only) {
          c.z_below_quarter = below_quarter_[j];
          const double t = c.t;
          const auto zref = [t](double x) { return arcsine_cdf_half(x / t); };
          const auto gref = [t](double x) { return arcsine_cdf(x / t); };
          const std::string stem = "columns/cp" + two_digits(j);
          std::optional<std::string> zp, gp, rp;
          if (sidecars) {
            zp = stem + "_z.f64";
            gp = stem + "_g.f64";
            rp = stem + "_ratio.f64";
          }
          c.z = column_stats(3 * j, t > 0.0 ? std::function<double(double)>(zref) : nullptr,
                             false, out_dir, zp, c.z_ecdf_ref);
          c.g = column_stats(3 * j + 1, t > 0.0 ? std::function<double(double)>(gref) : nullptr,
                             false, out_dir, gp, c.g_ecdf_ref);
          c.ratio = column_stats(3 * j + 2, nullptr, true, out_dir, rp, c.ratio_ecdf_ref);
        }
        s.per_checkpoint.push_back(std::move(c));
      }
    }
    if (spec_.embedding) {
      EmbeddingSummary e;
      e.n = spec_.embed_n;
      e.replicas = replicas_;
      e.exit_mode = spec_.excursion_check ? "B-path" : exit_mode_name(spec_.exit_mode);
      e.a_sq_prefix = ctx_.coeffs->a_sq_prefix(spec_.embed_n);
      e.mean_T_minus_A = t_minus_a_.mean();
      e.var_T_minus_A = replicas_ > 1 ? t_minus_a_.variance() : 0.0;
      e.mean_V = v_.mean();
      e.mean_N = n_.mean();
      e.se_N = replicas_ > 1 ? n_.std_error() : 0.0;
      e.mean_sup_N_sq = sup_n_sq_.mean();
      e.mean_alpha_check = alpha_.mean();
      e.eps = spec_.prop42_eps;
      for (auto c : prop42_)
        e.prop42_freq.push_back(static_cast<double>(c) / static_cast<double>(replicas_));
      if (spec_.excursion_check) e.excursion_matches = excursion_matches_;
      std::optional<std::string> tp;
      if (sidecars) tp = "columns/t_minus_a.f64";
      column_stats(3 * k_, nullptr, false, out_dir, tp, e.t_minus_a_ref);
      s.embedding = std::move(e);
    }
    return s;
  }

  std::size_t spilled_runs() const noexcept { return store_.spilled_runs(); }

private:
  static std::string two_digits(std::size_t j) {
    return (j < 10 ? "0" : "") + std::to_string(j);
  }

  /// One ascending pass: moments, type-7 quartiles, KS, band share, sidecar.
  ColumnStats column_stats(std::size_t col, const std::function<double(double)>& ref,
                           bool band, const std::filesystem::path& out_dir,
                           const std::optional<std::string>& sidecar,
                           std::optional<ColumnRef>& ref_out) {
    ColumnStats c;
    c.count = store_.count(col);
    c.excluded = replicas_ - c.count;
    std::optional<SidecarWriter> writer;
    if (sidecar) writer.emplace(out_dir / *sidecar);
    const auto n = c.count;
    const double dn = static_cast<double>(n);
    const std::array<double, 3> probs{0.25, 0.5, 0.75};
    std::array<double, 3> h{}, lo_v{}, hi_v{};
    std::array<std::int64_t, 3> lo{};
    for (std::size_t i = 0; i < 3; ++i) {
      h[i] = (dn - 1.0) * probs[i];
      lo[i] = static_cast<std::int64_t>(std::floor(h[i]));
    }
    CompensatedSum<long double> sum;
    double ks = 0.0;
    std::int64_t inside = 0;
    std::int64_t i = 0;
    store_.for_each_sorted(col, [&](double x) {
      sum += x;
      if (ref) {
        const double f = ref(x);
        ks = std::max(ks, std::max(static_cast<double>(i + 1) / dn - f,
                                   f - static_cast<double>(i) / dn));
      }
      if (x >= spec_.ratio_band_low && x <= spec_.ratio_band_high) ++inside;
      for (std::size_t k = 0; k < 3; ++k) {
        if (i == lo[k]) lo_v[k] = x;
        if (i == std::min(lo[k] + 1, n - 1)) hi_v[k] = x;
      }
      if (writer) writer->push(x);
      ++i;
    });
    if (n > 0) {
      c.mean = static_cast<double>(sum.value() / static_cast<long double>(n));
      std::array<double, 3> q{};
      for (std::size_t k = 0; k < 3; ++k)
        q[k] = lo_v[k] + (h[k] - static_cast<double>(lo[k])) * (hi_v[k] - lo_v[k]);
      c.q25 = q[0];
      c.median = q[1];
      c.q75 = q[2];
      if (ref) c.ks = ks;
      if (band) c.band_fraction = static_cast<double>(inside) / dn;
    }
    if (writer) {
      ColumnRef r;
      r.path = *sidecar;
      r.hash = writer->close();
      r.count = n;
      ref_out = r;
    }
    return c;
  }

  const EnsembleSpec& spec_;
  const EnsembleContext& ctx_;
  std::size_t k_;
  ColumnStore store_;
  std::vector<std::int64_t> censored_;
  std::vector<std::int64_t> below_quarter_;
  std::vector<std::int64_t> prop42_;
  std::int64_t excursion_matches_ = 0;
  std::int64_t replicas_ = 0;
  double log_base_;
  RunningMoments t_minus_a_, v_, n_, sup_n_sq_, alpha_;
};

// ---------------------------------------------------------------------------

inline unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

/// Runs the ensemble. With an output directory, blocks are appended to
/// checkpoint.bin as they complete and the summary plus sidecars are written
/// at the end; resume replays the valid prefix of an existing log.
inline EnsembleSummary run_ensemble(const EnsembleSpec& spec) {
  spec.validate();
  const EnsembleContext ctx(spec);
  const bool persist = !spec.output_dir.empty();
  const std::filesystem::path out_dir = spec.output_dir;

  std::filesystem::path spill_dir;
  if (persist) {
    std::filesystem::create_directories(out_dir);
    spill_dir = out_dir / "spill";
  } else {
    std::random_device rd;
    spill_dir = std::filesystem::temp_directory_path() /
                ("erw_spill_" + spec.hash() + "_" + std::to_string(rd()));
  }
  EnsembleAccumulator acc(spec, ctx, spill_dir);

  const std::int64_t n_blocks = (spec.replicas + spec.block_size - 1) / spec.block_size;
  std::int64_t first_block = 0;
  detail::CheckpointLog log;
  if (persist) {
    log.path = out_dir / "checkpoint.bin";
    if (spec.resume && std::filesystem::exists(log.path)) {
      std::uint64_t valid = 0;
      const auto blocks = detail::CheckpointLog::replay(log.path, spec, valid);
      for (const auto& payload : blocks) {
        const char* p = payload.data();
        const char* end = p + payload.size();
        while (p < end) acc.add(ReplicaRecord::read(p, end));
      }
      first_block = static_cast<std::int64_t>(blocks.size());
      log.open_append(valid);
    } else {
      log.open_fresh(spec);
    }
  }

  const unsigned workers = resolve_workers(spec.workers);
  std::int64_t blocks_this_run = 0;
  for (std::int64_t b = first_block; b < n_blocks; ++b) {
    const std::int64_t begin = b * spec.block_size;
    const std::int64_t end = std::min(spec.replicas, begin + spec.block_size);
    std::vector<ReplicaRecord> records(static_cast<std::size_t>(end - begin));
    std::atomic<std::int64_t> next{begin};
    std::mutex fail_mu;
    std::vector<std::pair<std::int64_t, std::string>> failures;

    const auto work = [&] {
      for (std::int64_t i; (i = next.fetch_add(1)) < end;) {
        try {
          if (spec.replica_hook) spec.replica_hook(i);
          records[static_cast<std::size_t>(i - begin)] = run_replica(spec, ctx, i);
        } catch (const std::exception& e) {
          std::lock_guard lock(fail_mu);
          failures.emplace_back(i, e.what());
        }
      }
    };
    const auto n_threads = static_cast<unsigned>(
        std::min<std::int64_t>(workers, end - begin));
    if (n_threads <= 1) {
      work();
    } else {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < n_threads; ++w) pool.emplace_back(work);
    }

    if (!failures.empty()) {
      std::sort(failures.begin(), failures.end());
      std::string msg = std::to_string(failures.size()) + " replica(s) failed and were quarantined:";
      for (const auto& [i, what] : failures) msg += "\n  replica " + std::to_string(i) + ": " + what;
      if (persist) msg += "\ncompleted blocks are preserved in " + log.path.string();
      throw EnsembleFailure(msg);
    }

    if (persist) {
      std::string payload;
      for (const auto& r : records) r.write(payload);
      log.append(static_cast<std::uint64_t>(b), payload);
    }
    for (const auto& r : records) acc.add(r);
    if (spec.progress) spec.progress(end, spec.replicas);
    ++blocks_this_run;
    if (spec.stop_after_blocks && blocks_this_run >= *spec.stop_after_blocks && b + 1 < n_blocks)
      throw RunInterrupted("stopped after block " + std::to_string(b) + " of " +
                           std::to_string(n_blocks));
  }

  auto summary = acc.finish();
  if (persist) persist_summary(summary, out_dir / "summary.json");
  std::error_code ec;
  std::filesystem::remove_all(spill_dir, ec);
  return summary;
}

}  // namespace erw
