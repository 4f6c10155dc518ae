// erw: command-line driver for simulation, ensembles, verification and plot data.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "erw/embedding.hpp"
#include "erw/ensemble.hpp"
#include "erw/observables.hpp"
#include "erw/plot.hpp"
#include "erw/report.hpp"
#include "erw/summary.hpp"
#include "erw/verify.hpp"
#include "erw/walk.hpp"

namespace {

using namespace erw;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

unsigned worker_count(int flag) {
  if (flag > 0) return static_cast<unsigned>(flag);
  if (const char* env = std::getenv("ERW_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw UsageError("ERW_WORKERS must be a positive integer");
    return static_cast<unsigned>(v);
  }
  return resolve_workers(0);
}

template <class T>
std::string str(const T& v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + str(v[i]);
  return out;
}

std::map<std::string, double Tolerances::*> tolerance_fields() {
  return {{"oracle_se", &Tolerances::oracle_se},
          {"oracle_exact", &Tolerances::oracle_exact},
          {"chi2_p_min", &Tolerances::chi2_p_min},
          {"moment_rel", &Tolerances::moment_rel},
          {"ks_g_max", &Tolerances::ks_g_max},
          {"ks_z_max", &Tolerances::ks_z_max},
          {"quarter_dev", &Tolerances::quarter_dev},
          {"ratio_median_low", &Tolerances::ratio_median_low},
          {"ratio_median_high", &Tolerances::ratio_median_high},
          {"ratio_band_share", &Tolerances::ratio_band_share},
          {"tail_low", &Tolerances::tail_low},
          {"tail_high", &Tolerances::tail_high},
          {"drift_se", &Tolerances::drift_se},
          {"exit_mean_rel", &Tolerances::exit_mean_rel},
          {"exit_var_rel", &Tolerances::exit_var_rel},
          {"t_minus_a_max", &Tolerances::t_minus_a_max},
          {"sup_n_factor_low", &Tolerances::sup_n_factor_low},
          {"sup_n_factor_high", &Tolerances::sup_n_factor_high},
          {"excursion_match_min", &Tolerances::excursion_match_min}};
}

/// Applies key=value overrides, returning them for the report header.
std::vector<std::pair<std::string, std::string>> apply_tolerances(
    const std::vector<std::string>& items, Tolerances& tol) {
  const auto fields = tolerance_fields();
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw UsageError("--tol expects key=value, got '" + item + "'");
    const auto key = item.substr(0, eq);
    const auto val = item.substr(eq + 1);
    const auto it = fields.find(key);
    if (it == fields.end()) throw UsageError("unknown tolerance '" + key + "'");
    try {
      std::size_t used = 0;
      tol.*(it->second) = std::stod(val, &used);
      if (used != val.size()) throw std::invalid_argument(val);
    } catch (const std::exception&) {
      throw UsageError("tolerance '" + key + "' needs a number, got '" + val + "'");
    }
    out.emplace_back(key, val);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  double p = 0.75;
  double q = 0.5;
  std::int64_t n = 1000;
  std::uint64_t seed = 1;
  std::string sampler = "urn";
  std::int64_t trace_every = 0;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
  WalkParams params{a.p, a.q, a.n, a.seed};
  params.validate();
  const Sampler sampler = a.sampler == "memory" ? Sampler::memory : Sampler::urn;
  Rng rng(a.seed);
  if (a.trace_every > 0) {
    std::string csv = "n,S,S_rescaled,Z,log_Z_over_log_n,G,log_G_over_log_n,log_Z_over_log_G\n";
    std::int64_t z = 0, g = 0;
    char buf[256];
    run_walk(params, rng, sampler, [&](std::int64_t n, std::int64_t s) {
      if (s == 0) ++z, g = n;
      if (n % a.trace_every != 0 && n != params.horizon) return;
      const double dn = static_cast<double>(n);
      const double ln = std::log(dn);
      const double rescaled = n > 1 ? static_cast<double>(s) / std::sqrt(dn * ln) : static_cast<double>(s);
      const auto cell = [](double v) {
        if (std::isnan(v)) return std::string();
        char b[32];
        std::snprintf(b, sizeof b, "%.10g", v);
        return std::string(b);
      };
      const auto lg = [&](std::int64_t v) { return v > 0 && n > 1 ? std::log(static_cast<double>(v)) / ln : NAN; };
      const double ratio = z > 1 && g > 1 ? std::log(static_cast<double>(z)) / std::log(static_cast<double>(g)) : NAN;
      std::snprintf(buf, sizeof buf, "%lld,%lld,%.10g,%lld,", static_cast<long long>(n),
                    static_cast<long long>(s), rescaled, static_cast<long long>(z));
      csv += buf + cell(lg(z)) + "," + std::to_string(g) + "," + cell(lg(g)) + "," + cell(ratio) + "\n";
    });
    emit(csv, a.out);
    return kExitOk;
  }
  const auto cps = geometric_checkpoints(std::max<std::int64_t>(2, a.n), uniform_t_grid(11));
  std::vector<std::int64_t> checkpoints;
  for (auto c : cps)
    if (c <= a.n && (checkpoints.empty() || checkpoints.back() != c)) checkpoints.push_back(c);
  SimulationOptions opt;
  opt.sampler = sampler;
  const auto obs = simulate_walk(params, checkpoints, rng, opt);
  std::string out = "erw simulate p=" + str(a.p) + " q=" + str(a.q) + " n=" + str(a.n) +
                    " seed=" + str(a.seed) + " sampler=" + a.sampler + "\n";
  out += "n,S,Z,G,M\n";
  char buf[160];
  for (std::size_t j = 0; j < checkpoints.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%lld,%lld,%lld,%lld,%.10g\n",
                  static_cast<long long>(checkpoints[j]), static_cast<long long>(obs.s[j]),
                  static_cast<long long>(obs.z[j]), static_cast<long long>(obs.g[j]),
                  coefficient_at(checkpoints[j]) * static_cast<double>(obs.s[j]));
    out += buf;
  }
  out += "R=" + (obs.r ? str(*obs.r) : std::string("censored")) + "\n";
  emit(out, a.out);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EnsembleArgs {
  std::uint64_t seed = 1;
  std::int64_t replicas = 1000;
  double p = 0.75;
  double q = 0.5;
  std::int64_t n_base = 10000;
  int t_points = 21;
  bool no_direct = false;
  bool tail_only = false;
  bool embedding = false;
  std::int64_t embed_n = 1000;
  bool excursions = false;
  double path_refinement = 64.0;
  std::string mode = "A";
  std::string out_dir;
  std::int64_t block_size = 1024;
  bool resume = false;
  std::size_t spill_threshold = std::size_t{1} << 24;
  int workers = 0;
  bool quiet = false;
};

int cmd_ensemble(const EnsembleArgs& a) {
  EnsembleSpec spec;
  spec.master_seed = a.seed;
  spec.replicas = a.replicas;
  spec.p = a.p;
  spec.q = a.q;
  spec.n_base = a.n_base;
  spec.t_grid = uniform_t_grid(a.t_points);
  spec.direct = !a.no_direct;
  spec.tail_only = a.tail_only;
  spec.embedding = a.embedding;
  spec.embed_n = a.embed_n;
  spec.excursion_check = a.excursions;
  spec.path_refinement = a.path_refinement;
  spec.exit_mode = parse_exit_mode(a.mode);
  spec.output_dir = a.out_dir;
  spec.block_size = a.block_size;
  spec.resume = a.resume;
  spec.spill_threshold = a.spill_threshold;
  spec.workers = worker_count(a.workers);
  spec.validate();
  if (!a.quiet)
    spec.progress = [](std::int64_t done, std::int64_t total) {
      std::fprintf(stderr, "\r%lld / %lld replicas", static_cast<long long>(done),
                   static_cast<long long>(total));
      if (done == total) std::fprintf(stderr, "\n");
    };
  const auto summary = run_ensemble(spec);
  std::cout << "summary written to " << (std::filesystem::path(a.out_dir) / "summary.json").string()
            << " (spec hash " << summary.provenance.spec_hash << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::int64_t replicas = 0;
  std::vector<std::int64_t> n_list;
  std::vector<int> criteria;
  std::string mode = "A";
  std::int64_t n = 10000;
  std::int64_t exact_replicas = 100000;
  std::int64_t excursion_n = 512;
  std::int64_t excursion_replicas = 1000;
  double refinement = 64.0;
  std::vector<std::string> tol;
  int workers = 0;
  std::string out;
};

bool wants(const std::vector<int>& c, int id) {
  return c.empty() || std::find(c.begin(), c.end(), id) != c.end();
}

int finish(Report& rep, const VerifyArgs& a) {
  emit(rep.render(), a.out);
  return rep.pass() ? kExitOk : kExitRuntime;
}

int cmd_verify_oracles(const VerifyArgs& a) {
  Tolerances tol;
  Report rep;
  rep.command = "verify-oracles";
  rep.overrides = apply_tolerances(a.tol, tol);
  const std::uint64_t seed = a.seed_set ? a.seed : 1;
  rep.parameters = {{"seed", str(seed)}, {"criteria", a.criteria.empty() ? "1,2,3" : join(a.criteria)}};
  if (a.replicas > 0) rep.parameters.emplace_back("replicas", str(a.replicas));
  if (wants(a.criteria, 1)) {
    OracleConfig c;
    c.seed = seed;
    if (a.replicas > 0) c.replicas = a.replicas;
    rep.criteria.push_back(verify_oracle_exactness(c, tol));
  }
  if (wants(a.criteria, 2)) {
    SamplerConfig c;
    c.seed = seed + 1;
    if (a.replicas > 0) c.replicas = a.replicas;
    rep.criteria.push_back(verify_sampler_equivalence(c, tol));
  }
  if (wants(a.criteria, 3)) {
    MomentConfig c;
    c.seed = seed + 2;
    if (a.replicas > 0) c.replicas = a.replicas;
    rep.criteria.push_back(verify_second_moments(c, tol));
  }
  return finish(rep, a);
}

int cmd_verify_arcsine(const VerifyArgs& a) {
  Tolerances tol;
  Report rep;
  rep.command = "verify-arcsine";
  rep.overrides = apply_tolerances(a.tol, tol);
  ArcsineConfig c;
  if (a.seed_set) c.seed = a.seed;
  if (a.replicas > 0) c.replicas = a.replicas;
  if (!a.n_list.empty()) c.n_bases = a.n_list;
  std::sort(c.n_bases.begin(), c.n_bases.end());
  c.workers = worker_count(a.workers);
  rep.parameters = {{"seed", str(c.seed)}, {"replicas", str(c.replicas)}, {"n_base", join(c.n_bases)}};
  const auto runs = run_arcsine_ensembles(c);
  rep.criteria.push_back(verify_arcsine_laws(runs, tol));
  rep.criteria.push_back(verify_joint_ratio(runs, tol));
  return finish(rep, a);
}

int cmd_verify_tail(const VerifyArgs& a) {
  Tolerances tol;
  Report rep;
  rep.command = "verify-tail";
  rep.overrides = apply_tolerances(a.tol, tol);
  TailConfig c;
  if (a.seed_set) c.seed = a.seed;
  if (a.replicas > 0) c.replicas = a.replicas;
  if (!a.n_list.empty()) c.n_list = a.n_list;
  c.workers = worker_count(a.workers);
  rep.parameters = {{"seed", str(c.seed)}, {"replicas", str(c.replicas)}, {"n", join(c.n_list)}};
  rep.criteria.push_back(verify_tail(run_tail_ensemble(c), tol));
  return finish(rep, a);
}

int cmd_verify_embedding(const VerifyArgs& a) {
  Tolerances tol;
  Report rep;
  rep.command = "verify-embedding";
  rep.overrides = apply_tolerances(a.tol, tol);
  const std::uint64_t seed = a.seed_set ? a.seed : 7;
  const auto mode = parse_exit_mode(a.mode);
  const unsigned workers = worker_count(a.workers);
  rep.parameters = {{"seed", str(seed)},
                    {"mode", exit_mode_name(mode)},
                    {"n", str(a.n)},
                    {"replicas", str(a.replicas > 0 ? a.replicas : 1000)},
                    {"exact_replicas", str(a.exact_replicas)},
                    {"excursion_n", str(a.excursion_n)},
                    {"excursion_replicas", str(a.excursion_replicas)},
                    {"refinement", str(a.refinement)},
                    {"criteria", a.criteria.empty() ? "7,8,9" : join(a.criteria)}};
  if (wants(a.criteria, 7)) {
    EmbeddingExactConfig c;
    c.seed = seed;
    c.replicas = a.exact_replicas;
    rep.criteria.push_back(verify_embedding_exactness(c, tol));
  }
  if (wants(a.criteria, 8)) {
    ConcentrationConfig c;
    c.seed = seed + 10;
    if (a.replicas > 0) c.replicas = a.replicas;
    c.n_mean = a.n;
    c.n_sup_low = std::max<std::int64_t>(2, a.n / 10);
    c.n_sup_high = a.n * 10;
    c.workers = workers;
    c.mode = mode;
    rep.criteria.push_back(verify_concentration(c, tol));
  }
  if (wants(a.criteria, 9)) {
    ExcursionConfig c;
    c.seed = seed + 20;
    c.n = a.excursion_n;
    c.replicas = a.excursion_replicas;
    c.refinement = a.refinement;
    c.workers = workers;
    rep.criteria.push_back(verify_excursions(c, tol));
  }
  return finish(rep, a);
}

// ---------------------------------------------------------------------------

struct PlotArgs {
  std::string summary;
  std::string what = "arcsine";
  std::string format = "csv";
  double t = 1.0;
  std::string out;
};

int cmd_plot(const PlotArgs& a) {
  const std::filesystem::path path = a.summary;
  const auto s = load_summary(path);
  const auto dir = path.parent_path();
  Plot p;
  if (a.what == "arcsine")
    p = arcsine_plot(s, dir, a.t, false);
  else if (a.what == "zeros")
    p = arcsine_plot(s, dir, a.t, true);
  else if (a.what == "tail")
    p = tail_plot(s);
  else
    p = t_minus_a_plot(s, dir);
  emit(a.format == "svg" ? render_svg(p) : p.table.csv(), a.out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Elephant random walk laboratory at the critical memory p = 3/4"};
  app.set_config("--config", "", "INI file with a [command] section; flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Single replica: S, Z, G, R, M at checkpoints, or a CSV trace");
  c_sim->add_option("--p", sim.p, "memory parameter")->check(CLI::Range(0.0, 1.0));
  c_sim->add_option("--q", sim.q, "probability the first step is +1")->check(CLI::Range(0.0, 1.0));
  c_sim->add_option("--n", sim.n, "horizon")->check(CLI::Range(std::int64_t{1}, kMaxHorizon));
  c_sim->add_option("--seed", sim.seed, "replica seed");
  c_sim->add_option("--sampler", sim.sampler, "urn or memory")->check(CLI::IsMember({"urn", "memory"}));
  c_sim->add_option("--trace-every", sim.trace_every, "emit a CSV row every k steps")
      ->check(CLI::NonNegativeNumber);
  c_sim->add_option("--out", sim.out, "output file (default stdout)");

  EnsembleArgs ens;
  auto* c_ens = app.add_subcommand("ensemble", "Run a Monte Carlo ensemble and write a summary");
  c_ens->add_option("--seed", ens.seed, "master seed");
  c_ens->add_option("--replicas", ens.replicas)->check(CLI::PositiveNumber);
  c_ens->add_option("--p", ens.p)->check(CLI::Range(0.0, 1.0));
  c_ens->add_option("--q", ens.q)->check(CLI::Range(0.0, 1.0));
  c_ens->add_option("--n-base", ens.n_base)->check(CLI::Range(std::int64_t{2}, kMaxHorizon));
  c_ens->add_option("--t-points", ens.t_points, "points of the uniform t grid")->check(CLI::Range(2, 1001));
  c_ens->add_flag("--no-direct", ens.no_direct, "skip direct walks");
  c_ens->add_flag("--tail-only", ens.tail_only, "direct walks stop at the first return");
  c_ens->add_flag("--embedding", ens.embedding, "run the Brownian embedding");
  c_ens->add_option("--embed-n", ens.embed_n)->check(CLI::Range(std::int64_t{2}, kMaxHorizon));
  c_ens->add_flag("--excursions", ens.excursions, "count excursions on the discretized path");
  c_ens->add_option("--path-refinement", ens.path_refinement)->check(CLI::Range(64.0, 1e6));
  c_ens->add_option("--mode", ens.mode, "exit sampler: A (spectral) or B (discretized)")
      ->check(CLI::IsMember({"A", "B", "spectral", "discretized"}));
  c_ens->add_option("--out-dir", ens.out_dir, "directory for summary, sidecars, checkpoint")->required();
  c_ens->add_option("--block-size", ens.block_size)->check(CLI::PositiveNumber);
  c_ens->add_flag("--resume", ens.resume, "resume from the checkpoint in --out-dir");
  c_ens->add_option("--spill-threshold", ens.spill_threshold, "buffered values before spilling to disk");
  c_ens->add_option("--workers", ens.workers, "worker threads (default: ERW_WORKERS or all cores)")
      ->check(CLI::NonNegativeNumber);
  c_ens->add_flag("--quiet", ens.quiet, "no progress output");

  VerifyArgs ver;
  const auto common = [&](CLI::App* c) {
    c->add_option("--seed", ver.seed, "master seed")->each([&](const std::string&) { ver.seed_set = true; });
    c->add_option("--tol", ver.tol, "tolerance override key=value (repeatable)");
    c->add_option("--workers", ver.workers)->check(CLI::NonNegativeNumber);
    c->add_option("--out", ver.out, "report file (default stdout)");
  };
  auto* c_orc = app.add_subcommand("verify-oracles", "Enumeration oracles, sampler equivalence, second moments");
  common(c_orc);
  c_orc->add_option("--replicas", ver.replicas)->check(CLI::PositiveNumber);
  c_orc->add_option("--criteria", ver.criteria, "subset of 1,2,3")->delimiter(',')->check(CLI::Range(1, 3));

  auto* c_arc = app.add_subcommand("verify-arcsine", "Arcsine laws of log G/log n, log Z/log n and the joint ratio");
  common(c_arc);
  c_arc->add_option("--replicas", ver.replicas)->check(CLI::PositiveNumber);
  c_arc->add_option("--n-base", ver.n_list, "comma-separated n_base values")
      ->delimiter(',')->check(CLI::Range(std::int64_t{2}, kMaxHorizon));

  auto* c_tail = app.add_subcommand("verify-tail", "First-return tail against 2 sqrt(2)/pi");
  common(c_tail);
  c_tail->add_option("--replicas", ver.replicas)->check(CLI::PositiveNumber);
  c_tail->add_option("--n-list", ver.n_list, "comma-separated horizons")
      ->delimiter(',')->check(CLI::Range(std::int64_t{2}, kMaxHorizon));

  auto* c_emb = app.add_subcommand("verify-embedding", "Embedding exactness, concentration, excursion counts");
  common(c_emb);
  c_emb->add_option("--n", ver.n, "horizon for the T_n - A_n check")->check(CLI::Range(std::int64_t{20}, kMaxHorizon));
  c_emb->add_option("--replicas", ver.replicas, "embedded replicas per horizon")->check(CLI::PositiveNumber);
  c_emb->add_option("--mode", ver.mode, "exit sampler: A or B")->check(CLI::IsMember({"A", "B", "spectral", "discretized"}));
  c_emb->add_option("--exact-replicas", ver.exact_replicas)->check(CLI::PositiveNumber);
  c_emb->add_option("--excursion-n", ver.excursion_n)->check(CLI::Range(std::int64_t{2}, kMaxPathHorizon));
  c_emb->add_option("--excursion-replicas", ver.excursion_replicas)->check(CLI::PositiveNumber);
  c_emb->add_option("--refinement", ver.refinement, "path refinement (dt = gap^2 / refinement)")
      ->check(CLI::Range(64.0, 1e6));
  c_emb->add_option("--criteria", ver.criteria, "subset of 7,8,9")->delimiter(',')->check(CLI::Range(7, 9));

  PlotArgs plot;
  auto* c_plot = app.add_subcommand("plot-data", "CSV or SVG from a persisted summary");
  c_plot->add_option("--summary", plot.summary, "summary.json")->required()->check(CLI::ExistingFile);
  c_plot->add_option("--what", plot.what)->check(CLI::IsMember({"arcsine", "zeros", "tail", "t-minus-a"}));
  c_plot->add_option("--format", plot.format)->check(CLI::IsMember({"csv", "svg"}));
  c_plot->add_option("--t", plot.t, "checkpoint exponent for ECDF plots")->check(CLI::Range(0.0, 1.0));
  c_plot->add_option("--out", plot.out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_sim->parsed()) return cmd_simulate(sim);
    if (c_ens->parsed()) return cmd_ensemble(ens);
    if (c_orc->parsed()) return cmd_verify_oracles(ver);
    if (c_arc->parsed()) return cmd_verify_arcsine(ver);
    if (c_tail->parsed()) return cmd_verify_tail(ver);
    if (c_emb->parsed()) return cmd_verify_embedding(ver);
    if (c_plot->parsed()) return cmd_plot(plot);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
