#pragma once

// Ensemble summary: value types, JSON (de)serialization with an embedded
// checksum, and the schema version guard.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "erw/column_store.hpp"
#include "erw/error.hpp"
#include "erw/observables.hpp"

namespace erw {

inline constexpr const char* kCodeVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

struct ColumnRef {
  std::string path;  // relative to the summary directory
  std::string hash;  // FNV-1a 64 of the sidecar file
  std::int64_t count = 0;
  friend bool operator==(const ColumnRef&, const ColumnRef&) = default;
};

struct ColumnStats {
  std::int64_t count = 0;
  std::int64_t excluded = 0;  // count + excluded = replicas
  std::optional<double> mean;
  std::optional<double> q25;
  std::optional<double> median;
  std::optional<double> q75;
  std::optional<double> ks;            // against the scaled arcsine reference
  std::optional<double> band_fraction; // share of the sample inside the band
  friend bool operator==(const ColumnStats&, const ColumnStats&) = default;
};

struct CheckpointSummary {
  double t = 0.0;
  std::int64_t n = 0;
  std::int64_t censored = 0;  // replicas with R > n
  std::optional<TailEstimate> tail;
  std::optional<std::int64_t> z_below_quarter;  // #{Z(n) <= n^{1/4}}
  std::optional<ColumnStats> z;
  std::optional<ColumnStats> g;
  std::optional<ColumnStats> ratio;
  std::optional<ColumnRef> z_ecdf_ref;
  std::optional<ColumnRef> g_ecdf_ref;
  std::optional<ColumnRef> ratio_ecdf_ref;
  friend bool operator==(const CheckpointSummary&, const CheckpointSummary&) = default;
};

struct EmbeddingSummary {
  std::int64_t n = 0;
  std::int64_t replicas = 0;
  std::string exit_mode;
  double a_sq_prefix = 0.0;  // A_n
  double mean_T_minus_A = 0.0;
  double var_T_minus_A = 0.0;
  double mean_V = 0.0;
  double mean_N = 0.0;
  double se_N = 0.0;
  double mean_sup_N_sq = 0.0;
  double mean_alpha_check = 0.0;  // mean of -2 log alpha(T_n) / T_n
  std::vector<double> eps;
  std::vector<double> prop42_freq;
  std::optional<std::int64_t> excursion_matches;
  std::optional<ColumnRef> t_minus_a_ref;
  friend bool operator==(const EmbeddingSummary&, const EmbeddingSummary&) = default;
};

struct Provenance {
  std::uint64_t seed = 0;
  std::int64_t replicas = 0;
  double p = 0.75;
  double q = 0.5;
  std::int64_t n_base = 0;
  std::vector<double> t_grid;
  std::string code_version = kCodeVersion;
  int schema_version = kSchemaVersion;
  std::string spec_hash;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct EnsembleSummary {
  Provenance provenance;
  std::vector<CheckpointSummary> per_checkpoint;
  std::optional<EmbeddingSummary> embedding;
  friend bool operator==(const EnsembleSummary&, const EnsembleSummary&) = default;
};

// ---------------------------------------------------------------------------
// JSON

namespace detail {
using nlohmann::json;

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> get_opt(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}
}  // namespace detail

inline void to_json(nlohmann::json& j, const ColumnRef& r) {
  j = {{"path", r.path}, {"hash", r.hash}, {"count", r.count}};
}
inline void from_json(const nlohmann::json& j, ColumnRef& r) {
  j.at("path").get_to(r.path);
  j.at("hash").get_to(r.hash);
  j.at("count").get_to(r.count);
}

inline void to_json(nlohmann::json& j, const ColumnStats& c) {
  using detail::opt;
  j = {{"count", c.count},       {"excluded", c.excluded}, {"mean", opt(c.mean)},
       {"q25", opt(c.q25)},      {"median", opt(c.median)}, {"q75", opt(c.q75)},
       {"ks", opt(c.ks)},        {"band_fraction", opt(c.band_fraction)}};
}
inline void from_json(const nlohmann::json& j, ColumnStats& c) {
  using detail::get_opt;
  j.at("count").get_to(c.count);
  j.at("excluded").get_to(c.excluded);
  c.mean = get_opt<double>(j, "mean");
  c.q25 = get_opt<double>(j, "q25");
  c.median = get_opt<double>(j, "median");
  c.q75 = get_opt<double>(j, "q75");
  c.ks = get_opt<double>(j, "ks");
  c.band_fraction = get_opt<double>(j, "band_fraction");
}

inline void to_json(nlohmann::json& j, const TailEstimate& t) {
  j = {{"n", t.n},         {"survivors", t.survivors}, {"replicas", t.replicas},
       {"p_hat", t.p_hat}, {"ci_low", t.ci_low},       {"ci_high", t.ci_high},
       {"theory", t.theory}};
}
inline void from_json(const nlohmann::json& j, TailEstimate& t) {
  j.at("n").get_to(t.n);
  j.at("survivors").get_to(t.survivors);
  j.at("replicas").get_to(t.replicas);
  j.at("p_hat").get_to(t.p_hat);
  j.at("ci_low").get_to(t.ci_low);
  j.at("ci_high").get_to(t.ci_high);
  j.at("theory").get_to(t.theory);
}

inline void to_json(nlohmann::json& j, const CheckpointSummary& c) {
  using detail::opt;
  j = {{"t", c.t},
       {"n", c.n},
       {"censored", c.censored},
       {"tail", opt(c.tail)},
       {"z_below_quarter", opt(c.z_below_quarter)},
       {"z_stats", opt(c.z)},
       {"g_stats", opt(c.g)},
       {"ratio_stats", opt(c.ratio)},
       {"ks_z", c.z ? opt(c.z->ks) : nullptr},
       {"ks_g", c.g ? opt(c.g->ks) : nullptr},
       {"z_ecdf_ref", opt(c.z_ecdf_ref)},
       {"g_ecdf_ref", opt(c.g_ecdf_ref)},
       {"ratio_ecdf_ref", opt(c.ratio_ecdf_ref)}};
}
inline void from_json(const nlohmann::json& j, CheckpointSummary& c) {
  using detail::get_opt;
  j.at("t").get_to(c.t);
  j.at("n").get_to(c.n);
  j.at("censored").get_to(c.censored);
  c.tail = get_opt<TailEstimate>(j, "tail");
  c.z_below_quarter = get_opt<std::int64_t>(j, "z_below_quarter");
  c.z = get_opt<ColumnStats>(j, "z_stats");
  c.g = get_opt<ColumnStats>(j, "g_stats");
  c.ratio = get_opt<ColumnStats>(j, "ratio_stats");
  c.z_ecdf_ref = get_opt<ColumnRef>(j, "z_ecdf_ref");
  c.g_ecdf_ref = get_opt<ColumnRef>(j, "g_ecdf_ref");
  c.ratio_ecdf_ref = get_opt<ColumnRef>(j, "ratio_ecdf_ref");
}

inline void to_json(nlohmann::json& j, const EmbeddingSummary& e) {
  using detail::opt;
  j = {{"n", e.n},
       {"replicas", e.replicas},
       {"exit_mode", e.exit_mode},
       {"A_n", e.a_sq_prefix},
       {"mean_T_minus_A", e.mean_T_minus_A},
       {"var_T_minus_A", e.var_T_minus_A},
       {"mean_V", e.mean_V},
       {"mean_N", e.mean_N},
       {"se_N", e.se_N},
       {"mean_sup_N_sq", e.mean_sup_N_sq},
       {"mean_alpha_check", e.mean_alpha_check},
       {"eps", e.eps},
       {"prop42_freq", e.prop42_freq},
       {"excursion_matches", opt(e.excursion_matches)},
       {"t_minus_a_ref", opt(e.t_minus_a_ref)}};
}
inline void from_json(const nlohmann::json& j, EmbeddingSummary& e) {
  using detail::get_opt;
  j.at("n").get_to(e.n);
  j.at("replicas").get_to(e.replicas);
  j.at("exit_mode").get_to(e.exit_mode);
  j.at("A_n").get_to(e.a_sq_prefix);
  j.at("mean_T_minus_A").get_to(e.mean_T_minus_A);
  j.at("var_T_minus_A").get_to(e.var_T_minus_A);
  j.at("mean_V").get_to(e.mean_V);
  j.at("mean_N").get_to(e.mean_N);
  j.at("se_N").get_to(e.se_N);
  j.at("mean_sup_N_sq").get_to(e.mean_sup_N_sq);
  j.at("mean_alpha_check").get_to(e.mean_alpha_check);
  j.at("eps").get_to(e.eps);
  j.at("prop42_freq").get_to(e.prop42_freq);
  e.excursion_matches = get_opt<std::int64_t>(j, "excursion_matches");
  e.t_minus_a_ref = get_opt<ColumnRef>(j, "t_minus_a_ref");
}

inline void to_json(nlohmann::json& j, const Provenance& p) {
  j = {{"seed", p.seed},
       {"replicas", p.replicas},
       {"p", p.p},
       {"q", p.q},
       {"n_base", p.n_base},
       {"t_grid", p.t_grid},
       {"code_version", p.code_version},
       {"schema_version", p.schema_version},
       {"spec_hash", p.spec_hash}};
}
inline void from_json(const nlohmann::json& j, Provenance& p) {
  j.at("seed").get_to(p.seed);
  j.at("replicas").get_to(p.replicas);
  j.at("p").get_to(p.p);
  j.at("q").get_to(p.q);
  j.at("n_base").get_to(p.n_base);
  j.at("t_grid").get_to(p.t_grid);
  j.at("code_version").get_to(p.code_version);
  j.at("schema_version").get_to(p.schema_version);
  j.at("spec_hash").get_to(p.spec_hash);
}

inline void to_json(nlohmann::json& j, const EnsembleSummary& s) {
  j = {{"provenance", s.provenance},
       {"per_checkpoint", s.per_checkpoint},
       {"embedding", detail::opt(s.embedding)}};
}
inline void from_json(const nlohmann::json& j, EnsembleSummary& s) {
  j.at("provenance").get_to(s.provenance);
  j.at("per_checkpoint").get_to(s.per_checkpoint);
  s.embedding = detail::get_opt<EmbeddingSummary>(j, "embedding");
}

// ---------------------------------------------------------------------------
// Text form: pretty JSON, keys sorted, with "checksum" = FNV-1a of the compact
// dump of everything else.

inline std::string serialize_summary(const EnsembleSummary& s) {
  nlohmann::json j = s;
  const std::string body = j.dump();
  j["checksum"] = fnv1a_hex(body);
  return j.dump(2) + "\n";
}

inline EnsembleSummary parse_summary(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("summary is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("checksum") || !j["checksum"].is_string())
    throw FormatError("summary lacks a checksum");
  const auto stored = j["checksum"].get<std::string>();
  j.erase("checksum");
  if (fnv1a_hex(j.dump()) != stored) throw FormatError("summary checksum mismatch");
  try {
    const int version = j.at("provenance").at("schema_version").get<int>();
    if (version != kSchemaVersion)
      throw SchemaVersionError("summary schema version " + std::to_string(version) +
                               " cannot be migrated to version " +
                               std::to_string(kSchemaVersion));
    return j.get<EnsembleSummary>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed summary: ") + e.what());
  }
}

inline void persist_summary(const EnsembleSummary& s, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out << serialize_summary(s);
    if (!out) throw IoError("failed writing " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline EnsembleSummary load_summary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open summary " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_summary(ss.str());
}

/// Loads a sidecar referenced from a summary, checking its hash.
inline std::vector<double> load_column(const std::filesystem::path& summary_dir,
                                       const ColumnRef& ref) {
  const auto path = summary_dir / ref.path;
  if (SidecarWriter::hash_file(path) != ref.hash)
    throw FormatError("sidecar hash mismatch: " + path.string());
  auto v = read_sidecar(path);
  if (static_cast<std::int64_t>(v.size()) != ref.count)
    throw FormatError("sidecar count mismatch: " + path.string());
  return v;
}

}  // namespace erw
