#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "erw/ensemble.hpp"
#include "erw/plot.hpp"
#include "erw/report.hpp"

using namespace erw;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  static const auto base = [] {
    std::random_device rd;
    return fs::temp_directory_path() / ("erw_unit_" + std::to_string(rd()));
  }();
  auto p = base / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

EnsembleSpec small_spec() {
  EnsembleSpec s;
  s.master_seed = 42;
  s.replicas = 1500;
  s.n_base = 2000;
  s.t_grid = {0.0, 0.5, 0.75, 1.0};
  s.block_size = 256;
  s.embedding = true;
  s.embed_n = 50;
  return s;
}

}  // namespace

TEST(Streams, DeterministicAndDistinct) {
  EXPECT_EQ(derive_seed(1, 0), derive_seed(1, 0));
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
  Rng a = derive_stream(7, 3), b = derive_stream(7, 3);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a(), b());

  // neighbouring streams look independent: correlation of uniforms
  Rng x = derive_stream(7, 10), y = derive_stream(7, 11);
  RunningMoments prod;
  for (int i = 0; i < 200000; ++i) prod.add((x.uniform() - 0.5) * (y.uniform() - 0.5));
  EXPECT_LT(std::fabs(prod.mean()), 4 * prod.std_error());
}

TEST(Spec, HashCoversResultFieldsOnly) {
  auto a = small_spec(), b = small_spec();
  b.workers = 8;
  b.block_size = 7;
  b.spill_threshold = 3;
  EXPECT_EQ(a.hash(), b.hash());
  b.master_seed = 43;
  EXPECT_NE(a.hash(), b.hash());
}

TEST(Spec, Validation) {
  auto s = small_spec();
  s.p = 0.7;
  EXPECT_THROW(s.validate(), ConfigError);
  s = small_spec();
  s.path_refinement = 16;
  EXPECT_THROW(s.validate(), ConfigError);
  s = small_spec();
  s.t_grid = {0.5, 0.2};
  EXPECT_THROW(s.validate(), ConfigError);
  s = small_spec();
  s.direct = s.embedding = false;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Ensemble, SingleReplicaMatchesDirectObservables) {
  EnsembleSpec s;
  s.master_seed = 5;
  s.replicas = 1;
  s.n_base = 5000;
  s.t_grid = {0.5, 1.0};
  const auto sum = run_ensemble(s);
  const auto cps = geometric_checkpoints(s.n_base, s.t_grid);
  Rng rng = derive_stream(5, 0);
  const auto obs = simulate_walk(WalkParams{0.75, 0.5, 5000, 0}, cps, rng);
  for (std::size_t j = 0; j < cps.size(); ++j) {
    const auto& c = sum.per_checkpoint[j];
    EXPECT_EQ(c.n, cps[j]);
    EXPECT_EQ(c.censored, obs.survived(j) ? 1 : 0);
    if (obs.z[j] > 0) {
      EXPECT_DOUBLE_EQ(*c.z->mean, std::log(double(obs.z[j])) / std::log(5000.0));
      EXPECT_DOUBLE_EQ(*c.g->mean, std::log(double(obs.g[j])) / std::log(5000.0));
    } else {
      EXPECT_EQ(c.z->count, 0);
    }
  }
}

TEST(Ensemble, ConservationAndStructure) {
  const auto s = small_spec();
  const auto sum = run_ensemble(s);
  EXPECT_EQ(sum.provenance.spec_hash, s.hash());
  ASSERT_EQ(sum.per_checkpoint.size(), 4u);
  for (const auto& c : sum.per_checkpoint) {
    EXPECT_EQ(c.z->count + c.z->excluded, s.replicas);
    EXPECT_EQ(c.g->count + c.g->excluded, s.replicas);
    EXPECT_EQ(c.z->excluded, c.censored);
    EXPECT_EQ(c.ratio->count + c.ratio->excluded, s.replicas);
  }
  EXPECT_EQ(sum.per_checkpoint[0].ratio->count, 0);  // t = 0
  EXPECT_FALSE(sum.per_checkpoint[0].z->ks.has_value());
  ASSERT_TRUE(sum.embedding);
  EXPECT_EQ(sum.embedding->replicas, s.replicas);
  EXPECT_EQ(sum.embedding->prop42_freq.size(), 3u);
  EXPECT_LT(std::fabs(sum.embedding->mean_N), 4 * sum.embedding->se_N);
}

TEST(Ensemble, WorkerCountDoesNotChangeOutput) {
  auto s = small_spec();
  const auto d1 = scratch("w1"), d4 = scratch("w4");
  s.output_dir = d1.string();
  s.workers = 1;
  const auto one = run_ensemble(s);
  s.output_dir = d4.string();
  s.workers = 4;
  const auto four = run_ensemble(s);
  EXPECT_EQ(one, four);
  EXPECT_EQ(slurp(d1 / "summary.json"), slurp(d4 / "summary.json"));
  EXPECT_EQ(slurp(d1 / "checkpoint.bin"), slurp(d4 / "checkpoint.bin"));
  for (const auto& e : fs::directory_iterator(d1 / "columns"))
    EXPECT_EQ(slurp(e.path()), slurp(d4 / "columns" / e.path().filename())) << e.path();
}

TEST(Ensemble, ResumeAfterInterruption) {
  auto s = small_spec();
  const auto full_dir = scratch("full"), part_dir = scratch("part");
  s.output_dir = full_dir.string();
  const auto full = run_ensemble(s);

  s.output_dir = part_dir.string();
  s.stop_after_blocks = 2;
  EXPECT_THROW(run_ensemble(s), RunInterrupted);
  EXPECT_FALSE(fs::exists(part_dir / "summary.json"));
  // a torn trailing record is discarded on resume
  {
    std::ofstream out(part_dir / "checkpoint.bin", std::ios::binary | std::ios::app);
    out << "garbage";
  }
  s.stop_after_blocks.reset();
  s.resume = true;
  s.workers = 3;
  const auto resumed = run_ensemble(s);
  EXPECT_EQ(full, resumed);
  EXPECT_EQ(slurp(full_dir / "summary.json"), slurp(part_dir / "summary.json"));
  EXPECT_EQ(slurp(full_dir / "checkpoint.bin"), slurp(part_dir / "checkpoint.bin"));
}

TEST(Ensemble, ResumeRejectsForeignLog) {
  auto s = small_spec();
  const auto dir = scratch("foreign");
  s.output_dir = dir.string();
  s.stop_after_blocks = 1;
  EXPECT_THROW(run_ensemble(s), RunInterrupted);
  s.stop_after_blocks.reset();
  s.resume = true;
  s.master_seed = 99;
  EXPECT_THROW(run_ensemble(s), FormatError);
}

TEST(Ensemble, FailingReplicasAreQuarantined) {
  auto s = small_spec();
  s.replica_hook = [](std::int64_t i) {
    if (i == 300 || i == 301) throw std::runtime_error("injected");
  };
  try {
    run_ensemble(s);
    FAIL() << "expected EnsembleFailure";
  } catch (const EnsembleFailure& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("2 replica(s)"), std::string::npos);
    EXPECT_NE(what.find("replica 300"), std::string::npos);
    EXPECT_NE(what.find("replica 301"), std::string::npos);
  }
}

TEST(Ensemble, SpillingDoesNotChangeOutput) {
  auto s = small_spec();
  const auto a = scratch("nospill"), b = scratch("spill");
  s.output_dir = a.string();
  s.spill_threshold = 0;
  const auto plain = run_ensemble(s);
  s.output_dir = b.string();
  s.spill_threshold = 500;
  const auto spilled = run_ensemble(s);
  EXPECT_EQ(plain, spilled);
  EXPECT_FALSE(fs::exists(b / "spill"));
}

TEST(ColumnStore, MergedRunsAreSorted) {
  const auto dir = scratch("store");
  ColumnStore store(2, 37, dir);
  std::mt19937_64 g(3);
  std::normal_distribution<double> d;
  std::vector<double> ref;
  for (int i = 0; i < 1000; ++i) {
    const double v = d(g);
    store.push(i % 2, v);
    if (i % 2 == 0) ref.push_back(v);
  }
  EXPECT_GT(store.spilled_runs(), 2u);
  EXPECT_EQ(store.count(0), 500);
  std::sort(ref.begin(), ref.end());
  std::vector<double> got;
  store.for_each_sorted(0, [&](double v) { got.push_back(v); });
  EXPECT_EQ(got, ref);
}

TEST(Summary, SidecarStatisticsAgreeWithDirectComputation) {
  auto s = small_spec();
  const auto dir = scratch("sidecar");
  s.output_dir = dir.string();
  s.spill_threshold = 1000;
  const auto sum = run_ensemble(s);
  const auto& c = sum.per_checkpoint.back();
  const auto g = load_column(dir, *c.g_ecdf_ref);
  ASSERT_EQ(static_cast<std::int64_t>(g.size()), c.g->count);
  EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
  const double ks = ks_distance_sorted(g, [&](double x) { return arcsine_cdf(x / c.t); });
  EXPECT_NEAR(*c.g->ks, ks, 1e-12);
  double mean = 0;
  for (double v : g) mean += v;
  EXPECT_NEAR(*c.g->mean, mean / double(g.size()), 1e-12);
  EXPECT_DOUBLE_EQ(*c.g->median, EmpiricalDistribution(g).median());

  const auto tma = load_column(dir, *sum.embedding->t_minus_a_ref);
  EXPECT_EQ(static_cast<std::int64_t>(tma.size()), s.replicas);
}

TEST(Summary, RoundTripAndIntegrity) {
  auto s = small_spec();
  const auto dir = scratch("roundtrip");
  s.output_dir = dir.string();
  const auto sum = run_ensemble(s);
  const auto loaded = load_summary(dir / "summary.json");
  EXPECT_EQ(sum, loaded);
  EXPECT_EQ(serialize_summary(loaded), slurp(dir / "summary.json"));

  auto text = slurp(dir / "summary.json");
  auto bad = text;
  bad[bad.find("\"replicas\"") + 12] ^= 1;
  EXPECT_THROW(parse_summary(bad), FormatError);
  EXPECT_THROW(parse_summary("not json"), FormatError);

  auto other = sum;
  other.provenance.schema_version = kSchemaVersion + 1;
  EXPECT_THROW(parse_summary(serialize_summary(other)), SchemaVersionError);

  const auto ref = *sum.per_checkpoint.back().z_ecdf_ref;
  {
    std::fstream f(dir / ref.path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(20);
    f.put('\x7f');
  }
  EXPECT_THROW(load_column(dir, ref), FormatError);
}

TEST(Report, RendersBreachLines) {
  Report r;
  r.command = "verify-test";
  r.parameters = {{"seed", "1"}};
  CriterionResult c{3, "demo"};
  c.add("first", 0.5, "<= 1", true);
  c.add("second", 2.5, "<= 1", false);
  r.criteria.push_back(c);
  const auto text = r.render();
  EXPECT_FALSE(r.pass());
  EXPECT_NE(text.find("[BREACH] second"), std::string::npos);
  EXPECT_NE(text.find("BREACH criterion 3: second = 2.5, required <= 1"), std::string::npos);
  EXPECT_NE(text.find("overall: FAIL"), std::string::npos);
  const auto b = text.find(kTrailerBegin), e = text.find(kTrailerEnd);
  ASSERT_LT(b, e);
  const auto j = nlohmann::json::parse(text.substr(b + std::strlen(kTrailerBegin), e - b - std::strlen(kTrailerBegin)));
  EXPECT_FALSE(j["pass"].get<bool>());
  EXPECT_EQ(j["criteria"][0]["checks"].size(), 2u);
}

TEST(Plot, DeterministicCsvAndSvg) {
  auto s = small_spec();
  const auto dir = scratch("plot");
  s.output_dir = dir.string();
  const auto sum = run_ensemble(s);
  const auto p1 = arcsine_plot(sum, dir, 1.0), p2 = arcsine_plot(sum, dir, 1.0);
  EXPECT_EQ(p1.table.csv(), p2.table.csv());
  EXPECT_EQ(render_svg(p1), render_svg(p2));
  EXPECT_EQ(p1.table.header, (std::vector<std::string>{"x", "ecdf", "reference"}));
  EXPECT_NE(render_svg(p1).find("<svg"), std::string::npos);
  EXPECT_THROW(arcsine_plot(sum, dir, 0.0), ConfigError);
  const auto t = t_minus_a_plot(sum, dir);
  double total = 0;
  for (const auto& row : t.table.rows) total += row[2];
  EXPECT_EQ(total, double(s.replicas));
}
