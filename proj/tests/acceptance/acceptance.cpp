// Acceptance gate: one PASS/FAIL line per criterion, with the checks behind it.
// Usage: erw_acceptance [--only N] [--workers W]

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "erw/ensemble.hpp"
#include "erw/report.hpp"
#include "erw/verify.hpp"

namespace {

using namespace erw;

unsigned g_workers = 1;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<ArcsineRun>& arcsine_runs() {
  static std::vector<ArcsineRun> runs = [] {
    ArcsineConfig c;
    c.seed = 4;
    c.replicas = 5000;
    c.n_bases = {100, 10000, 1000000};
    c.workers = g_workers;
    return run_arcsine_ensembles(c);
  }();
  return runs;
}

CriterionResult criterion_10() {
  CriterionResult res{10, "determinism of reports and of ensembles across worker counts"};
  const auto report = [] {
    Report rep;
    rep.command = "determinism-probe";
    SamplerConfig s;
    s.replicas = 20000;
    rep.criteria.push_back(verify_sampler_equivalence(s));
    TailConfig t;
    t.replicas = 4000;
    t.n_list = {100, 10000};
    rep.criteria.push_back(verify_tail(run_tail_ensemble(t)));
    ExcursionConfig e;
    e.replicas = 40;
    e.n = 128;
    rep.criteria.push_back(verify_excursions(e));
    return rep.render();
  };
  const auto r1 = report();
  const auto r2 = report();
  res.add("report reruns differ (bytes)", r1 == r2 ? 0.0 : 1.0, "== 0", r1 == r2);

  const auto base = std::filesystem::temp_directory_path() / "erw_acceptance_determinism";
  std::filesystem::remove_all(base);
  const auto run = [&](unsigned workers, const std::string& name) {
    EnsembleSpec spec;
    spec.master_seed = 10;
    spec.replicas = 3000;
    spec.n_base = 20000;
    spec.embedding = true;
    spec.embed_n = 300;
    spec.block_size = 256;
    spec.workers = workers;
    spec.output_dir = (base / name).string();
    run_ensemble(spec);
    return base / name;
  };
  const auto d1 = run(1, "w1");
  const auto d8 = run(8, "w8");
  std::int64_t differing = 0, files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(d1)) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), d1);
    ++files;
    if (slurp(e.path()) != slurp(d8 / rel)) ++differing;
  }
  res.table.push_back("compared " + std::to_string(files) + " files (summary, sidecars, checkpoint log)");
  res.add("files differing between 1 and 8 workers", static_cast<double>(differing), "== 0",
          differing == 0 && files > 0);
  std::filesystem::remove_all(base);
  return res;
}

CriterionResult run_criterion(int id) {
  switch (id) {
    case 1: {
      OracleConfig c;
      c.seed = 1;
      c.replicas = 1000000;
      c.n = 12;
      return verify_oracle_exactness(c);
    }
    case 2: {
      SamplerConfig c;
      c.seed = 2;
      c.replicas = 100000;
      c.n = 10;
      return verify_sampler_equivalence(c);
    }
    case 3: {
      MomentConfig c;
      c.seed = 3;
      c.replicas = 100000;
      c.n_list = {1000, 10000};
      return verify_second_moments(c);
    }
    case 4:
      return verify_arcsine_laws(arcsine_runs());
    case 5:
      return verify_joint_ratio(arcsine_runs());
    case 6: {
      TailConfig c;
      c.seed = 6;
      c.replicas = 100000;
      c.n_list = {100, 10000, 1000000};
      c.workers = g_workers;
      return verify_tail(run_tail_ensemble(c));
    }
    case 7: {
      EmbeddingExactConfig c;
      c.seed = 7;
      c.replicas = 100000;
      c.n = 10;
      c.ks_draws = 100000;
      return verify_embedding_exactness(c);
    }
    case 8: {
      ConcentrationConfig c;
      c.seed = 8;
      c.replicas = 1000;
      c.n_mean = 10000;
      c.n_sup_low = 1000;
      c.n_sup_high = 100000;
      c.workers = g_workers;
      return verify_concentration(c);
    }
    case 9: {
      ExcursionConfig c;
      c.seed = 9;
      c.replicas = 1000;
      c.n = 512;
      c.refinement = 64.0;
      c.workers = g_workers;
      return verify_excursions(c);
    }
    case 10:
      return criterion_10();
  }
  throw std::invalid_argument("no criterion " + std::to_string(id));
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      ids.push_back(std::atoi(argv[++i]));
    } else if (a == "--workers" && i + 1 < argc) {
      g_workers = static_cast<unsigned>(std::max(1, std::atoi(argv[++i])));
    } else {
      std::cerr << "usage: erw_acceptance [--only N]... [--workers W]\n";
      return 2;
    }
  }
  if (ids.empty())
    for (int i = 1; i <= 10; ++i) ids.push_back(i);

  bool all = true;
  std::vector<std::string> lines;
  for (int id : ids) {
    CriterionResult r;
    try {
      r = run_criterion(id);
    } catch (const std::exception& e) {
      r.id = id;
      r.title = std::string("error: ") + e.what();
    }
    std::cout << "== criterion " << id << ": " << r.title << "\n";
    for (const auto& row : r.table) std::cout << "   " << row << "\n";
    for (const auto& c : r.checks)
      std::cout << (c.ok ? "   [ok]     " : "   [BREACH] ") << c.name << " = " << fmt("%.6g", c.value)
                << "  (required " << c.bound << ")\n";
    lines.push_back("criterion " + std::to_string(id) + ": " + (r.pass() ? "PASS" : "FAIL") + "  " + r.title);
    all = all && r.pass();
    std::cout.flush();
  }
  std::cout << "\n";
  for (const auto& l : lines) std::cout << l << "\n";
  return all ? 0 : 1;
}
