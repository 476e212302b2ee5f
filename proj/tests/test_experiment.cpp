#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "remgof/errors.hpp"
#include "remgof/experiment.hpp"
#include "remgof/parallel.hpp"
#include "remgof/report.hpp"

using namespace remgof;
namespace fs = std::filesystem;

TEST_CASE("registry holds the designed scenarios") {
  for (const char* name : {"fle", "coverage-fle", "coverage-nle", "coverage-re", "power-fle", "power-re", "omnibus-L1",
                           "omnibus-L4", "omnibus-ms", "application"}) {
    const auto& s = find_scenario(name);
    CHECK(!s.variants.empty());
    CHECK(!s.levels.empty());
    CHECK((s.factor == "n" || s.factor == "actors"));
  }
  CHECK_THROWS_AS(find_scenario("missing"), ValidationError);
  const auto& ms = find_scenario("omnibus-ms");
  CHECK(ms.variants.size() == 4);
  const auto j = scenario_to_json(find_scenario("coverage-nle"));
  CHECK(j["name"] == "coverage-nle");
  CHECK(j.contains("dgp_at_first_level"));
}

TEST_CASE("uniform KS helper") {
  std::vector<double> grid;
  for (int i = 0; i < 200; ++i) grid.push_back((i + 0.5) / 200.0);
  const auto [d, p] = ks_uniform(grid);
  CHECK(d == doctest::Approx(0.0025));
  CHECK(p > 0.99);
  std::vector<double> skewed;
  for (int i = 0; i < 200; ++i) skewed.push_back(std::pow((i + 0.5) / 200.0, 3.0));
  skewed.push_back(std::numeric_limits<double>::quiet_NaN());
  CHECK(ks_uniform(skewed).second < 1e-6);
}

TEST_CASE("replicate seeds are deterministic and distinct") {
  CHECK(replicate_seed(1, "fle", 0, 3) == replicate_seed(1, "fle", 0, 3));
  CHECK(replicate_seed(1, "fle", 0, 3) != replicate_seed(1, "fle", 0, 4));
  CHECK(replicate_seed(1, "fle", 0, 3) != replicate_seed(1, "fle", 1, 3));
  CHECK(replicate_seed(1, "fle", 0, 3) != replicate_seed(2, "fle", 0, 3));
  CHECK(replicate_seed(1, "fle", 0, 3) != replicate_seed(1, "power-fle", 0, 3));
}

TEST_CASE("cell summary counts failures and rejections") {
  CellResult c;
  c.pvalues = {0.01, 0.2, std::numeric_limits<double>::quiet_NaN(), 0.04, 0.9};
  c.summarize(0.05);
  CHECK(c.failures == 1);
  CHECK(c.rejection_rate == doctest::Approx(0.5));
  const auto j = cell_to_json(c, 0.05);
  CHECK(j.contains("rejection_rate"));
}

TEST_CASE("parallel_for visits every index once") {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
  for (const auto& h : hits) CHECK(h.load() == 1);
}

TEST_CASE("small experiment writes cells and resumes") {
  const fs::path dir = fs::temp_directory_path() / "remgof_experiment_test";
  fs::remove_all(dir);
  const auto& s = find_scenario("coverage-re");
  ExperimentOptions opt;
  opt.reps = 4;
  opt.levels = {10};
  opt.B = 100;
  opt.out_dir = dir.string();
  const auto cells = run_experiment(s, opt);
  REQUIRE(cells.size() == 1);
  CHECK(cells[0].pvalues.size() == 4);
  CHECK(cells[0].failures == 0);
  const fs::path cell = dir / "cells" / "CS_actors10";
  CHECK(fs::exists(cell / "pvalues.csv"));
  CHECK(fs::exists(cell / "histogram.csv"));
  CHECK(fs::exists(cell / "summary.json"));
  const auto summary = read_json((dir / "summary.json").string());
  CHECK(summary["scenario"] == "coverage-re");
  CHECK(fs::exists(dir / "scenario.json"));

  std::size_t calls = 0;
  opt.progress = [&](double, std::size_t) { ++calls; };
  const auto again = run_experiment(s, opt);
  CHECK(calls == 0);
  CHECK(again[0].pvalues == cells[0].pvalues);
  fs::remove_all(dir);
}

TEST_CASE("replicates are reproducible") {
  const auto& s = find_scenario("coverage-fle");
  const auto a = run_replicate(s, 300, 77, 100);
  const auto b = run_replicate(s, 300, 77, 100);
  REQUIRE(a.size() == 1);
  CHECK(a[0].first == b[0].first);
  CHECK(a[0].second.empty());
}
