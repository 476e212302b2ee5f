#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "remgof/dgp.hpp"
#include "remgof/model_spec.hpp"

namespace remgof {

/// One fitted model within a scenario. More than one tested term means the
/// recorded p-value is the omnibus one.
struct ScenarioVariant {
  std::string name;
  ModelSpec model;
  std::vector<std::string> tested;
};

struct Scenario {
  std::string name;
  std::string description;
  /// "n" (events) or "actors".
  std::string factor;
  std::vector<double> levels;
  std::size_t default_reps = 200;
  double alpha = 0.05;
  bool stratified = false;
  std::function<DgpSpec(double level)> dgp;
  std::vector<ScenarioVariant> variants;
};

/// Version tag of the registered scenario definitions.
extern const char* const kScenarioVersion;

const std::vector<Scenario>& scenario_registry();
/// Throws ValidationError for unknown names.
const Scenario& find_scenario(const std::string& name);
nlohmann::json scenario_to_json(const Scenario& s);

struct ExperimentOptions {
  std::optional<std::size_t> reps;
  /// Overrides the scenario's levels.
  std::vector<double> levels;
  std::uint64_t seed = 1;
  std::size_t B = 1000;
  /// Empty: nothing written.
  std::string out_dir;
  bool resume = true;
  /// Per-replicate progress callback (level, rep).
  std::function<void(double, std::size_t)> progress;
};

struct CellResult {
  std::string variant;
  double level = 0.0;
  std::vector<std::uint64_t> seeds;
  /// NaN where the replicate failed.
  std::vector<double> pvalues;
  std::vector<std::string> errors;
  std::size_t failures = 0;
  double rejection_rate = 0.0;
  /// One-sample KS test of the p-values against U(0, 1).
  double ks_statistic = 0.0;
  double ks_pvalue = 1.0;

  void summarize(double alpha);
};

nlohmann::json cell_to_json(const CellResult& c, double alpha);

/// Seed of replicate `rep` at level index `level_index`.
std::uint64_t replicate_seed(std::uint64_t base, const std::string& scenario, std::size_t level_index, std::size_t rep);

/// Simulates once and returns one p-value per variant (NaN plus message on failure).
std::vector<std::pair<double, std::string>> run_replicate(const Scenario& s, double level, std::uint64_t seed,
                                                          std::size_t B);

std::vector<CellResult> run_experiment(const Scenario& s, const ExperimentOptions& options);

/// Kolmogorov-Smirnov statistic and asymptotic p-value against U(0, 1), NaNs skipped.
std::pair<double, double> ks_uniform(std::vector<double> values);

}  // namespace remgof
