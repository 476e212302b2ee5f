#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "remgof/core.hpp"
#include "remgof/fit.hpp"
#include "remgof/gof.hpp"
#include "remgof/model_spec.hpp"
#include "remgof/sampling.hpp"

namespace remgof {

struct PipelineOptions {
  std::size_t m = 2;
  std::uint64_t seed = 1;
  bool stratified = false;
  StrataKey strata_key = StrataKey::sender;
  RiskSetPolicy policy;
  FitOptions fit;
};

/// Sampling, design and fit of one model on one event history.
struct FittedModel {
  ModelSpec spec;
  PipelineOptions options;
  std::optional<StrataMap> strata;
  std::vector<SampledRiskSet> sets;
  PairedDesign design;
  FitResult fit;
};

/// Strata used by sampling and by the `stratum` source: inferred from the
/// event stratum column when present.
std::optional<StrataMap> resolve_strata(const EventSequence& seq, const PipelineOptions& options);

FittedModel fit_events(const EventSequence& seq, const ModelSpec& spec, const ExoCovariates* exo,
                       const PipelineOptions& options);

/// Rebuilds the design for stored estimates (same seed, same spec) without refitting.
FittedModel restore_fit(const EventSequence& seq, const ModelSpec& spec, const ExoCovariates* exo,
                        const PipelineOptions& options, const Eigen::VectorXd& gamma,
                        const std::vector<double>& lambdas);

struct GofOptions {
  /// Empty means every term.
  std::vector<std::string> terms;
  BridgeOptions bridge;
  std::optional<CovariateSource> aux;
  std::size_t aux_B = 1000;
};

struct GofReport {
  /// Present when more than one term is tested.
  std::optional<GofTestResult> omnibus;
  std::vector<GofTestResult> terms;
  std::optional<GofTestResult> auxiliary;
};

GofReport run_gof(const FittedModel& model, const EventSequence& seq, const ExoCovariates* exo,
                  const GofOptions& options);

/// phi(case), phi(control) per event for the auxiliary test.
Eigen::MatrixXd evaluate_phi(const FittedModel& model, const EventSequence& seq, const ExoCovariates* exo,
                             const CovariateSource& phi);

}  // namespace remgof
