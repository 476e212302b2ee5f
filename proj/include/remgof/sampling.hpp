#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "remgof/basis.hpp"
#include "remgof/core.hpp"
#include "remgof/model_spec.hpp"

namespace remgof {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct SampledRiskSet {
  std::size_t event_index = 0;
  double time = 0.0;
  Dyad case_dyad;
  std::vector<Dyad> controls;
  /// log pi_t(SR | member); identical for every member under uniform sampling.
  double log_pi = 0.0;
  std::optional<int> stratum;

  std::size_t size() const noexcept { return controls.size() + 1; }
  /// Member j: 0 is the case, j >= 1 control j-1.
  Dyad member(std::size_t j) const { return j == 0 ? case_dyad : controls[j - 1]; }
};

struct SamplingOptions {
  std::size_t m = 2;
  std::uint64_t seed = 1;
  bool stratified = false;
  RiskSetPolicy policy;
  /// Required when stratified.
  const StrataMap* strata = nullptr;
};

/// Controls drawn uniformly without replacement from the risk set minus the
/// case (same stratum when stratified), from the stream keyed by (seed, k).
/// Throws SamplingError naming the event when too few candidates exist.
std::vector<SampledRiskSet> sample_risk_sets(const EventSequence& seq, const SamplingOptions& options);

void write_controls_csv(std::ostream& out, const EventSequence& seq, const std::vector<SampledRiskSet>& sets);

struct CovariateContext {
  const ExoCovariates* exo = nullptr;
  const StrataMap* strata = nullptr;
};

/// Raw covariate values of each source for every member of every set,
/// n x m per source, from one forward pass over the history.
std::vector<Eigen::MatrixXd> evaluate_sources(const EventSequence& seq, const std::vector<SampledRiskSet>& sets,
                                              const std::vector<CovariateSource>& sources,
                                              const CovariateContext& ctx);

/// Generic-m design: row k*m + j holds h for member j of set k.
struct Design {
  DesignLayout layout;
  std::size_t m = 2;
  std::size_t n = 0;
  SparseRows rows;
  std::vector<double> log_pi;
};

/// m = 2 design with Delta h_k = h_case - h_control.
struct PairedDesign {
  DesignLayout layout;
  SparseRows case_rows;
  SparseRows control_rows;
  SparseRows delta;

  std::size_t n() const noexcept { return static_cast<std::size_t>(delta.rows()); }
  std::size_t P() const noexcept { return layout.P; }
};

/// Resolves knots and constraints from the sampled data, emits all member rows,
/// and rescales smooth penalties so that ||S||_F = ||dX^T dX||_F / n.
Design build_design(const EventSequence& seq, const std::vector<SampledRiskSet>& sets, const ModelSpec& spec,
                    const CovariateContext& ctx = {});

/// Throws UnsupportedError unless every set has m = 2.
PairedDesign build_paired_design(const EventSequence& seq, const std::vector<SampledRiskSet>& sets,
                                 const ModelSpec& spec, const CovariateContext& ctx = {});

PairedDesign to_paired(const Design& design);

}  // namespace remgof
