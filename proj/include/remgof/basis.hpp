#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "remgof/model_spec.hpp"

namespace remgof {

/// psi(r) = r^2 log r with psi(0) = 0.
double tps_radial(double r);

/// Component l is psi(|t - c_l|).
Eigen::VectorXd thin_plate_basis(double t, std::span<const double> controls);

/// Raw radial basis in the covariate argument: psi(|v - k_l|). Centering is
/// applied when the layout is resolved against data.
Eigen::VectorXd nle_basis(double v, std::span<const double> knots);

/// Up to q knots at quantiles l/(q-1) of the distinct values. Fewer when the
/// data have fewer distinct values.
std::vector<double> quantile_knots(std::vector<double> values, std::size_t q);

/// Orthonormal basis (columns) of the null space of the rows of C.
Eigen::MatrixXd null_space(const Eigen::MatrixXd& C);

/// One-dimensional smoother resolved against data.
///   tps:    [1, x, psi(|x - k|) Z_T], Z_T spanning null([1, k]^T); penalty on
///           the radial part only.
///   radial: psi(|x - k|), penalty P_T E P_T.
/// The argument is mapped to (x - shift) / scale before evaluation.
struct SmoothBasis {
  BasisKind kind = BasisKind::tps;
  std::vector<double> knots;  // on the mapped scale
  double shift = 0.0;
  double scale = 1.0;
  Eigen::MatrixXd z_t;      // q x (q-2), tps only
  Eigen::MatrixXd penalty;  // raw_width x raw_width

  std::size_t raw_width() const noexcept { return knots.size(); }
  /// Writes raw_width() values.
  void evaluate(double value, Eigen::Ref<Eigen::VectorXd> out) const;
  Eigen::VectorXd evaluate(double value) const;
};

/// Knots from quantiles of `values`, mapped to [0, 1] when `rescale`.
SmoothBasis make_smooth_basis(BasisKind kind, std::span<const double> values, std::size_t q, bool rescale);

struct TermLayout {
  TermSpec spec;
  std::size_t offset = 0;
  std::size_t width = 0;
  bool penalized = false;
  /// width x width, zero for FLE.
  Eigen::MatrixXd penalty;
  /// Basis dimension q (TVE/NLE), level count (RE), 1 (FLE).
  std::size_t basis_dim = 1;
  SmoothBasis smooth;
  /// NLE: raw-to-constrained map (tps) or case-row column means (radial).
  Eigen::MatrixXd constraint;
  Eigen::RowVectorXd center;
  std::size_t levels = 0;

  /// Adds this term's entries for a raw covariate value into `row`.
  /// `u` is t / t_end. RE terms take the level index as `raw`.
  void emit(double raw, double u, Eigen::Ref<Eigen::VectorXd> row) const;
};

struct DesignLayout {
  /// Block order FLE | TVE | NLE | RE, spec order within a block.
  std::vector<TermLayout> terms;
  std::size_t P = 0;
  double t_end = 1.0;
  std::size_t n_actors = 0;

  const TermLayout& term(std::string_view name) const;
  std::vector<std::size_t> indices(std::string_view name) const;
};

/// Raw data per term needed to place knots and constraints.
struct LayoutData {
  /// Pooled raw covariate values of all sampled members (NLE).
  std::vector<std::vector<double>> pooled;
  /// Case-row raw covariate values (NLE centering).
  std::vector<std::vector<double>> case_values;
  /// Event times on the u = t / t_end scale (TVE knots).
  std::vector<double> event_u;
};

/// Resolves layouts; `data` is indexed in spec order.
DesignLayout resolve_layout(const ModelSpec& spec, const LayoutData& data, std::size_t n_actors, double t_end);

struct PenaltyBlock {
  std::string term;
  std::size_t offset = 0;
  std::size_t width = 0;
  Eigen::MatrixXd S;
  double lambda = 0.0;
};

std::vector<PenaltyBlock> penalty_blocks(const DesignLayout& layout);

/// sum_l lambda_l gamma^T S_l gamma.
double penalty_value(std::span<const PenaltyBlock> blocks, const Eigen::VectorXd& gamma);
/// Gradient 2 lambda_l S_l gamma on each block, zero elsewhere.
Eigen::VectorXd penalty_gradient(std::span<const PenaltyBlock> blocks, const Eigen::VectorXd& gamma);
/// Hessian of the penalty: 2 lambda_l S_l on each block.
Eigen::MatrixXd penalty_hessian(std::span<const PenaltyBlock> blocks, std::size_t P);

/// Covariate value of `source` for `dyad` at t given history strictly before t.
/// RE sources return the level index.
double covariate_value(const CovariateSource& source, Dyad dyad, double t, const EndoState& state,
                       const ExoCovariates* exo, const StrataMap* strata, double t_end);

/// h_sr(t) on a resolved layout. Throws LevelError for an RE level outside the layout.
Eigen::VectorXd build_design_row(const DesignLayout& layout, Dyad dyad, double t, const EndoState& state,
                                 const ExoCovariates* exo = nullptr, const StrataMap* strata = nullptr);

}  // namespace remgof
