#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "remgof/basis.hpp"
#include "remgof/sampling.hpp"

namespace remgof {

/// Sum_k [eta_k - log(1 + exp(eta_k))], eta_k = gamma^T Delta h_k.
double loglik_logistic(const Eigen::VectorXd& gamma, const SparseRows& delta);

struct LogisticDerivatives {
  double loglik = 0.0;
  Eigen::VectorXd gradient;
  /// Negative Hessian: sum_k p_k (1 - p_k) Delta h_k Delta h_k^T.
  Eigen::MatrixXd information;
  Eigen::VectorXd p;
};

LogisticDerivatives logistic_derivatives(const Eigen::VectorXd& gamma, const SparseRows& delta,
                                         bool with_information = true);

/// Sum_k log[exp(gamma^T h_case) pi / sum_SR exp(gamma^T h) pi] on a generic-m design.
/// Throws OverflowError when an exponent is non-finite.
double loglik_generic(const Eigen::VectorXd& gamma, const Design& design);

/// Negative Hessian of the unpenalized m = 2 log-likelihood.
Eigen::MatrixXd observed_information(const Eigen::VectorXd& gamma, const PairedDesign& paired);

struct FitOptions {
  /// Gradient sup-norm tolerance per event: stop when |grad|_inf < tol * n.
  double tol = 1e-8;
  int max_iter = 100;
  /// Select lambda by GCV; otherwise `lambda` (or 0) is used as given.
  bool select_lambda = true;
  std::vector<double> lambda;
  std::size_t grid_points = 20;
  double lambda_min = 1e-4;
  double lambda_max = 1e6;
  int max_cycles = 3;
};

struct TermFit {
  std::string name;
  EffectType effect = EffectType::fle;
  std::size_t offset = 0;
  std::size_t width = 0;
  std::size_t basis_dim = 0;
  /// Dimension of the residual process tested for this term.
  std::size_t test_dim = 0;
  std::optional<double> lambda;
  double edf = 0.0;
  /// RE: (2 lambda)^(-1/2).
  std::optional<double> sigma;
};

struct FitResult {
  Eigen::VectorXd gamma;
  std::vector<PenaltyBlock> blocks;
  /// Unpenalized observed information at gamma.
  Eigen::MatrixXd information;
  /// Score of the unpenalized log-likelihood at gamma.
  Eigen::VectorXd score;
  Eigen::VectorXd penalty_gradient;
  std::vector<TermFit> terms;
  std::vector<std::size_t> degenerate;
  double log_likelihood = 0.0;
  double edf = 0.0;
  double aic = 0.0;
  double gcv = 0.0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  int iterations = 0;
  std::vector<double> gradient_trace;
  std::vector<std::string> warnings;

  std::vector<double> lambdas() const;
  const TermFit& term(std::string_view name) const;
};

/// Penalized Newton with step halving at fixed lambdas (taken from `blocks`).
/// Throws ConvergenceError on non-convergence and SingularError when the
/// penalized Hessian cannot be factored.
FitResult fit_pmle(const PairedDesign& paired, std::vector<PenaltyBlock> blocks, const FitOptions& options = {},
                   const Eigen::VectorXd* start = nullptr);

/// GCV-minimizing lambdas on a log grid, cyclic over blocks.
std::vector<double> select_lambda(const PairedDesign& paired, const std::vector<PenaltyBlock>& blocks,
                                  const FitOptions& options = {}, std::vector<std::string>* warnings = nullptr);

/// select_lambda (when requested) followed by fit_pmle.
FitResult fit_model(const PairedDesign& paired, const FitOptions& options = {});

/// Rebuilds a FitResult at given gamma and lambdas without optimizing.
FitResult evaluate_fit(const PairedDesign& paired, const Eigen::VectorXd& gamma, const std::vector<double>& lambdas);

double re_sigma(double lambda);

}  // namespace remgof
