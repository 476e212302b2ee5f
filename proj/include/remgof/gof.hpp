#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "remgof/fit.hpp"
#include "remgof/sampling.hpp"

namespace remgof {

struct ResidualProcess {
  std::size_t q = 0;
  /// n x q weighted contributions w_k G_k.
  Eigen::MatrixXd contributions;
  /// n x q partial sums; row k = sum_{j <= k} w_j G_j.
  Eigen::MatrixXd trajectory;
  Eigen::VectorXd weights;
  bool centered = false;
};

/// m = 2 contributions w_k [1 - logistic(gamma^T Delta h_k)] Delta h_{i,k}; the
/// centered form subtracts the mean contribution so the endpoint is 0.
/// Throws ValidationError for an empty index set.
ResidualProcess residual_process(const FitResult& fit, const PairedDesign& paired,
                                 std::span<const std::size_t> indices, bool centered,
                                 const Eigen::VectorXd* weights = nullptr);

enum class PValueKind { exact_kolmogorov, empirical_bridge, empirical_resampled, exact_cauchy };
std::string to_string(PValueKind k);

struct GofTestResult {
  std::string term;
  /// T_x, T_psi, T_z, T_phi or T_o.
  std::string statistic_name;
  double statistic = 0.0;
  double p_value = 1.0;
  PValueKind kind = PValueKind::exact_kolmogorov;
  std::size_t B = 0;
  std::size_t dimension = 0;
  std::size_t rank = 0;
  /// n x rank normalized process W over u = k/n (empty for omnibus).
  Eigen::MatrixXd trajectory;
};

/// P(sup |bridge| > t) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 t^2); 1 for t < 0.05.
double kolmogorov_pvalue(double t);
double kolmogorov_cdf(double t);

/// W = G / sqrt(I_dd), T_x = max |W|, exact Kolmogorov p-value.
/// Throws DegenerateError when I_dd = 0.
GofTestResult test_fle(const ResidualProcess& proc, const FitResult& fit, std::size_t coordinate,
                       const std::string& term = {});

enum class FloorMode { strict, reduce };

struct VarianceRoot {
  Eigen::MatrixXd J;
  /// rank x q with root * J * root^T = I.
  Eigen::MatrixXd inverse_root;
  std::size_t rank = 0;
};

/// J = n^-1 sum G_k G_k^T. Eigenvalues below 1e-10 * max are dropped; strict
/// mode throws SingularError with the rank when any are dropped.
VarianceRoot empirical_variance(const ResidualProcess& proc, FloorMode mode = FloorMode::reduce);

/// Sup over the grid of the squared norm of q-dimensional Brownian bridges,
/// replicate b drawn from the stream keyed by (seed, b).
std::vector<double> simulate_bridge_sup(std::size_t q, std::size_t grid, std::size_t B, std::uint64_t seed);

struct BridgeOptions {
  std::size_t B = 1000;
  std::uint64_t seed = 1;
  /// Grid used for the simulated bridges: min(n, max_grid).
  std::size_t max_grid = 5000;
};

/// W = root n^-1/2 cumsum(G), T = max ||W||^2, empirical p = #{sup_b >= T} / B.
/// Throws ValidationError for B < 100.
GofTestResult test_multivariate(const ResidualProcess& proc, const VarianceRoot& root, const BridgeOptions& options,
                                const std::string& term = {});

/// Centered process of an RE block, tested on its retained rank.
/// Throws DegenerateError for a single observed level.
GofTestResult test_random_effect(const FitResult& fit, const PairedDesign& paired, const std::string& term,
                                 const BridgeOptions& options);

/// Per-term test chosen by effect: FLE exact, TVE/NLE multivariate, RE test.
GofTestResult test_term(const FitResult& fit, const PairedDesign& paired, const std::string& term,
                        const BridgeOptions& options);

/// T_o = mean tan(pi (0.5 - P_l)), p = 1/2 - arctan(T_o) / pi. Empirical
/// p-values are clamped to [1/(2B), 1 - 1/(2B)]. Throws ValidationError when empty.
GofTestResult test_omnibus(std::span<const GofTestResult> results);

/// Resampling test of an auxiliary statistic phi; `phi` is n x 2 (case, control).
/// Throws EvaluationError at the first non-finite value.
GofTestResult test_auxiliary(const FitResult& fit, const PairedDesign& paired, const Eigen::MatrixXd& phi,
                             std::size_t B, std::uint64_t seed, const std::string& name = "phi");

}  // namespace remgof
