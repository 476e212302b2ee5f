#include "remgof/gof.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

#include "remgof/errors.hpp"
#include "remgof/parallel.hpp"
#include "remgof/random.hpp"

namespace remgof {

namespace {

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::MatrixXd cumulative(const Eigen::MatrixXd& c) {
  Eigen::MatrixXd out(c.rows(), c.cols());
  if (c.rows() == 0) return out;
  out.row(0) = c.row(0);
  for (Eigen::Index k = 1; k < c.rows(); ++k) out.row(k) = out.row(k - 1) + c.row(k);
  return out;
}

}  // namespace

std::string to_string(PValueKind k) {
  switch (k) {
    case PValueKind::exact_kolmogorov: return "exact-kolmogorov";
    case PValueKind::empirical_bridge: return "empirical-bridge";
    case PValueKind::empirical_resampled: return "empirical-resampled";
    case PValueKind::exact_cauchy: return "exact-cauchy";
  }
  return "?";
}

ResidualProcess residual_process(const FitResult& fit, const PairedDesign& paired,
                                 std::span<const std::size_t> indices, bool centered,
                                 const Eigen::VectorXd* weights) {
  if (indices.empty()) throw ValidationError("residual process needs a non-empty index set");
  const auto n = static_cast<Eigen::Index>(paired.n());
  const auto q = static_cast<Eigen::Index>(indices.size());
  std::vector<Eigen::Index> slot(paired.P(), -1);
  for (Eigen::Index i = 0; i < q; ++i) {
    if (indices[static_cast<std::size_t>(i)] >= paired.P()) throw ValidationError("index outside the design");
    slot[indices[static_cast<std::size_t>(i)]] = i;
  }
  if (weights && weights->size() != n) throw ValidationError("weights must have one entry per event");

  ResidualProcess proc;
  proc.q = static_cast<std::size_t>(q);
  proc.centered = centered;
  proc.weights = weights ? *weights : Eigen::VectorXd::Ones(n);
  proc.contributions = Eigen::MatrixXd::Zero(n, q);
  const Eigen::VectorXd eta = paired.delta * fit.gamma;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double r = proc.weights[k] * logistic(-eta[k]);
    if (r == 0.0) continue;
    for (SparseRows::InnerIterator it(paired.delta, k); it; ++it) {
      const Eigen::Index s = slot[static_cast<std::size_t>(it.col())];
      if (s >= 0) proc.contributions(k, s) = r * it.value();
    }
  }
  if (centered && n > 0) {
    const Eigen::RowVectorXd mean = proc.contributions.colwise().mean();
    proc.contributions.rowwise() -= mean;
  }
  proc.trajectory = cumulative(proc.contributions);
  return proc;
}

double kolmogorov_pvalue(double t) {
  if (t < 0.05) return 1.0;
  double sum = 0.0;
  for (int k = 1; k < 100000; ++k) {
    const double term = std::exp(-2.0 * k * k * t * t);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (2.0 * term < 1e-12) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

double kolmogorov_cdf(double t) { return 1.0 - kolmogorov_pvalue(t); }

GofTestResult test_fle(const ResidualProcess& proc, const FitResult& fit, std::size_t coordinate,
                       const std::string& term) {
  if (proc.q != 1) throw ValidationError("FLE test needs a one-dimensional process");
  const auto d = static_cast<Eigen::Index>(coordinate);
  const double info = fit.information(d, d);
  if (!(info > 0.0)) throw DegenerateError("zero information on coordinate " + std::to_string(coordinate));
  GofTestResult res;
  res.term = term;
  res.statistic_name = "T_x";
  res.kind = PValueKind::exact_kolmogorov;
  res.dimension = 1;
  res.rank = 1;
  res.trajectory = proc.trajectory / std::sqrt(info);
  res.statistic = res.trajectory.size() ? res.trajectory.cwiseAbs().maxCoeff() : 0.0;
  res.p_value = kolmogorov_pvalue(res.statistic);
  return res;
}

VarianceRoot empirical_variance(const ResidualProcess& proc, FloorMode mode) {
  const auto n = static_cast<double>(proc.contributions.rows());
  VarianceRoot root;
  root.J = proc.contributions.transpose() * proc.contributions / std::max(n, 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(root.J);
  const auto& ev = es.eigenvalues();
  const double top = ev.size() ? ev.maxCoeff() : 0.0;
  std::vector<Eigen::Index> keep;
  if (top > 0.0)
    for (Eigen::Index i = 0; i < ev.size(); ++i)
      if (ev[i] >= 1e-10 * top) keep.push_back(i);
  root.rank = keep.size();
  if (root.rank == 0 || (mode == FloorMode::strict && root.rank < proc.q))
    throw SingularError("empirical variance has rank " + std::to_string(root.rank) + " < " +
                            std::to_string(proc.q),
                        root.rank);
  root.inverse_root.resize(static_cast<Eigen::Index>(root.rank), static_cast<Eigen::Index>(proc.q));
  for (std::size_t r = 0; r < keep.size(); ++r)
    root.inverse_root.row(static_cast<Eigen::Index>(r)) =
        es.eigenvectors().col(keep[r]).transpose() / std::sqrt(ev[keep[r]]);
  return root;
}

namespace {

std::vector<double> simulate_bridge_sup_uncached(std::size_t q, std::size_t grid, std::size_t B, std::uint64_t seed) {
  std::vector<double> out(B);
  parallel_for(B, [&](std::size_t b) {
    StreamRng rng(seed, b);
    std::vector<double> sq(grid + 1, 0.0), walk(grid + 1, 0.0);
    const double sd = 1.0 / std::sqrt(static_cast<double>(grid));
    for (std::size_t d = 0; d < q; ++d) {
      walk[0] = 0.0;
      for (std::size_t i = 1; i <= grid; ++i) walk[i] = walk[i - 1] + sd * rng.normal();
      const double end = walk[grid];
      for (std::size_t i = 1; i <= grid; ++i) {
        const double z = walk[i] - (static_cast<double>(i) / static_cast<double>(grid)) * end;
        sq[i] += z * z;
      }
    }
    out[b] = *std::max_element(sq.begin(), sq.end());
  });
  return out;
}

}  // namespace

std::vector<double> simulate_bridge_sup(std::size_t q, std::size_t grid, std::size_t B, std::uint64_t seed) {
  if (q == 0 || grid == 0) throw ValidationError("bridge dimension and grid must be positive");
  static std::mutex mutex;
  static std::map<std::tuple<std::size_t, std::size_t, std::size_t, std::uint64_t>, std::vector<double>> cache;
  const auto key = std::make_tuple(q, grid, B, seed);
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto sups = simulate_bridge_sup_uncached(q, grid, B, seed);
  std::lock_guard lock(mutex);
  if (cache.size() > 256) cache.clear();
  cache.emplace(key, sups);
  return sups;
}

GofTestResult test_multivariate(const ResidualProcess& proc, const VarianceRoot& root, const BridgeOptions& options,
                                const std::string& term) {
  if (options.B < 100) throw ValidationError("B must be >= 100");
  if (root.rank == 0) throw DegenerateError("no retained directions in the empirical variance");
  const auto n = static_cast<double>(proc.trajectory.rows());
  GofTestResult res;
  res.term = term;
  res.statistic_name = "T_psi";
  res.kind = PValueKind::empirical_bridge;
  res.B = options.B;
  res.dimension = proc.q;
  res.rank = root.rank;
  res.trajectory = proc.trajectory * root.inverse_root.transpose() / std::sqrt(std::max(n, 1.0));
  res.statistic = res.trajectory.rows() ? res.trajectory.rowwise().squaredNorm().maxCoeff() : 0.0;
  const std::size_t grid = std::max<std::size_t>(1, std::min(proc.trajectory.rows() > 0
                                                                  ? static_cast<std::size_t>(proc.trajectory.rows())
                                                                  : 1,
                                                              options.max_grid));
  const auto sups = simulate_bridge_sup(root.rank, grid, options.B, options.seed);
  std::size_t count = 0;
  for (double s : sups)
    if (s >= res.statistic) ++count;
  res.p_value = static_cast<double>(count) / static_cast<double>(options.B);
  return res;
}

GofTestResult test_random_effect(const FitResult& fit, const PairedDesign& paired, const std::string& term,
                                 const BridgeOptions& options) {
  const auto& layout = paired.layout.term(term);
  if (layout.spec.effect != EffectType::re) throw ValidationError("term '" + term + "' is not a random effect");
  std::size_t observed = 0;
  std::vector<bool> seen(layout.width, false);
  for (Eigen::Index k = 0; k < paired.delta.outerSize(); ++k)
    for (SparseRows::InnerIterator it(paired.delta, k); it; ++it) {
      const auto c = static_cast<std::size_t>(it.col());
      if (c >= layout.offset && c < layout.offset + layout.width && it.value() != 0.0 && !seen[c - layout.offset]) {
        seen[c - layout.offset] = true;
        ++observed;
      }
    }
  if (observed < 2) throw DegenerateError("random effect '" + term + "' has fewer than two observed levels");
  const auto idx = paired.layout.indices(term);
  const auto proc = residual_process(fit, paired, idx, true);
  VarianceRoot root;
  try {
    root = empirical_variance(proc, FloorMode::reduce);
  } catch (const SingularError&) {
    throw DegenerateError("random effect '" + term + "' has a zero residual process");
  }
  auto res = test_multivariate(proc, root, options, term);
  res.statistic_name = "T_z";
  return res;
}

GofTestResult test_term(const FitResult& fit, const PairedDesign& paired, const std::string& term,
                        const BridgeOptions& options) {
  const auto& layout = paired.layout.term(term);
  const auto idx = paired.layout.indices(term);
  switch (layout.spec.effect) {
    case EffectType::fle: {
      const auto proc = residual_process(fit, paired, idx, false);
      return test_fle(proc, fit, layout.offset, term);
    }
    case EffectType::tve:
    case EffectType::nle: {
      const auto proc = residual_process(fit, paired, idx, true);
      const auto root = empirical_variance(proc, FloorMode::reduce);
      return test_multivariate(proc, root, options, term);
    }
    case EffectType::re: return test_random_effect(fit, paired, term, options);
  }
  throw ValidationError("unknown effect");
}

GofTestResult test_omnibus(std::span<const GofTestResult> results) {
  if (results.empty()) throw ValidationError("omnibus test needs at least one p-value");
  double sum = 0.0;
  for (const auto& r : results) {
    double p = r.p_value;
    if (r.kind == PValueKind::empirical_bridge || r.kind == PValueKind::empirical_resampled) {
      const double eps = 1.0 / (2.0 * static_cast<double>(std::max<std::size_t>(r.B, 1)));
      p = std::clamp(p, eps, 1.0 - eps);
    } else {
      p = std::clamp(p, 1e-15, 1.0 - 1e-15);
    }
    sum += std::tan(std::numbers::pi * (0.5 - p));
  }
  GofTestResult res;
  res.term = "omnibus";
  res.statistic_name = "T_o";
  res.kind = PValueKind::exact_cauchy;
  res.dimension = results.size();
  res.rank = results.size();
  res.statistic = sum / static_cast<double>(results.size());
  res.p_value = std::clamp(0.5 - std::atan(res.statistic) / std::numbers::pi, 0.0, 1.0);
  return res;
}

GofTestResult test_auxiliary(const FitResult& fit, const PairedDesign& paired, const Eigen::MatrixXd& phi,
                             std::size_t B, std::uint64_t seed, const std::string& name) {
  const auto n = static_cast<Eigen::Index>(paired.n());
  if (phi.rows() != n || phi.cols() != 2) throw ValidationError("phi must be n x 2 (case, control)");
  if (B < 1) throw ValidationError("B must be >= 1");
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index j = 0; j < 2; ++j)
      if (!std::isfinite(phi(k, j)))
        throw EvaluationError(static_cast<std::size_t>(k), static_cast<std::size_t>(j),
                              "auxiliary statistic is non-finite at event " + std::to_string(k) + ", member " +
                                  std::to_string(j));

  const Eigen::VectorXd eta = paired.delta * fit.gamma;
  Eigen::VectorXd a(n), c(n), r(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double p = logistic(eta[k]);
    r[k] = logistic(-eta[k]);
    const double dphi = phi(k, 0) - phi(k, 1);
    a[k] = r[k] * dphi;
    c[k] = p * r[k] * dphi;
  }

  GofTestResult res;
  res.term = name;
  res.statistic_name = "T_phi";
  res.kind = PValueKind::empirical_resampled;
  res.B = B;
  res.dimension = 1;
  res.rank = 1;
  res.trajectory = Eigen::MatrixXd(n, 1);
  double acc = 0.0, sup = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    acc += a[k];
    res.trajectory(k, 0) = acc;
    sup = std::max(sup, std::abs(acc));
  }
  res.statistic = sup;

  Eigen::MatrixXd H = fit.information + penalty_hessian(fit.blocks, paired.P());
  for (std::size_t j : fit.degenerate) H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) {
    H.diagonal().array() += 1e-10 * std::max(H.trace(), 1e-300) / static_cast<double>(std::max<Eigen::Index>(H.rows(), 1));
    llt.compute(H);
    if (llt.info() != Eigen::Success) throw SingularError("penalized Hessian is singular", 0);
  }

  std::vector<double> stars(B);
  parallel_for(B, [&](std::size_t b) {
    StreamRng rng(seed, b);
    Eigen::VectorXd N(n);
    for (Eigen::Index k = 0; k < n; ++k) N[k] = rng.normal();
    const Eigen::VectorXd score_star = paired.delta.transpose() * r.cwiseProduct(N);
    const Eigen::VectorXd shift = llt.solve(score_star);
    const Eigen::VectorXd proj = paired.delta * shift;
    double g = 0.0, best = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      g += a[k] * N[k] - c[k] * proj[k];
      best = std::max(best, std::abs(g));
    }
    stars[b] = best;
  });
  std::size_t count = 0;
  for (double s : stars)
    if (s >= res.statistic) ++count;
  res.p_value = static_cast<double>(count) / static_cast<double>(B);
  return res;
}

}  // namespace remgof
