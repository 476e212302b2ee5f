#include "remgof/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "remgof/errors.hpp"

namespace remgof {

namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double loglik_logistic(const Eigen::VectorXd& gamma, const SparseRows& delta) {
  const Eigen::VectorXd eta = delta * gamma;
  double ll = 0.0;
  for (Eigen::Index k = 0; k < eta.size(); ++k) ll += eta[k] - softplus(eta[k]);
  return ll;
}

LogisticDerivatives logistic_derivatives(const Eigen::VectorXd& gamma, const SparseRows& delta,
                                         bool with_information) {
  LogisticDerivatives d;
  const Eigen::Index P = delta.cols();
  const Eigen::VectorXd eta = delta * gamma;
  d.p.resize(eta.size());
  Eigen::VectorXd resid(eta.size());
  for (Eigen::Index k = 0; k < eta.size(); ++k) {
    d.loglik += eta[k] - softplus(eta[k]);
    d.p[k] = logistic(eta[k]);
    resid[k] = logistic(-eta[k]);
  }
  d.gradient = delta.transpose() * resid;
  if (with_information) {
    d.information = Eigen::MatrixXd::Zero(P, P);
    for (Eigen::Index k = 0; k < delta.rows(); ++k) {
      const double w = d.p[k] * resid[k];
      if (w == 0.0) continue;
      for (SparseRows::InnerIterator a(delta, k); a; ++a) {
        const double wa = w * a.value();
        for (SparseRows::InnerIterator b = a; b; ++b) d.information(a.col(), b.col()) += wa * b.value();
      }
    }
    d.information.triangularView<Eigen::StrictlyLower>() = d.information.transpose();
  }
  return d;
}

double loglik_generic(const Eigen::VectorXd& gamma, const Design& design) {
  const Eigen::VectorXd eta = design.rows * gamma;
  const auto m = static_cast<Eigen::Index>(design.m);
  double ll = 0.0;
  for (std::size_t k = 0; k < design.n; ++k) {
    const Eigen::Index base = static_cast<Eigen::Index>(k) * m;
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < m; ++j) {
      const double s = eta[base + j] + design.log_pi[k];
      if (!std::isfinite(s)) throw OverflowError("non-finite linear predictor at event " + std::to_string(k));
      mx = std::max(mx, s);
    }
    double acc = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) acc += std::exp(eta[base + j] + design.log_pi[k] - mx);
    const double term = eta[base] + design.log_pi[k] - (mx + std::log(acc));
    if (!std::isfinite(term)) throw OverflowError("non-finite likelihood term at event " + std::to_string(k));
    ll += term;
  }
  return ll;
}

Eigen::MatrixXd observed_information(const Eigen::VectorXd& gamma, const PairedDesign& paired) {
  return logistic_derivatives(gamma, paired.delta, true).information;
}

std::vector<double> FitResult::lambdas() const {
  std::vector<double> out;
  for (const auto& b : blocks) out.push_back(b.lambda);
  return out;
}

const TermFit& FitResult::term(std::string_view name) const {
  for (const auto& t : terms)
    if (t.name == name) return t;
  throw ValidationError("unknown term '" + std::string(name) + "'");
}

double re_sigma(double lambda) {
  if (!(lambda > 0.0)) return std::numeric_limits<double>::infinity();
  return 1.0 / std::sqrt(2.0 * lambda);
}

namespace {

// Unpenalized coordinates whose design column is identically zero.
std::vector<std::size_t> degenerate_columns(const PairedDesign& paired, const std::vector<PenaltyBlock>& blocks) {
  const auto P = static_cast<std::size_t>(paired.delta.cols());
  std::vector<bool> used(P, false), penalized(P, false);
  for (Eigen::Index k = 0; k < paired.delta.outerSize(); ++k)
    for (SparseRows::InnerIterator it(paired.delta, k); it; ++it)
      if (it.value() != 0.0) used[static_cast<std::size_t>(it.col())] = true;
  for (const auto& b : blocks)
    for (std::size_t i = b.offset; i < b.offset + b.width; ++i) penalized[i] = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < P; ++i)
    if (!used[i] && !penalized[i]) out.push_back(i);
  return out;
}

// Cholesky with one jitter retry.
Eigen::LLT<Eigen::MatrixXd> factor(Eigen::MatrixXd H) {
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() == Eigen::Success) return llt;
  const double P = static_cast<double>(H.rows());
  const double jitter = 1e-10 * std::max(H.trace(), 1e-300) / P;
  H.diagonal().array() += jitter;
  llt.compute(H);
  if (llt.info() == Eigen::Success) return llt;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double top = ev.size() ? ev.maxCoeff() : 0.0;
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev[i] > 1e-12 * std::max(top, 1e-300)) ++rank;
  throw SingularError("penalized Hessian is singular", rank);
}

struct NewtonOutcome {
  Eigen::VectorXd gamma;
  int iterations = 0;
  std::vector<double> trace;
};

NewtonOutcome newton(const PairedDesign& paired, const std::vector<PenaltyBlock>& blocks,
                     const std::vector<std::size_t>& degenerate, const Eigen::VectorXd& start,
                     const FitOptions& options) {
  const auto P = static_cast<Eigen::Index>(paired.P());
  const Eigen::MatrixXd S2 = penalty_hessian(blocks, paired.P());
  NewtonOutcome out;
  out.gamma = start;
  for (std::size_t d : degenerate) out.gamma[static_cast<Eigen::Index>(d)] = 0.0;

  auto objective = [&](const Eigen::VectorXd& g) {
    return loglik_logistic(g, paired.delta) - 0.5 * g.dot(S2 * g);
  };

  const double tol = options.tol * std::max<double>(1.0, static_cast<double>(paired.n()));
  for (int it = 0; it <= options.max_iter; ++it) {
    auto d = logistic_derivatives(out.gamma, paired.delta, true);
    Eigen::VectorXd grad = d.gradient - S2 * out.gamma;
    for (std::size_t j : degenerate) grad[static_cast<Eigen::Index>(j)] = 0.0;
    const double gnorm = P ? grad.lpNorm<Eigen::Infinity>() : 0.0;
    out.trace.push_back(gnorm);
    out.iterations = it;
    Eigen::MatrixXd H = d.information + S2;
    for (std::size_t j : degenerate) H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = 1.0;
    if (gnorm < tol) {
      // One polishing step, kept only when it lowers the gradient.
      if (P == 0 || gnorm == 0.0) return out;
      try {
        const Eigen::VectorXd polished = out.gamma + factor(std::move(H)).solve(grad);
        Eigen::VectorXd g2 = logistic_derivatives(polished, paired.delta, false).gradient - S2 * polished;
        for (std::size_t j : degenerate) g2[static_cast<Eigen::Index>(j)] = 0.0;
        if (g2.allFinite() && g2.lpNorm<Eigen::Infinity>() < gnorm) {
          out.gamma = polished;
          out.trace.push_back(g2.lpNorm<Eigen::Infinity>());
        }
      } catch (const SingularError&) {
      }
      return out;
    }
    if (it == options.max_iter) break;

    const Eigen::VectorXd step = factor(std::move(H)).solve(grad);

    const double f0 = d.loglik - 0.5 * out.gamma.dot(S2 * out.gamma);
    double t = 1.0;
    Eigen::VectorXd trial = out.gamma + step;
    double f1 = objective(trial);
    int halvings = 0;
    while (!(f1 >= f0 - 1e-12 * std::abs(f0)) && halvings < 60) {
      t *= 0.5;
      trial = out.gamma + t * step;
      f1 = objective(trial);
      ++halvings;
    }
    if (halvings == 60) {
      // No ascent direction left at working precision.
      if (gnorm < std::sqrt(tol)) return out;
      break;
    }
    out.gamma = std::move(trial);
  }
  throw ConvergenceError("Newton iterations did not reach gradient tolerance " + format_double(tol),
                         out.trace);
}

FitResult finalize(const PairedDesign& paired, std::vector<PenaltyBlock> blocks, const Eigen::VectorXd& gamma,
                   const std::vector<std::size_t>& degenerate) {
  FitResult fit;
  fit.gamma = gamma;
  fit.n = paired.n();
  fit.degenerate = degenerate;
  auto d = logistic_derivatives(gamma, paired.delta, true);
  fit.log_likelihood = d.loglik;
  fit.score = d.gradient;
  fit.information = d.information;
  fit.penalty_gradient = penalty_gradient(blocks, gamma);

  const auto P = static_cast<Eigen::Index>(paired.P());
  Eigen::MatrixXd H = d.information + penalty_hessian(blocks, paired.P());
  for (std::size_t j : degenerate) H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = 1.0;
  const Eigen::MatrixXd A = P ? factor(H).solve(d.information) : Eigen::MatrixXd();
  fit.edf = P ? A.trace() : 0.0;
  fit.aic = -2.0 * fit.log_likelihood + 2.0 * fit.edf;
  const double nn = static_cast<double>(fit.n);
  fit.gcv = nn * (-2.0 * fit.log_likelihood) / ((nn - fit.edf) * (nn - fit.edf));

  for (const auto& t : paired.layout.terms) {
    TermFit tf;
    tf.name = t.spec.name;
    tf.effect = t.spec.effect;
    tf.offset = t.offset;
    tf.width = t.width;
    tf.basis_dim = t.basis_dim;
    tf.test_dim = t.width;
    for (std::size_t i = t.offset; i < t.offset + t.width; ++i)
      tf.edf += A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    for (const auto& b : blocks)
      if (b.term == t.spec.name) {
        tf.lambda = b.lambda;
        if (t.spec.effect == EffectType::re) tf.sigma = re_sigma(b.lambda);
      }
    fit.terms.push_back(std::move(tf));
  }
  fit.blocks = std::move(blocks);
  return fit;
}

std::vector<double> log_grid(const FitOptions& o) {
  std::vector<double> g(o.grid_points);
  const double a = std::log10(o.lambda_min), b = std::log10(o.lambda_max);
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = g.size() == 1 ? o.lambda_min : std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(g.size() - 1));
  return g;
}

}  // namespace

FitResult fit_pmle(const PairedDesign& paired, std::vector<PenaltyBlock> blocks, const FitOptions& options,
                   const Eigen::VectorXd* start) {
  if (paired.n() == 0) throw ValidationError("empty design");
  const auto degenerate = degenerate_columns(paired, blocks);
  const Eigen::VectorXd g0 = start ? *start : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(paired.P()));
  auto outcome = newton(paired, blocks, degenerate, g0, options);
  auto fit = finalize(paired, std::move(blocks), outcome.gamma, degenerate);
  fit.iterations = outcome.iterations;
  fit.gradient_trace = std::move(outcome.trace);
  return fit;
}

std::vector<double> select_lambda(const PairedDesign& paired, const std::vector<PenaltyBlock>& blocks,
                                  const FitOptions& options, std::vector<std::string>* warnings) {
  if (blocks.empty()) return {};
  const auto grid = log_grid(options);
  // Start every block at the grid value nearest 1.
  std::size_t mid = 0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (std::abs(std::log(grid[i])) < std::abs(std::log(grid[mid]))) mid = i;
  std::vector<std::size_t> choice(blocks.size(), mid);
  std::vector<PenaltyBlock> work = blocks;
  const auto degenerate = degenerate_columns(paired, blocks);
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(paired.P()));

  auto score = [&](Eigen::VectorXd& warm) {
    try {
      auto out = newton(paired, work, degenerate, warm, options);
      warm = out.gamma;
      const double ll = loglik_logistic(warm, paired.delta);
      auto d = logistic_derivatives(warm, paired.delta, true);
      Eigen::MatrixXd H = d.information + penalty_hessian(work, paired.P());
      for (std::size_t j : degenerate) H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = 1.0;
      const double edf = factor(H).solve(d.information).trace();
      const double n = static_cast<double>(paired.n());
      if (!(edf < n)) return std::numeric_limits<double>::infinity();
      return n * (-2.0 * ll) / ((n - edf) * (n - edf));
    } catch (const ConvergenceError&) {
      return std::numeric_limits<double>::infinity();
    } catch (const SingularError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  for (std::size_t l = 0; l < work.size(); ++l) work[l].lambda = grid[choice[l]];
  for (int cycle = 0; cycle < options.max_cycles; ++cycle) {
    bool changed = false;
    for (std::size_t l = 0; l < work.size(); ++l) {
      std::vector<double> crit(grid.size());
      std::vector<Eigen::VectorXd> sols(grid.size());
      Eigen::VectorXd warm = gamma;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        work[l].lambda = grid[i];
        crit[i] = score(warm);
        sols[i] = warm;
      }
      std::size_t best = 0;
      for (std::size_t i = 1; i < grid.size(); ++i)
        if (crit[i] < crit[best]) best = i;
      const double hi = *std::max_element(crit.begin(), crit.end());
      if (!std::isfinite(crit[best])) {
        if (warnings) warnings->push_back("GCV undefined for block '" + work[l].term + "'");
        best = choice[l];
      } else if (std::isfinite(hi) && hi - crit[best] <= 1e-12 * std::abs(crit[best])) {
        if (warnings) warnings->push_back("flat GCV criterion for block '" + work[l].term + "'");
        best = 0;
      }
      if (best != choice[l]) changed = true;
      choice[l] = best;
      work[l].lambda = grid[best];
      gamma = sols[best];
    }
    if (!changed || work.size() == 1) break;
  }
  std::vector<double> out(work.size());
  for (std::size_t l = 0; l < work.size(); ++l) out[l] = work[l].lambda;
  return out;
}

FitResult fit_model(const PairedDesign& paired, const FitOptions& options) {
  auto blocks = penalty_blocks(paired.layout);
  std::vector<std::string> warnings;
  if (options.select_lambda) {
    const auto lam = select_lambda(paired, blocks, options, &warnings);
    for (std::size_t l = 0; l < blocks.size(); ++l) blocks[l].lambda = lam[l];
  } else {
    if (!options.lambda.empty() && options.lambda.size() != blocks.size())
      throw ValidationError("expected " + std::to_string(blocks.size()) + " lambda values");
    for (std::size_t l = 0; l < blocks.size(); ++l) blocks[l].lambda = options.lambda.empty() ? 0.0 : options.lambda[l];
  }
  auto fit = fit_pmle(paired, std::move(blocks), options);
  fit.warnings = std::move(warnings);
  return fit;
}

FitResult evaluate_fit(const PairedDesign& paired, const Eigen::VectorXd& gamma, const std::vector<double>& lambdas) {
  auto blocks = penalty_blocks(paired.layout);
  if (lambdas.size() != blocks.size())
    throw ConsistencyError("fit carries " + std::to_string(lambdas.size()) + " lambda values, design has " +
                           std::to_string(blocks.size()) + " penalized blocks");
  if (gamma.size() != static_cast<Eigen::Index>(paired.P()))
    throw ConsistencyError("fit has " + std::to_string(gamma.size()) + " coefficients, design has " +
                           std::to_string(paired.P()));
  for (std::size_t l = 0; l < blocks.size(); ++l) blocks[l].lambda = lambdas[l];
  const auto degenerate = degenerate_columns(paired, blocks);
  return finalize(paired, std::move(blocks), gamma, degenerate);
}

}  // namespace remgof
