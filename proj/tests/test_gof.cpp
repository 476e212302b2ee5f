#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "remgof/errors.hpp"
#include "remgof/gof.hpp"
#include "remgof/random.hpp"

using namespace remgof;

namespace {

SparseRows sparse(const Eigen::MatrixXd& m) { return m.sparseView(0.0, 0.0).eval(); }

// Logistic pairs with P normal covariates and coefficient `beta` on each.
Eigen::MatrixXd logistic_delta(Eigen::Index n, Eigen::Index P, double beta, std::uint64_t seed) {
  StreamRng rng(seed, 0);
  Eigen::MatrixXd D(n, P);
  for (Eigen::Index k = 0; k < n; ++k) {
    double eta = 0.0;
    for (Eigen::Index j = 0; j < P; ++j) {
      D(k, j) = rng.normal();
      eta += beta * D(k, j);
    }
    if (rng.uniform() > 1.0 / (1.0 + std::exp(-eta))) D.row(k) *= -1.0;
  }
  return D;
}

PairedDesign fle_paired(const Eigen::MatrixXd& delta) {
  std::string text;
  for (Eigen::Index j = 0; j < delta.cols(); ++j) text += "term x" + std::to_string(j) + " type=fle source=const:1\n";
  PairedDesign p;
  p.layout = resolve_layout(parse_model_spec(text), {}, 2, 1.0);
  p.delta = sparse(delta);
  p.case_rows = p.delta;
  p.control_rows = sparse(Eigen::MatrixXd::Zero(delta.rows(), delta.cols()));
  return p;
}

GofTestResult with_p(double p, PValueKind kind = PValueKind::exact_kolmogorov, std::size_t B = 0) {
  GofTestResult r;
  r.p_value = p;
  r.kind = kind;
  r.B = B;
  return r;
}

ResidualProcess process_of(const Eigen::MatrixXd& contributions) {
  ResidualProcess p;
  p.q = static_cast<std::size_t>(contributions.cols());
  p.contributions = contributions;
  p.trajectory = contributions;
  for (Eigen::Index k = 1; k < contributions.rows(); ++k) p.trajectory.row(k) += p.trajectory.row(k - 1);
  p.weights = Eigen::VectorXd::Ones(contributions.rows());
  p.centered = true;
  return p;
}

}  // namespace

TEST_CASE("Kolmogorov tail series") {
  CHECK(std::abs(kolmogorov_pvalue(1.3581) - 0.05) < 0.0005);
  CHECK(kolmogorov_pvalue(0.01) == 1.0);
  CHECK(kolmogorov_pvalue(10.0) < 1e-80);
  CHECK(kolmogorov_pvalue(1.0) + kolmogorov_cdf(1.0) == doctest::Approx(1.0));
  double prev = 1.0;
  for (double t = 0.1; t < 3.0; t += 0.1) {
    CHECK(kolmogorov_pvalue(t) <= prev);
    prev = kolmogorov_pvalue(t);
  }
}

TEST_CASE("one-dimensional bridges follow the Kolmogorov law") {
  auto sups = simulate_bridge_sup(1, 1000, 4000, 11);
  for (auto& s : sups) s = std::sqrt(s);
  std::sort(sups.begin(), sups.end());
  double ks = 0.0;
  const double B = static_cast<double>(sups.size());
  for (std::size_t i = 0; i < sups.size(); ++i) {
    const double F = kolmogorov_cdf(sups[i]);
    ks = std::max({ks, std::abs(F - static_cast<double>(i) / B), std::abs(F - static_cast<double>(i + 1) / B)});
  }
  CHECK(ks < 0.05);
}

TEST_CASE("bridge draws are deterministic per seed and nonnegative") {
  const auto a = simulate_bridge_sup(3, 200, 150, 5);
  CHECK(a == simulate_bridge_sup(3, 200, 150, 5));
  CHECK(a != simulate_bridge_sup(3, 200, 150, 6));
  CHECK(*std::min_element(a.begin(), a.end()) > 0.0);
  CHECK_THROWS_AS(simulate_bridge_sup(0, 10, 10, 1), ValidationError);
}

TEST_CASE("omnibus combination") {
  const std::vector<GofTestResult> single{with_p(0.23)};
  CHECK(test_omnibus(single).p_value == doctest::Approx(0.23).epsilon(1e-12));
  const std::vector<GofTestResult> halves{with_p(0.5), with_p(0.5), with_p(0.5)};
  const auto h = test_omnibus(halves);
  CHECK(h.statistic == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(h.p_value == doctest::Approx(0.5));
  const std::vector<GofTestResult> pair{with_p(0.01), with_p(0.5)};
  const double T = (std::tan(0.49 * std::numbers::pi) + 0.0) / 2.0;
  const auto o = test_omnibus(pair);
  CHECK(o.statistic == doctest::Approx(T));
  CHECK(o.p_value == doctest::Approx(0.5 - std::atan(T) / std::numbers::pi));
  CHECK(o.kind == PValueKind::exact_cauchy);
  CHECK_THROWS_AS(test_omnibus(std::span<const GofTestResult>{}), ValidationError);
}

TEST_CASE("omnibus p decreases in each input") {
  double prev = 1.0;
  for (double p = 0.95; p > 0.0; p -= 0.05) {
    const std::vector<GofTestResult> r{with_p(0.3), with_p(p), with_p(0.7)};
    const double o = test_omnibus(r).p_value;
    CHECK(o <= prev);
    prev = o;
  }
}

TEST_CASE("empirical p-values are clamped before combining") {
  const std::vector<GofTestResult> r{with_p(0.0, PValueKind::empirical_bridge, 100)};
  const double p = test_omnibus(r).p_value;
  CHECK(p == doctest::Approx(0.005));
}

TEST_CASE("empirical variance by hand") {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(6, 3);
  for (Eigen::Index k = 0; k < 6; ++k) G(k, 1) = k % 2 ? -1.0 : 1.0;
  const auto proc = process_of(G);
  const auto root = empirical_variance(proc, FloorMode::reduce);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(3, 3);
  expected(1, 1) = 1.0;
  CHECK((root.J - expected).norm() < 1e-15);
  CHECK(root.rank == 1);
  CHECK_THROWS_AS(empirical_variance(proc, FloorMode::strict), SingularError);
}

TEST_CASE("identical contributions are singular in strict mode") {
  Eigen::MatrixXd G(5, 2);
  G.rowwise() = Eigen::RowVector2d(1.0, 2.0);
  try {
    empirical_variance(process_of(G), FloorMode::strict);
    FAIL("expected SingularError");
  } catch (const SingularError& e) {
    CHECK(e.rank() == 1);
  }
}

TEST_CASE("inverse root whitens the empirical variance") {
  StreamRng rng(3, 0);
  Eigen::MatrixXd G(300, 4);
  for (Eigen::Index k = 0; k < G.rows(); ++k) {
    const double common = rng.normal();
    for (Eigen::Index j = 0; j < 4; ++j) G(k, j) = common + 0.5 * rng.normal();
  }
  const auto root = empirical_variance(process_of(G), FloorMode::strict);
  CHECK((root.inverse_root * root.J * root.inverse_root.transpose() - Eigen::MatrixXd::Identity(4, 4)).norm() < 1e-8);
}

TEST_CASE("multivariate test edge cases") {
  const auto zero = process_of(Eigen::MatrixXd::Zero(50, 2));
  VarianceRoot root;
  root.J = Eigen::MatrixXd::Identity(2, 2);
  root.inverse_root = Eigen::MatrixXd::Identity(2, 2);
  root.rank = 2;
  BridgeOptions opt;
  opt.B = 200;
  const auto r = test_multivariate(zero, root, opt);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == 1.0);
  opt.B = 99;
  CHECK_THROWS_AS(test_multivariate(zero, root, opt), ValidationError);
}

TEST_CASE("one-dimensional multivariate p agrees with the exact Kolmogorov p") {
  const auto paired = fle_paired(logistic_delta(800, 1, 0.7, 21));
  const auto fit = fit_model(paired);
  const std::vector<std::size_t> idx{0};
  // Perturb the coefficient so the process is not pinned at zero.
  for (double shift : {0.0, 0.08, 0.15}) {
    auto f = fit;
    f.gamma[0] += shift;
    const auto proc = residual_process(f, paired, idx, true);
    const auto root = empirical_variance(proc, FloorMode::strict);
    BridgeOptions opt;
    opt.B = 10000;
    const auto mv = test_multivariate(proc, root, opt);
    CHECK(mv.dimension == 1);
    CHECK(std::abs(mv.p_value - kolmogorov_pvalue(std::sqrt(mv.statistic))) < 0.02);
  }
}

TEST_CASE("FLE residual process ends at the score") {
  const auto paired = fle_paired(logistic_delta(500, 2, 0.5, 4));
  const auto fit = fit_model(paired);
  for (std::size_t d = 0; d < 2; ++d) {
    const std::vector<std::size_t> idx{d};
    const auto proc = residual_process(fit, paired, idx, false);
    CHECK(std::abs(proc.trajectory(499, 0) - fit.score[static_cast<Eigen::Index>(d)]) < 1e-10);
    CHECK(std::abs(proc.trajectory(499, 0)) < 1e-8 * 500);
    const auto centered = residual_process(fit, paired, idx, true);
    CHECK(std::abs(centered.trajectory(499, 0)) < 1e-8);
  }
}

TEST_CASE("zero weights give a zero trajectory") {
  const auto paired = fle_paired(logistic_delta(40, 1, 0.5, 5));
  const auto fit = fit_model(paired);
  const Eigen::VectorXd w = Eigen::VectorXd::Zero(40);
  const std::vector<std::size_t> idx{0};
  CHECK(residual_process(fit, paired, idx, false, &w).trajectory.norm() == 0.0);
  CHECK_THROWS_AS(residual_process(fit, paired, std::span<const std::size_t>{}, false), ValidationError);
}

TEST_CASE("ten-event toy matches hand partial sums") {
  Eigen::MatrixXd D(10, 1);
  D << 1, -1, 2, 0.5, -0.5, 1, 1, -2, 0.25, 1;
  const auto paired = fle_paired(D);
  FitResult fit;
  fit.gamma = Eigen::VectorXd::Constant(1, 0.3);
  const std::vector<std::size_t> idx{0};
  const auto proc = residual_process(fit, paired, idx, false);
  double acc = 0.0;
  for (Eigen::Index k = 0; k < 10; ++k) {
    acc += D(k, 0) / (1.0 + std::exp(0.3 * D(k, 0)));
    CHECK(proc.trajectory(k, 0) == doctest::Approx(acc).epsilon(1e-14));
  }
}

TEST_CASE("FLE statistic is invariant to covariate rescaling") {
  const auto D = logistic_delta(600, 2, 0.4, 6);
  Eigen::MatrixXd D10 = D;
  D10.col(0) *= 10.0;
  const auto a = fle_paired(D), b = fle_paired(D10);
  const auto fa = fit_model(a), fb = fit_model(b);
  const auto ta = test_term(fa, a, "x0", {}), tb = test_term(fb, b, "x0", {});
  CHECK(std::abs(ta.statistic - tb.statistic) < 1e-6);
  CHECK(ta.kind == PValueKind::exact_kolmogorov);
}

TEST_CASE("FLE test needs information") {
  const auto paired = fle_paired(Eigen::MatrixXd::Zero(20, 1));
  FitResult fit;
  fit.gamma = Eigen::VectorXd::Zero(1);
  fit.information = Eigen::MatrixXd::Zero(1, 1);
  const std::vector<std::size_t> idx{0};
  CHECK_THROWS_AS(test_fle(residual_process(fit, paired, idx, false), fit, 0), DegenerateError);
}

TEST_CASE("single observed RE level is degenerate") {
  PairedDesign p;
  p.layout = resolve_layout(parse_model_spec("term x type=fle source=const:1\nterm s type=re source=actor:sender\n"), {},
                            3, 1.0);
  StreamRng rng(7, 0);
  Eigen::MatrixXd cases = Eigen::MatrixXd::Zero(50, 4), controls = cases;
  for (Eigen::Index k = 0; k < 50; ++k) {
    cases(k, 0) = rng.normal();
    cases(k, 1) = 1.0;
  }
  p.case_rows = sparse(cases);
  p.control_rows = sparse(controls);
  p.delta = sparse(cases - controls);
  FitOptions opt;
  opt.select_lambda = false;
  opt.lambda = {1.0};
  const auto fit = fit_model(p, opt);
  CHECK_THROWS_AS(test_random_effect(fit, p, "s", {}), DegenerateError);
}

TEST_CASE("auxiliary test of a constant is trivially accepted") {
  const auto paired = fle_paired(logistic_delta(200, 1, 0.5, 8));
  const auto fit = fit_model(paired);
  const Eigen::MatrixXd phi = Eigen::MatrixXd::Constant(200, 2, 3.0);
  const auto r = test_auxiliary(fit, paired, phi, 200, 1);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == 1.0);
}

TEST_CASE("auxiliary statistic on an included covariate matches the FLE process") {
  const auto D = logistic_delta(700, 1, 0.6, 9);
  const auto paired = fle_paired(D);
  const auto fit = fit_model(paired);
  Eigen::MatrixXd phi(700, 2);
  phi.col(0) = D.col(0);
  phi.col(1).setZero();
  const auto aux = test_auxiliary(fit, paired, phi, 2000, 3);
  const auto fle = test_term(fit, paired, "x0", {});
  CHECK(aux.statistic == doctest::Approx(fle.statistic * std::sqrt(fit.information(0, 0))).epsilon(1e-10));
  CHECK(std::abs(aux.p_value - fle.p_value) < 0.05);
}

TEST_CASE("non-finite auxiliary values name the event and member") {
  const auto paired = fle_paired(logistic_delta(30, 1, 0.5, 10));
  const auto fit = fit_model(paired);
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(30, 2);
  phi(12, 1) = std::numeric_limits<double>::infinity();
  try {
    test_auxiliary(fit, paired, phi, 100, 1);
    FAIL("expected EvaluationError");
  } catch (const EvaluationError& e) {
    CHECK(e.event_index() == 12);
    CHECK(e.member() == 1);
  }
}
