#include "remgof/pipeline.hpp"

#include "remgof/errors.hpp"

namespace remgof {

std::optional<StrataMap> resolve_strata(const EventSequence& seq, const PipelineOptions& options) {
  if (seq.has_strata()) return infer_strata(seq, options.strata_key);
  if (options.stratified) throw ValidationError("--stratified needs a stratum column in the events");
  return std::nullopt;
}

namespace {

FittedModel prepare(const EventSequence& seq, const ModelSpec& spec, const ExoCovariates* exo,
                    const PipelineOptions& options) {
  if (options.m != 2)
    throw UnsupportedError("fitting supports m = 2 (logistic reduction); m = " + std::to_string(options.m) +
                           " is available through the generic likelihood only");
  FittedModel model;
  model.spec = spec;
  model.options = options;
  model.strata = resolve_strata(seq, options);
  SamplingOptions so;
  so.m = options.m;
  so.seed = options.seed;
  so.stratified = options.stratified;
  so.policy = options.policy;
  so.strata = model.strata ? &*model.strata : nullptr;
  model.sets = sample_risk_sets(seq, so);
  CovariateContext ctx{exo, model.strata ? &*model.strata : nullptr};
  model.design = build_paired_design(seq, model.sets, spec, ctx);
  return model;
}

}  // namespace

FittedModel fit_events(const EventSequence& seq, const ModelSpec& spec, const ExoCovariates* exo,
                       const PipelineOptions& options) {
  auto model = prepare(seq, spec, exo, options);
  model.fit = fit_model(model.design, options.fit);
  model.fit.seed = options.seed;
  return model;
}

FittedModel restore_fit(const EventSequence& seq, const ModelSpec& spec, const ExoCovariates* exo,
                        const PipelineOptions& options, const Eigen::VectorXd& gamma,
                        const std::vector<double>& lambdas) {
  auto model = prepare(seq, spec, exo, options);
  model.fit = evaluate_fit(model.design, gamma, lambdas);
  model.fit.seed = options.seed;
  return model;
}

Eigen::MatrixXd evaluate_phi(const FittedModel& model, const EventSequence& seq, const ExoCovariates* exo,
                             const CovariateSource& phi) {
  CovariateContext ctx{exo, model.strata ? &*model.strata : nullptr};
  return evaluate_sources(seq, model.sets, {phi}, ctx).front();
}

GofReport run_gof(const FittedModel& model, const EventSequence& seq, const ExoCovariates* exo,
                  const GofOptions& options) {
  GofReport report;
  std::vector<std::string> names = options.terms;
  if (names.empty())
    for (const auto& t : model.spec.terms) names.push_back(t.name);
  for (const auto& name : names) {
    if (!model.spec.find(name)) throw ValidationError("unknown term '" + name + "'");
    report.terms.push_back(test_term(model.fit, model.design, name, options.bridge));
  }
  if (report.terms.size() > 1) report.omnibus = test_omnibus(report.terms);
  if (options.aux) {
    const auto phi = evaluate_phi(model, seq, exo, *options.aux);
    report.auxiliary =
        test_auxiliary(model.fit, model.design, phi, options.aux_B, options.bridge.seed, options.aux->text());
  }
  return report;
}

}  // namespace remgof
