#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include "CLI11.hpp"
#include "remgof/errors.hpp"
#include "remgof/experiment.hpp"
#include "remgof/parallel.hpp"
#include "remgof/pipeline.hpp"
#include "remgof/report.hpp"

#ifndef REMGOF_VERSION
#define REMGOF_VERSION "0.0.0"
#endif

using namespace remgof;
namespace fs = std::filesystem;

namespace {

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  json flags = json::object();
  json seeds = json::object();
  json inputs = json::object();
  json outputs = json::array();
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  std::string started_at;

  Manifest() {
    const auto now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    started_at = buf;
  }

  void input(const std::string& role, const std::string& path) {
    inputs[role] = {{"path", path}, {"sha256", sha256_file(path)}};
  }

  void write(const fs::path& dir) const {
    json j;
    j["command"] = command;
    j["argv"] = argv;
    j["flags"] = flags;
    j["seeds"] = seeds;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["versions"] = {{"remgof", REMGOF_VERSION}, {"scenarios", kScenarioVersion}};
    j["threads"] = thread_count();
    j["started_at"] = started_at;
    j["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_json_atomic((dir / "manifest.json").string(), j);
  }
};

fs::path out_dir_of(const std::string& file) {
  const fs::path p = fs::absolute(file).parent_path();
  return p.empty() ? fs::current_path() : p;
}

struct IngestFlags {
  std::string events;
  std::string covariates;
  std::optional<double> jitter;
  bool drop_self_loops = false;
  bool drop_duplicates = false;

  void add(CLI::App* app) {
    app->add_option("--events", events, "Event CSV: time,sender,receiver[,stratum]")->required();
    app->add_option("--covariates", covariates, "Exogenous covariate CSV: name,sender,receiver,value");
    app->add_option("--jitter", jitter, "Break tied times by adding k*eps to the k-th repeat");
    app->add_flag("--drop-self-loops", drop_self_loops, "Drop rows with sender == receiver");
    app->add_flag("--drop-duplicates", drop_duplicates, "Drop repeated (time, sender, receiver) rows");
  }

  IngestOptions options() const {
    IngestOptions o;
    o.jitter = jitter;
    o.drop_self_loops = drop_self_loops;
    o.drop_duplicates = drop_duplicates;
    return o;
  }

  json to_json() const {
    return {{"jitter", jitter ? json(*jitter) : json(nullptr)},
            {"drop_self_loops", drop_self_loops},
            {"drop_duplicates", drop_duplicates}};
  }
};

StrataKey parse_key(const std::string& s) {
  if (s == "sender") return StrataKey::sender;
  if (s == "receiver") return StrataKey::receiver;
  if (s == "pair") return StrataKey::pair;
  throw ValidationError("unknown strata key '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// fit ---------------------------------------------------------------------

struct FitArgs {
  IngestFlags ingest;
  std::string model;
  std::string endo;
  double decay = 1.0;
  std::uint64_t seed = 1;
  std::size_t m = 2;
  bool stratified = false;
  std::string strata_key = "sender";
  std::vector<double> lambda;
  std::string controls_out;
  std::string out = "fit.json";
};

int cmd_fit(const FitArgs& a, Manifest& manifest) {
  if (a.model.empty() == a.endo.empty()) throw UsageError("give exactly one of --model or --endo");
  const auto seq = ingest_events(a.ingest.events, {}, a.ingest.options());
  manifest.input("events", a.ingest.events);
  std::optional<ExoCovariates> exo;
  if (!a.ingest.covariates.empty()) {
    exo = ingest_exo(a.ingest.covariates, seq.actors());
    manifest.input("covariates", a.ingest.covariates);
  }
  ModelSpec spec;
  if (!a.model.empty()) {
    spec = read_model_spec(a.model);
    manifest.input("model", a.model);
  } else {
    spec = endo_shorthand(a.endo, a.decay);
  }
  PipelineOptions po;
  po.m = a.m;
  po.seed = a.seed;
  po.stratified = a.stratified;
  po.strata_key = parse_key(a.strata_key);
  if (!a.lambda.empty()) {
    po.fit.select_lambda = false;
    po.fit.lambda = a.lambda;
  }
  const auto model = fit_events(seq, spec, exo ? &*exo : nullptr, po);
  auto j = fit_to_json(model);
  j["events_sha256"] = manifest.inputs["events"]["sha256"];
  j["covariates_sha256"] = exo ? manifest.inputs["covariates"]["sha256"] : json("");
  j["ingest"] = a.ingest.to_json();
  std::vector<json> sigmas;
  for (const auto& t : model.fit.terms)
    if (t.sigma) sigmas.push_back({{"term", t.name}, {"sigma", std::isfinite(*t.sigma) ? json(*t.sigma) : json(nullptr)}});
  j["sigma"] = sigmas;
  write_json_atomic(a.out, j);
  manifest.outputs.push_back(a.out);
  if (!a.controls_out.empty()) {
    std::ostringstream csv;
    write_controls_csv(csv, seq, model.sets);
    write_text_atomic(a.controls_out, csv.str());
    manifest.outputs.push_back(a.controls_out);
  }
  manifest.seeds["sampling"] = a.seed;
  manifest.write(out_dir_of(a.out));
  for (const auto& w : model.fit.warnings) std::cerr << "warning: " << w << '\n';
  return 0;
}

// gof ---------------------------------------------------------------------

struct GofArgs {
  IngestFlags ingest;
  std::string fit;
  std::string terms = "all";
  std::size_t B = 1000;
  std::uint64_t bridge_seed = 1;
  std::string aux;
  std::size_t aux_B = 1000;
  std::string out = "gof.json";
  std::string trajectories;
};

int cmd_gof(const GofArgs& a, Manifest& manifest) {
  const auto fj = read_json(a.fit);
  manifest.input("fit", a.fit);
  const auto stored = fit_from_json(fj);
  manifest.input("events", a.ingest.events);
  if (!stored.events_digest.empty() && stored.events_digest != manifest.inputs["events"]["sha256"])
    throw ConsistencyError("events file digest differs from the one recorded in " + a.fit);
  std::optional<ExoCovariates> exo;
  if (!a.ingest.covariates.empty()) manifest.input("covariates", a.ingest.covariates);
  const std::string cov_digest = a.ingest.covariates.empty() ? "" : manifest.inputs["covariates"]["sha256"].get<std::string>();
  if (stored.covariates_digest != cov_digest)
    throw ConsistencyError("covariates file digest differs from the one recorded in " + a.fit);

  IngestOptions io = a.ingest.options();
  if (fj.contains("ingest")) {
    const auto& ing = fj["ingest"];
    if (!ing["jitter"].is_null()) io.jitter = ing["jitter"].get<double>();
    io.drop_self_loops = ing.value("drop_self_loops", io.drop_self_loops);
    io.drop_duplicates = ing.value("drop_duplicates", io.drop_duplicates);
  }
  const auto seq = ingest_events(a.ingest.events, {}, io);
  if (!a.ingest.covariates.empty()) exo = ingest_exo(a.ingest.covariates, seq.actors());
  const auto model = restore_fit(seq, stored.spec, exo ? &*exo : nullptr, stored.options, stored.gamma, stored.lambdas);

  GofOptions go;
  if (a.terms != "all") go.terms = split_list(a.terms);
  go.bridge.B = a.B;
  go.bridge.seed = a.bridge_seed;
  go.aux_B = a.aux_B;
  if (!a.aux.empty()) go.aux = parse_source(a.aux);
  const auto report = run_gof(model, seq, exo ? &*exo : nullptr, go);

  auto j = gof_to_json(report);
  j["fit_sha256"] = manifest.inputs["fit"]["sha256"];
  j["B"] = a.B;
  j["seed"] = a.bridge_seed;
  write_json_atomic(a.out, j);
  manifest.outputs.push_back(a.out);
  if (!a.trajectories.empty()) {
    for (const auto& t : report.terms) {
      const auto path = (fs::path(a.trajectories) / ("trajectory_" + t.term + ".csv")).string();
      write_trajectory_csv(path, t);
      manifest.outputs.push_back(path);
    }
  }
  manifest.seeds["sampling"] = stored.options.seed;
  manifest.seeds["bridge"] = a.bridge_seed;
  manifest.write(out_dir_of(a.out));
  return 0;
}

// simulate ----------------------------------------------------------------

struct SimulateArgs {
  std::string scenario = "fle";
  std::optional<double> level;
  std::optional<std::size_t> n;
  std::optional<std::size_t> actors;
  std::uint64_t seed = 1;
  std::string out = "events.csv";
  std::string covariates_out;
};

int cmd_simulate(const SimulateArgs& a, Manifest& manifest) {
  const auto& s = find_scenario(a.scenario);
  auto spec = s.dgp(a.level.value_or(s.levels.front()));
  if (a.n) spec.n_events = *a.n;
  if (a.actors) spec.n_actors = *a.actors;
  spec.seed = a.seed;
  const auto sim = simulate_sequence(spec);
  std::ostringstream csv;
  write_events_csv(csv, sim.events);
  write_text_atomic(a.out, csv.str());
  manifest.outputs.push_back(a.out);
  if (!a.covariates_out.empty()) {
    std::ostringstream exo;
    write_exo_csv(exo, sim.exo, sim.events.actors());
    write_text_atomic(a.covariates_out, exo.str());
    manifest.outputs.push_back(a.covariates_out);
  } else if (!sim.exo.empty()) {
    std::cerr << "warning: scenario draws exogenous covariates; pass --covariates-out to keep them\n";
  }
  manifest.seeds["simulation"] = a.seed;
  manifest.write(out_dir_of(a.out));
  return 0;
}

// experiment --------------------------------------------------------------

struct ExperimentArgs {
  std::string scenario;
  std::optional<std::size_t> reps;
  std::string levels;
  std::uint64_t seed = 1;
  std::size_t B = 1000;
  std::string out = "experiment";
  bool fresh = false;
  bool list = false;
  bool quiet = false;
};

int cmd_experiment(const ExperimentArgs& a, Manifest& manifest) {
  if (a.list) {
    for (const auto& s : scenario_registry()) std::cout << s.name << "\t" << s.description << '\n';
    return 0;
  }
  if (a.scenario.empty()) throw UsageError("--scenario is required");
  const auto& s = find_scenario(a.scenario);
  ExperimentOptions eo;
  eo.reps = a.reps;
  for (const auto& l : split_list(a.levels)) eo.levels.push_back(std::stod(l));
  eo.seed = a.seed;
  eo.B = a.B;
  eo.out_dir = a.out;
  eo.resume = !a.fresh;
  if (!a.quiet) {
    std::mutex mu;
    eo.progress = [&mu, done = std::size_t{0}](double level, std::size_t) mutable {
      std::lock_guard lock(mu);
      if (++done % 10 == 0) std::cerr << "level " << level << ": " << done << " replicates\n";
    };
  }
  const auto cells = run_experiment(s, eo);
  std::cout << "variant\t" << s.factor << "\treps\tfailures\trejection_rate\tks_p\n";
  for (const auto& c : cells)
    std::cout << c.variant << '\t' << c.level << '\t' << c.pvalues.size() << '\t' << c.failures << '\t'
              << format_double(c.rejection_rate) << '\t' << format_double(c.ks_pvalue) << '\n';
  manifest.seeds["base"] = a.seed;
  manifest.seeds["bridge"] = 1;
  manifest.outputs.push_back((fs::path(a.out) / "summary.json").string());
  manifest.write(fs::absolute(a.out));
  return 0;
}

void record_flags(const CLI::App* sub, Manifest& manifest) {
  for (const auto* opt : sub->get_options()) {
    if (opt->get_name() == "--help" || opt->get_name().empty()) continue;
    const auto res = opt->results();
    if (opt->get_expected_min() == 0)
      manifest.flags[opt->get_name()] = opt->count() > 0;
    else if (res.size() == 1)
      manifest.flags[opt->get_name()] = res.front();
    else if (!res.empty())
      manifest.flags[opt->get_name()] = res;
    else
      manifest.flags[opt->get_name()] = nullptr;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relational event model fitting and goodness-of-fit testing"};
  app.require_subcommand(1);
  app.set_version_flag("--version", REMGOF_VERSION);

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit a model by sampled partial likelihood");
  fa.ingest.add(fit);
  fit->add_option("--model", fa.model, "Model specification file");
  fit->add_option("--endo", fa.endo, "Shorthand for linear endogenous terms, e.g. rec:time,rep:id");
  fit->add_option("--decay", fa.decay, "Decay rate b of time-form statistics given via --endo")->check(CLI::PositiveNumber);
  fit->add_option("--seed", fa.seed, "Control sampling seed");
  fit->add_option("--m", fa.m, "Sampled risk set size")->check(CLI::Range(2, 1 << 20));
  fit->add_flag("--stratified", fa.stratified, "Sample controls within the case's stratum");
  fit->add_option("--strata-key", fa.strata_key, "sender, receiver or pair");
  fit->add_option("--lambda", fa.lambda, "Fixed smoothing parameters per penalized term (skips GCV)");
  fit->add_option("--controls-out", fa.controls_out, "CSV of sampled controls");
  fit->add_option("--out", fa.out, "Output fit JSON");

  GofArgs ga;
  auto* gof = app.add_subcommand("gof", "Goodness-of-fit tests for a stored fit");
  ga.ingest.add(gof);
  gof->add_option("--fit", ga.fit, "fit.json from the fit command")->required();
  gof->add_option("--terms", ga.terms, "all or a comma-separated list of term names");
  gof->add_option("--B", ga.B, "Simulated bridges for multivariate tests")->check(CLI::PositiveNumber);
  gof->add_option("--seed", ga.bridge_seed, "Seed of simulated bridges and auxiliary replicates");
  gof->add_option("--aux", ga.aux, "Auxiliary statistic source, e.g. exo:x or stratum");
  gof->add_option("--aux-B", ga.aux_B, "Replicates of the auxiliary test")->check(CLI::PositiveNumber);
  gof->add_option("--out", ga.out, "Output GOF JSON");
  gof->add_option("--trajectories", ga.trajectories, "Directory for per-term trajectory CSVs");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Simulate one event sequence from a registered scenario");
  sim->add_option("--scenario", sa.scenario, "Scenario name");
  sim->add_option("--level", sa.level, "Factor level of the scenario (defaults to its first)");
  sim->add_option("--n", sa.n, "Number of events")->check(CLI::PositiveNumber);
  sim->add_option("--actors", sa.actors, "Number of actors")->check(CLI::Range(2, 1 << 20));
  sim->add_option("--seed", sa.seed, "Simulation seed");
  sim->add_option("--out", sa.out, "Output event CSV");
  sim->add_option("--covariates-out", sa.covariates_out, "Output CSV of drawn exogenous covariates");

  ExperimentArgs ea;
  auto* exp = app.add_subcommand("experiment", "Run a registered coverage or power experiment");
  exp->add_option("--scenario", ea.scenario, "Scenario name");
  exp->add_option("--reps", ea.reps, "Replicates per cell")->check(CLI::PositiveNumber);
  exp->add_option("--levels", ea.levels, "Comma-separated factor levels overriding the scenario's");
  exp->add_option("--seed", ea.seed, "Base seed");
  exp->add_option("--B", ea.B, "Simulated bridges per multivariate test")->check(CLI::PositiveNumber);
  exp->add_option("--out", ea.out, "Output directory");
  exp->add_flag("--fresh", ea.fresh, "Recompute cells already present in the output directory");
  exp->add_flag("--list", ea.list, "List registered scenarios");
  exp->add_flag("--quiet", ea.quiet, "No progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  Manifest manifest;
  manifest.argv.assign(argv, argv + argc);
  try {
    for (auto* sub : {fit, gof, sim, exp}) {
      if (!sub->parsed()) continue;
      manifest.command = sub->get_name();
      record_flags(sub, manifest);
      if (sub == fit) return cmd_fit(fa, manifest);
      if (sub == gof) return cmd_gof(ga, manifest);
      if (sub == sim) return cmd_simulate(sa, manifest);
      return cmd_experiment(ea, manifest);
    }
  } catch (const std::exception& e) {
    std::cerr << error_to_json(e).dump() << '\n';
    if (const auto* err = dynamic_cast<const Error*>(&e)) return err->exit_code();
    if (dynamic_cast<const fs::filesystem_error*>(&e) || dynamic_cast<const std::invalid_argument*>(&e)) return 2;
    return 4;
  }
  return 1;
}
