#include "remgof/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "remgof/errors.hpp"
#include "remgof/gof.hpp"
#include "remgof/parallel.hpp"
#include "remgof/pipeline.hpp"
#include "remgof/random.hpp"
#include "remgof/report.hpp"

namespace remgof {

const char* const kScenarioVersion = "2026.10-1";

namespace {

// Shared constants of the registered designs.
constexpr double kDecay = 0.01;

DgpTerm rec_linear(double beta) {
  DgpTerm t;
  t.name = "rec";
  t.source = parse_source("endo:rec:time", kDecay);
  t.shape = DgpShape::linear;
  t.beta = beta;
  return t;
}

DgpTerm rec_power(double a, double kappa) {
  DgpTerm t;
  t.name = "rec";
  t.source = parse_source("endo:rec:time", kDecay);
  t.shape = DgpShape::power;
  t.a = a;
  t.kappa = kappa;
  return t;
}

DgpTerm endo_linear(const std::string& name, const std::string& source, double beta) {
  DgpTerm t;
  t.name = name;
  t.source = parse_source(source, kDecay);
  t.beta = beta;
  return t;
}

DgpTerm exo_linear(const std::string& name, double beta) {
  DgpTerm t;
  t.name = name;
  t.source = parse_source("exo:" + name);
  t.beta = beta;
  return t;
}

DgpTerm exo_sine(const std::string& name, double offset, double amplitude) {
  DgpTerm t;
  t.name = name;
  t.source = parse_source("exo:" + name);
  t.shape = DgpShape::sine;
  t.offset = offset;
  t.amplitude = amplitude;
  return t;
}

ExoDraw exponential_draw(const std::string& name, double rate) {
  return {name, ExoDraw::Distribution::exponential, rate, 0.0};
}
ExoDraw gaussian_draw(const std::string& name) { return {name, ExoDraw::Distribution::gaussian, 0.0, 1.0}; }

std::string rec_term(const std::string& type) {
  std::string s = "term rec type=" + type + " source=endo:rec:time b=" + format_double(kDecay);
  if (type == "nle") s += " q=10";
  return s + "\n";
}

// Non-linear reciprocity designs: effect a * x^kappa on x = exp(-b elapsed), so the
// log-hazard decays at rate kappa * b; the baseline falls by exp(trend) over the
// sequence, lengthening elapsed times.
constexpr double kNleA = 3.0;
constexpr double kNleKappa = 0.2;
constexpr std::size_t kNleActors = 20;
constexpr double kNleTrend = -3.0;

std::vector<Scenario> build_registry() {
  std::vector<Scenario> reg;

  {
    Scenario s;
    s.name = "coverage-fle";
    s.description = "Linear time-decayed reciprocity, fitted as a linear effect";
    s.factor = "n";
    s.levels = {1000};
    s.dgp = [](double n) {
      DgpSpec d;
      d.n_actors = 20;
      d.n_events = static_cast<std::size_t>(n);
      d.terms = {rec_linear(2.0)};
      return d;
    };
    s.variants = {{"CS", parse_model_spec(rec_term("fle")), {"rec"}}};
    reg.push_back(s);
    s.name = "fle";
    s.description = "Alias of coverage-fle";
    reg.push_back(s);
  }
  {
    Scenario s;
    s.name = "coverage-nle";
    s.description = "Non-linear time-decayed reciprocity, fitted with a 10-dimensional smooth";
    s.factor = "n";
    s.levels = {1000, 5000};
    s.dgp = [](double n) {
      DgpSpec d;
      d.n_actors = kNleActors;
      d.n_events = static_cast<std::size_t>(n);
      d.terms = {rec_power(kNleA, kNleKappa)};
      d.baseline_log_trend = kNleTrend;
      return d;
    };
    s.variants = {{"CS", parse_model_spec(rec_term("nle")), {"rec"}}};
    reg.push_back(s);
  }
  {
    Scenario s;
    s.name = "power-fle";
    s.description = "Non-linear time-decayed reciprocity, misfitted as a linear effect";
    s.factor = "n";
    s.levels = {1000, 5000};
    s.default_reps = 100;
    s.dgp = reg.back().dgp;
    s.variants = {{"MS", parse_model_spec(rec_term("fle")), {"rec"}}};
    reg.push_back(s);
  }
  {
    Scenario s;
    s.name = "coverage-re";
    s.description = "Sender random intercepts only, fitted as a sender random effect";
    s.factor = "actors";
    s.levels = {10, 50};
    s.default_reps = 100;
    s.dgp = [](double actors) {
      DgpSpec d;
      d.n_actors = static_cast<std::size_t>(actors);
      d.n_events = 2000;
      d.sender_sigma = 1.0;
      return d;
    };
    s.variants = {{"CS", parse_model_spec("term sender type=re source=actor:sender\n"), {"sender"}}};
    reg.push_back(s);
  }
  {
    Scenario s;
    s.name = "power-re";
    s.description = "Sender random intercepts, misfitted as sender random slopes in time";
    s.factor = "actors";
    s.levels = {10};
    s.default_reps = 100;
    s.dgp = reg.back().dgp;
    s.variants = {{"MS", parse_model_spec("term sender type=re source=actor:sender by=time\n"), {"sender"}}};
    reg.push_back(s);
  }

  // Omnibus designs with L = 1..4 components.
  const std::vector<std::string> fitted = {
      rec_term("fle"),
      "term xe type=fle source=exo:xe\n",
      "term xg type=tve source=exo:xg q=10\n",
      "term sender type=re source=actor:sender\n",
  };
  const std::vector<std::string> names = {"rec", "xe", "xg", "sender"};
  for (std::size_t L = 1; L <= 4; ++L) {
    Scenario s;
    s.name = "omnibus-L" + std::to_string(L);
    s.description = "Correctly specified model with " + std::to_string(L) + " component(s), omnibus test";
    s.factor = "n";
    s.levels = {2000};
    s.dgp = [L](double n) {
      DgpSpec d;
      d.n_actors = 50;
      d.n_events = static_cast<std::size_t>(n);
      d.terms = {rec_linear(2.0)};
      if (L >= 2) {
        d.exo.push_back(exponential_draw("xe", 1.0));
        d.terms.push_back(exo_linear("xe", 0.5));
      }
      if (L >= 3) {
        d.exo.push_back(gaussian_draw("xg"));
        d.terms.push_back(exo_sine("xg", 0.0, 1.0));
      }
      if (L >= 4) d.sender_sigma = 1.0;
      return d;
    };
    std::string text;
    std::vector<std::string> tested;
    for (std::size_t l = 0; l < L; ++l) {
      text += fitted[l];
      tested.push_back(names[l]);
    }
    s.variants = {{"CS", parse_model_spec(text), tested}};
    reg.push_back(s);
  }
  {
    Scenario s;
    s.name = "omnibus-ms";
    s.description = "Non-linear reciprocity plus sender random intercepts; CS and MS fits, omnibus test";
    s.factor = "n";
    s.levels = {5000};
    s.default_reps = 100;
    s.dgp = [](double n) {
      DgpSpec d;
      d.n_actors = kNleActors;
      d.n_events = static_cast<std::size_t>(n);
      d.terms = {rec_power(kNleA, kNleKappa)};
      d.baseline_log_trend = kNleTrend;
      d.sender_sigma = 0.5;
      return d;
    };
    const std::string re = "term sender type=re source=actor:sender\n",
                      slope = "term sender type=re source=actor:sender by=time\n";
    s.variants = {
        {"CS", parse_model_spec(rec_term("nle") + re), {"rec", "sender"}},
        {"MS-rec", parse_model_spec(rec_term("fle") + re), {"rec", "sender"}},
        {"MS-x", parse_model_spec(rec_term("nle") + slope), {"rec", "sender"}},
        {"MS-both", parse_model_spec(rec_term("fle") + slope), {"rec", "sender"}},
    };
    reg.push_back(s);
  }
  {
    Scenario s;
    s.name = "application";
    s.description = "159-actor analogue of the email study: four smooth endogenous terms and two random effects";
    s.factor = "n";
    s.levels = {20000};
    s.default_reps = 1;
    s.dgp = [](double n) {
      DgpSpec d;
      d.n_actors = 159;
      d.n_events = static_cast<std::size_t>(n);
      d.terms = {rec_power(kNleA, kNleKappa), endo_linear("rep", "endo:rep:time", 1.5)};
      d.sender_sigma = 1.0;
      d.receiver_sigma = 1.5;
      return d;
    };
    std::string text;
    for (const char* stat : {"rec", "rep", "trs", "cyc"})
      text += std::string("term ") + stat + " type=nle source=endo:" + stat + ":time b=" + format_double(kDecay) + " q=10\n";
    text += "term sender type=re source=actor:sender\nterm receiver type=re source=actor:receiver\n";
    s.variants = {{"CS", parse_model_spec(text), {"rec", "rep", "trs", "cyc", "sender", "receiver"}}};
    reg.push_back(s);
  }
  return reg;
}

std::string level_text(double level) {
  std::ostringstream out;
  out << level;
  return out.str();
}

}  // namespace

const std::vector<Scenario>& scenario_registry() {
  static const std::vector<Scenario> reg = build_registry();
  return reg;
}

const Scenario& find_scenario(const std::string& name) {
  for (const auto& s : scenario_registry())
    if (s.name == name) return s;
  throw ValidationError("unknown scenario '" + name + "'");
}

nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json j;
  j["version"] = kScenarioVersion;
  j["name"] = s.name;
  j["description"] = s.description;
  j["factor"] = s.factor;
  j["levels"] = s.levels;
  j["default_reps"] = s.default_reps;
  j["alpha"] = s.alpha;
  j["stratified"] = s.stratified;
  const auto d = s.dgp(s.levels.front());
  nlohmann::json dgp;
  dgp["n_actors"] = d.n_actors;
  dgp["n_events"] = d.n_events;
  dgp["baseline_rate"] = d.baseline_rate > 0 ? d.baseline_rate
                                             : 1.0 / static_cast<double>(d.n_actors * (d.n_actors - 1));
  dgp["sender_sigma"] = d.sender_sigma;
  dgp["receiver_sigma"] = d.receiver_sigma;
  dgp["group_log_rate"] = d.group_log_rate;
  dgp["baseline_log_trend"] = d.baseline_log_trend;
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : d.terms) {
    nlohmann::json jt;
    jt["name"] = t.name;
    jt["source"] = t.source.text();
    if (t.source.kind == SourceKind::endo) jt["decay"] = t.source.endo.decay;
    switch (t.shape) {
      case DgpShape::linear:
        jt["shape"] = "linear";
        jt["beta"] = t.beta;
        break;
      case DgpShape::power:
        jt["shape"] = "power";
        jt["a"] = t.a;
        jt["kappa"] = t.kappa;
        break;
      case DgpShape::sine:
        jt["shape"] = "sine";
        jt["offset"] = t.offset;
        jt["amplitude"] = t.amplitude;
        break;
    }
    terms.push_back(jt);
  }
  dgp["terms"] = terms;
  nlohmann::json exo = nlohmann::json::array();
  for (const auto& e : d.exo)
    exo.push_back({{"name", e.name},
                   {"distribution", e.distribution == ExoDraw::Distribution::exponential ? "exponential" : "gaussian"},
                   {"p1", e.p1},
                   {"p2", e.p2}});
  dgp["exo"] = exo;
  j["dgp_at_first_level"] = dgp;
  nlohmann::json variants = nlohmann::json::array();
  for (const auto& v : s.variants)
    variants.push_back({{"name", v.name}, {"model", format_model_spec(v.model)}, {"tested", v.tested}});
  j["variants"] = variants;
  return j;
}

std::pair<double, double> ks_uniform(std::vector<double> values) {
  std::erase_if(values, [](double v) { return !std::isfinite(v); });
  if (values.empty()) return {0.0, 1.0};
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = std::clamp(values[i], 0.0, 1.0);
    d = std::max({d, static_cast<double>(i + 1) / n - v, v - static_cast<double>(i) / n});
  }
  const double sn = std::sqrt(n);
  return {d, kolmogorov_pvalue((sn + 0.12 + 0.11 / sn) * d)};
}

void CellResult::summarize(double alpha) {
  std::size_t ok = 0, rejected = 0;
  failures = 0;
  for (double p : pvalues) {
    if (!std::isfinite(p)) {
      ++failures;
      continue;
    }
    ++ok;
    if (p < alpha) ++rejected;
  }
  rejection_rate = ok ? static_cast<double>(rejected) / static_cast<double>(ok) : std::numeric_limits<double>::quiet_NaN();
  std::tie(ks_statistic, ks_pvalue) = ks_uniform(pvalues);
}

nlohmann::json cell_to_json(const CellResult& c, double alpha) {
  nlohmann::json j;
  j["variant"] = c.variant;
  j["level"] = c.level;
  j["reps"] = c.pvalues.size();
  j["failures"] = c.failures;
  j["alpha"] = alpha;
  j["rejection_rate"] = std::isfinite(c.rejection_rate) ? nlohmann::json(c.rejection_rate) : nlohmann::json(nullptr);
  j["ks_statistic"] = c.ks_statistic;
  j["ks_pvalue"] = c.ks_pvalue;
  j["seeds"] = c.seeds;
  return j;
}

std::uint64_t replicate_seed(std::uint64_t base, const std::string& scenario, std::size_t level_index, std::size_t rep) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : scenario) h = (h ^ ch) * 1099511628211ULL;
  return mix64(mix64(base ^ h) + 0x9E3779B97F4A7C15ULL * (level_index + 1) + rep);
}

std::vector<std::pair<double, std::string>> run_replicate(const Scenario& s, double level, std::uint64_t seed,
                                                          std::size_t B) {
  std::vector<std::pair<double, std::string>> out;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::optional<Simulation> sim;
  try {
    auto spec = s.dgp(level);
    spec.seed = seed;
    sim = simulate_sequence(spec);
  } catch (const std::exception& e) {
    for (std::size_t v = 0; v < s.variants.size(); ++v) out.emplace_back(nan, e.what());
    return out;
  }
  for (const auto& variant : s.variants) {
    try {
      PipelineOptions po;
      po.seed = mix64(seed + 1);
      po.stratified = s.stratified;
      const auto model = fit_events(sim->events, variant.model, &sim->exo, po);
      GofOptions go;
      go.terms = variant.tested;
      go.bridge.B = B;
      const auto report = run_gof(model, sim->events, &sim->exo, go);
      out.emplace_back(report.omnibus ? report.omnibus->p_value : report.terms.front().p_value, "");
    } catch (const std::exception& e) {
      out.emplace_back(nan, e.what());
    }
  }
  return out;
}

namespace {

std::string cell_dir(const std::string& root, const Scenario& s, const std::string& variant, double level) {
  return (std::filesystem::path(root) / "cells" / (variant + "_" + s.factor + level_text(level))).string();
}

std::optional<CellResult> load_cell(const std::string& dir, double alpha) {
  namespace fs = std::filesystem;
  const auto csv = fs::path(dir) / "pvalues.csv";
  if (!fs::exists(fs::path(dir) / "summary.json") || !fs::exists(csv)) return std::nullopt;
  const auto j = read_json((fs::path(dir) / "summary.json").string());
  CellResult c;
  c.variant = j.at("variant").get<std::string>();
  c.level = j.at("level").get<double>();
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string rep, seed, p, err;
    std::getline(row, rep, ',');
    std::getline(row, seed, ',');
    std::getline(row, p, ',');
    std::getline(row, err);
    c.seeds.push_back(std::stoull(seed));
    c.pvalues.push_back(p == "nan" || p.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(p));
    c.errors.push_back(err);
  }
  c.summarize(alpha);
  return c;
}

void save_cell(const std::string& dir, const CellResult& c, double alpha) {
  std::ostringstream csv;
  csv << "rep,seed,p_value,error\n";
  for (std::size_t r = 0; r < c.pvalues.size(); ++r) {
    std::string err = c.errors[r];
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    csv << r << ',' << c.seeds[r] << ',' << (std::isfinite(c.pvalues[r]) ? format_double(c.pvalues[r]) : "nan")
        << ',' << err << '\n';
  }
  write_text_atomic((std::filesystem::path(dir) / "pvalues.csv").string(), csv.str());
  std::ostringstream hist;
  hist << "bin_lower,bin_upper,count\n";
  std::vector<std::size_t> counts(10, 0);
  for (double p : c.pvalues)
    if (std::isfinite(p)) ++counts[std::min<std::size_t>(9, static_cast<std::size_t>(p * 10.0))];
  for (std::size_t b = 0; b < 10; ++b)
    hist << format_double(b / 10.0) << ',' << format_double((b + 1) / 10.0) << ',' << counts[b] << '\n';
  write_text_atomic((std::filesystem::path(dir) / "histogram.csv").string(), hist.str());
  write_json_atomic((std::filesystem::path(dir) / "summary.json").string(), cell_to_json(c, alpha));
}

}  // namespace

std::vector<CellResult> run_experiment(const Scenario& s, const ExperimentOptions& options) {
  const std::size_t reps = options.reps.value_or(s.default_reps);
  if (reps == 0) throw ValidationError("reps must be >= 1");
  const auto levels = options.levels.empty() ? s.levels : options.levels;
  const bool write = !options.out_dir.empty();
  std::vector<CellResult> cells;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const double level = levels[li];
    std::vector<CellResult> level_cells;
    bool complete = write && options.resume;
    if (complete) {
      for (const auto& v : s.variants) {
        auto c = load_cell(cell_dir(options.out_dir, s, v.name, level), s.alpha);
        if (!c || c->pvalues.size() != reps) {
          complete = false;
          break;
        }
        level_cells.push_back(std::move(*c));
      }
    }
    if (!complete) {
      level_cells.assign(s.variants.size(), CellResult{});
      for (std::size_t v = 0; v < s.variants.size(); ++v) {
        level_cells[v].variant = s.variants[v].name;
        level_cells[v].level = level;
        level_cells[v].seeds.resize(reps);
        level_cells[v].pvalues.resize(reps);
        level_cells[v].errors.resize(reps);
      }
      parallel_for(reps, [&](std::size_t r) {
        const auto seed = replicate_seed(options.seed, s.name, li, r);
        const auto res = run_replicate(s, level, seed, options.B);
        for (std::size_t v = 0; v < s.variants.size(); ++v) {
          level_cells[v].seeds[r] = seed;
          level_cells[v].pvalues[r] = res[v].first;
          level_cells[v].errors[r] = res[v].second;
        }
        if (options.progress) options.progress(level, r);
      });
      for (auto& c : level_cells) {
        c.summarize(s.alpha);
        if (write) save_cell(cell_dir(options.out_dir, s, c.variant, level), c, s.alpha);
      }
    }
    for (auto& c : level_cells) cells.push_back(std::move(c));
  }
  if (write) {
    write_json_atomic((std::filesystem::path(options.out_dir) / "scenario.json").string(), scenario_to_json(s));
    nlohmann::json summary;
    summary["scenario"] = s.name;
    summary["scenario_version"] = kScenarioVersion;
    summary["reps"] = reps;
    summary["B"] = options.B;
    summary["seed"] = options.seed;
    nlohmann::json jc = nlohmann::json::array();
    for (const auto& c : cells) jc.push_back(cell_to_json(c, s.alpha));
    summary["cells"] = jc;
    write_json_atomic((std::filesystem::path(options.out_dir) / "summary.json").string(), summary);
  }
  return cells;
}

}  // namespace remgof
