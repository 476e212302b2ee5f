#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "remgof/endo.hpp"
#include "remgof/errors.hpp"
#include "remgof/experiment.hpp"
#include "remgof/gof.hpp"
#include "remgof/pipeline.hpp"
#include "remgof/report.hpp"

namespace py = pybind11;
using namespace remgof;

namespace {

EventSequence events_from_arrays(py::array_t<double> times, py::array_t<long long> senders,
                                 py::array_t<long long> receivers, std::size_t n_actors) {
  auto t = times.unchecked<1>();
  auto s = senders.unchecked<1>();
  auto r = receivers.unchecked<1>();
  if (t.shape(0) != s.shape(0) || t.shape(0) != r.shape(0)) throw ValidationError("array lengths differ");
  std::vector<RelationalEvent> ev(static_cast<std::size_t>(t.shape(0)));
  for (py::ssize_t k = 0; k < t.shape(0); ++k) {
    if (s(k) < 0 || r(k) < 0) throw ValidationError("negative actor index");
    ev[static_cast<std::size_t>(k)].time = t(k);
    ev[static_cast<std::size_t>(k)].sender = static_cast<ActorIndex>(s(k));
    ev[static_cast<std::size_t>(k)].receiver = static_cast<ActorIndex>(r(k));
  }
  return EventSequence(std::move(ev), ActorRegistry::numbered(n_actors));
}

py::dict events_to_dict(const EventSequence& seq) {
  const auto n = static_cast<py::ssize_t>(seq.size());
  py::array_t<double> t(n);
  py::array_t<long long> s(n), r(n);
  auto tm = t.mutable_unchecked<1>();
  auto sm = s.mutable_unchecked<1>();
  auto rm = r.mutable_unchecked<1>();
  for (py::ssize_t k = 0; k < n; ++k) {
    tm(k) = seq[static_cast<std::size_t>(k)].time;
    sm(k) = seq[static_cast<std::size_t>(k)].sender;
    rm(k) = seq[static_cast<std::size_t>(k)].receiver;
  }
  py::dict d;
  d["time"] = t;
  d["sender"] = s;
  d["receiver"] = r;
  d["n_actors"] = seq.n_actors();
  return d;
}

std::string simulate_csv(const std::string& scenario, std::uint64_t seed, std::optional<std::size_t> n) {
  const auto& s = find_scenario(scenario);
  auto spec = s.dgp(s.levels.front());
  if (n) spec.n_events = *n;
  spec.seed = seed;
  std::ostringstream out;
  write_events_csv(out, simulate_sequence(spec).events);
  return out.str();
}

PipelineOptions pipeline_options(std::uint64_t seed, std::size_t m, bool stratified) {
  PipelineOptions po;
  po.seed = seed;
  po.m = m;
  po.stratified = stratified;
  return po;
}

std::string fit_json(const std::string& events_csv, const std::string& model, std::uint64_t seed, std::size_t m,
                     bool stratified) {
  const auto seq = ingest_events(events_csv);
  return fit_to_json(fit_events(seq, parse_model_spec(model), nullptr, pipeline_options(seed, m, stratified))).dump();
}

std::string gof_json(const std::string& events_csv, const std::string& model, std::uint64_t seed,
                     std::vector<std::string> terms, std::size_t B, std::uint64_t bridge_seed,
                     const std::string& aux, std::size_t aux_B) {
  const auto seq = ingest_events(events_csv);
  const auto fitted = fit_events(seq, parse_model_spec(model), nullptr, pipeline_options(seed, 2, false));
  GofOptions go;
  go.terms = std::move(terms);
  go.bridge.B = B;
  go.bridge.seed = bridge_seed;
  go.aux_B = aux_B;
  if (!aux.empty()) go.aux = parse_source(aux);
  json j;
  j["fit"] = fit_to_json(fitted);
  j["gof"] = gof_to_json(run_gof(fitted, seq, nullptr, go));
  return j.dump();
}

py::array_t<double> endo_statistics(py::array_t<double> times, py::array_t<long long> senders,
                                    py::array_t<long long> receivers, std::size_t n_actors,
                                    const std::string& kind, double decay) {
  const auto seq = events_from_arrays(times, senders, receivers, n_actors);
  const auto colon = kind.find(':');
  const EndoKind k{parse_endo_dynamic(kind.substr(0, colon)),
                   colon == std::string::npos ? EndoForm::identity : parse_endo_form(kind.substr(colon + 1)), decay};
  std::vector<EndoQuery> queries;
  for (const auto& e : seq.events()) queries.push_back({e.time, {e.sender, e.receiver}});
  const std::vector<EndoKind> kinds{k};
  const Eigen::MatrixXd m = endo_matrix(seq, kinds, queries);
  py::array_t<double> out(static_cast<py::ssize_t>(m.rows()));
  auto o = out.mutable_unchecked<1>();
  for (Eigen::Index i = 0; i < m.rows(); ++i) o(i) = m(i, 0);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Relational event model fitting and goodness-of-fit testing";

  static py::exception<Error> base(m, "RemgofError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(base, (e.kind() + ": " + e.what()).c_str());
    }
  });

  m.def("simulate_csv", &simulate_csv, py::arg("scenario"), py::arg("seed") = 1, py::arg("n") = py::none(),
        "Simulate a registered scenario; returns the event CSV text.");
  m.def(
      "read_events",
      [](const std::string& path) { return events_to_dict(ingest_events(path)); }, py::arg("path"));
  m.def("fit_json", &fit_json, py::arg("events"), py::arg("model"), py::arg("seed") = 1, py::arg("m") = 2,
        py::arg("stratified") = false);
  m.def("gof_json", &gof_json, py::arg("events"), py::arg("model"), py::arg("seed") = 1,
        py::arg("terms") = std::vector<std::string>{}, py::arg("B") = 1000, py::arg("bridge_seed") = 1,
        py::arg("aux") = "", py::arg("aux_B") = 1000);
  m.def("endo_statistics", &endo_statistics, py::arg("times"), py::arg("senders"), py::arg("receivers"),
        py::arg("n_actors"), py::arg("kind"), py::arg("decay") = 1.0,
        "Statistic of each event's own dyad just before the event.");
  m.def("kolmogorov_pvalue", &kolmogorov_pvalue, py::arg("t"));
  m.def("simulate_bridge_sup", &simulate_bridge_sup, py::arg("q"), py::arg("grid"), py::arg("B"),
        py::arg("seed") = 1);
  m.def("ks_uniform", &ks_uniform, py::arg("values"));
  m.def("scenarios", [] {
    std::vector<std::string> names;
    for (const auto& s : scenario_registry()) names.push_back(s.name);
    return names;
  });
  m.attr("__version__") = REMGOF_VERSION;
}
