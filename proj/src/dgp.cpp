#include "remgof/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "remgof/basis.hpp"
#include "remgof/endo.hpp"
#include "remgof/errors.hpp"
#include "remgof/random.hpp"

namespace remgof {

namespace {
// Stream keys separating the independent draws of one simulation.
constexpr std::uint64_t kEventStream = 0;
constexpr std::uint64_t kEffectStream = 1;
constexpr std::uint64_t kExoStream = 2;
}  // namespace

double DgpTerm::effect(double x, double progress) const {
  switch (shape) {
    case DgpShape::linear: return beta * x;
    case DgpShape::power: return x > 0.0 ? a * std::pow(x, kappa) : 0.0;
    case DgpShape::sine: return (offset + amplitude * std::sin(2.0 * std::numbers::pi * progress)) * x;
  }
  return 0.0;
}

Simulation simulate_sequence(const DgpSpec& spec) {
  const std::size_t na = spec.n_actors;
  if (na < 2) throw DgpError("need at least two actors");
  if (spec.baseline_rate < 0.0) throw DgpError("baseline rate must be > 0");
  const std::size_t n_dyads = na * (na - 1);
  const double base = spec.baseline_rate > 0.0 ? spec.baseline_rate : 1.0 / static_cast<double>(n_dyads);

  Simulation sim{EventSequence({}, ActorRegistry::numbered(na)), {}, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(na)),
                 Eigen::VectorXd::Zero(static_cast<Eigen::Index>(na)), {}};

  StreamRng effect_rng(spec.seed, kEffectStream);
  for (std::size_t a = 0; a < na; ++a) sim.sender_effect[static_cast<Eigen::Index>(a)] = spec.sender_sigma * effect_rng.normal();
  for (std::size_t a = 0; a < na; ++a)
    sim.receiver_effect[static_cast<Eigen::Index>(a)] = spec.receiver_sigma * effect_rng.normal();

  StreamRng exo_rng(spec.seed, kExoStream);
  for (const auto& draw : spec.exo) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(na), static_cast<Eigen::Index>(na));
    for (std::size_t s = 0; s < na; ++s)
      for (std::size_t r = 0; r < na; ++r) {
        if (s == r) continue;
        m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(r)) =
            draw.distribution == ExoDraw::Distribution::exponential ? exo_rng.exponential(draw.p1)
                                                                     : draw.p1 + draw.p2 * exo_rng.normal();
      }
    sim.exo.dyadic[draw.name] = std::move(m);
  }

  const std::size_t n_groups = spec.group_log_rate.size();
  if (n_groups > 0) {
    sim.strata.key = StrataKey::sender;
    sim.strata.group.resize(na);
    for (std::size_t a = 0; a < na; ++a) sim.strata.group[a] = static_cast<int>(a % n_groups);
  }

  // Static part of the log-intensity per dyad, canonical order.
  std::vector<Dyad> dyads;
  dyads.reserve(n_dyads);
  for (std::size_t s = 0; s < na; ++s)
    for (std::size_t r = 0; r < na; ++r)
      if (s != r) dyads.push_back({static_cast<ActorIndex>(s), static_cast<ActorIndex>(r)});

  std::vector<const DgpTerm*> dynamic_terms;
  std::vector<double> eta0(n_dyads, std::log(base));
  EndoState state(na);
  for (std::size_t d = 0; d < n_dyads; ++d) {
    const auto [s, r] = dyads[d];
    eta0[d] += sim.sender_effect[s] + sim.receiver_effect[r];
    if (n_groups > 0) eta0[d] += spec.group_log_rate[static_cast<std::size_t>(sim.strata.group[s])];
  }
  bool time_varying = false;
  for (const auto& term : spec.terms) {
    const bool is_static = (term.source.kind == SourceKind::exo || term.source.kind == SourceKind::constant) &&
                           term.shape != DgpShape::sine;
    if (is_static) {
      for (std::size_t d = 0; d < n_dyads; ++d)
        eta0[d] += term.effect(covariate_value(term.source, dyads[d], 1.0, state, &sim.exo, nullptr, 1.0), 0.0);
    } else {
      if (term.source.kind == SourceKind::actor_sender || term.source.kind == SourceKind::actor_receiver ||
          term.source.kind == SourceKind::stratum)
        throw DgpError("term '" + term.name + "' uses a source the simulator does not drive");
      dynamic_terms.push_back(&term);
      if (term.source.kind == SourceKind::time ||
          (term.source.kind == SourceKind::endo && term.source.endo.form == EndoForm::time))
        time_varying = true;
    }
  }

  // `time` sources are read as t / n_events.
  const double t_scale = static_cast<double>(std::max<std::size_t>(spec.n_events, 1));
  std::vector<double> weight(n_dyads);
  auto evaluate = [&](double t, double progress) {
    double total = 0.0;
    for (std::size_t d = 0; d < n_dyads; ++d) {
      double eta = eta0[d];
      for (const DgpTerm* term : dynamic_terms)
        eta += term->effect(covariate_value(term->source, dyads[d], t, state, &sim.exo, nullptr, t_scale), progress);
      weight[d] = std::exp(eta);
      total += weight[d];
    }
    if (!(total > 0.0) || !std::isfinite(total))
      throw DgpError("total intensity is " + format_double(total) + " at t=" + format_double(t));
    return total;
  };

  StreamRng rng(spec.seed, kEventStream);
  std::vector<RelationalEvent> events;
  events.reserve(spec.n_events);
  double t = 0.0;
  const double trend_step = spec.n_events > 0 ? spec.baseline_log_trend / static_cast<double>(spec.n_events) : 0.0;
  for (std::size_t k = 0; k < spec.n_events; ++k) {
    const double scale = std::exp(trend_step * static_cast<double>(k));
    const double progress = static_cast<double>(k) / static_cast<double>(spec.n_events);
    double total = evaluate(t, progress) * scale;
    double t_next = t + rng.exponential(total);
    if (!(t_next > t)) t_next = std::nextafter(t, std::numeric_limits<double>::infinity());
    if (time_varying) total = evaluate(t_next, progress) * scale;
    double target = rng.uniform() * total / scale;
    std::size_t pick = n_dyads - 1;
    for (std::size_t d = 0; d < n_dyads; ++d) {
      target -= weight[d];
      if (target < 0.0) {
        pick = d;
        break;
      }
    }
    RelationalEvent e;
    e.time = t_next;
    e.sender = dyads[pick].sender;
    e.receiver = dyads[pick].receiver;
    if (n_groups > 0) e.stratum = sim.strata.group[e.sender];
    state.advance(e);
    events.push_back(e);
    t = t_next;
  }
  sim.events = EventSequence(std::move(events), ActorRegistry::numbered(na));
  return sim;
}

}  // namespace remgof
