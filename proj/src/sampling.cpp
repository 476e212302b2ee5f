#include "remgof/sampling.hpp"

#include <cmath>
#include <ostream>
#include <set>

#include "remgof/endo.hpp"
#include "remgof/errors.hpp"
#include "remgof/random.hpp"

namespace remgof {

namespace {

// Floyd's algorithm: k distinct indices from [0, n), ascending.
std::vector<std::uint64_t> floyd_sample(StreamRng& rng, std::uint64_t n, std::uint64_t k) {
  std::set<std::uint64_t> chosen;
  for (std::uint64_t j = n - k; j < n; ++j) {
    const std::uint64_t t = rng.below(j + 1);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  return {chosen.begin(), chosen.end()};
}

std::vector<std::uint64_t> draw_indices(StreamRng& rng, std::uint64_t pool, std::size_t k) {
  if (k == 1) return {rng.below(pool)};
  return floyd_sample(rng, pool, k);
}

double log_choose(double n, double k) { return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0); }

}  // namespace

std::vector<SampledRiskSet> sample_risk_sets(const EventSequence& seq, const SamplingOptions& options) {
  if (options.m < 2) throw ValidationError("m must be >= 2");
  if (options.stratified && (!options.strata || options.strata->empty()))
    throw ValidationError("stratified sampling requires a strata map");
  const std::size_t k_controls = options.m - 1;
  const bool all_dyads = options.policy.mode == RiskSetPolicy::Mode::all_ordered_dyads;

  std::vector<SampledRiskSet> sets(seq.size());
  std::vector<ActorIndex> active;
  std::vector<std::int64_t> position(seq.n_actors(), -1);
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const auto& e = seq[k];
    SampledRiskSet& set = sets[k];
    set.event_index = k;
    set.time = e.time;
    set.case_dyad = e.dyad();
    if (options.strata && !options.strata->empty()) set.stratum = options.strata->stratum(e.dyad());

    if (all_dyads) {
      active.resize(seq.n_actors());
      for (std::size_t a = 0; a < active.size(); ++a) active[a] = static_cast<ActorIndex>(a);
    } else {
      active = active_actors(seq.n_actors(), e.time, options.policy);
    }
    std::fill(position.begin(), position.end(), -1);
    for (std::size_t i = 0; i < active.size(); ++i) position[active[i]] = static_cast<std::int64_t>(i);
    if (position[e.sender] < 0 || position[e.receiver] < 0)
      throw SamplingError(k, "event " + std::to_string(k) + " involves an actor outside the risk set");

    const std::uint64_t na = active.size();
    const auto to_dyad = [&](std::uint64_t idx) {
      const std::uint64_t si = idx / (na - 1), rr = idx % (na - 1);
      return Dyad{active[si], active[rr < si ? rr : rr + 1]};
    };
    StreamRng rng(options.seed, k);

    if (!options.stratified) {
      const std::uint64_t n_risk = na * (na - 1);
      if (n_risk < options.m)
        throw SamplingError(k, "risk set of event " + std::to_string(k) + " has " + std::to_string(n_risk) +
                                   " dyads, fewer than m=" + std::to_string(options.m));
      const auto ps = static_cast<std::uint64_t>(position[e.sender]);
      const auto pr = static_cast<std::uint64_t>(position[e.receiver]);
      const std::uint64_t case_idx = ps * (na - 1) + (pr < ps ? pr : pr - 1);
      for (std::uint64_t j : draw_indices(rng, n_risk - 1, k_controls))
        set.controls.push_back(to_dyad(j >= case_idx ? j + 1 : j));
      set.log_pi = -log_choose(static_cast<double>(n_risk - 1), static_cast<double>(k_controls));
    } else {
      const int g = options.strata->stratum(e.dyad());
      std::vector<Dyad> pool;
      for (ActorIndex s : active)
        for (ActorIndex r : active) {
          if (s == r || (s == e.sender && r == e.receiver)) continue;
          if (options.strata->stratum({s, r}) == g) pool.push_back({s, r});
        }
      if (pool.size() < k_controls)
        throw SamplingError(k, "stratum " + std::to_string(g) + " of event " + std::to_string(k) + " has " +
                                   std::to_string(pool.size()) + " candidate controls, need " +
                                   std::to_string(k_controls));
      for (std::uint64_t j : draw_indices(rng, pool.size(), k_controls)) set.controls.push_back(pool[j]);
      set.log_pi = -log_choose(static_cast<double>(pool.size()), static_cast<double>(k_controls));
    }
  }
  return sets;
}

void write_controls_csv(std::ostream& out, const EventSequence& seq, const std::vector<SampledRiskSet>& sets) {
  out << "event_index,control_sender,control_receiver\n";
  for (const auto& set : sets)
    for (const auto& c : set.controls)
      out << set.event_index << ',' << seq.actors().label(c.sender) << ',' << seq.actors().label(c.receiver)
          << '\n';
}

std::vector<Eigen::MatrixXd> evaluate_sources(const EventSequence& seq, const std::vector<SampledRiskSet>& sets,
                                              const std::vector<CovariateSource>& sources,
                                              const CovariateContext& ctx) {
  const std::size_t m = sets.empty() ? 2 : sets.front().size();
  std::vector<Eigen::MatrixXd> out(sources.size(), Eigen::MatrixXd(static_cast<Eigen::Index>(sets.size()),
                                                                   static_cast<Eigen::Index>(m)));
  EndoState state(seq.n_actors());
  std::size_t next = 0;
  const double t_end = seq.t_end();
  for (std::size_t k = 0; k < sets.size(); ++k) {
    const auto& set = sets[k];
    if (set.size() != m) throw ValidationError("sampled risk sets differ in size");
    if (k > 0 && set.event_index <= sets[k - 1].event_index)
      throw OrderError("sampled risk sets must be ordered by event index");
    while (next < set.event_index) state.advance(seq[next++]);
    for (std::size_t i = 0; i < sources.size(); ++i)
      for (std::size_t j = 0; j < m; ++j)
        out[i](static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) =
            covariate_value(sources[i], set.member(j), set.time, state, ctx.exo, ctx.strata, t_end);
  }
  return out;
}

namespace {

SparseRows select_rows(const SparseRows& rows, std::size_t stride, std::size_t offset) {
  const auto n = rows.rows() / static_cast<Eigen::Index>(stride);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(rows.nonZeros() / static_cast<Eigen::Index>(stride) + 1));
  for (Eigen::Index k = 0; k < n; ++k)
    for (SparseRows::InnerIterator it(rows, k * static_cast<Eigen::Index>(stride) + static_cast<Eigen::Index>(offset));
         it; ++it)
      trip.emplace_back(k, it.col(), it.value());
  SparseRows out(n, rows.cols());
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

}  // namespace

Design build_design(const EventSequence& seq, const std::vector<SampledRiskSet>& sets, const ModelSpec& spec,
                    const CovariateContext& ctx) {
  if (sets.empty()) throw ValidationError("no sampled risk sets");
  const std::size_t m = sets.front().size();
  const std::size_t n = sets.size();
  std::vector<CovariateSource> sources;
  for (const auto& t : spec.terms) sources.push_back(t.source);
  const auto raw = evaluate_sources(seq, sets, sources, ctx);

  LayoutData data;
  data.pooled.resize(spec.terms.size());
  data.case_values.resize(spec.terms.size());
  const double t_end = seq.t_end();
  for (const auto& s : sets) data.event_u.push_back(s.time / t_end);
  for (std::size_t i = 0; i < spec.terms.size(); ++i) {
    if (spec.terms[i].effect != EffectType::nle) continue;
    data.pooled[i].assign(raw[i].data(), raw[i].data() + raw[i].size());
    data.case_values[i].assign(raw[i].col(0).data(), raw[i].col(0).data() + n);
  }

  Design design;
  design.layout = resolve_layout(spec, data, seq.n_actors(), t_end);
  design.m = m;
  design.n = n;
  design.log_pi.resize(n);

  // Term order in the layout differs from spec order.
  std::vector<std::size_t> source_of(design.layout.terms.size());
  for (std::size_t l = 0; l < design.layout.terms.size(); ++l)
    for (std::size_t i = 0; i < spec.terms.size(); ++i)
      if (spec.terms[i].name == design.layout.terms[l].spec.name) source_of[l] = i;

  const auto P = static_cast<Eigen::Index>(design.layout.P);
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd row(P);
  for (std::size_t k = 0; k < n; ++k) {
    design.log_pi[k] = sets[k].log_pi;
    const double u = sets[k].time / t_end;
    for (std::size_t j = 0; j < m; ++j) {
      row.setZero();
      for (std::size_t l = 0; l < design.layout.terms.size(); ++l)
        design.layout.terms[l].emit(raw[source_of[l]](static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)),
                                    u, row);
      const auto r = static_cast<Eigen::Index>(k * m + j);
      for (Eigen::Index c = 0; c < P; ++c)
        if (row[c] != 0.0) trip.emplace_back(r, c, row[c]);
    }
  }
  design.rows.resize(static_cast<Eigen::Index>(n * m), P);
  design.rows.setFromTriplets(trip.begin(), trip.end());

  // Scale smooth penalties to the data.
  const SparseRows delta = SparseRows(select_rows(design.rows, m, 0) - select_rows(design.rows, m, 1));
  for (auto& term : design.layout.terms) {
    if (term.spec.effect != EffectType::tve && term.spec.effect != EffectType::nle) continue;
    const auto off = static_cast<Eigen::Index>(term.offset), w = static_cast<Eigen::Index>(term.width);
    const Eigen::MatrixXd dx = Eigen::MatrixXd(delta.middleCols(off, w));
    const double target = (dx.transpose() * dx).norm() / static_cast<double>(n);
    const double current = term.penalty.norm();
    if (target > 0.0 && current > 0.0) term.penalty *= target / current;
  }
  return design;
}

PairedDesign to_paired(const Design& design) {
  if (design.m != 2) throw UnsupportedError("paired design requires m = 2; use the generic likelihood for m > 2");
  PairedDesign paired;
  paired.layout = design.layout;
  paired.case_rows = select_rows(design.rows, 2, 0);
  paired.control_rows = select_rows(design.rows, 2, 1);
  paired.delta = paired.case_rows - paired.control_rows;
  paired.delta.prune(0.0);
  return paired;
}

PairedDesign build_paired_design(const EventSequence& seq, const std::vector<SampledRiskSet>& sets,
                                 const ModelSpec& spec, const CovariateContext& ctx) {
  for (const auto& s : sets)
    if (s.size() != 2)
      throw UnsupportedError("paired design requires m = 2; use the generic likelihood for m > 2");
  return to_paired(build_design(seq, sets, spec, ctx));
}

}  // namespace remgof
