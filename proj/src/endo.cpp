#include "remgof/endo.hpp"

#include <cmath>
#include <limits>

#include "remgof/errors.hpp"

namespace remgof {

namespace {
constexpr double kNever = std::numeric_limits<double>::quiet_NaN();
}

EndoDynamic parse_endo_dynamic(std::string_view text) {
  if (text == "rec") return EndoDynamic::reciprocity;
  if (text == "rep") return EndoDynamic::repetition;
  if (text == "cyc") return EndoDynamic::cyclic;
  if (text == "trs") return EndoDynamic::transitive;
  throw ValidationError("unknown endogenous statistic '" + std::string(text) + "'");
}

EndoForm parse_endo_form(std::string_view text) {
  if (text == "id" || text == "identity") return EndoForm::identity;
  if (text == "time") return EndoForm::time;
  throw ValidationError("unknown endogenous form '" + std::string(text) + "'");
}

std::string to_string(EndoDynamic d) {
  switch (d) {
    case EndoDynamic::reciprocity: return "rec";
    case EndoDynamic::repetition: return "rep";
    case EndoDynamic::cyclic: return "cyc";
    case EndoDynamic::transitive: return "trs";
  }
  return "?";
}

std::string to_string(EndoForm f) { return f == EndoForm::identity ? "id" : "time"; }

EndoState::EndoState(std::size_t n_actors)
    : n_(n_actors),
      last_(n_actors * n_actors, kNever),
      in_(n_actors),
      out_(n_actors),
      now_(-std::numeric_limits<double>::infinity()) {}

void EndoState::advance(const RelationalEvent& e) {
  if (!(e.time > now_))
    throw OrderError("event at t=" + std::to_string(e.time) + " does not follow t=" + std::to_string(now_));
  if (e.sender >= n_ || e.receiver >= n_) throw ValidationError("event actor outside endogenous state");
  double& slot = last_[static_cast<std::size_t>(e.sender) * n_ + e.receiver];
  if (std::isnan(slot)) {
    out_[e.sender].push_back(e.receiver);
    in_[e.receiver].push_back(e.sender);
  }
  slot = e.time;
  now_ = e.time;
  ++n_events_;
}

std::optional<double> EndoState::last_time(ActorIndex s, ActorIndex r) const {
  const double v = at(s, r);
  if (std::isnan(v)) return std::nullopt;
  return v;
}

std::optional<double> EndoState::anchor(EndoDynamic dynamic, Dyad dyad) const {
  const ActorIndex s = dyad.sender, r = dyad.receiver;
  const double t_sr = at(s, r);
  switch (dynamic) {
    case EndoDynamic::repetition:
      if (std::isnan(t_sr)) return std::nullopt;
      return t_sr;
    case EndoDynamic::reciprocity: {
      const double t_rs = at(r, s);
      if (std::isnan(t_rs)) return std::nullopt;
      if (!std::isnan(t_sr) && !(t_sr < t_rs)) return std::nullopt;
      return t_rs;
    }
    case EndoDynamic::cyclic: {
      // t_sr < t_rk < t_ks
      double best = kNever;
      ActorIndex best_k = 0;
      for (ActorIndex k : in_[s]) {
        if (k == r) continue;
        const double t_rk = at(r, k), t_ks = at(k, s);
        if (std::isnan(t_rk) || !(t_rk < t_ks)) continue;
        if (!std::isnan(t_sr) && !(t_sr < t_rk)) continue;
        if (std::isnan(best) || t_ks > best || (t_ks == best && k < best_k)) {
          best = t_ks;
          best_k = k;
        }
      }
      if (std::isnan(best)) return std::nullopt;
      return best;
    }
    case EndoDynamic::transitive: {
      // t_sr < t_sk < t_kr
      double best = kNever;
      ActorIndex best_k = 0;
      for (ActorIndex k : in_[r]) {
        if (k == s) continue;
        const double t_sk = at(s, k), t_kr = at(k, r);
        if (std::isnan(t_sk) || !(t_sk < t_kr)) continue;
        if (!std::isnan(t_sr) && !(t_sr < t_sk)) continue;
        if (std::isnan(best) || t_kr > best || (t_kr == best && k < best_k)) {
          best = t_kr;
          best_k = k;
        }
      }
      if (std::isnan(best)) return std::nullopt;
      return best;
    }
  }
  return std::nullopt;
}

double EndoState::value(const EndoKind& kind, Dyad dyad, double t) const {
  const auto a = anchor(kind.dynamic, dyad);
  if (!a) return 0.0;
  if (kind.form == EndoForm::identity) return 1.0;
  return std::exp(-kind.decay * (t - *a));
}

bool EndoState::operator==(const EndoState& other) const {
  if (n_ != other.n_ || n_events_ != other.n_events_) return false;
  for (std::size_t i = 0; i < last_.size(); ++i) {
    const double a = last_[i], b = other.last_[i];
    if (std::isnan(a) != std::isnan(b)) return false;
    if (!std::isnan(a) && a != b) return false;
  }
  return true;
}

double endo_value(const EndoState& state, const EndoKind& kind, Dyad dyad, double t) {
  return state.value(kind, dyad, t);
}

Eigen::MatrixXd endo_matrix(const EventSequence& seq, std::span<const EndoKind> kinds,
                            std::span<const EndoQuery> queries) {
  for (std::size_t i = 1; i < queries.size(); ++i)
    if (queries[i].time < queries[i - 1].time)
      throw OrderError("endogenous queries must be sorted by time (query " + std::to_string(i) + ")");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(queries.size()), static_cast<Eigen::Index>(kinds.size()));
  EndoState state(seq.n_actors());
  std::size_t next = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& q = queries[i];
    while (next < seq.size() && seq[next].time < q.time) state.advance(seq[next++]);
    for (std::size_t j = 0; j < kinds.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = state.value(kinds[j], q.dyad, q.time);
  }
  return out;
}

}  // namespace remgof
