#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "remgof/core.hpp"
#include "remgof/endo.hpp"
#include "remgof/pipeline.hpp"
#include "remgof/random.hpp"

namespace testing {

using namespace remgof;

// Random sequence with increasing times; small actor sets give dense histories.
inline EventSequence random_sequence(std::size_t n_actors, std::size_t n_events, std::uint64_t seed) {
  StreamRng rng(seed, 99);
  std::vector<RelationalEvent> ev;
  double t = 0.0;
  for (std::size_t k = 0; k < n_events; ++k) {
    t += 0.01 + rng.exponential(1.0);
    RelationalEvent e;
    e.time = t;
    e.sender = static_cast<ActorIndex>(rng.below(n_actors));
    e.receiver = static_cast<ActorIndex>(rng.below(n_actors - 1));
    if (e.receiver >= e.sender) ++e.receiver;
    ev.push_back(e);
  }
  return EventSequence(std::move(ev), ActorRegistry::numbered(n_actors));
}

// From-scratch evaluation over the events strictly before t.
inline double brute_endo(const EventSequence& seq, const EndoKind& kind, Dyad d, double t) {
  const std::size_t n = seq.n_actors();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> last(n * n, nan);
  for (const auto& e : seq.events()) {
    if (!(e.time < t)) break;
    last[e.sender * n + e.receiver] = e.time;
  }
  auto T = [&](std::size_t a, std::size_t b) { return last[a * n + b]; };
  const std::size_t s = d.sender, r = d.receiver;
  std::optional<double> anchor;
  switch (kind.dynamic) {
    case EndoDynamic::repetition:
      if (!std::isnan(T(s, r))) anchor = T(s, r);
      break;
    case EndoDynamic::reciprocity:
      if (!std::isnan(T(r, s)) && (std::isnan(T(s, r)) || T(s, r) < T(r, s))) anchor = T(r, s);
      break;
    case EndoDynamic::cyclic:
      for (std::size_t k = 0; k < n; ++k) {
        if (k == s || k == r) continue;
        const double a = T(r, k), b = T(k, s);
        if (std::isnan(a) || std::isnan(b) || !(a < b)) continue;
        if (!std::isnan(T(s, r)) && !(T(s, r) < a)) continue;
        if (!anchor || b > *anchor) anchor = b;
      }
      break;
    case EndoDynamic::transitive:
      for (std::size_t k = 0; k < n; ++k) {
        if (k == s || k == r) continue;
        const double a = T(s, k), b = T(k, r);
        if (std::isnan(a) || std::isnan(b) || !(a < b)) continue;
        if (!std::isnan(T(s, r)) && !(T(s, r) < a)) continue;
        if (!anchor || b > *anchor) anchor = b;
      }
      break;
  }
  if (!anchor) return 0.0;
  return kind.form == EndoForm::identity ? 1.0 : std::exp(-kind.decay * (t - *anchor));
}

inline std::vector<EndoKind> all_kinds(double decay = 0.5) {
  std::vector<EndoKind> out;
  for (auto d : {EndoDynamic::reciprocity, EndoDynamic::repetition, EndoDynamic::cyclic, EndoDynamic::transitive})
    for (auto f : {EndoForm::identity, EndoForm::time}) out.push_back({d, f, decay});
  return out;
}

inline EventSequence parse_csv(const std::string& text, const IngestOptions& options = {}) {
  std::istringstream in(text);
  return read_events_csv(in, {}, options);
}

}  // namespace testing
