#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "remgof/core.hpp"

namespace remgof {

enum class EndoDynamic { reciprocity, repetition, cyclic, transitive };
enum class EndoForm { identity, time };

struct EndoKind {
  EndoDynamic dynamic = EndoDynamic::reciprocity;
  EndoForm form = EndoForm::identity;
  /// Decay rate b of the time form.
  double decay = 1.0;
};

/// Parses "rec", "rep", "cyc", "trs" and "id", "time".
EndoDynamic parse_endo_dynamic(std::string_view text);
EndoForm parse_endo_form(std::string_view text);
std::string to_string(EndoDynamic d);
std::string to_string(EndoForm f);

/// Last-event-time table over ordered dyads plus per-actor contact lists.
/// Reflects exactly the events passed to advance().
class EndoState {
 public:
  explicit EndoState(std::size_t n_actors);

  /// Throws OrderError unless event.time exceeds every recorded time.
  void advance(const RelationalEvent& event);

  std::size_t n_actors() const noexcept { return n_; }
  /// Time of the latest recorded event; -inf when empty.
  double current_time() const noexcept { return now_; }
  std::size_t n_events() const noexcept { return n_events_; }
  /// t^l_sr, or nullopt when (s, r) never occurred.
  std::optional<double> last_time(ActorIndex s, ActorIndex r) const;

  /// t*(s,r) of the most recent qualifying configuration, if any.
  std::optional<double> anchor(EndoDynamic dynamic, Dyad dyad) const;

  /// Identity form: 1 if qualifying, else 0. Time form: exp(-b (t - t*)), 0 if none.
  double value(const EndoKind& kind, Dyad dyad, double t) const;

  bool operator==(const EndoState& other) const;

 private:
  double at(ActorIndex s, ActorIndex r) const { return last_[static_cast<std::size_t>(s) * n_ + r]; }

  std::size_t n_;
  std::vector<double> last_;  // NaN when never
  std::vector<std::vector<ActorIndex>> in_;   // in_[a]: k with k -> a recorded
  std::vector<std::vector<ActorIndex>> out_;  // out_[a]: k with a -> k recorded
  double now_;
  std::size_t n_events_ = 0;
};

double endo_value(const EndoState& state, const EndoKind& kind, Dyad dyad, double t);

struct EndoQuery {
  double time = 0.0;
  Dyad dyad;
};

/// One forward pass; row i holds the values of `kinds` for query i using only
/// events strictly before queries[i].time. Throws OrderError on unsorted queries.
Eigen::MatrixXd endo_matrix(const EventSequence& seq, std::span<const EndoKind> kinds,
                            std::span<const EndoQuery> queries);

}  // namespace remgof
