#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace remgof {

using ActorIndex = std::uint32_t;

struct Dyad {
  ActorIndex sender = 0;
  ActorIndex receiver = 0;

  auto operator<=>(const Dyad&) const = default;
};

/// Bijection between opaque actor labels and dense indices 0..size()-1.
/// Indices are assigned in order of first interning.
class ActorRegistry {
 public:
  ActorRegistry() = default;

  /// Actors labelled "0", "1", ..., "n-1".
  static ActorRegistry numbered(std::size_t n);

  ActorIndex intern(std::string_view label);
  std::optional<ActorIndex> find(std::string_view label) const;
  const std::string& label(ActorIndex index) const;
  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  bool operator==(const ActorRegistry& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, ActorIndex> index_;
};

struct RelationalEvent {
  double time = 0.0;
  ActorIndex sender = 0;
  ActorIndex receiver = 0;
  std::optional<int> stratum;

  Dyad dyad() const noexcept { return {sender, receiver}; }
  bool operator==(const RelationalEvent&) const = default;
};

/// Validated, immutable, strictly time-ordered event history.
class EventSequence {
 public:
  /// Throws TieError on non-increasing times (rows = offending indices),
  /// ValidationError on self-loops, non-finite times, a first time <= 0, or
  /// actor indices outside the registry.
  EventSequence(std::vector<RelationalEvent> events, ActorRegistry actors);

  std::span<const RelationalEvent> events() const noexcept { return events_; }
  const RelationalEvent& operator[](std::size_t k) const { return events_[k]; }
  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }
  const ActorRegistry& actors() const noexcept { return actors_; }
  std::size_t n_actors() const noexcept { return actors_.size(); }
  /// Time of the last event; 0 for an empty sequence.
  double t_end() const noexcept { return events_.empty() ? 0.0 : events_.back().time; }
  bool has_strata() const noexcept { return has_strata_; }

  bool operator==(const EventSequence& other) const {
    return events_ == other.events_ && actors_ == other.actors_;
  }

 private:
  std::vector<RelationalEvent> events_;
  ActorRegistry actors_;
  bool has_strata_ = false;
};

/// Which dyads are at risk. Under explicit mode an actor participates in
/// dyads while onset <= t <= exit.
struct RiskSetPolicy {
  enum class Mode { all_ordered_dyads, explicit_onset_exit };

  Mode mode = Mode::all_ordered_dyads;
  std::vector<double> onset;
  std::vector<double> exit;

  static RiskSetPolicy all_ordered_dyads() { return {}; }
  static RiskSetPolicy explicit_onset_exit(std::vector<double> onset, std::vector<double> exit);

  bool actor_active(ActorIndex actor, double t) const;
};

/// Actors active at t, ascending.
std::vector<ActorIndex> active_actors(std::size_t n_actors, double t, const RiskSetPolicy& policy);

/// All dyads with Y_sr(t) = 1 in canonical (sender-major) order.
std::vector<Dyad> risk_set(const EventSequence& seq, double t, const RiskSetPolicy& policy);

std::size_t risk_set_size(std::size_t n_actors, double t, const RiskSetPolicy& policy);

/// Perturbs tied times so that the k-th repeat of a tied value is shifted by
/// k * epsilon. Input order is preserved. Throws ValidationError unless
/// epsilon > 0 and the shifted times stay strictly increasing.
std::vector<double> jitter_ties(std::span<const double> times, double epsilon);

struct CsvSchema {
  std::string time = "time";
  std::string sender = "sender";
  std::string receiver = "receiver";
  /// Used when present in the header.
  std::string stratum = "stratum";
};

struct IngestOptions {
  std::optional<double> jitter;
  /// Drop rows whose sender equals the receiver instead of failing.
  bool drop_self_loops = false;
  /// Drop rows identical (time, sender, receiver) to an earlier row.
  bool drop_duplicates = false;
};

EventSequence read_events_csv(std::istream& in, const CsvSchema& schema = {},
                              const IngestOptions& options = {});
EventSequence ingest_events(const std::string& path, const CsvSchema& schema = {},
                            const IngestOptions& options = {});

/// Header `time,sender,receiver[,stratum]`; times in shortest round-trip form.
void write_events_csv(std::ostream& out, const EventSequence& seq);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace remgof
