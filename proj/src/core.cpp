#include "remgof/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include "remgof/errors.hpp"

namespace remgof {

ActorRegistry ActorRegistry::numbered(std::size_t n) {
  ActorRegistry reg;
  for (std::size_t i = 0; i < n; ++i) reg.intern(std::to_string(i));
  return reg;
}

ActorIndex ActorRegistry::intern(std::string_view label) {
  std::string key(label);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  const auto idx = static_cast<ActorIndex>(labels_.size());
  labels_.push_back(key);
  index_.emplace(std::move(key), idx);
  return idx;
}

std::optional<ActorIndex> ActorRegistry::find(std::string_view label) const {
  if (auto it = index_.find(std::string(label)); it != index_.end()) return it->second;
  return std::nullopt;
}

const std::string& ActorRegistry::label(ActorIndex index) const { return labels_.at(index); }

EventSequence::EventSequence(std::vector<RelationalEvent> events, ActorRegistry actors)
    : events_(std::move(events)), actors_(std::move(actors)) {
  std::vector<std::size_t> bad_rows;
  for (std::size_t k = 0; k < events_.size(); ++k) {
    const auto& e = events_[k];
    if (!std::isfinite(e.time)) throw ValidationError("event " + std::to_string(k) + " has a non-finite time");
    if (e.sender >= actors_.size() || e.receiver >= actors_.size())
      throw ValidationError("event " + std::to_string(k) + " references an unknown actor");
    if (e.sender == e.receiver)
      throw ValidationError("event " + std::to_string(k) + " is a self-loop (actor " +
                            actors_.label(e.sender) + ")");
    if (k > 0 && !(e.time > events_[k - 1].time)) bad_rows.push_back(k);
    if (e.stratum) has_strata_ = true;
  }
  if (!bad_rows.empty()) {
    std::ostringstream msg;
    msg << "event times must be strictly increasing; " << bad_rows.size()
        << " offending row(s), first at row " << bad_rows.front();
    throw TieError(std::move(bad_rows), msg.str());
  }
  if (!events_.empty() && !(events_.front().time > 0.0))
    throw ValidationError("first event time must be > 0");
}

RiskSetPolicy RiskSetPolicy::explicit_onset_exit(std::vector<double> onset, std::vector<double> exit) {
  if (onset.size() != exit.size()) throw ValidationError("onset and exit tables differ in length");
  RiskSetPolicy p;
  p.mode = Mode::explicit_onset_exit;
  p.onset = std::move(onset);
  p.exit = std::move(exit);
  return p;
}

bool RiskSetPolicy::actor_active(ActorIndex actor, double t) const {
  if (mode == Mode::all_ordered_dyads) return true;
  if (actor >= onset.size()) return true;
  return onset[actor] <= t && t <= exit[actor];
}

std::vector<ActorIndex> active_actors(std::size_t n_actors, double t, const RiskSetPolicy& policy) {
  std::vector<ActorIndex> out;
  out.reserve(n_actors);
  for (std::size_t a = 0; a < n_actors; ++a)
    if (policy.actor_active(static_cast<ActorIndex>(a), t)) out.push_back(static_cast<ActorIndex>(a));
  return out;
}

std::vector<Dyad> risk_set(const EventSequence& seq, double t, const RiskSetPolicy& policy) {
  const auto active = active_actors(seq.n_actors(), t, policy);
  std::vector<Dyad> out;
  out.reserve(active.size() * (active.size() > 0 ? active.size() - 1 : 0));
  for (ActorIndex s : active)
    for (ActorIndex r : active)
      if (s != r) out.push_back({s, r});
  return out;
}

std::size_t risk_set_size(std::size_t n_actors, double t, const RiskSetPolicy& policy) {
  std::size_t a = n_actors;
  if (policy.mode == RiskSetPolicy::Mode::explicit_onset_exit)
    a = active_actors(n_actors, t, policy).size();
  return a < 2 ? 0 : a * (a - 1);
}

std::vector<double> jitter_ties(std::span<const double> times, double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ValidationError("jitter epsilon must be > 0");
  double min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double gap = times[k] - times[k - 1];
    if (gap > 0.0) min_gap = std::min(min_gap, gap);
  }
  if (!(epsilon < min_gap))
    throw ValidationError("jitter epsilon must be smaller than the minimal positive inter-event gap");

  std::vector<double> out(times.begin(), times.end());
  std::size_t k = 0;
  while (k < times.size()) {
    std::size_t end = k + 1;
    while (end < times.size() && times[end] == times[k]) ++end;
    for (std::size_t j = k + 1; j < end; ++j) out[j] = times[k] + static_cast<double>(j - k) * epsilon;
    if (end - k > 1 && end < times.size() && times[end] > times[k] && !(out[end - 1] < times[end]))
      throw ValidationError("jitter epsilon too large: tie run at row " + std::to_string(k) +
                            " would overtake the next event");
    k = end;
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

struct RawRow {
  double time;
  std::string sender;
  std::string receiver;
  std::optional<int> stratum;
};

}  // namespace

EventSequence read_events_csv(std::istream& in, const CsvSchema& schema, const IngestOptions& options) {
  std::string line;
  std::size_t line_no = 0;
  // Skip leading blank lines, then read the header.
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw ParseError(line_no, "missing header");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM

  const auto header = split_fields(line);
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  };
  const auto time_col = column(schema.time);
  const auto sender_col = column(schema.sender);
  const auto receiver_col = column(schema.receiver);
  const auto stratum_col = column(schema.stratum);
  if (!time_col || !sender_col || !receiver_col)
    throw ParseError(line_no, "header must contain columns '" + schema.time + "', '" + schema.sender +
                                  "', '" + schema.receiver + "'");

  std::vector<RawRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size())
      throw ParseError(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                    std::to_string(fields.size()));
    RawRow row;
    const auto tf = fields[*time_col];
    auto [ptr, ec] = std::from_chars(tf.data(), tf.data() + tf.size(), row.time);
    if (ec != std::errc() || ptr != tf.data() + tf.size() || !std::isfinite(row.time))
      throw ParseError(line_no, "unparsable time '" + std::string(tf) + "'");
    row.sender = std::string(fields[*sender_col]);
    row.receiver = std::string(fields[*receiver_col]);
    if (row.sender.empty() || row.receiver.empty()) throw ParseError(line_no, "empty actor label");
    if (stratum_col) {
      const auto sf = fields[*stratum_col];
      if (!sf.empty()) {
        int g = 0;
        auto [sp, sec] = std::from_chars(sf.data(), sf.data() + sf.size(), g);
        if (sec != std::errc() || sp != sf.data() + sf.size())
          throw ParseError(line_no, "unparsable stratum '" + std::string(sf) + "'");
        row.stratum = g;
      }
    }
    rows.push_back(std::move(row));
  }

  if (options.drop_self_loops)
    std::erase_if(rows, [](const RawRow& r) { return r.sender == r.receiver; });
  if (options.drop_duplicates) {
    std::set<std::tuple<double, std::string, std::string>> seen;
    std::vector<RawRow> kept;
    kept.reserve(rows.size());
    for (auto& r : rows)
      if (seen.emplace(r.time, r.sender, r.receiver).second) kept.push_back(std::move(r));
    rows = std::move(kept);
  }
  for (std::size_t k = 0; k < rows.size(); ++k)
    if (rows[k].sender == rows[k].receiver)
      throw ValidationError("row " + std::to_string(k) + " is a self-loop (actor " + rows[k].sender + ")");

  if (options.jitter) {
    std::vector<double> times(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) times[k] = rows[k].time;
    const auto jittered = jitter_ties(times, *options.jitter);
    for (std::size_t k = 0; k < rows.size(); ++k) rows[k].time = jittered[k];
  }

  ActorRegistry actors;
  std::vector<RelationalEvent> events;
  events.reserve(rows.size());
  for (auto& r : rows) {
    RelationalEvent e;
    e.time = r.time;
    e.sender = actors.intern(r.sender);
    e.receiver = actors.intern(r.receiver);
    e.stratum = r.stratum;
    events.push_back(e);
  }
  return EventSequence(std::move(events), std::move(actors));
}

EventSequence ingest_events(const std::string& path, const CsvSchema& schema, const IngestOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open events file '" + path + "'");
  return read_events_csv(in, schema, options);
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void write_events_csv(std::ostream& out, const EventSequence& seq) {
  out << "time,sender,receiver";
  if (seq.has_strata()) out << ",stratum";
  out << '\n';
  for (const auto& e : seq.events()) {
    out << format_double(e.time) << ',' << seq.actors().label(e.sender) << ','
        << seq.actors().label(e.receiver);
    if (seq.has_strata()) {
      out << ',';
      if (e.stratum) out << *e.stratum;
    }
    out << '\n';
  }
}

}  // namespace remgof
