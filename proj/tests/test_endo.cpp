#include <cmath>

#include "doctest.h"
#include "remgof/endo.hpp"
#include "remgof/errors.hpp"
#include "support.hpp"

using namespace remgof;
using testing::all_kinds;
using testing::brute_endo;
using testing::random_sequence;

namespace {

EventSequence two_events() {
  std::vector<RelationalEvent> ev{{1.0, 0, 1, {}}, {2.0, 1, 0, {}}};
  return EventSequence(std::move(ev), ActorRegistry::numbered(3));
}

// Every ordered dyad queried at every event time and halfway to the next.
std::vector<EndoQuery> dense_queries(const EventSequence& seq) {
  std::vector<EndoQuery> q;
  const auto n = static_cast<ActorIndex>(seq.n_actors());
  for (std::size_t k = 0; k < seq.size(); ++k) {
    std::vector<double> times{seq[k].time};
    if (k + 1 < seq.size()) times.push_back(0.5 * (seq[k].time + seq[k + 1].time));
    for (double t : times)
      for (ActorIndex s = 0; s < n; ++s)
        for (ActorIndex r = 0; r < n; ++r)
          if (s != r) q.push_back({t, {s, r}});
  }
  return q;
}

}  // namespace

TEST_CASE("no prior configuration gives zero in both forms") {
  EndoState state(3);
  for (const auto& kind : all_kinds()) CHECK(state.value(kind, {0, 1}, 1.0) == 0.0);
}

TEST_CASE("reciprocity time form by hand") {
  const auto seq = two_events();
  const std::vector<EndoKind> kinds{{EndoDynamic::reciprocity, EndoForm::time, 1.0},
                                    {EndoDynamic::reciprocity, EndoForm::identity, 1.0}};
  const std::vector<EndoQuery> q{{3.0, {0, 1}}, {3.0, {1, 0}}};
  const auto m = endo_matrix(seq, kinds, q);
  CHECK(m(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(m(0, 1) == 1.0);
  // b->a at 2 is newer than a->b at 1, so (b,a) has no pending reciprocity.
  CHECK(m(1, 0) == 0.0);
  CHECK(m(1, 1) == 0.0);
}

TEST_CASE("time form tends to one as t approaches the anchor") {
  EndoState state(2);
  state.advance({1.0, 1, 0, {}});
  const EndoKind k{EndoDynamic::reciprocity, EndoForm::time, 1.0};
  CHECK(state.value(k, {0, 1}, 1.0 + 1e-12) == doctest::Approx(1.0));
}

TEST_CASE("advance records one dyad and updates pending reciprocity") {
  EndoState state(3);
  state.advance({1.0, 0, 1, {}});
  CHECK(state.n_events() == 1);
  CHECK(state.last_time(0, 1) == 1.0);
  CHECK_FALSE(state.last_time(1, 0).has_value());
  CHECK(state.anchor(EndoDynamic::reciprocity, {1, 0}) == 1.0);
  state.advance({2.0, 1, 0, {}});
  CHECK(state.anchor(EndoDynamic::reciprocity, {0, 1}) == 2.0);
  CHECK_FALSE(state.anchor(EndoDynamic::reciprocity, {1, 0}).has_value());
}

TEST_CASE("triadic configurations respect their ordering constraints") {
  EndoState state(3);
  // 0->2 at 1, 2->1 at 2: transitive closure pending for (0,1), anchor 2.
  state.advance({1.0, 0, 2, {}});
  state.advance({2.0, 2, 1, {}});
  CHECK(state.anchor(EndoDynamic::transitive, {0, 1}) == 2.0);
  // 1->0 closes the cycle 0->2->1->0 only if (r,k) < (k,s): here (0,2)=1 < (2,1)=2 so cyclic for (1,0).
  CHECK(state.anchor(EndoDynamic::cyclic, {1, 0}) == 2.0);
  // An earlier direct 0->1 at 3 after the path invalidates the transitive anchor.
  state.advance({3.0, 0, 1, {}});
  CHECK_FALSE(state.anchor(EndoDynamic::transitive, {0, 1}).has_value());
  // Reversed order of the two-path legs does not qualify.
  EndoState rev(3);
  rev.advance({1.0, 2, 1, {}});
  rev.advance({2.0, 0, 2, {}});
  CHECK_FALSE(rev.anchor(EndoDynamic::transitive, {0, 1}).has_value());
}

TEST_CASE("incremental statistics equal brute-force recomputation") {
  const auto kinds = all_kinds(0.7);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto seq = random_sequence(4 + seed % 4, 200, seed);
    const auto queries = dense_queries(seq);
    const auto m = endo_matrix(seq, kinds, queries);
    REQUIRE(m.rows() == static_cast<Eigen::Index>(queries.size()));
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < queries.size(); ++i)
      for (std::size_t j = 0; j < kinds.size(); ++j)
        if (m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) !=
            brute_endo(seq, kinds[j], queries[i].dyad, queries[i].time))
          ++mismatches;
    CHECK(mismatches == 0);
  }
}

TEST_CASE("values lie in [0, 1] and identity form is binary") {
  const auto seq = random_sequence(5, 150, 7);
  const auto kinds = all_kinds(0.3);
  const auto m = endo_matrix(seq, kinds, dense_queries(seq));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < kinds.size(); ++j) {
      const double v = m(i, static_cast<Eigen::Index>(j));
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      if (kinds[j].form == EndoForm::identity) CHECK((v == 0.0 || v == 1.0));
    }
}

TEST_CASE("appending a future event leaves earlier queries unchanged") {
  const auto seq = random_sequence(5, 80, 11);
  std::vector<RelationalEvent> longer(seq.events().begin(), seq.events().end());
  longer.push_back({seq.t_end() + 1.0, 0, 1, {}});
  longer.push_back({seq.t_end() + 2.0, 1, 2, {}});
  const EventSequence ext(std::move(longer), seq.actors());
  const auto kinds = all_kinds();
  const auto q = dense_queries(seq);
  CHECK(endo_matrix(seq, kinds, q) == endo_matrix(ext, kinds, q));
}

TEST_CASE("queries at an event time exclude that event") {
  const auto seq = random_sequence(4, 60, 5);
  std::vector<EndoQuery> q;
  for (const auto& e : seq.events()) q.push_back({e.time, e.dyad()});
  const EndoKind rep{EndoDynamic::repetition, EndoForm::identity, 1.0};
  const auto m = endo_matrix(seq, std::span(&rep, 1), q);
  for (std::size_t k = 0; k < seq.size(); ++k)
    CHECK(m(static_cast<Eigen::Index>(k), 0) == brute_endo(seq, rep, seq[k].dyad(), seq[k].time));
  CHECK(m(0, 0) == 0.0);
}

TEST_CASE("single query matches endo_value and empty kinds give no columns") {
  const auto seq = random_sequence(4, 30, 2);
  EndoState state(seq.n_actors());
  for (const auto& e : seq.events()) state.advance(e);
  const double t = seq.t_end() + 0.25;
  const auto kinds = all_kinds();
  const std::vector<EndoQuery> q{{t, {1, 2}}};
  const auto m = endo_matrix(seq, kinds, q);
  REQUIRE(m.rows() == 1);
  for (std::size_t j = 0; j < kinds.size(); ++j)
    CHECK(m(0, static_cast<Eigen::Index>(j)) == endo_value(state, kinds[j], {1, 2}, t));
  const auto empty = endo_matrix(seq, std::span<const EndoKind>{}, q);
  CHECK(empty.rows() == 1);
  CHECK(empty.cols() == 0);
}

TEST_CASE("order violations raise OrderError") {
  EndoState state(3);
  state.advance({2.0, 0, 1, {}});
  CHECK_THROWS_AS(state.advance({2.0, 1, 0, {}}), OrderError);
  CHECK_THROWS_AS(state.advance({1.0, 1, 0, {}}), OrderError);
  const auto seq = random_sequence(3, 10, 1);
  const std::vector<EndoQuery> q{{5.0, {0, 1}}, {4.0, {0, 1}}};
  const auto kinds = all_kinds();
  CHECK_THROWS_AS(endo_matrix(seq, kinds, q), OrderError);
}

TEST_CASE("replaying the same events gives equal states") {
  const auto seq = random_sequence(6, 100, 4);
  EndoState a(6), b(6);
  for (const auto& e : seq.events()) a.advance(e);
  for (const auto& e : seq.events()) b.advance(e);
  CHECK(a == b);
  CHECK(a.current_time() == seq.t_end());
}

TEST_CASE("dynamic and form names parse") {
  CHECK(parse_endo_dynamic("trs") == EndoDynamic::transitive);
  CHECK(parse_endo_form("time") == EndoForm::time);
  CHECK(to_string(EndoDynamic::cyclic) == "cyc");
  CHECK_THROWS(parse_endo_dynamic("xyz"));
}
