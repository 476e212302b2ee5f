#include <sstream>

#include "doctest.h"
#include "remgof/core.hpp"
#include "remgof/errors.hpp"
#include "support.hpp"

using namespace remgof;
using testing::parse_csv;

TEST_CASE("csv ingest maps labels in order of appearance") {
  const auto seq = parse_csv("time,sender,receiver\n1.0,alice,bob\n2.5,bob,carol\n3,carol,alice\n");
  REQUIRE(seq.size() == 3);
  CHECK(seq.n_actors() == 3);
  CHECK(seq.actors().label(0) == "alice");
  CHECK(seq[1].time == doctest::Approx(2.5));
  CHECK(seq[1].sender == 1);
  CHECK(seq[1].receiver == 2);
  CHECK_FALSE(seq.has_strata());
}

TEST_CASE("csv columns are found by header name and stratum is optional") {
  const auto seq = parse_csv("\xEF\xBB\xBFreceiver,stratum,time,sender\n\"b\",1,1,a\nc,0,2,b\n");
  REQUIRE(seq.size() == 2);
  CHECK(seq.has_strata());
  CHECK(seq[0].stratum == 1);
  CHECK(seq.actors().label(seq[0].sender) == "a");
}

TEST_CASE("tied times raise TieError naming every offending row") {
  try {
    parse_csv("time,sender,receiver\n1,a,b\n2,b,a\n2,a,c\n2,c,a\n1.5,a,b\n");
    FAIL("expected TieError");
  } catch (const TieError& e) {
    CHECK(e.rows() == std::vector<std::size_t>{2, 3, 4});
    CHECK(e.exit_code() == 2);
  }
}

TEST_CASE("jitter separates ties and keeps order") {
  IngestOptions opt;
  opt.jitter = 1e-6;
  const auto seq = parse_csv("time,sender,receiver\n1,a,b\n2,b,a\n2,a,c\n2,c,a\n3,a,b\n", opt);
  REQUIRE(seq.size() == 5);
  for (std::size_t k = 1; k < seq.size(); ++k) CHECK(seq[k].time > seq[k - 1].time);
  CHECK(seq[2].time == doctest::Approx(2.0 + 1e-6));
  CHECK(seq[3].time == doctest::Approx(2.0 + 2e-6));
}

TEST_CASE("jitter rejects epsilons that could reorder events") {
  const std::vector<double> t{1.0, 1.0, 1.5};
  CHECK_THROWS_AS(jitter_ties(t, 0.5), ValidationError);
  CHECK_THROWS_AS(jitter_ties(t, 0.0), ValidationError);
  const std::vector<double> run{1.0, 1.0, 1.0, 1.0, 1.1};
  CHECK_THROWS_AS(jitter_ties(run, 0.04), ValidationError);
  const auto ok = jitter_ties(run, 0.02);
  CHECK(ok[3] == doctest::Approx(1.06));
}

TEST_CASE("self loops fail unless dropped; duplicates drop before the tie check") {
  const std::string text = "time,sender,receiver\n1,a,b\n2,a,a\n3,b,a\n3,b,a\n";
  CHECK_THROWS_AS(parse_csv(text), ValidationError);
  IngestOptions opt;
  opt.drop_self_loops = true;
  CHECK_THROWS_AS(parse_csv(text, opt), TieError);
  opt.drop_duplicates = true;
  const auto seq = parse_csv(text, opt);
  CHECK(seq.size() == 2);
}

TEST_CASE("malformed rows report their line") {
  try {
    parse_csv("time,sender,receiver\n1,a,b\nabc,b,a\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_csv("when,sender,receiver\n1,a,b\n"), ParseError);
  CHECK_THROWS_AS(parse_csv("time,sender,receiver\n1,a\n"), ParseError);
}

TEST_CASE("non-positive first time is rejected") {
  CHECK_THROWS_AS(parse_csv("time,sender,receiver\n0,a,b\n"), ValidationError);
  CHECK_THROWS_AS(parse_csv("time,sender,receiver\n-1,a,b\n"), ValidationError);
}

TEST_CASE("write then read reproduces the sequence") {
  const auto seq = testing::random_sequence(6, 50, 3);
  std::ostringstream out;
  write_events_csv(out, seq);
  std::istringstream in(out.str());
  const auto back = read_events_csv(in);
  REQUIRE(back.size() == seq.size());
  for (std::size_t k = 0; k < seq.size(); ++k) {
    CHECK(back[k].time == seq[k].time);
    CHECK(back.actors().label(back[k].sender) == seq.actors().label(seq[k].sender));
  }
  std::ostringstream again;
  write_events_csv(again, back);
  CHECK(again.str() == out.str());
}

TEST_CASE("risk set covers ordered dyads of active actors") {
  const auto seq = testing::random_sequence(3, 5, 1);
  const auto all = risk_set(seq, 1.0, RiskSetPolicy::all_ordered_dyads());
  CHECK(all.size() == 6);
  CHECK(risk_set_size(3, 1.0, {}) == 6);
  for (const auto& d : all) CHECK(d.sender != d.receiver);

  const auto policy = RiskSetPolicy::explicit_onset_exit({0.0, 0.0, 5.0}, {10.0, 10.0, 10.0});
  CHECK(risk_set(seq, 1.0, policy).size() == 2);
  CHECK(risk_set(seq, 6.0, policy).size() == 6);
  CHECK(active_actors(3, 11.0, policy).empty());
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.125, -2.5}) CHECK(std::stod(format_double(v)) == v);
}
