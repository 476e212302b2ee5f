#include <boost/math/distributions/chi_squared.hpp>
#include <algorithm>
#include <array>
#include <cmath>

#include "doctest.h"
#include "remgof/dgp.hpp"
#include "remgof/errors.hpp"
#include "remgof/experiment.hpp"
#include "remgof/random.hpp"

using namespace remgof;

namespace {

DgpTerm linear(const std::string& name, const std::string& source, double beta) {
  DgpTerm t;
  t.name = name;
  t.source = parse_source(source, 1.0);
  t.beta = beta;
  return t;
}

std::vector<double> sender_counts(const EventSequence& seq) {
  std::vector<double> c(seq.n_actors(), 0.0);
  for (const auto& e : seq.events()) c[e.sender] += 1.0;
  return c;
}

// Exact simulation on two actors by thinning; reciprocity identity effect.
// Returns counts of (previous dyad, next dyad) transitions.
std::array<double, 4> thinning_transitions(double base, double beta, std::size_t n, std::uint64_t seed) {
  StreamRng rng(seed, 7);
  std::array<double, 4> counts{};
  std::array<double, 2> last{-1.0, -1.0};  // last time of 0->1 and 1->0
  double t = 0.0;
  int prev = -1;
  const double bound = 2.0 * base * std::exp(std::max(beta, 0.0));
  std::size_t made = 0;
  while (made < n) {
    t += rng.exponential(bound);
    std::array<double, 2> rate;
    for (int d = 0; d < 2; ++d) {
      const bool rec = last[1 - d] >= 0.0 && last[1 - d] > last[d];
      rate[static_cast<std::size_t>(d)] = base * std::exp(rec ? beta : 0.0);
    }
    const double u = rng.uniform() * bound;
    int pick = -1;
    if (u < rate[0]) pick = 0;
    else if (u < rate[0] + rate[1]) pick = 1;
    if (pick < 0) continue;
    if (prev >= 0) counts[static_cast<std::size_t>(2 * prev + pick)] += 1.0;
    last[static_cast<std::size_t>(pick)] = t;
    prev = pick;
    ++made;
  }
  return counts;
}

double total_variation(const std::array<double, 4>& a, const std::array<double, 4>& b) {
  double sa = 0.0, sb = 0.0, tv = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    sa += a[i];
    sb += b[i];
  }
  for (std::size_t i = 0; i < 4; ++i) tv += std::abs(a[i] / sa - b[i] / sb);
  return 0.5 * tv;
}

}  // namespace

TEST_CASE("constant baseline gives exponential inter-arrival times") {
  DgpSpec spec;
  spec.n_actors = 2;
  spec.n_events = 10000;
  spec.seed = 3;
  const auto sim = simulate_sequence(spec);
  REQUIRE(sim.events.size() == 10000);
  // Two dyads at rate 1/2 each: total rate 1.
  std::vector<double> u;
  double prev = 0.0;
  for (const auto& e : sim.events.events()) {
    u.push_back(1.0 - std::exp(-(e.time - prev)));
    prev = e.time;
  }
  CHECK(ks_uniform(u).second > 0.01);
}

TEST_CASE("vanishing sender effects give uniform sender frequencies") {
  DgpSpec spec;
  spec.n_actors = 10;
  spec.n_events = 5000;
  spec.sender_sigma = 1e-9;
  spec.seed = 4;
  const auto counts = sender_counts(simulate_sequence(spec).events);
  const double expected = 500.0;
  double stat = 0.0;
  for (double c : counts) stat += (c - expected) * (c - expected) / expected;
  boost::math::chi_squared dist(9.0);
  CHECK(boost::math::cdf(boost::math::complement(dist, stat)) > 0.01);
}

TEST_CASE("sender effects with unit sigma spread log frequencies accordingly") {
  DgpSpec spec;
  spec.n_actors = 50;
  spec.n_events = 20000;
  spec.sender_sigma = 1.0;
  spec.seed = 5;
  const auto counts = sender_counts(simulate_sequence(spec).events);
  double mean = 0.0, sq = 0.0;
  for (double c : counts) mean += std::log(c + 0.5) / 50.0;
  for (double c : counts) sq += (std::log(c + 0.5) - mean) * (std::log(c + 0.5) - mean) / 49.0;
  const double sd = std::sqrt(sq);
  CHECK(sd > 0.5);
  CHECK(sd < 2.0);
}

TEST_CASE("identical specs give identical sequences") {
  DgpSpec spec;
  spec.n_actors = 8;
  spec.n_events = 500;
  spec.terms = {linear("rec", "endo:rec:time", 1.5)};
  spec.exo = {{"x", ExoDraw::Distribution::gaussian, 0.0, 1.0}};
  spec.terms.push_back(linear("x", "exo:x", 0.5));
  spec.seed = 9;
  const auto a = simulate_sequence(spec), b = simulate_sequence(spec);
  CHECK(a.events == b.events);
  CHECK(a.exo.dyadic.at("x") == b.exo.dyadic.at("x"));
  spec.seed = 10;
  CHECK_FALSE(simulate_sequence(spec).events == a.events);
}

TEST_CASE("simulated sequences satisfy core invariants") {
  DgpSpec spec;
  spec.n_actors = 5;
  spec.n_events = 2000;
  spec.terms = {linear("rep", "endo:rep:id", 1.0), linear("trs", "endo:trs:time", 0.8)};
  spec.baseline_log_trend = -2.0;
  spec.seed = 2;
  const auto sim = simulate_sequence(spec);
  for (std::size_t k = 0; k < sim.events.size(); ++k) {
    CHECK(sim.events[k].sender != sim.events[k].receiver);
    if (k > 0) CHECK(sim.events[k].time > sim.events[k - 1].time);
  }
}

TEST_CASE("competing exponentials match an independent thinning simulation") {
  const double beta = 1.5;
  DgpSpec spec;
  spec.n_actors = 2;
  spec.n_events = 40000;
  spec.baseline_rate = 0.5;
  spec.terms = {linear("rec", "endo:rec:id", beta)};
  spec.seed = 12;
  const auto sim = simulate_sequence(spec);
  std::array<double, 4> ours{};
  for (std::size_t k = 1; k < sim.events.size(); ++k)
    ours[static_cast<std::size_t>(2 * sim.events[k - 1].sender + sim.events[k].sender)] += 1.0;
  const auto ref = thinning_transitions(0.5, beta, 40000, 13);
  CHECK(total_variation(ours, ref) < 0.02);
}

TEST_CASE("term shapes") {
  DgpTerm p;
  p.shape = DgpShape::power;
  p.a = 2.0;
  p.kappa = 0.5;
  CHECK(p.effect(0.25, 0.0) == doctest::Approx(1.0));
  CHECK(p.effect(0.0, 0.0) == 0.0);
  DgpTerm s;
  s.shape = DgpShape::sine;
  s.offset = 1.0;
  s.amplitude = 2.0;
  CHECK(s.effect(3.0, 0.25) == doctest::Approx(9.0));
}

TEST_CASE("invalid specs raise DgpError") {
  DgpSpec one;
  one.n_actors = 1;
  CHECK_THROWS_AS(simulate_sequence(one), DgpError);
  DgpSpec neg;
  neg.baseline_rate = -1.0;
  CHECK_THROWS_AS(simulate_sequence(neg), DgpError);
  DgpSpec blow;
  blow.terms = {linear("c", "const:1000", 1e6)};
  CHECK_THROWS_AS(simulate_sequence(blow), DgpError);
  DgpSpec actor;
  actor.terms = {linear("s", "actor:sender", 1.0)};
  CHECK_THROWS_AS(simulate_sequence(actor), DgpError);
}

TEST_CASE("sender groups label event strata") {
  DgpSpec spec;
  spec.n_actors = 6;
  spec.n_events = 300;
  spec.group_log_rate = {0.0, 1.0};
  const auto sim = simulate_sequence(spec);
  CHECK(sim.events.has_strata());
  for (const auto& e : sim.events.events()) CHECK(*e.stratum == static_cast<int>(e.sender % 2));
  CHECK(sim.strata.group.size() == 6);
}
