#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "remgof/core.hpp"
#include "remgof/model_spec.hpp"

namespace remgof {

/// Shape of a term's contribution to the log-intensity.
///   linear:  beta * x
///   power:   a * x^kappa            (x >= 0)
///   sine:    (offset + amplitude * sin(2 pi progress)) * x, progress = k / n_events
enum class DgpShape { linear, power, sine };

struct DgpTerm {
  std::string name;
  CovariateSource source;
  DgpShape shape = DgpShape::linear;
  double beta = 0.0;
  double a = 0.0;
  double kappa = 1.0;
  double offset = 0.0;
  double amplitude = 0.0;

  double effect(double x, double progress) const;
};

/// Static dyadic covariate drawn i.i.d. per ordered dyad.
struct ExoDraw {
  enum class Distribution { exponential, gaussian };
  std::string name;
  Distribution distribution = Distribution::gaussian;
  /// exponential: rate; gaussian: mean.
  double p1 = 0.0;
  /// gaussian: standard deviation.
  double p2 = 1.0;
};

struct DgpSpec {
  std::size_t n_actors = 10;
  std::size_t n_events = 1000;
  /// Per-dyad baseline rate; 0 means 1 / (number of dyads).
  double baseline_rate = 0.0;
  /// Log-baseline shift reached at the last event, linear in the event index:
  /// log rate of the k-th waiting time = log(baseline) + trend * k / n_events.
  double baseline_log_trend = 0.0;
  std::vector<DgpTerm> terms;
  std::vector<ExoDraw> exo;
  /// Gaussian random intercepts on the log-intensity.
  double sender_sigma = 0.0;
  double receiver_sigma = 0.0;
  /// Sender groups (actor a in group a mod G) with log-rate shifts.
  std::vector<double> group_log_rate;
  std::uint64_t seed = 1;
};

struct Simulation {
  EventSequence events;
  ExoCovariates exo;
  Eigen::VectorXd sender_effect;
  Eigen::VectorXd receiver_effect;
  StrataMap strata;
};

/// Competing exponentials with intensities frozen just after each event for
/// the waiting time and re-evaluated at the drawn time for the dyad choice.
/// Throws DgpError when the total intensity is zero or non-finite.
Simulation simulate_sequence(const DgpSpec& spec);

}  // namespace remgof
