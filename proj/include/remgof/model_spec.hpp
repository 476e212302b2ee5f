#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "remgof/core.hpp"
#include "remgof/endo.hpp"

namespace remgof {

enum class EffectType { fle, tve, nle, re };
enum class BasisKind { tps, radial };

enum class SourceKind { endo, exo, time, constant, actor_sender, actor_receiver, stratum };

/// Where a term's covariate comes from.
///   endo:<rec|rep|cyc|trs>:<id|time>   endogenous statistic (decay from b=)
///   exo:<name>                         static dyadic covariate table
///   time                               u = t / t_end
///   const:<c>                          constant c
///   actor:sender | actor:receiver      RE grouping factor
///   stratum                            stratum label of the dyad
struct CovariateSource {
  SourceKind kind = SourceKind::constant;
  EndoKind endo;
  std::string exo_name;
  double constant = 0.0;

  std::string text() const;
  bool operator==(const CovariateSource& o) const { return text() == o.text(); }
};

CovariateSource parse_source(std::string_view text, double decay = 1.0);

struct TermSpec {
  std::string name;
  EffectType effect = EffectType::fle;
  CovariateSource source;
  /// Basis dimension for TVE/NLE.
  std::size_t q = 10;
  BasisKind basis = BasisKind::tps;
  /// RE only: loading u = t / t_end instead of 1 (random slope in time).
  bool by_time = false;
};

struct ModelSpec {
  std::vector<TermSpec> terms;

  const TermSpec* find(std::string_view name) const;
};

std::string to_string(EffectType e);
std::string to_string(BasisKind b);

/// Grammar, one term per line, '#' starts a comment:
///   term <name> type=fle|tve|nle|re [source=<src>] [q=10] [b=1] [by=time] [basis=tps|radial]
/// RE terms default to source=actor:sender. Throws ParseError with the line.
ModelSpec parse_model_spec(std::istream& in);
ModelSpec parse_model_spec(std::string_view text);
ModelSpec read_model_spec(const std::string& path);
std::string format_model_spec(const ModelSpec& spec);

/// "rec:time,rep:id" -> FLE terms named rec_time, rep_id.
ModelSpec endo_shorthand(std::string_view list, double decay = 1.0);

/// Static dyadic covariates keyed by name; entries absent from the file are 0.
struct ExoCovariates {
  std::map<std::string, Eigen::MatrixXd> dyadic;

  double value(const std::string& name, Dyad d) const;
  bool empty() const noexcept { return dyadic.empty(); }
};

/// CSV `name,sender,receiver,value`; actors must exist in the registry.
ExoCovariates read_exo_csv(std::istream& in, const ActorRegistry& actors);
ExoCovariates ingest_exo(const std::string& path, const ActorRegistry& actors);
void write_exo_csv(std::ostream& out, const ExoCovariates& exo, const ActorRegistry& actors);

enum class StrataKey { sender, receiver, pair };

/// Per-actor group labels defining g(s, r).
struct StrataMap {
  StrataKey key = StrataKey::sender;
  std::vector<int> group;

  bool empty() const noexcept { return group.empty(); }
  int stratum(Dyad d) const;
};

/// Groups read off the event stratum column by sender (or receiver). Actors
/// never seen in the keyed role fall into their own group. Inconsistent labels
/// for one actor throw ValidationError.
StrataMap infer_strata(const EventSequence& seq, StrataKey key = StrataKey::sender);

}  // namespace remgof
