#include "remgof/report.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "remgof/errors.hpp"

namespace remgof {

namespace {

json vec(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string strata_key_name(StrataKey k) {
  switch (k) {
    case StrataKey::sender: return "sender";
    case StrataKey::receiver: return "receiver";
    case StrataKey::pair: return "pair";
  }
  return "sender";
}

StrataKey parse_strata_key(const std::string& s) {
  if (s == "sender") return StrataKey::sender;
  if (s == "receiver") return StrataKey::receiver;
  if (s == "pair") return StrataKey::pair;
  throw ValidationError("unknown strata key '" + s + "'");
}

}  // namespace

json fit_to_json(const FittedModel& model) {
  const auto& fit = model.fit;
  json j;
  j["model"] = format_model_spec(model.spec);
  j["m"] = model.options.m;
  j["seed"] = model.options.seed;
  j["stratified"] = model.options.stratified;
  j["strata_key"] = strata_key_name(model.options.strata_key);
  j["n"] = fit.n;
  j["P"] = static_cast<std::size_t>(fit.gamma.size());
  j["gamma"] = vec(fit.gamma);
  j["log_likelihood"] = fit.log_likelihood;
  j["edf"] = fit.edf;
  j["aic"] = fit.aic;
  j["gcv"] = finite_or_null(fit.gcv);
  json lambdas = json::array();
  for (const auto& b : fit.blocks) lambdas.push_back({{"term", b.term}, {"lambda", b.lambda}});
  j["lambda"] = lambdas;
  json terms = json::array();
  for (const auto& t : fit.terms) {
    json jt;
    jt["name"] = t.name;
    jt["type"] = to_string(t.effect);
    jt["offset"] = t.offset;
    jt["width"] = t.width;
    jt["basis_dim"] = t.basis_dim;
    jt["test_dim"] = t.test_dim;
    jt["edf"] = t.edf;
    jt["lambda"] = t.lambda ? json(*t.lambda) : json(nullptr);
    jt["sigma"] = t.sigma ? finite_or_null(*t.sigma) : json(nullptr);
    jt["coefficients"] = vec(fit.gamma.segment(static_cast<Eigen::Index>(t.offset), static_cast<Eigen::Index>(t.width)));
    const auto& layout = model.design.layout.term(t.name);
    if (t.effect == EffectType::tve || t.effect == EffectType::nle) {
      jt["basis"] = to_string(layout.spec.basis);
      jt["knots"] = layout.smooth.knots;
      jt["knot_shift"] = layout.smooth.shift;
      jt["knot_scale"] = layout.smooth.scale;
    }
    terms.push_back(std::move(jt));
  }
  j["terms"] = terms;
  const Eigen::VectorXd identity = fit.score - fit.penalty_gradient;
  json conv;
  conv["iterations"] = fit.iterations;
  conv["gradient_trace"] = fit.gradient_trace;
  conv["score_identity_max_abs"] = identity.size() ? identity.lpNorm<Eigen::Infinity>() : 0.0;
  conv["degenerate"] = fit.degenerate;
  conv["warnings"] = fit.warnings;
  j["convergence"] = conv;
  return j;
}

StoredFit fit_from_json(const json& j) {
  try {
    StoredFit s;
    s.spec = parse_model_spec(j.at("model").get<std::string>());
    s.options.m = j.at("m").get<std::size_t>();
    s.options.seed = j.at("seed").get<std::uint64_t>();
    s.options.stratified = j.value("stratified", false);
    s.options.strata_key = parse_strata_key(j.value("strata_key", std::string("sender")));
    const auto g = j.at("gamma").get<std::vector<double>>();
    s.gamma = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
    for (const auto& l : j.at("lambda")) s.lambdas.push_back(l.at("lambda").get<double>());
    s.events_digest = j.value("events_sha256", std::string());
    s.covariates_digest = j.value("covariates_sha256", std::string());
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed fit file: ") + e.what());
  }
}

json test_to_json(const GofTestResult& r) {
  json j;
  j["term"] = r.term;
  j["statistic_name"] = r.statistic_name;
  j["statistic"] = finite_or_null(r.statistic);
  j["p_value"] = r.p_value;
  j["p_value_kind"] = to_string(r.kind);
  j["B"] = r.B;
  j["dimension"] = r.dimension;
  j["rank"] = r.rank;
  return j;
}

json gof_to_json(const GofReport& report) {
  json j;
  json tests = json::array();
  if (report.omnibus) tests.push_back(test_to_json(*report.omnibus));
  for (const auto& t : report.terms) tests.push_back(test_to_json(t));
  j["tests"] = tests;
  if (report.auxiliary) j["auxiliary"] = test_to_json(*report.auxiliary);
  return j;
}

json error_to_json(const std::exception& e) {
  json j;
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    j["error"] = err->kind();
    j["exit_code"] = err->exit_code();
    if (const auto* tie = dynamic_cast<const TieError*>(&e)) j["rows"] = tie->rows();
    if (const auto* pe = dynamic_cast<const ParseError*>(&e)) j["line"] = pe->line();
    if (const auto* se = dynamic_cast<const SamplingError*>(&e)) j["event_index"] = se->event_index();
    if (const auto* ce = dynamic_cast<const ConvergenceError*>(&e)) j["gradient_trace"] = ce->gradient_trace();
    if (const auto* si = dynamic_cast<const SingularError*>(&e)) j["rank"] = si->rank();
    if (const auto* ev = dynamic_cast<const EvaluationError*>(&e)) {
      j["event_index"] = ev->event_index();
      j["member"] = ev->member();
    }
  } else {
    j["error"] = "InternalError";
    j["exit_code"] = 4;
  }
  j["message"] = e.what();
  return j;
}

void write_trajectory_csv(const std::string& path, const GofTestResult& r) {
  std::ostringstream out;
  out << 'u';
  for (Eigen::Index c = 0; c < r.trajectory.cols(); ++c) out << ",w_" << (c + 1);
  out << '\n';
  const auto n = r.trajectory.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    out << format_double(static_cast<double>(k + 1) / static_cast<double>(n));
    for (Eigen::Index c = 0; c < r.trajectory.cols(); ++c) out << ',' << format_double(r.trajectory(k, c));
    out << '\n';
  }
  write_text_atomic(path, out.str());
}

void write_text_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw ValidationError("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, target);
}

void write_json_atomic(const std::string& path, const json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("cannot parse '" + path + "': " + e.what());
  }
}

namespace {

std::string hex(const unsigned char* data, unsigned int len) {
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(data[i]);
  return out.str();
}

}  // namespace

std::string sha256_string(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  return hex(md, len);
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  return hex(md, len);
}

}  // namespace remgof
