#pragma once

#include "json.hpp"
#include <string>

#include "remgof/pipeline.hpp"

namespace remgof {

using nlohmann::json;

json fit_to_json(const FittedModel& model);
json gof_to_json(const GofReport& report);
json test_to_json(const GofTestResult& result);
json error_to_json(const std::exception& e);

/// What a stored fit needs to be restored against its events.
struct StoredFit {
  ModelSpec spec;
  PipelineOptions options;
  Eigen::VectorXd gamma;
  std::vector<double> lambdas;
  std::string events_digest;
  std::string covariates_digest;
};

StoredFit fit_from_json(const json& j);

/// CSV `u,w_1..w_q` of a normalized trajectory.
void write_trajectory_csv(const std::string& path, const GofTestResult& result);

/// Writes through a temporary file in the same directory, then renames.
void write_text_atomic(const std::string& path, const std::string& content);
void write_json_atomic(const std::string& path, const json& j);
json read_json(const std::string& path);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);
std::string sha256_string(const std::string& data);

}  // namespace remgof
