#include "remgof/errors.hpp"

#include <utility>

namespace remgof {

Error::Error(std::string kind, ErrorCategory category, const std::string& message)
    : std::runtime_error(message), kind_(std::move(kind)), category_(category) {}

TieError::TieError(std::vector<std::size_t> rows, const std::string& message)
    : Error("TieError", ErrorCategory::data, message), rows_(std::move(rows)) {}

ValidationError::ValidationError(const std::string& message)
    : Error("ValidationError", ErrorCategory::data, message) {}

ParseError::ParseError(std::size_t line, const std::string& message)
    : Error("ParseError", ErrorCategory::data, "line " + std::to_string(line) + ": " + message),
      line_(line) {}

OrderError::OrderError(const std::string& message)
    : Error("OrderError", ErrorCategory::data, message) {}

LevelError::LevelError(const std::string& message)
    : Error("LevelError", ErrorCategory::data, message) {}

SamplingError::SamplingError(std::size_t event_index, const std::string& message)
    : Error("SamplingError", ErrorCategory::data,
            "event " + std::to_string(event_index) + ": " + message),
      event_index_(event_index) {}

UnsupportedError::UnsupportedError(const std::string& message)
    : Error("UnsupportedError", ErrorCategory::usage, message) {}

UsageError::UsageError(const std::string& message) : Error("UsageError", ErrorCategory::usage, message) {}

ConsistencyError::ConsistencyError(const std::string& message)
    : Error("ConsistencyError", ErrorCategory::consistency, message) {}

OverflowError::OverflowError(const std::string& message)
    : Error("OverflowError", ErrorCategory::numeric, message) {}

ConvergenceError::ConvergenceError(const std::string& message, std::vector<double> gradient_trace)
    : Error("ConvergenceError", ErrorCategory::numeric, message), trace_(std::move(gradient_trace)) {}

SingularError::SingularError(const std::string& message, std::size_t rank)
    : Error("SingularError", ErrorCategory::numeric, message), rank_(rank) {}

DegenerateError::DegenerateError(const std::string& message)
    : Error("DegenerateError", ErrorCategory::numeric, message) {}

EvaluationError::EvaluationError(std::size_t event_index, std::size_t member, const std::string& message)
    : Error("EvaluationError", ErrorCategory::numeric,
            "event " + std::to_string(event_index) + ", member " + std::to_string(member) + ": " +
                message),
      event_index_(event_index),
      member_(member) {}

DgpError::DgpError(const std::string& message)
    : Error("DgpError", ErrorCategory::numeric, message) {}

}  // namespace remgof
