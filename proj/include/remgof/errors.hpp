#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace remgof {

// Maps onto the CLI exit codes: usage=1, data=2, consistency=3, numeric=4.
enum class ErrorCategory { usage = 1, data = 2, consistency = 3, numeric = 4 };

class Error : public std::runtime_error {
 public:
  Error(std::string kind, ErrorCategory category, const std::string& message);

  const std::string& kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  std::string kind_;
  ErrorCategory category_;
};

/// Non-monotone or tied timestamps. `rows()` are zero-based data-row indices.
class TieError : public Error {
 public:
  TieError(std::vector<std::size_t> rows, const std::string& message);
  const std::vector<std::size_t>& rows() const noexcept { return rows_; }

 private:
  std::vector<std::size_t> rows_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message);
};

/// Unparsable input; `line()` is the one-based line number in the file.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class OrderError : public Error {
 public:
  explicit OrderError(const std::string& message);
};

class LevelError : public Error {
 public:
  explicit LevelError(const std::string& message);
};

class SamplingError : public Error {
 public:
  SamplingError(std::size_t event_index, const std::string& message);
  std::size_t event_index() const noexcept { return event_index_; }

 private:
  std::size_t event_index_;
};

class UnsupportedError : public Error {
 public:
  explicit UnsupportedError(const std::string& message);
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message);
};

class ConsistencyError : public Error {
 public:
  explicit ConsistencyError(const std::string& message);
};

class OverflowError : public Error {
 public:
  explicit OverflowError(const std::string& message);
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& message, std::vector<double> gradient_trace);
  const std::vector<double>& gradient_trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

class SingularError : public Error {
 public:
  SingularError(const std::string& message, std::size_t rank);
  std::size_t rank() const noexcept { return rank_; }

 private:
  std::size_t rank_;
};

class DegenerateError : public Error {
 public:
  explicit DegenerateError(const std::string& message);
};

class EvaluationError : public Error {
 public:
  EvaluationError(std::size_t event_index, std::size_t member, const std::string& message);
  std::size_t event_index() const noexcept { return event_index_; }
  std::size_t member() const noexcept { return member_; }

 private:
  std::size_t event_index_;
  std::size_t member_;
};

class DgpError : public Error {
 public:
  explicit DgpError(const std::string& message);
};

}  // namespace remgof
