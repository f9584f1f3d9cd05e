#pragma once

#include <stdexcept>
#include <string>

namespace sessionlens {

// Base class for everything this library throws on bad input data.
// The CLI maps these to exit code 2 (data/validation error).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed line in an event log. line() is 1-based.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& msg)
      : DataError("line " + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Structurally valid record that violates the event schema (unknown kind,
// missing payload field, out-of-range value).
class SchemaError : public DataError {
 public:
  SchemaError(std::size_t line, const std::string& msg)
      : DataError("line " + std::to_string(line) + ": " + msg), line_(line) {}
  explicit SchemaError(const std::string& msg) : DataError(msg), line_(0) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Cross-event consistency violation found while assembling sessions.
class ValidationError : public DataError {
 public:
  explicit ValidationError(const std::string& msg) : DataError(msg) {}
};

// A statistic that requires spread in the data hit a constant input
// (zero variance in standardization, correlation, or reliability).
class DegenerateDistributionError : public DataError {
 public:
  explicit DegenerateDistributionError(const std::string& msg) : DataError(msg) {}
};

}  // namespace sessionlens
