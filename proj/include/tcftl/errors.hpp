#pragma once

#include <stdexcept>
#include <string>

namespace tcftl {

/// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Input data failed validation (bad CSV layout, bad rows, empty inputs).
class ValidationError : public Error {
  public:
    using Error::Error;
};

class SchemaError : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

class RowError : public ValidationError {
  public:
    RowError(std::size_t line, const std::string& what)
        : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

class InputError : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

/// Bad parameters, missing table entries, malformed config files.
class ConfigError : public Error {
  public:
    using Error::Error;
};

class ParameterError : public ConfigError {
  public:
    using ConfigError::ConfigError;
};

class EstimationError : public ConfigError {
  public:
    using ConfigError::ConfigError;
};

/// Requested distance / carriage cell is not covered by the data.
class CoverageError : public ConfigError {
  public:
    using ConfigError::ConfigError;
};

/// No detector parameters reach the requested operating point.
class InfeasibleError : public Error {
  public:
    InfeasibleError(const std::string& what, double best_achievable)
        : Error(what), best_(best_achievable) {}
    double best_achievable() const noexcept { return best_; }

  private:
    double best_;
};

}  // namespace tcftl
