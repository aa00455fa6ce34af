#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bpadv {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input record; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A value parsed fine but breaks a domain invariant; names the field.
class InvariantError : public Error {
 public:
  InvariantError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Weights or model file with a missing or mis-shaped entry.
class SchemaError : public InvariantError {
 public:
  using InvariantError::InvariantError;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public DomainError {
 public:
  using DomainError::DomainError;
};

class LengthMismatchError : public Error {
 public:
  LengthMismatchError(std::size_t expected, std::size_t got)
      : Error("length mismatch: expected " + std::to_string(expected) +
              ", got " + std::to_string(got)) {}
};

class NumericError : public Error {
 public:
  NumericError(std::size_t step, const std::string& what)
      : Error("non-finite value at step " + std::to_string(step) + ": " +
              what),
        step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class GenerationExhaustedError : public Error {
 public:
  using Error::Error;
};

class DegenerateDatasetError : public Error {
 public:
  using Error::Error;
};

class BackendUnavailableError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace bpadv
