#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace iblr {

// Every library failure derives from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotPositiveDefinite : public Error {
 public:
  explicit NotPositiveDefinite(std::size_t row)
      : Error("matrix is not positive definite (pivot row " + std::to_string(row) + ")"),
        row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class InfeasibleResult : public Error {
 public:
  explicit InfeasibleResult(std::size_t block)
      : Error("retraction left the feasible set in block " + std::to_string(block)),
        block_(block) {}
  std::size_t block() const { return block_; }

 private:
  std::size_t block_;
};

class StepTooLarge : public Error {
 public:
  using Error::Error;
};

class SupportError : public Error {
 public:
  using Error::Error;
};

class EstimatorUnavailable : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class LineSearchExhausted : public Error {
 public:
  using Error::Error;
};

class PerExampleUnavailable : public Error {
 public:
  using Error::Error;
};

class UnknownDensity : public Error {
 public:
  explicit UnknownDensity(const std::string& name)
      : Error("unknown density '" + name + "'"), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DimensionUnsupported : public Error {
 public:
  using Error::Error;
};

// Raised while validating an experiment config; field() names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace iblr
