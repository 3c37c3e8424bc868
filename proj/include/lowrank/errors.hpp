#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace lowrank {

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Shapes of matrices, vectors or designs do not conform.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A hypothesis of a bound (e.g. kappa > zeta_minus) does not hold.
class ConditionViolation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int iteration, const std::string& what)
      : std::runtime_error(what), iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

class RankDeficiencyError : public std::runtime_error {
 public:
  RankDeficiencyError(int null_dimension, const std::string& what)
      : std::runtime_error(what), null_dimension_(null_dimension) {}
  int null_dimension() const noexcept { return null_dimension_; }

 private:
  int null_dimension_;
};

// Malformed input file. line() is 1-based; 0 when not attributable to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Invalid experiment configuration; key() names the offending field.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::invalid_argument(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Problem size exceeds the configured resource guard.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lowrank
