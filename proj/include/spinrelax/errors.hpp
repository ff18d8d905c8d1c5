#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace spinrelax {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Eigenstate labelling failed because states are too strongly mixed.
class DegeneracyError : public Error {
 public:
  DegeneracyError(const std::string& what, double field) : Error(what), field_(field) {}
  double field() const noexcept { return field_; }

 private:
  double field_;
};

/// Field value falls inside a level-anti-crossing exclusion window.
class MaskedRegionError : public Error {
 public:
  using Error::Error;
};

class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// The fit Jacobian is (numerically) rank deficient.
class IdentifiabilityError : public Error {
 public:
  IdentifiabilityError(const std::string& what, std::vector<std::string> parameters)
      : Error(what), parameters_(std::move(parameters)) {}
  const std::vector<std::string>& parameters() const noexcept { return parameters_; }

 private:
  std::vector<std::string> parameters_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& msg)
      : Error(source + ":" + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace spinrelax
