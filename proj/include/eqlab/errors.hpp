#pragma once

#include <stdexcept>
#include <string>

namespace eqlab {

// Base class for every error raised by the library. The CLI maps the
// subclasses onto exit codes (config 2, task 3, budget 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// Accumulated rounding error of a dyadic torus point exceeded the requested
// bound; callers raise the working precision and replay.
class PrecisionExhausted : public Error {
 public:
  using Error::Error;
};

class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

class AmbiguousClusters : public Error {
 public:
  using Error::Error;
};

class ToleranceExceeded : public Error {
 public:
  using Error::Error;
};

class GroupingAmbiguous : public Error {
 public:
  using Error::Error;
};

class DegenerateHyperplane : public Error {
 public:
  using Error::Error;
};

class MissingLabels : public Error {
 public:
  using Error::Error;
};

class InsufficientDecade : public Error {
 public:
  using Error::Error;
};

class HypothesisFailed : public Error {
 public:
  using Error::Error;
};

class NonUnimodular : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace eqlab
