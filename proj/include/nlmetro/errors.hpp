#pragma once

#include <stdexcept>
#include <string>

namespace nlmetro {

//! Broad failure class; the CLI maps each to its own exit code.
enum class ErrorKind { config, numerical };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

//! Bad user input: malformed config, out-of-range parameters, bad datasets.
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string &what)
      : Error(ErrorKind::config, what) {}
};

//! A computation that could not deliver a result at the requested accuracy.
class NumericalError : public Error {
public:
  explicit NumericalError(const std::string &what)
      : Error(ErrorKind::numerical, what) {}
};

#define NLMETRO_DEFINE_ERROR(Name, Base)                                       \
  class Name : public Base {                                                   \
  public:                                                                      \
    explicit Name(const std::string &what) : Base(what) {}                     \
  };

NLMETRO_DEFINE_ERROR(InvalidConfig, ConfigError)
NLMETRO_DEFINE_ERROR(NegativeVariance, ConfigError)
NLMETRO_DEFINE_ERROR(NonConvergence, NumericalError)
NLMETRO_DEFINE_ERROR(StepFailure, NumericalError)
NLMETRO_DEFINE_ERROR(PositivityViolation, NumericalError)
NLMETRO_DEFINE_ERROR(QuadratureNotConverged, NumericalError)
NLMETRO_DEFINE_ERROR(DegenerateDesign, NumericalError)
NLMETRO_DEFINE_ERROR(InsufficientPoints, NumericalError)
NLMETRO_DEFINE_ERROR(NoCrossover, NumericalError)

#undef NLMETRO_DEFINE_ERROR

} // namespace nlmetro
