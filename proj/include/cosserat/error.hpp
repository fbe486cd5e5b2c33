#pragma once

#include <stdexcept>
#include <string>

namespace cosserat {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: grid specs, material constants, optimizer settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented invariant (non-unit quaternion, non-tangent
/// vector, malformed state file, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Evaluation outside the domain of a formula (origin of a singular field,
/// divergent integrals, degenerate denominators).
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace cosserat
