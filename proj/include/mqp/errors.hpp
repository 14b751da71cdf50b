#pragma once

#include <stdexcept>
#include <string>

namespace mqp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates an operation's precondition (bad dims, empty list, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Malformed file container (.flo, checkpoint, manifest).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Input is well-formed but carries no usable signal.
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

/// A required external tool or precomputed artifact is unavailable.
class MissingDependency : public Error {
 public:
  using Error::Error;
};

/// Two components disagree (shape mismatch between stages, failed plug-in).
class IntegrationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// F-measure recall is undefined when the mask has no foreground.
class UndefinedRecall : public Error {
 public:
  using Error::Error;
};

}  // namespace mqp
