#pragma once

#include <stdexcept>
#include <string>

namespace dqa {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (JSON syntax, wrong value types).
class ParseError : public Error {
  public:
    using Error::Error;
};

/// Well-formed input that violates a model invariant (unknown qubit,
/// self-coupling, duplicate pair, inconsistent split plan, ...).
class SemanticError : public Error {
  public:
    using Error::Error;
};

/// Argument outside the domain of a numerical routine.
class DomainError : public Error {
  public:
    using Error::Error;
};

/// Problem too large for the requested dense representation.
class CapacityError : public Error {
  public:
    using Error::Error;
};

/// Numerical procedure failed to reach its tolerance.
class ConvergenceError : public Error {
  public:
    using Error::Error;
};

/// Invalid experiment configuration.
class ConfigError : public Error {
  public:
    using Error::Error;
};

} // namespace dqa
