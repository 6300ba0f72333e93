#pragma once

#include <stdexcept>
#include <string>

namespace mathesis {

/// Base class for all recoverable engine errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Violations of graph typing rules (arity, edge/node kind, domain).
class TypingError : public Error {
 public:
  using Error::Error;
};

/// A rule application whose preconditions do not hold.
class RuleError : public Error {
 public:
  using Error::Error;
};

/// Shape or dimension mismatches in numeric bindings.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A binding slot required for evaluation is absent.
class BindingError : public Error {
 public:
  using Error::Error;
};

/// Problem sizing limits exceeded (monomial basis cap, term budget, ...).
class CapacityError : public Error {
 public:
  using Error::Error;
};

}  // namespace mathesis
