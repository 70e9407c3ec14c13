#pragma once

#include <stdexcept>
#include <string>

namespace shieldkit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A builder or factory was handed arguments that cannot form a valid object.
class ConstructionError : public Error {
 public:
  using Error::Error;
};

/// Two automata (or an automaton and a shield) disagree on their alphabets.
class AlphabetMismatch : public Error {
 public:
  using Error::Error;
};

/// A serialized file does not follow the expected schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// The caller broke a documented precondition (e.g. chose an action outside the menu).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Synthesis failed because the environment can force a violation from the start.
class UnrealizableError : public Error {
 public:
  UnrealizableError(const std::string& what, std::string diagnostic)
      : Error(what), diagnostic_(std::move(diagnostic)) {}

  const std::string& diagnostic() const noexcept { return diagnostic_; }

 private:
  std::string diagnostic_;
};

}  // namespace shieldkit
