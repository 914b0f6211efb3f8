#pragma once

#include <stdexcept>
#include <string>

namespace treeq {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input text is not well-formed (JSON syntax, unknown keys, bad literals).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Input is well-formed but violates a structural invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// The caller broke a precondition (e.g. pruning with an empty box).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// The solver process could not be started.
class SolverUnavailable : public Error {
 public:
  using Error::Error;
};

/// The solver ran but its output could not be interpreted.
class ProtocolError : public Error {
 public:
  ProtocolError(const std::string& what, std::string diagnostics)
      : Error(what), diagnostics_(std::move(diagnostics)) {}
  const std::string& diagnostics() const { return diagnostics_; }

 private:
  std::string diagnostics_;
};

/// Brute-force enumeration would exceed its guard.
class TooLarge : public Error {
 public:
  using Error::Error;
};

/// The oracle cannot decide this kind of question.
class UnsupportedQuestion : public Error {
 public:
  using Error::Error;
};

}  // namespace treeq
