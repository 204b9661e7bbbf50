#pragma once

#include <stdexcept>
#include <string>

namespace graspinfer {

/// Caller broke an API precondition (dimension mismatch, spec mismatch, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A point failed its manifold invariants beyond tolerance.
class InvalidPoint : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Missing or inconsistent configuration (e.g. no box bounds for a Euclidean block).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A chain or optimizer could not be started from the given state.
class InitializationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss; message carries epoch and batch.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative solver exhausted its iteration budget; message carries the residual.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A document (scene file, config, model file) failed to parse; message is line-numbered.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace graspinfer
