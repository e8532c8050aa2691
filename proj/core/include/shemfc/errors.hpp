#pragma once

#include <stdexcept>
#include <string>

namespace shemfc {

/// Base class for all toolkit errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Kernel/model parameters violate a domain invariant.
struct InvalidSpec : Error {
  using Error::Error;
};

/// Evaluation requested at a point where the function is singular.
struct SingularPoint : Error {
  using Error::Error;
};

/// Adaptive integration failed to reach the requested tolerance.
struct QuadratureFailure : Error {
  using Error::Error;
};

/// A closed-form evaluation was requested where none exists.
struct NoClosedForm : Error {
  using Error::Error;
};

/// Argument outside the mathematical domain of a special function.
struct DomainError : Error {
  using Error::Error;
};

/// Operation not available for the given configuration.
struct Unsupported : Error {
  using Error::Error;
};

/// A stated precondition (existence condition) does not hold.
struct ConditionViolated : Error {
  using Error::Error;
};

/// Paths do not share a common time grid.
struct GridMismatch : Error {
  using Error::Error;
};

/// Epsilon list for a convergence study is not strictly decreasing.
struct InvalidEpsList : Error {
  using Error::Error;
};

/// No importance-sampling proposal available for a kernel family.
struct ProposalUnavailable : Error {
  using Error::Error;
};

/// Error thrown by a Monte Carlo evaluator, tagged with the sample index.
struct EvaluatorError : Error {
  EvaluatorError(std::uint64_t sample, const std::string& what)
      : Error("sample " + std::to_string(sample) + ": " + what), sample_index(sample) {}
  std::uint64_t sample_index;
};

}  // namespace shemfc
