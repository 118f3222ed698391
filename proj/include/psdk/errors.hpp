#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace psdk {

enum class ErrorKind {
  NotInManifold,
  NotSymmetric,
  Singular,
  NonPositiveSpectrum,
  NonPositiveDiagonal,
  ShapeMismatch,
  EmptyInput,
  IndexSetMismatch,
  ZeroGap,
  NotOrthogonal,
  NotPsd,
  DegenerateRows,
  InsufficientPoints,
  InvalidIndexSet,
};

const char* to_string(ErrorKind kind);

/// Numerical precondition failure. Every library entry point reports
/// violations through this type; `kind()` identifies which contract broke.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// NotInManifold raised by an aggregation step; carries the positions of the
/// inputs that failed so the caller can reselect the index set.
class NotInManifoldError : public NumericalError {
 public:
  NotInManifoldError(const std::string& what, std::vector<int> offending)
      : NumericalError(ErrorKind::NotInManifold, what), offending_(std::move(offending)) {}

  const std::vector<int>& offending() const noexcept { return offending_; }

 private:
  std::vector<int> offending_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace psdk
