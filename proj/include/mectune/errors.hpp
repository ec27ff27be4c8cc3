#pragma once

#include <stdexcept>
#include <string>

namespace mectune {

/// Argument outside the mathematical domain of an operation (f <= 0, alpha >= layers, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A decision, file, or configuration failed validation.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A link with positive association but zero rate.
class InfeasibleLinkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Internal numerical failure (bracketing, pivoting) carrying diagnostics in what().
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Error raised by a named pipeline stage; the stage tag is kept separately.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace mectune
