#pragma once

#include <stdexcept>
#include <string>

namespace fairdiv {

/// Raised when an input violates a documented precondition or shape contract.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a value is outside the domain of a function (e.g. log of zero).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The market solver ran out of iterations. Carries the best certificate seen.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double best_residual, long iterations)
      : std::runtime_error(what), best_residual_(best_residual), iterations_(iterations) {}

  double best_residual() const noexcept { return best_residual_; }
  long iterations() const noexcept { return iterations_; }

 private:
  double best_residual_;
  long iterations_;
};

}  // namespace fairdiv
