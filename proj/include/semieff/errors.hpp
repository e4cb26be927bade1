#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace semieff {

// Precondition violated or a quantity left its mathematical domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Cholesky failed, or a matrix that must be SPD is not.
class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by models that are deliberately outside the regular class.
class NotRegularError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// An estimator could not produce a value for the given sample.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iterative numerics ran out of budget. Carries the best estimate so callers
// can decide whether it is usable.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, double best_estimate, double error_bound)
      : std::runtime_error(what), best_estimate_(best_estimate), error_bound_(error_bound) {}

  double best_estimate() const noexcept { return best_estimate_; }
  double error_bound() const noexcept { return error_bound_; }

 private:
  double best_estimate_;
  double error_bound_;
};

// A Monte Carlo replication failed. Carries the replication index.
class ReplicationError : public std::runtime_error {
 public:
  ReplicationError(const std::string& what, std::size_t index) : std::runtime_error(what), index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

}  // namespace semieff
