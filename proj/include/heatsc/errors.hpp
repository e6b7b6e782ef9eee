#ifndef HEATSC_ERRORS_HPP
#define HEATSC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace heatsc {

/// Bad input: a precondition, invariant or configuration check failed.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure did not reach its stated accuracy.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class CutLocusError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DimensionMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NotPsdError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class CutoffTooSmall : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class QuadratureFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class StepFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NotConverged : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IllConditioned : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace heatsc

#endif  // HEATSC_ERRORS_HPP
