#pragma once

#include <stdexcept>
#include <string>

namespace gplccm {

// Base of every exception thrown by this library. The four direct families
// correspond to the CLI exit codes: configuration (2), data (3),
// estimation (4), prediction (5).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

class PredictionError : public Error {
 public:
  using Error::Error;
};

// A required column is missing or a file does not match its declared layout.
class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

// A cell could not be parsed as the declared type.
class ParseError : public DataError {
 public:
  using DataError::DataError;
};

// Dimensions of two arguments that must agree do not.
class ShapeError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

// Matrix not positive definite even after jitter escalation, or a factor
// required by an algorithm could not be formed.
class ConditioningError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

// An iterative procedure hit its iteration cap before meeting its tolerance.
class ConvergenceError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

// An optimizer failed outright (non-finite objective, every restart failed).
class OptimizationError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

// A latent class lost all of its probability mass during estimation.
class DegenerateClassError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

int exit_code_for(const Error& e);

}  // namespace gplccm
