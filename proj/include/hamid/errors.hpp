#pragma once

#include <stdexcept>
#include <string>

namespace hamid {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An input violated a documented precondition (symmetry, unitarity, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A factorization or eigensolver failed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Invalid model parameters or a model that cannot be built as requested.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Spatial grid too narrow or too coarse for the requested eigenstates.
class GridError : public ModelError {
 public:
  using ModelError::ModelError;
};

/// Experiment configuration failed validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The reduced Newton system is too ill-conditioned to solve.
class SingularJacobianError : public Error {
 public:
  SingularJacobianError(double condition_estimate, int iteration = -1)
      : Error(make_message(condition_estimate, iteration)),
        condition_estimate_(condition_estimate),
        iteration_(iteration) {}

  double condition_estimate() const noexcept { return condition_estimate_; }
  int iteration() const noexcept { return iteration_; }

 private:
  static std::string make_message(double cond, int iteration) {
    std::string msg = "singular Jacobian (condition estimate " + std::to_string(cond) + ")";
    if (iteration >= 0) msg += " at Newton iteration " + std::to_string(iteration);
    return msg;
  }

  double condition_estimate_;
  int iteration_;
};

}  // namespace hamid
