#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mtnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model (or model file) that violates the structural invariants.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Overflow, singularity, non-convergence, refused stationary analysis.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Caller passed arguments outside an operation's domain.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ArgumentError(message);
}

inline bool all_finite(const Eigen::Ref<const Matrix>& m) {
  return m.allFinite();
}

}  // namespace mtnet
