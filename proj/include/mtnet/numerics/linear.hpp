#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "mtnet/core.hpp"

namespace mtnet::numerics {

struct LinearSolution {
  Vector x;
  /// Reciprocal condition estimate in the 1-norm (LAPACK-style rcond).
  double rcond = 0.0;
  /// ||B x - rhs||_inf
  double residual = 0.0;
};

/// Solves B x = rhs by partial-pivot LU. Throws NumericError when B is
/// singular to working precision or the residual bound is not met.
inline LinearSolution solve_linear(const Matrix& b, const Vector& rhs) {
  require(b.rows() == b.cols(), "solve_linear: matrix must be square");
  require(b.rows() == rhs.size(), "solve_linear: dimension mismatch");
  if (!b.allFinite() || !rhs.allFinite()) {
    throw NumericError("solve_linear: non-finite input");
  }
  LinearSolution out;
  if (b.rows() == 0) {
    out.rcond = 1.0;
    return out;
  }
  const Eigen::PartialPivLU<Matrix> lu(b);
  out.rcond = lu.rcond();
  constexpr double eps = std::numeric_limits<double>::epsilon();
  if (!(out.rcond > eps)) {
    throw NumericError("solve_linear: matrix is singular to working "
                       "precision (rcond = " + std::to_string(out.rcond) +
                       ")");
  }
  out.x = lu.solve(rhs);
  out.residual = (b * out.x - rhs).lpNorm<Eigen::Infinity>();
  const double bound =
      1e-10 * (b.cwiseAbs().rowwise().sum().maxCoeff() *
                   out.x.lpNorm<Eigen::Infinity>() +
               rhs.lpNorm<Eigen::Infinity>());
  if (!out.x.allFinite() || out.residual > bound) {
    throw NumericError("solve_linear: residual " +
                       std::to_string(out.residual) + " exceeds bound " +
                       std::to_string(bound));
  }
  return out;
}

/// Stationary distribution of a generator q (rows sum to zero): solves
/// q^T pi = 0 with the last equation replaced by sum(pi) = 1.
inline Vector stationary_distribution(const Matrix& generator) {
  require(generator.rows() == generator.cols(),
          "stationary_distribution: generator must be square");
  const Eigen::Index n = generator.rows();
  Matrix system = generator.transpose();
  system.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs(n - 1) = 1.0;
  return solve_linear(system, rhs).x;
}

}  // namespace mtnet::numerics
