#pragma once

#include <array>
#include <cmath>
#include <string>

#include "mtnet/core.hpp"

namespace mtnet::numerics {

namespace detail {

// Diagonal Pade(13,13) coefficients and the 1-norm bound below which the
// unscaled approximant meets double precision (Higham 2005).
inline constexpr std::array<double, 14> kPade13 = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0,  129060195264000.0,   10559470521600.0,
    670442572800.0,      33522128640.0,       1323241920.0,
    40840800.0,          960960.0,            16380.0,
    182.0,               1.0};
inline constexpr double kTheta13 = 5.371920351148152;

inline double norm1(const Matrix& a) {
  return a.cwiseAbs().colwise().sum().maxCoeff();
}

}  // namespace detail

/// Number of squarings used for a matrix of the given 1-norm.
inline int expm_squarings(double norm) {
  if (!(norm > detail::kTheta13)) return 0;
  return static_cast<int>(std::ceil(std::log2(norm / detail::kTheta13)));
}

/// e^{B t} by scaling and squaring with the degree-13 diagonal Pade
/// approximant. Throws NumericError when the result is not finite.
template <typename Derived>
Matrix expm(const Eigen::MatrixBase<Derived>& b, double t = 1.0) {
  require(b.rows() == b.cols(), "expm: matrix must be square");
  require(std::isfinite(t) && t >= 0.0, "expm: t must be finite and >= 0");
  const Eigen::Index d = b.rows();
  if (d == 0) return Matrix(0, 0);
  Matrix a = b * t;
  if (!a.allFinite()) throw NumericError("expm: non-finite input");
  // Exact for t = 0 and B = 0; the Pade solve would leave 1-ulp noise.
  if (a.isZero(0.0)) return Matrix::Identity(d, d);

  const int s = expm_squarings(detail::norm1(a));
  if (s > 0) a /= std::ldexp(1.0, s);

  const auto& c = detail::kPade13;
  const Matrix id = Matrix::Identity(d, d);
  const Matrix a2 = a * a;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;

  Matrix u_inner = c[13] * a6 + c[11] * a4 + c[9] * a2;
  Matrix u = a6 * u_inner;
  u.noalias() += c[7] * a6 + c[5] * a4 + c[3] * a2 + c[1] * id;
  u = a * u;

  Matrix v_inner = c[12] * a6 + c[10] * a4 + c[8] * a2;
  Matrix v = a6 * v_inner;
  v.noalias() += c[6] * a6 + c[4] * a4 + c[2] * a2 + c[0] * id;

  Matrix r = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < s; ++k) r = r * r;

  if (!r.allFinite()) {
    throw NumericError("expm: result overflowed (||B t||_1 = " +
                       std::to_string(detail::norm1(b * t)) + ")");
  }
  return r;
}

}  // namespace mtnet::numerics
