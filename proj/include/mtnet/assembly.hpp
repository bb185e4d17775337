#pragma once

#include <iomanip>
#include <limits>
#include <ostream>

#include "mtnet/core.hpp"
#include "mtnet/model.hpp"
#include "mtnet/numerics/expm.hpp"

namespace mtnet {

/// Dense matrices of the first-moment system
///   Mbar'(t) = L pi(t) + (M + A) Mbar(t),   pi'(t) = Aenv^T pi(t)
/// and the block-triangular matrices whose exponentials carry the time
/// integrals. J = I*N, state vectors are environment-major: (i, n) -> i*N + n.
struct AssembledSystem {
  int n_queues = 0;
  int n_env = 0;
  Matrix L;      // J x I
  Matrix M;      // J x J, block diagonal
  Matrix A;      // J x J, block (j, i) collects transitions i -> j
  Matrix A_env;  // I x I generator
  Matrix MA;     // M + A
  Matrix C;      // (J+I) x (J+I): [[M+A, L], [0, Aenv^T]]
  Matrix C1;     // 2J x 2J: [[0, I_J], [0, M+A]]
  Matrix C2;     // 2J+ x 2J+: [[0, I_{J+}], [0, C]]

  int J() const { return n_queues * n_env; }
  int J_plus() const { return J() + n_env; }
};

/// Builds every matrix of AssembledSystem from a model. Deterministic.
inline AssembledSystem assemble(const NetworkModel& model) {
  const int n = model.n_queues;
  const int envs = model.n_env;
  const int j = n * envs;
  AssembledSystem s;
  s.n_queues = n;
  s.n_env = envs;

  s.L = Matrix::Zero(j, envs);
  s.M = Matrix::Zero(j, j);
  for (int i = 0; i < envs; ++i) {
    const int off = i * n;
    for (int q = 0; q < n; ++q) {
      s.L(off + q, i) = model.arrival_rates(i, q);
      // Row q of block i: inflow mu_{q' q} from every other queue q', and
      // the total outflow rate of q on the diagonal.
      double out_rate = 0.0;
      for (int k = 0; k <= n; ++k) out_rate += model.departure_rates[i](q, k);
      s.M(off + q, off + q) -= out_rate;
      for (int src = 0; src < n; ++src) {
        s.M(off + q, off + src) += model.departure(i, src, q);
      }
    }
  }

  s.A = Matrix::Zero(j, j);
  const Vector alpha_bar = total_transition_rates(model);
  for (const auto& t : model.transitions) {
    s.A.block(t.to_env * n, t.from_env * n, n, n) +=
        t.rate * t.matrix.cast<double>();
  }
  for (int i = 0; i < envs; ++i) {
    s.A.block(i * n, i * n, n, n).diagonal().array() -= alpha_bar(i);
  }

  s.A_env = aggregate_env_generator(model);
  s.MA = s.M + s.A;

  const int jp = j + envs;
  s.C = Matrix::Zero(jp, jp);
  s.C.topLeftCorner(j, j) = s.MA;
  s.C.topRightCorner(j, envs) = s.L;
  s.C.bottomRightCorner(envs, envs) = s.A_env.transpose();

  s.C1 = Matrix::Zero(2 * j, 2 * j);
  s.C1.topRightCorner(j, j).setIdentity();
  s.C1.bottomRightCorner(j, j) = s.MA;

  s.C2 = Matrix::Zero(2 * jp, 2 * jp);
  s.C2.topRightCorner(jp, jp).setIdentity();
  s.C2.bottomRightCorner(jp, jp) = s.C;
  return s;
}

/// L pi(t) + (M + A) mbar with pi(t) = e^{Aenv^T t} pi0.
inline Vector moment_ode_rhs(const AssembledSystem& sys, double t,
                             const Vector& pi0, const Vector& mbar) {
  const Vector pi_t = numerics::expm(sys.A_env.transpose(), t) * pi0;
  return sys.L * pi_t + sys.MA * mbar;
}

/// Row-major CSV, 17 significant digits.
inline void write_matrix_csv(std::ostream& os, const Matrix& m) {
  const auto old_precision = os.precision();
  os << std::setprecision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) os << ',';
      os << m(r, c);
    }
    os << '\n';
  }
  os.precision(old_precision);
}

}  // namespace mtnet
