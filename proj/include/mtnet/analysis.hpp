#pragma once

#include <cmath>
#include <optional>
#include <set>
#include <string>

#include "mtnet/assembly.hpp"
#include "mtnet/core.hpp"
#include "mtnet/model.hpp"
#include "mtnet/numerics/eigen.hpp"
#include "mtnet/numerics/expm.hpp"
#include "mtnet/numerics/linear.hpp"

namespace mtnet {

struct TransientState {
  double t = 0.0;
  Vector env_dist;                       // pi(t)
  Vector mean;                           // Mbar(t)
  std::optional<Vector> integrated_mean;  // int_0^t Mbar(s) ds
};

/// Ergodicity verdict from the spectral abscissa omega of M + A.
struct StabilityVerdict {
  static constexpr double kMarginBand = 1e-7;
  double omega = 0.0;
  bool stable = false;
  /// |omega| < kMarginBand: treated as unstable, the inverse of M + A is
  /// too poorly conditioned to trust.
  bool marginal = false;

  std::string note() const {
    if (marginal) return "near-marginal: |omega| < 1e-7, treated as unstable";
    return stable ? "stable" : "unstable";
  }
};

/// pi(t) = e^{Aenv^T t} pi(0).
inline Vector env_distribution(const AssembledSystem& sys, const Vector& pi0,
                               double t) {
  require(pi0.size() == sys.n_env, "env_distribution: pi0 has wrong size");
  return numerics::expm(sys.A_env.transpose(), t) * pi0;
}

/// int_0^T pi(s) ds, via the exponential of [[0, I], [0, Aenv^T]].
inline Vector integrated_env_distribution(const AssembledSystem& sys,
                                          const Vector& pi0, double T) {
  const int envs = sys.n_env;
  Matrix block = Matrix::Zero(2 * envs, 2 * envs);
  block.topRightCorner(envs, envs).setIdentity();
  block.bottomRightCorner(envs, envs) = sys.A_env.transpose();
  const Matrix e = numerics::expm(block, T);
  return e.topRightCorner(envs, envs) * pi0;
}

/// Mbar(T) = e^{(M+A)T} Mbar(0) + [e^{C T}]_{top-right J x I} pi(0).
inline Vector transient_mean(const AssembledSystem& sys,
                             const InitialCondition& init, double T) {
  const int j = sys.J();
  require(init.mean.size() == j && init.env_dist.size() == sys.n_env,
          "transient_mean: initial condition has wrong size");
  const Matrix e_c = numerics::expm(sys.C, T);
  Vector out = e_c.topRightCorner(j, sys.n_env) * init.env_dist;
  if (init.mean.any()) out += numerics::expm(sys.MA, T) * init.mean;
  return out;
}

/// int_0^T Mbar(t) dt from the top-right blocks of e^{C1 T} and e^{C2 T}.
inline Vector integrated_mean(const AssembledSystem& sys,
                              const InitialCondition& init, double T) {
  const int j = sys.J();
  const int jp = sys.J_plus();
  require(init.mean.size() == j && init.env_dist.size() == sys.n_env,
          "integrated_mean: initial condition has wrong size");
  const Matrix e2 = numerics::expm(sys.C2, T);
  Vector out = e2.block(0, 2 * jp - sys.n_env, j, sys.n_env) * init.env_dist;
  if (init.mean.any()) {
    const Matrix e1 = numerics::expm(sys.C1, T);
    out += e1.topRightCorner(j, j) * init.mean;
  }
  return out;
}

inline TransientState transient_state(const AssembledSystem& sys,
                                      const InitialCondition& init, double T,
                                      bool with_integral = true) {
  TransientState s;
  s.t = T;
  s.env_dist = env_distribution(sys, init.env_dist, T);
  s.mean = transient_mean(sys, init, T);
  if (with_integral) s.integrated_mean = integrated_mean(sys, init, T);
  return s;
}

inline StabilityVerdict stability(const AssembledSystem& sys) {
  StabilityVerdict v;
  v.omega = numerics::spectral_abscissa(sys.MA);
  v.marginal = std::abs(v.omega) < StabilityVerdict::kMarginBand;
  v.stable = v.omega < 0.0 && !v.marginal;
  return v;
}

struct StationaryMoments {
  Vector env_dist;  // pi
  Vector mean;      // Mbar
  StabilityVerdict verdict;
};

/// Stationary pi (Aenv^T pi = 0, sum 1) and Mbar = -(M + A)^{-1} L pi.
/// Refuses with NumericError unless the network is stable.
inline StationaryMoments stationary_mean(const AssembledSystem& sys) {
  StationaryMoments out;
  out.verdict = stability(sys);
  if (!out.verdict.stable) {
    throw NumericError("stationary_mean: network is not stable (omega = " +
                       std::to_string(out.verdict.omega) + ", " +
                       out.verdict.note() + ")");
  }
  out.env_dist = numerics::stationary_distribution(sys.A_env);
  out.mean = numerics::solve_linear(sys.MA, -(sys.L * out.env_dist)).x;
  return out;
}

/// v(T) = <rho, Mbar(T)>.
inline double metric_v(const AssembledSystem& sys, const InitialCondition& init,
                       const Vector& rho, double T) {
  require(rho.size() == sys.J(), "metric_v: weight vector must have J entries");
  if (!rho.any()) return 0.0;
  return rho.dot(transient_mean(sys, init, T));
}

/// w(T) = <rho, int_0^T Mbar(t) dt>.
inline double metric_w(const AssembledSystem& sys, const InitialCondition& init,
                       const Vector& rho, double T) {
  require(rho.size() == sys.J(), "metric_w: weight vector must have J entries");
  if (!rho.any()) return 0.0;
  return rho.dot(integrated_mean(sys, init, T));
}

/// Broadcasts per-queue weights to the J-vector (same weight in every env).
inline Vector per_queue_weights(const NetworkModel& m,
                                const std::vector<double>& w) {
  require(static_cast<int>(w.size()) == m.n_queues,
          "per-queue weights must have n_queues entries");
  Vector rho(m.state_dim());
  for (int i = 0; i < m.n_env; ++i) {
    for (int q = 0; q < m.n_queues; ++q) rho(m.index(i, q)) = w[q];
  }
  return rho;
}

/// Loss-rate weights: E Z_l(T) = <rho, int Mbar> + <refused, int pi>, where
/// rho(i, n) = sum of counted leave rates + sum over jumps out of i of
/// alpha * loss_weight_n.
inline Vector loss_rate_weights(const NetworkModel& m,
                                const std::set<int>& counted_departures) {
  Vector rho = Vector::Zero(m.state_dim());
  for (int i = 0; i < m.n_env; ++i) {
    for (int q : counted_departures) rho(m.index(i, q)) += m.leave_rate(i, q);
  }
  for (const auto& t : m.transitions) {
    for (int q = 0; q < m.n_queues; ++q) {
      rho(m.index(t.from_env, q)) +=
          t.rate * static_cast<double>(t.loss_weights(q));
    }
  }
  return rho;
}

inline Vector refused_rates(const NetworkModel& m) {
  Vector r = Vector::Zero(m.n_env);
  for (int i = 0; i < m.n_env; ++i) r(i) = m.rejected_rate(i);
  return r;
}

/// Expected cumulative arrivals and losses over [0, T].
struct CumulativeCounts {
  double arrivals = 0.0;
  double losses = 0.0;
};

/// Counter route: augment the model with arrival and loss counters and read
/// their transient means (first-moment formula only, no time integrals).
inline CumulativeCounts cumulative_counts_by_counter(
    const NetworkModel& m, const std::set<int>& counted_departures,
    const InitialCondition& init, double T) {
  const NetworkModel lossy = augment_with_loss_counter(m, counted_departures);
  const NetworkModel both = augment_with_arrival_counter(lossy);
  const InitialCondition ic2 =
      extend_initial_condition(extend_initial_condition(init, m), lossy);
  const AssembledSystem sys = assemble(both);
  const Vector mean = transient_mean(sys, ic2, T);
  CumulativeCounts out;
  const int n = both.n_queues;
  for (int i = 0; i < m.n_env; ++i) {
    out.losses += mean(both.index(i, n - 2));
    out.arrivals += mean(both.index(i, n - 1));
  }
  return out;
}

/// Integral route: weighted time integrals of Mbar and pi on the original
/// model.
inline CumulativeCounts cumulative_counts_by_integral(
    const NetworkModel& m, const std::set<int>& counted_departures,
    const InitialCondition& init, double T) {
  const AssembledSystem sys = assemble(m);
  const Vector int_pi = integrated_env_distribution(sys, init.env_dist, T);
  const Vector rho = loss_rate_weights(m, counted_departures);
  CumulativeCounts out;
  out.losses = metric_w(sys, init, rho, T) + refused_rates(m).dot(int_pi);
  Vector arr = m.arrival_rates.rowwise().sum() + refused_rates(m);
  out.arrivals = arr.dot(int_pi);
  return out;
}

}  // namespace mtnet
