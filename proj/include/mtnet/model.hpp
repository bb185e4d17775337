#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mtnet/core.hpp"

namespace mtnet {

using IntMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;
using IntVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

/// Event that, at rate `rate`, moves the environment from `from_env` to
/// `to_env` (equal values are allowed) and replaces the population m by A m.
struct MultiplicativeTransition {
  int from_env = 0;  // 0-based
  int to_env = 0;    // 0-based
  double rate = 0.0;
  IntMatrix matrix;
  /// A jump with population m destroys <loss_weights, m> customers. Only
  /// meaningful for queues whose column of `matrix` is all zero.
  IntVector loss_weights;
};

struct ModelLabels {
  std::vector<std::string> queues;
  std::vector<std::string> env;
};

/// Markov-modulated network of infinite-server queues with multiplicative
/// transitions. Indices are 0-based throughout; the JSON file format is
/// 1-based (see model_io.hpp).
///
/// departure_rates[i](n, 0) is the per-customer rate of leaving the network
/// from queue n in environment i; departure_rates[i](n, k + 1) is the rate of
/// moving to queue k.
struct NetworkModel {
  int n_queues = 0;
  int n_env = 0;
  Matrix arrival_rates;                // I x N
  std::vector<Matrix> departure_rates;  // I entries, each N x (N+1)
  std::vector<MultiplicativeTransition> transitions;
  /// External arrivals refused in environment i (no queue can take them);
  /// they count towards arrivals and losses but never enter the network.
  Vector rejected_arrival_rates;  // I (may be empty = all zero)
  ModelLabels labels;

  double departure(int env, int from, int to_queue) const {
    return departure_rates[env](from, to_queue + 1);
  }
  double leave_rate(int env, int from) const {
    return departure_rates[env](from, 0);
  }
  double rejected_rate(int env) const {
    return rejected_arrival_rates.size() == 0 ? 0.0
                                              : rejected_arrival_rates(env);
  }
  int state_dim() const { return n_queues * n_env; }
  /// Position of (env, queue) in the environment-major J-vector.
  int index(int env, int queue) const { return env * n_queues + queue; }
};

/// Creates a model of the given size with every rate zero and no transitions.
inline NetworkModel make_empty_model(int n_queues, int n_env) {
  require(n_queues > 0 && n_env > 0, "model dimensions must be positive");
  NetworkModel m;
  m.n_queues = n_queues;
  m.n_env = n_env;
  m.arrival_rates = Matrix::Zero(n_env, n_queues);
  m.departure_rates.assign(static_cast<std::size_t>(n_env),
                           Matrix::Zero(n_queues, n_queues + 1));
  m.rejected_arrival_rates = Vector::Zero(n_env);
  return m;
}

inline MultiplicativeTransition make_transition(int from, int to, double rate,
                                                IntMatrix a) {
  MultiplicativeTransition t;
  t.from_env = from;
  t.to_env = to;
  t.rate = rate;
  t.loss_weights = IntVector::Zero(a.rows());
  t.matrix = std::move(a);
  return t;
}

inline IntMatrix identity_matrix(int n) { return IntMatrix::Identity(n, n); }

struct ValidationReport {
  std::vector<std::string> issues;
  bool ok() const { return issues.empty(); }
  std::string to_string() const {
    std::ostringstream os;
    for (const auto& s : issues) os << s << '\n';
    return os.str();
  }
};

namespace detail {

inline bool rate_ok(double r) { return std::isfinite(r) && r >= 0.0; }

// Strong connectivity of the digraph with an edge i->j whenever some
// transition i->j (i != j) has positive rate.
inline bool env_irreducible(const NetworkModel& m) {
  const int n = m.n_env;
  std::vector<std::vector<int>> fwd(static_cast<std::size_t>(n));
  std::vector<std::vector<int>> bwd(static_cast<std::size_t>(n));
  for (const auto& t : m.transitions) {
    if (t.from_env == t.to_env || !(t.rate > 0.0)) continue;
    if (t.from_env < 0 || t.from_env >= n || t.to_env < 0 || t.to_env >= n) {
      continue;
    }
    fwd[t.from_env].push_back(t.to_env);
    bwd[t.to_env].push_back(t.from_env);
  }
  auto reaches_all = [n](const std::vector<std::vector<int>>& adj) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int w : adj[v]) {
        if (!seen[w]) {
          seen[w] = 1;
          ++count;
          stack.push_back(w);
        }
      }
    }
    return count == n;
  };
  return reaches_all(fwd) && reaches_all(bwd);
}

}  // namespace detail

struct ValidationOptions {
  /// Irreducibility is required by stationary analysis; transient analysis
  /// of e.g. an absorbing repair-free environment is still meaningful.
  bool require_irreducible = true;
};

/// Lists every violated invariant; an empty report means well-formed.
inline ValidationReport validate(const NetworkModel& m,
                                 const ValidationOptions& opt = {}) {
  ValidationReport rep;
  auto issue = [&rep](const std::string& s) { rep.issues.push_back(s); };
  const int n = m.n_queues;
  const int envs = m.n_env;
  if (n <= 0) issue("n_queues must be positive");
  if (envs <= 0) issue("n_env must be positive");
  if (n <= 0 || envs <= 0) return rep;

  if (m.arrival_rates.rows() != envs || m.arrival_rates.cols() != n) {
    issue("arrival_rates must be n_env x n_queues");
  } else {
    for (int i = 0; i < envs; ++i) {
      for (int q = 0; q < n; ++q) {
        const double r = m.arrival_rates(i, q);
        if (!std::isfinite(r)) {
          issue("non-finite arrival rate at (" + std::to_string(i + 1) + "," +
                std::to_string(q + 1) + ")");
        } else if (r < 0.0) {
          issue("negative rate at (" + std::to_string(i + 1) + "," +
                std::to_string(q + 1) + ")");
        }
      }
    }
  }

  if (static_cast<int>(m.departure_rates.size()) != envs) {
    issue("departure_rates must have n_env entries");
  } else {
    for (int i = 0; i < envs; ++i) {
      const Matrix& d = m.departure_rates[i];
      if (d.rows() != n || d.cols() != n + 1) {
        issue("departure_rates[" + std::to_string(i + 1) +
              "] must be n_queues x (n_queues + 1)");
        continue;
      }
      for (int q = 0; q < n; ++q) {
        for (int k = 0; k <= n; ++k) {
          if (!detail::rate_ok(d(q, k))) {
            issue("negative or non-finite departure rate at (" +
                  std::to_string(i + 1) + "," + std::to_string(q + 1) + "," +
                  std::to_string(k) + ")");
          }
        }
        if (d(q, q + 1) != 0.0) {
          issue("self-routing departure rate must be 0 at (" +
                std::to_string(i + 1) + "," + std::to_string(q + 1) + ")");
        }
      }
    }
  }

  if (m.rejected_arrival_rates.size() != 0) {
    if (m.rejected_arrival_rates.size() != envs) {
      issue("rejected_arrival_rates must have n_env entries");
    } else {
      for (int i = 0; i < envs; ++i) {
        if (!detail::rate_ok(m.rejected_arrival_rates(i))) {
          issue("negative or non-finite rejected arrival rate in env " +
                std::to_string(i + 1));
        }
      }
    }
  }

  for (std::size_t k = 0; k < m.transitions.size(); ++k) {
    const auto& t = m.transitions[k];
    const std::string where = "transition " + std::to_string(k + 1);
    if (t.from_env < 0 || t.from_env >= envs || t.to_env < 0 ||
        t.to_env >= envs) {
      issue(where + ": environment index out of range");
    }
    if (!detail::rate_ok(t.rate)) issue(where + ": negative or non-finite rate");
    if (t.matrix.rows() != n || t.matrix.cols() != n) {
      issue(where + ": matrix must be n_queues x n_queues");
      continue;
    }
    if ((t.matrix.array() < 0).any()) {
      issue(where + ": matrix entries must be nonnegative integers");
    }
    if (t.loss_weights.size() != n) {
      issue(where + ": loss_weights must have n_queues entries");
      continue;
    }
    for (int q = 0; q < n; ++q) {
      if (t.loss_weights(q) < 0) {
        issue(where + ": negative loss weight for queue " +
              std::to_string(q + 1));
      } else if (t.loss_weights(q) > 0 && t.matrix.col(q).any()) {
        issue(where + ": queue " + std::to_string(q + 1) +
              " is counted lost but relocated by the matrix");
      }
    }
  }

  if (!m.labels.queues.empty() &&
      static_cast<int>(m.labels.queues.size()) != n) {
    issue("labels.queues must have n_queues entries");
  }
  if (!m.labels.env.empty() && static_cast<int>(m.labels.env.size()) != envs) {
    issue("labels.env must have n_env entries");
  }

  if (opt.require_irreducible && envs > 1 && !detail::env_irreducible(m)) {
    issue("environment chain is not irreducible");
  }
  return rep;
}

/// Throws ModelError carrying the report when the model is malformed.
inline void ensure_valid(const NetworkModel& m,
                         const ValidationOptions& opt = {}) {
  const auto rep = validate(m, opt);
  if (!rep.ok()) throw ModelError("invalid model:\n" + rep.to_string());
}

/// I x I generator of the environment: off-diagonal (i, j) sums the rates of
/// all transitions i -> j; self-transitions do not move the environment.
inline Matrix aggregate_env_generator(const NetworkModel& m) {
  Matrix g = Matrix::Zero(m.n_env, m.n_env);
  for (const auto& t : m.transitions) {
    if (t.from_env != t.to_env) g(t.from_env, t.to_env) += t.rate;
  }
  for (int i = 0; i < m.n_env; ++i) {
    g(i, i) = 0.0;
    g(i, i) = -g.row(i).sum();
  }
  return g;
}

/// Per-environment total transition rate, self-transitions included.
inline Vector total_transition_rates(const NetworkModel& m) {
  Vector out = Vector::Zero(m.n_env);
  for (const auto& t : m.transitions) out(t.from_env) += t.rate;
  return out;
}

namespace detail {

// Copy of `m` with one extra queue appended (index N). The extra queue has
// no arrivals and no departures; every matrix is extended with a zero column
// and the row `[counter_row, 1]`.
inline NetworkModel append_queue(const NetworkModel& m,
                                 const std::vector<IntVector>& counter_rows,
                                 const std::string& label) {
  const int n = m.n_queues;
  NetworkModel out = make_empty_model(n + 1, m.n_env);
  out.arrival_rates.leftCols(n) = m.arrival_rates;
  for (int i = 0; i < m.n_env; ++i) {
    Matrix& d = out.departure_rates[i];
    d.topLeftCorner(n, n + 1) = m.departure_rates[i];
  }
  if (m.rejected_arrival_rates.size() == m.n_env) {
    out.rejected_arrival_rates = m.rejected_arrival_rates;
  }
  out.transitions.reserve(m.transitions.size());
  for (std::size_t k = 0; k < m.transitions.size(); ++k) {
    const auto& t = m.transitions[k];
    IntMatrix a = IntMatrix::Zero(n + 1, n + 1);
    a.topLeftCorner(n, n) = t.matrix;
    a.block(n, 0, 1, n) = counter_rows[k].transpose();
    a(n, n) = 1;
    MultiplicativeTransition nt = make_transition(t.from_env, t.to_env,
                                                  t.rate, std::move(a));
    nt.loss_weights.head(n) = t.loss_weights;
    out.transitions.push_back(std::move(nt));
  }
  out.labels = m.labels;
  if (!out.labels.queues.empty()) out.labels.queues.push_back(label);
  return out;
}

}  // namespace detail

/// Appends a queue (index N) counting lost customers: every counted
/// departure stream (queue n -> outside) is redirected into it, every
/// multiplicative jump adds <loss_weights, m> to it, and refused arrivals
/// flow into it. The counter never drains, so its transient mean is the
/// expected cumulative loss. The result carries no loss annotations.
inline NetworkModel augment_with_loss_counter(
    const NetworkModel& m, const std::set<int>& counted_departures) {
  const int n = m.n_queues;
  for (int q : counted_departures) {
    require(q >= 0 && q < n, "augment_with_loss_counter: queue out of range");
    bool any = false;
    for (int i = 0; i < m.n_env; ++i) any = any || m.leave_rate(i, q) > 0.0;
    if (!any) {
      throw ArgumentError("augment_with_loss_counter: queue " +
                          std::to_string(q + 1) +
                          " never leaves the network; nothing to count");
    }
  }
  std::vector<IntVector> rows;
  rows.reserve(m.transitions.size());
  for (const auto& t : m.transitions) rows.push_back(t.loss_weights);
  NetworkModel out = detail::append_queue(m, rows, "lost");
  for (int i = 0; i < m.n_env; ++i) {
    for (int q : counted_departures) {
      out.departure_rates[i](q, n + 1) = m.leave_rate(i, q);
      out.departure_rates[i](q, 0) = 0.0;
    }
    out.arrival_rates(i, n) = m.rejected_rate(i);
    out.rejected_arrival_rates(i) = 0.0;
  }
  for (auto& t : out.transitions) t.loss_weights.setZero();
  return out;
}

/// Appends a queue (index N) that receives a copy of every external arrival,
/// refused ones included, so its mean is the expected number of arrivals.
inline NetworkModel augment_with_arrival_counter(const NetworkModel& m) {
  std::vector<IntVector> rows(m.transitions.size(),
                              IntVector::Zero(m.n_queues));
  NetworkModel out = detail::append_queue(m, rows, "arrivals");
  for (int i = 0; i < m.n_env; ++i) {
    out.arrival_rates(i, m.n_queues) =
        m.arrival_rates.row(i).sum() + m.rejected_rate(i);
  }
  return out;
}

/// Initial law of (M(0), X(0)) as far as first moments are concerned.
struct InitialCondition {
  Vector env_dist;  // pi(0), length I
  Vector mean;      // Mbar(0), length J, entry (i,n) = E[M_n(0) 1{X(0)=i}]

  /// Deterministic start: population `m` in environment `env`.
  static InitialCondition point(const NetworkModel& model,
                                const std::vector<double>& m, int env) {
    require(static_cast<int>(m.size()) == model.n_queues,
            "initial state must have n_queues entries");
    require(env >= 0 && env < model.n_env, "initial env out of range");
    InitialCondition ic;
    ic.env_dist = Vector::Zero(model.n_env);
    ic.env_dist(env) = 1.0;
    ic.mean = Vector::Zero(model.state_dim());
    for (int q = 0; q < model.n_queues; ++q) {
      require(m[q] >= 0.0, "initial population must be nonnegative");
      ic.mean(model.index(env, q)) = m[q];
    }
    return ic;
  }

  static InitialCondition empty(const NetworkModel& model, int env = 0) {
    return point(model, std::vector<double>(model.n_queues, 0.0), env);
  }

  void check(const NetworkModel& model) const {
    require(env_dist.size() == model.n_env, "pi(0) must have n_env entries");
    require(mean.size() == model.state_dim(), "Mbar(0) must have J entries");
    require((env_dist.array() >= 0.0).all(), "pi(0) must be nonnegative");
    require(std::abs(env_dist.sum() - 1.0) <= 1e-12, "pi(0) must sum to 1");
    for (int i = 0; i < model.n_env; ++i) {
      for (int q = 0; q < model.n_queues; ++q) {
        if (env_dist(i) == 0.0) {
          require(mean(model.index(i, q)) == 0.0,
                  "Mbar(0) must vanish where pi(0) does");
        }
      }
    }
  }
};

/// Extends an initial condition to an augmented model (counter queue last,
/// starting at zero).
inline InitialCondition extend_initial_condition(const InitialCondition& ic,
                                                 const NetworkModel& base) {
  InitialCondition out;
  out.env_dist = ic.env_dist;
  const int n = base.n_queues;
  out.mean = Vector::Zero(base.n_env * (n + 1));
  for (int i = 0; i < base.n_env; ++i) {
    out.mean.segment(i * (n + 1), n) = ic.mean.segment(i * n, n);
  }
  return out;
}

}  // namespace mtnet
