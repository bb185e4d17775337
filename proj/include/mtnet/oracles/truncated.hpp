#pragma once

#include <Eigen/SparseCore>

#include <cmath>
#include <cstdint>
#include <vector>

#include "mtnet/core.hpp"
#include "mtnet/model.hpp"

namespace mtnet::oracles {

struct TruncationOptions {
  double tolerance = 1e-10;       // Poisson tail of the uniformization sum
  double leak_tolerance = 1e-6;   // results with more leaked mass are flagged
  std::int64_t max_states = 4'000'000;
};

/// Law of (M(T), X(T)) on the box prod_n {0..cap_n} x {envs}. Probability
/// that left the box (and never returns) is reported as `leak`.
struct TruncatedDistribution {
  std::vector<int> caps;
  int n_env = 0;
  Vector prob;  // env-major: env * box_size + linear box index
  double leak = 0.0;
  bool flagged = false;
  std::int64_t poisson_terms = 0;

  std::int64_t box_size() const {
    std::int64_t s = 1;
    for (int c : caps) s *= c + 1;
    return s;
  }
  /// Population vector of a linear box index (first queue varies fastest).
  std::vector<std::int64_t> decode(std::int64_t idx) const {
    std::vector<std::int64_t> m(caps.size());
    for (std::size_t q = 0; q < caps.size(); ++q) {
      m[q] = idx % (caps[q] + 1);
      idx /= caps[q] + 1;
    }
    return m;
  }
  double probability(const std::vector<std::int64_t>& m, int env) const {
    std::int64_t idx = 0, stride = 1;
    for (std::size_t q = 0; q < caps.size(); ++q) {
      if (m[q] < 0 || m[q] > caps[q]) return 0.0;
      idx += m[q] * stride;
      stride *= caps[q] + 1;
    }
    return prob(env * box_size() + idx);
  }
  /// First moments E[M_n(T) 1{X(T)=i}] of the retained mass, J-vector.
  Vector mean() const {
    const int n = static_cast<int>(caps.size());
    const std::int64_t box = box_size();
    Vector out = Vector::Zero(n * n_env);
    for (int i = 0; i < n_env; ++i) {
      for (std::int64_t s = 0; s < box; ++s) {
        const double p = prob(i * box + s);
        if (p == 0.0) continue;
        const auto m = decode(s);
        for (int q = 0; q < n; ++q) out(i * n + q) += p * static_cast<double>(m[q]);
      }
    }
    return out;
  }
};

/// Solves the master equation of the truncated chain by uniformization,
/// starting from population m0 in environment env0.
inline TruncatedDistribution truncated_distribution(
    const NetworkModel& model, const std::vector<int>& caps,
    const std::vector<std::int64_t>& m0, int env0, double T,
    const TruncationOptions& opt = {}) {
  const int n = model.n_queues;
  require(static_cast<int>(caps.size()) == n, "truncation: one cap per queue");
  require(static_cast<int>(m0.size()) == n, "truncation: m0 has wrong size");
  require(env0 >= 0 && env0 < model.n_env, "truncation: env out of range");
  require(std::isfinite(T) && T >= 0.0, "truncation: T must be >= 0");

  TruncatedDistribution out;
  out.caps = caps;
  out.n_env = model.n_env;
  std::vector<std::int64_t> stride(static_cast<std::size_t>(n));
  std::int64_t box = 1;
  for (int q = 0; q < n; ++q) {
    require(caps[q] >= 0, "truncation: caps must be >= 0");
    require(m0[q] >= 0 && m0[q] <= caps[q], "truncation: m0 outside the box");
    stride[q] = box;
    box *= caps[q] + 1;
    require(box * model.n_env <= opt.max_states, "truncation: too many states");
  }
  const std::int64_t states = box * model.n_env;

  // Off-diagonal rates into the box; out-of-box moves feed only the exit rate.
  using Triplet = Eigen::Triplet<double, std::int64_t>;
  std::vector<Triplet> trips;
  Vector exit_rate = Vector::Zero(states);
  std::vector<std::int64_t> m(static_cast<std::size_t>(n));
  std::vector<std::int64_t> am(static_cast<std::size_t>(n));
  for (std::int64_t s = 0; s < box; ++s) {
    std::int64_t rest = s;
    for (int q = 0; q < n; ++q) {
      m[q] = rest % (caps[q] + 1);
      rest /= caps[q] + 1;
    }
    for (int i = 0; i < model.n_env; ++i) {
      const std::int64_t from = i * box + s;
      double total = 0.0;
      auto add = [&](std::int64_t to, double r) {
        if (r <= 0.0) return;
        total += r;
        if (to >= 0 && to != from) trips.emplace_back(to, from, r);
        if (to == from) total -= r;  // no-op event
      };
      for (int q = 0; q < n; ++q) {
        const double lam = model.arrival_rates(i, q);
        add(m[q] < caps[q] ? from + stride[q] : -1, lam);
        if (m[q] == 0) continue;
        const double mq = static_cast<double>(m[q]);
        add(from - stride[q], mq * model.leave_rate(i, q));
        for (int k = 0; k < n; ++k) {
          if (k == q) continue;
          const double r = mq * model.departure(i, q, k);
          add(m[k] < caps[k] ? from - stride[q] + stride[k] : -1, r);
        }
      }
      for (const auto& t : model.transitions) {
        if (t.from_env != i) continue;
        bool inside = true;
        std::int64_t idx = 0;
        for (int r = 0; r < n; ++r) {
          std::int64_t acc = 0;
          for (int q = 0; q < n; ++q) acc += t.matrix(r, q) * m[q];
          am[r] = acc;
          if (acc > caps[r]) inside = false;
          idx += acc * stride[r];
        }
        add(inside ? t.to_env * box + idx : -1, t.rate);
      }
      exit_rate(from) = total;
    }
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor, std::int64_t> q_off(states, states);
  q_off.setFromTriplets(trips.begin(), trips.end());

  Vector p = Vector::Zero(states);
  std::int64_t start = 0;
  for (int q = 0; q < n; ++q) start += m0[q] * stride[q];
  p(env0 * box + start) = 1.0;

  const double rate = exit_rate.maxCoeff();
  if (rate > 0.0 && T > 0.0) {
    // p(T) = sum_k Poisson(rate T; k) P^k p(0),  P = I + Q / rate.
    const double lt = rate * T;
    const Vector stay = Vector::Ones(states) - exit_rate / rate;
    Vector term = p;
    Vector acc = Vector::Zero(states);
    double cumulative = 0.0;
    const double log_lt = std::log(lt);
    for (std::int64_t k = 0;; ++k) {
      const double w = std::exp(-lt + static_cast<double>(k) * log_lt -
                                std::lgamma(static_cast<double>(k) + 1.0));
      acc += w * term;
      cumulative += w;
      out.poisson_terms = k + 1;
      if (static_cast<double>(k) > lt && 1.0 - cumulative <= opt.tolerance) break;
      if (k > static_cast<std::int64_t>(lt + 50.0 * std::sqrt(lt) + 100.0)) break;
      term = (q_off * term) / rate + stay.cwiseProduct(term);
    }
    p = acc;
  }
  out.prob = p;
  out.leak = std::max(0.0, 1.0 - p.sum());
  out.flagged = out.leak > opt.leak_tolerance;
  return out;
}

}  // namespace mtnet::oracles
