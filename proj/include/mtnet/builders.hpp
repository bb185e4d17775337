#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <set>
#include <utility>
#include <vector>

#include "mtnet/core.hpp"
#include "mtnet/model.hpp"

namespace mtnet::builders {

/// Subsets of {0..K-1} as bitmasks in the canonical order used for both
/// environment states and storage queues: the full set first, then by
/// decreasing cardinality, lexicographic (on sorted elements) within one
/// cardinality. The empty set, when included, is last.
inline std::vector<std::uint32_t> ordered_subsets(int k, bool include_empty) {
  require(k >= 1 && k <= 16, "ordered_subsets: K must be in 1..16");
  std::vector<std::uint32_t> out;
  const std::uint32_t total = 1u << k;
  for (std::uint32_t s = include_empty ? 0u : 1u; s < total; ++s) {
    out.push_back(s);
  }
  auto elements = [k](std::uint32_t s) {
    std::vector<int> e;
    for (int b = 0; b < k; ++b) {
      if (s & (1u << b)) e.push_back(b);
    }
    return e;
  };
  std::sort(out.begin(), out.end(), [&](std::uint32_t a, std::uint32_t b) {
    const int ca = std::popcount(a);
    const int cb = std::popcount(b);
    if (ca != cb) return ca > cb;
    return elements(a) < elements(b);
  });
  return out;
}

inline std::string subset_label(std::uint32_t s, int k) {
  std::string out = "{";
  bool first = true;
  for (int b = 0; b < k; ++b) {
    if (s & (1u << b)) {
      if (!first) out += ",";
      out += std::to_string(b + 1);
      first = false;
    }
  }
  return out + "}";
}

namespace detail {

inline int position_of(const std::vector<std::uint32_t>& order,
                       std::uint32_t s) {
  const auto it = std::find(order.begin(), order.end(), s);
  return it == order.end() ? -1 : static_cast<int>(it - order.begin());
}

inline void check_rates(const std::vector<double>& v, std::size_t n,
                        const std::string& name) {
  require(v.size() == n, name + " must have " + std::to_string(n) + " entries");
  for (double x : v) {
    require(std::isfinite(x) && x >= 0.0, name + " must be finite and >= 0");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Retrial network

/// Stations 0..S-1 alternate between up and down. While down, a station's
/// arrivals and any clients routed to it go to its retrial pool; at failure
/// its whole population moves to the pool.
struct RetrialNetworkParams {
  std::vector<double> arrival;  // lambda_n
  Matrix routing;               // S x (S+1): col 0 = leave, col k+1 = station k
  std::vector<double> retrial;  // kappa_n
  std::vector<double> renege;   // nu_n
  std::vector<double> up_rate;    // gamma_n^(u): failure rate
  std::vector<double> down_rate;  // gamma_n^(d): repair rate

  std::size_t stations() const { return arrival.size(); }
};

/// A single unreliable station with a retrial pool.
inline RetrialNetworkParams single_retrial_params(double lambda, double kappa,
                                                  double nu, double mu,
                                                  double gamma_u,
                                                  double gamma_d) {
  RetrialNetworkParams p;
  p.arrival = {lambda};
  p.routing = Matrix::Zero(1, 2);
  p.routing(0, 0) = mu;
  p.retrial = {kappa};
  p.renege = {nu};
  p.up_rate = {gamma_u};
  p.down_rate = {gamma_d};
  return p;
}

/// Queues 0..S-1 are stations, S..2S-1 their retrial pools; environment
/// states are up-sets in canonical subset order (all up first).
inline NetworkModel build_retrial_network(const RetrialNetworkParams& p) {
  const int s = static_cast<int>(p.stations());
  require(s >= 1, "retrial network needs at least one station");
  detail::check_rates(p.retrial, s, "retrial");
  detail::check_rates(p.renege, s, "renege");
  detail::check_rates(p.up_rate, s, "up_rate");
  detail::check_rates(p.down_rate, s, "down_rate");
  detail::check_rates(p.arrival, s, "arrival");
  require(p.routing.rows() == s && p.routing.cols() == s + 1,
          "routing must be S x (S+1)");
  for (int n = 0; n < s; ++n) {
    require(p.routing(n, n + 1) == 0.0, "a station cannot route to itself");
  }

  const auto states = ordered_subsets(s, true);
  const int n_env = static_cast<int>(states.size());
  NetworkModel m = make_empty_model(2 * s, n_env);
  for (int i = 0; i < n_env; ++i) {
    const std::uint32_t up = states[i];
    auto is_up = [up](int n) { return (up >> n) & 1u; };
    Matrix& d = m.departure_rates[i];
    for (int n = 0; n < s; ++n) {
      m.arrival_rates(i, n) = is_up(n) ? p.arrival[n] : 0.0;
      m.arrival_rates(i, n + s) = is_up(n) ? 0.0 : p.arrival[n];
      d(n, 0) = p.routing(n, 0);
      for (int k = 0; k < s; ++k) {
        if (k == n) continue;
        if (is_up(k)) {
          d(n, k + 1) = p.routing(n, k + 1);
        } else {
          d(n, k + s + 1) = p.routing(n, k + 1);
        }
      }
      d(n + s, n + 1) = is_up(n) ? p.retrial[n] : 0.0;
      d(n + s, 0) = p.renege[n];
    }
    for (int n = 0; n < s; ++n) {
      const int j = detail::position_of(states, up ^ (1u << n));
      if (is_up(n)) {
        IntMatrix a = identity_matrix(2 * s);
        a(n, n) = 0;
        a(n + s, n) = 1;
        m.transitions.push_back(make_transition(i, j, p.up_rate[n], a));
      } else {
        m.transitions.push_back(
            make_transition(i, j, p.down_rate[n], identity_matrix(2 * s)));
      }
    }
    m.labels.env.push_back("up=" + subset_label(up, s));
  }
  for (int n = 0; n < s; ++n) {
    m.labels.queues.push_back("station" + std::to_string(n + 1));
  }
  for (int n = 0; n < s; ++n) {
    m.labels.queues.push_back("retrial" + std::to_string(n + 1));
  }
  return m;
}

/// Retrial pools whose renege departures count as losses.
inline std::set<int> retrial_loss_queues(const RetrialNetworkParams& p) {
  std::set<int> out;
  const int s = static_cast<int>(p.stations());
  for (int n = 0; n < s; ++n) {
    if (p.renege[n] > 0.0) out.insert(n + s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rerouting network

/// Origin-destination pair n uses direct link n, or the two-link indirect
/// route `indirect[n]` while link n is down.
struct ReroutingParams {
  std::vector<double> arrival;  // lambda_n
  std::vector<double> service;  // mu_n
  std::vector<std::array<int, 2>> indirect;  // 0-based link indices
  std::vector<double> up_rate;
  std::vector<double> down_rate;
  bool rerouting = true;  // false: clients of a failed direct link are lost

  std::size_t pairs() const { return arrival.size(); }
};

/// Ring on three links where pair n detours over the other two.
inline ReroutingParams ring3_rerouting_params(double lambda, double mu,
                                              double gamma_u, double gamma_d) {
  ReroutingParams p;
  p.arrival.assign(3, lambda);
  p.service.assign(3, mu);
  p.indirect = {{{1, 2}}, {{0, 2}}, {{0, 1}}};
  p.up_rate.assign(3, gamma_u);
  p.down_rate.assign(3, gamma_d);
  return p;
}

/// Queues 0..P-1 count clients on direct routes, P..2P-1 on indirect routes.
/// Clients on a failing link with no usable detour, and clients on any
/// indirect route through the failing link, are lost (loss_weights).
/// Arrivals finding neither route available are refused.
inline NetworkModel build_rerouting_network(const ReroutingParams& p) {
  const int np = static_cast<int>(p.pairs());
  require(np >= 3, "rerouting needs at least three links");
  detail::check_rates(p.arrival, np, "arrival");
  detail::check_rates(p.service, np, "service");
  detail::check_rates(p.up_rate, np, "up_rate");
  detail::check_rates(p.down_rate, np, "down_rate");
  require(static_cast<int>(p.indirect.size()) == np,
          "indirect must have one route per pair");
  for (int n = 0; n < np; ++n) {
    const auto [a, b] = p.indirect[n];
    require(a >= 0 && a < np && b >= 0 && b < np && a != b && a != n && b != n,
            "indirect route of pair " + std::to_string(n + 1) +
                " must be two distinct other links");
  }

  const auto states = ordered_subsets(np, true);
  const int n_env = static_cast<int>(states.size());
  NetworkModel m = make_empty_model(2 * np, n_env);
  for (int i = 0; i < n_env; ++i) {
    const std::uint32_t up = states[i];
    auto is_up = [up](int n) { return ((up >> n) & 1u) != 0; };
    auto detour_up = [&](int n) {
      return is_up(p.indirect[n][0]) && is_up(p.indirect[n][1]);
    };
    double refused = 0.0;
    for (int n = 0; n < np; ++n) {
      if (is_up(n)) {
        m.arrival_rates(i, n) = p.arrival[n];
      } else if (p.rerouting && detour_up(n)) {
        m.arrival_rates(i, n + np) = p.arrival[n];
      } else {
        refused += p.arrival[n];
      }
      m.departure_rates[i](n, 0) = p.service[n];
      m.departure_rates[i](n + np, 0) = p.service[n];
    }
    m.rejected_arrival_rates(i) = refused;

    for (int n = 0; n < np; ++n) {
      const int j = detail::position_of(states, up ^ (1u << n));
      IntMatrix a = identity_matrix(2 * np);
      if (is_up(n)) {
        IntVector c = IntVector::Zero(2 * np);
        a(n, n) = 0;
        if (p.rerouting && detour_up(n)) {
          a(n + np, n) = 1;
        } else {
          c(n) = 1;
        }
        for (int k = 0; k < np; ++k) {
          if (p.indirect[k][0] == n || p.indirect[k][1] == n) {
            a(k + np, k + np) = 0;
            c(k + np) = 1;
          }
        }
        auto t = make_transition(i, j, p.up_rate[n], a);
        t.loss_weights = c;
        m.transitions.push_back(std::move(t));
      } else {
        a(n + np, n + np) = 0;
        a(n, n + np) = 1;
        m.transitions.push_back(make_transition(i, j, p.down_rate[n], a));
      }
    }
    m.labels.env.push_back("up=" + subset_label(up, np));
  }
  for (int n = 0; n < np; ++n) {
    m.labels.queues.push_back("direct" + std::to_string(n + 1));
  }
  for (int n = 0; n < np; ++n) {
    m.labels.queues.push_back("indirect" + std::to_string(n + 1));
  }
  return m;
}

/// Link-resource weights: a direct client occupies one link, an indirect
/// client two.
inline std::vector<double> rerouting_usage_weights(std::size_t pairs) {
  std::vector<double> w(2 * pairs, 1.0);
  std::fill(w.begin() + static_cast<std::ptrdiff_t>(pairs), w.end(), 2.0);
  return w;
}

// ---------------------------------------------------------------------------
// Storage network

/// Files are stored on subsets of K locations. Queue n holds the files stored
/// on subset n (canonical order, empty set excluded); environment state i is
/// the set of locations that are up (canonical order, empty set last).
struct StorageParams {
  int locations = 0;            // K
  std::vector<double> arrival;  // lambda_n per target subset
  Matrix transfer;  // N x (N+1) copy/delete rates; col 0 = delete completely
  std::vector<double> up_rate;
  std::vector<double> down_rate;
};

inline std::vector<std::uint32_t> storage_subsets(int k) {
  return ordered_subsets(k, false);
}

/// First (0-based) queue holding single-location files; these occupy the
/// last K queues.
inline int storage_single_location_begin(int k) { return (1 << k) - 1 - k; }

/// Arrivals aimed at subset n land on the part of n that is up; if none of
/// n is up they are refused. Transfers into a subset with a down location
/// are suppressed. A failing location is dropped from every subset that
/// contains it; files stored only there are lost.
inline NetworkModel build_storage_network(const StorageParams& p) {
  const int k = p.locations;
  require(k >= 1 && k <= 8, "storage: K must be in 1..8");
  const auto subsets = storage_subsets(k);
  const auto states = ordered_subsets(k, true);
  const int n = static_cast<int>(subsets.size());
  const int n_env = static_cast<int>(states.size());
  detail::check_rates(p.arrival, n, "arrival");
  detail::check_rates(p.up_rate, k, "up_rate");
  detail::check_rates(p.down_rate, k, "down_rate");
  Matrix transfer = p.transfer.size() == 0 ? Matrix::Zero(n, n + 1)
                                           : p.transfer;
  require(transfer.rows() == n && transfer.cols() == n + 1,
          "transfer must be N x (N+1)");

  NetworkModel m = make_empty_model(n, n_env);
  for (int i = 0; i < n_env; ++i) {
    const std::uint32_t up = states[i];
    double refused = 0.0;
    for (int target = 0; target < n; ++target) {
      const std::uint32_t landed = subsets[target] & up;
      if (landed == 0) {
        refused += p.arrival[target];
      } else {
        m.arrival_rates(i, detail::position_of(subsets, landed)) +=
            p.arrival[target];
      }
    }
    m.rejected_arrival_rates(i) = refused;
    for (int q = 0; q < n; ++q) {
      m.departure_rates[i](q, 0) = transfer(q, 0);
      for (int q2 = 0; q2 < n; ++q2) {
        if (q2 == q) continue;
        if ((subsets[q2] & ~up) == 0) {
          m.departure_rates[i](q, q2 + 1) = transfer(q, q2 + 1);
        }
      }
    }
    for (int loc = 0; loc < k; ++loc) {
      const std::uint32_t bit = 1u << loc;
      const int j = detail::position_of(states, up ^ bit);
      if (up & bit) {
        IntMatrix a = identity_matrix(n);
        IntVector c = IntVector::Zero(n);
        for (int q = 0; q < n; ++q) {
          if (!(subsets[q] & bit)) continue;
          a(q, q) = 0;
          const std::uint32_t rest = subsets[q] & ~bit;
          if (rest == 0) {
            c(q) = 1;
          } else {
            a(detail::position_of(subsets, rest), q) = 1;
          }
        }
        auto t = make_transition(i, j, p.up_rate[loc], a);
        t.loss_weights = c;
        m.transitions.push_back(std::move(t));
      } else {
        m.transitions.push_back(
            make_transition(i, j, p.down_rate[loc], identity_matrix(n)));
      }
    }
    m.labels.env.push_back("up=" + subset_label(up, k));
  }
  for (auto s : subsets) m.labels.queues.push_back("files" + subset_label(s, k));
  return m;
}

/// Number of stored copies per queue (|S(n)|).
inline std::vector<double> storage_copy_weights(int k) {
  std::vector<double> w;
  for (auto s : storage_subsets(k)) w.push_back(std::popcount(s));
  return w;
}

// ---------------------------------------------------------------------------
// Two-location premium/basic storage system

struct PremiumStorageParams {
  double lambda = 1e4;     // files per day
  double premium = 0.5;    // fraction of files that are premium (p)
  double copy_rate = 24;   // mu: per-file copy rate to the partner location
  double gamma_u = 0.01;   // failure rate of each location
  double gamma_d = 2.0;    // repair rate of each location
};

/// Queue order of the premium storage model.
enum PremiumQueue : int {
  kPremiumA = 0,
  kPremiumB = 1,
  kPremiumBoth = 2,
  kBasicA = 3,
  kBasicB = 4,
};

/// Five queues: premium-at-A, premium-at-B, premium-at-both, basic-at-A,
/// basic-at-B. Environment: 0 both up, 1 only A up, 2 only B up, 3 both
/// down. A file class arrives at rate lambda * share and is placed on each
/// up location with equal probability; with both locations down arrivals are
/// refused and count as lost. Single-copy premium files are copied to the
/// partner at rate copy_rate while both locations are up (this also covers
/// re-copying after a repair). A failing location loses its single-copy
/// files; premium files stored on both keep their surviving copy.
inline NetworkModel build_premium_storage(const PremiumStorageParams& p) {
  require(p.premium >= 0.0 && p.premium <= 1.0, "premium fraction must be in [0,1]");
  for (double r : {p.lambda, p.copy_rate, p.gamma_u, p.gamma_d}) {
    require(std::isfinite(r) && r >= 0.0, "rates must be finite and >= 0");
  }
  constexpr int n = 5;
  NetworkModel m = make_empty_model(n, 4);
  const double prem = p.premium * p.lambda;
  const double basic = (1.0 - p.premium) * p.lambda;

  m.arrival_rates.row(0) << prem / 2, prem / 2, 0, basic / 2, basic / 2;
  m.arrival_rates.row(1) << prem, 0, 0, basic, 0;
  m.arrival_rates.row(2) << 0, prem, 0, 0, basic;
  m.arrival_rates.row(3).setZero();
  m.rejected_arrival_rates << 0, 0, 0, p.lambda;

  m.departure_rates[0](kPremiumA, kPremiumBoth + 1) = p.copy_rate;
  m.departure_rates[0](kPremiumB, kPremiumBoth + 1) = p.copy_rate;

  auto failure = [](bool location_a) {
    IntMatrix a = identity_matrix(n);
    IntVector c = IntVector::Zero(n);
    const int single = location_a ? kPremiumA : kPremiumB;
    const int other = location_a ? kPremiumB : kPremiumA;
    const int basic_q = location_a ? kBasicA : kBasicB;
    a(single, single) = 0;
    a(basic_q, basic_q) = 0;
    a(kPremiumBoth, kPremiumBoth) = 0;
    a(other, kPremiumBoth) = 1;
    c(single) = 1;
    c(basic_q) = 1;
    return std::pair{a, c};
  };
  const auto [fail_a, loss_a] = failure(true);
  const auto [fail_b, loss_b] = failure(false);
  auto add = [&m](int from, int to, double rate, const IntMatrix& a,
                  const IntVector& c) {
    auto t = make_transition(from, to, rate, a);
    t.loss_weights = c;
    m.transitions.push_back(std::move(t));
  };
  const IntVector none = IntVector::Zero(n);
  const IntMatrix id = identity_matrix(n);
  add(0, 2, p.gamma_u, fail_a, loss_a);  // A fails, B up
  add(1, 3, p.gamma_u, fail_a, loss_a);  // A fails, B already down
  add(0, 1, p.gamma_u, fail_b, loss_b);
  add(2, 3, p.gamma_u, fail_b, loss_b);
  add(2, 0, p.gamma_d, id, none);  // A repaired
  add(3, 1, p.gamma_d, id, none);
  add(1, 0, p.gamma_d, id, none);  // B repaired
  add(3, 2, p.gamma_d, id, none);

  m.labels.queues = {"premium_A", "premium_B", "premium_AB", "basic_A",
                     "basic_B"};
  m.labels.env = {"both_up", "A_up", "B_up", "both_down"};
  return m;
}

/// Stored copies per queue of the premium storage model.
inline std::vector<double> premium_storage_copy_weights() {
  return {1.0, 1.0, 2.0, 1.0, 1.0};
}

// ---------------------------------------------------------------------------
// Small reference models

/// Single M/M/inf queue, one environment state.
inline NetworkModel build_single_queue(double lambda, double mu) {
  NetworkModel m = make_empty_model(1, 1);
  m.arrival_rates(0, 0) = lambda;
  m.departure_rates[0](0, 0) = mu;
  return m;
}

/// Single queue with jumps m -> factor_k * m at rate_k (self-transitions of a
/// one-state environment).
inline NetworkModel build_scalar_jump_model(
    double lambda, double mu,
    const std::vector<std::pair<double, int>>& jumps) {
  NetworkModel m = build_single_queue(lambda, mu);
  for (const auto& [rate, factor] : jumps) {
    require(factor >= 0, "jump factor must be a nonnegative integer");
    IntMatrix a(1, 1);
    a(0, 0) = factor;
    m.transitions.push_back(make_transition(0, 0, rate, a));
  }
  return m;
}

}  // namespace mtnet::builders
