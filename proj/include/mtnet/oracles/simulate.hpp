#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <set>
#include <vector>

#include "mtnet/core.hpp"
#include "mtnet/model.hpp"
#include "mtnet/parallel.hpp"

namespace mtnet::oracles {

/// Exact event-by-event simulation of (M(t), X(t)).
struct SimulationConfig {
  std::int64_t replications = 1000;
  double horizon = 1.0;
  std::uint64_t seed = 1;
  std::vector<std::int64_t> initial_state;  // empty = all zero
  int initial_env = 0;
  /// Departures to outside from these queues count as losses (Z_l).
  std::set<int> counted_departures;
  /// Z_s accrues <usage_weights, m> dt; J entries (env-major) or empty.
  Vector usage_weights;
  /// Optional JSON-lines event trace; forces a single worker.
  std::ostream* trace = nullptr;
  unsigned threads = 0;
};

struct Estimate {
  double mean = 0.0;
  double sd = 0.0;          // sample standard deviation
  double half_width = 0.0;  // 1.96 sd / sqrt(R)

  bool covers(double value) const {
    return std::abs(value - mean) <= half_width;
  }
};

struct SimulationResult {
  std::int64_t replications = 0;  // completed
  std::int64_t overflowed = 0;    // aborted by the population guard
  Estimate arrivals;              // Z_a(T)
  Estimate losses;                // Z_l(T)
  Estimate usage;                 // Z_s(T)
  std::vector<Estimate> mean_at_horizon;  // E[M_n(T) 1{X(T)=i}], J entries
  std::vector<Estimate> env_at_horizon;   // P(X(T)=i)

  double loss_ratio() const {
    return arrivals.mean > 0.0 ? losses.mean / arrivals.mean : 0.0;
  }
};

/// Counter-based substream seeding: replication r of master seed s always
/// receives the same generator regardless of scheduling.
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t r) {
  std::uint64_t z = master + (r + 1) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace detail {

inline constexpr std::int64_t kPopulationCap = std::int64_t{1} << 31;

struct Channel {
  double rate;
  int kind;    // 0 arrival, 1 refused arrival, 2 transition
  int target;  // queue or transition index
};

struct EnvTables {
  std::vector<Channel> fixed;  // state-independent rates
  double fixed_total = 0.0;
  std::vector<double> out_rate;             // per queue, per customer
  std::vector<std::vector<double>> routes;  // per queue: N+1 destinations
};

inline std::vector<EnvTables> build_tables(const NetworkModel& m) {
  std::vector<EnvTables> tabs(static_cast<std::size_t>(m.n_env));
  for (int i = 0; i < m.n_env; ++i) {
    auto& tb = tabs[i];
    for (int q = 0; q < m.n_queues; ++q) {
      if (m.arrival_rates(i, q) > 0.0) {
        tb.fixed.push_back({m.arrival_rates(i, q), 0, q});
      }
    }
    if (m.rejected_rate(i) > 0.0) tb.fixed.push_back({m.rejected_rate(i), 1, 0});
    for (std::size_t k = 0; k < m.transitions.size(); ++k) {
      const auto& t = m.transitions[k];
      if (t.from_env == i && t.rate > 0.0) {
        tb.fixed.push_back({t.rate, 2, static_cast<int>(k)});
      }
    }
    for (const auto& c : tb.fixed) tb.fixed_total += c.rate;
    tb.out_rate.assign(static_cast<std::size_t>(m.n_queues), 0.0);
    tb.routes.assign(static_cast<std::size_t>(m.n_queues), {});
    for (int q = 0; q < m.n_queues; ++q) {
      const Matrix& d = m.departure_rates[i];
      tb.routes[q].resize(static_cast<std::size_t>(m.n_queues + 1));
      for (int k = 0; k <= m.n_queues; ++k) {
        tb.routes[q][k] = d(q, k);
        tb.out_rate[q] += d(q, k);
      }
    }
  }
  return tabs;
}

struct ReplicationOutcome {
  bool overflow = false;
  double arrivals = 0.0;
  double losses = 0.0;
  double usage = 0.0;
  int env = 0;
  std::vector<std::int64_t> state;
};

inline double uniform01(std::mt19937_64& g) {
  // 53 random bits in (0, 1].
  return (static_cast<double>(g() >> 11) + 1.0) * 0x1.0p-53;
}

inline ReplicationOutcome run_replication(const NetworkModel& m,
                                          const std::vector<EnvTables>& tabs,
                                          const SimulationConfig& cfg,
                                          std::int64_t rep) {
  std::mt19937_64 gen(substream_seed(cfg.seed, static_cast<std::uint64_t>(rep)));
  const int n = m.n_queues;
  ReplicationOutcome out;
  out.state = cfg.initial_state.empty()
                  ? std::vector<std::int64_t>(static_cast<std::size_t>(n), 0)
                  : cfg.initial_state;
  out.env = cfg.initial_env;
  std::vector<std::int64_t> scratch(static_cast<std::size_t>(n));
  const bool usage = cfg.usage_weights.size() > 0;
  std::vector<char> counted(static_cast<std::size_t>(n), 0);
  for (int q : cfg.counted_departures) counted[q] = 1;

  auto trace = [&](double t, const char* kind, int a, int b) {
    if (!cfg.trace) return;
    *cfg.trace << "{\"rep\":" << rep << ",\"t\":" << t << ",\"kind\":\""
               << kind << "\",\"queue\":" << a + 1 << ",\"env\":" << b + 1
               << "}\n";
  };

  double t = 0.0;
  for (;;) {
    const EnvTables& tb = tabs[out.env];
    double total = tb.fixed_total;
    for (int q = 0; q < n; ++q) {
      total += static_cast<double>(out.state[q]) * tb.out_rate[q];
    }
    const double dt = total > 0.0 ? -std::log(uniform01(gen)) / total
                                  : std::numeric_limits<double>::infinity();
    const double step = std::min(dt, cfg.horizon - t);
    if (usage) {
      double w = 0.0;
      for (int q = 0; q < n; ++q) {
        w += cfg.usage_weights(m.index(out.env, q)) *
             static_cast<double>(out.state[q]);
      }
      out.usage += w * step;
    }
    if (t + dt >= cfg.horizon) break;
    t += dt;

    double u = uniform01(gen) * total;
    bool done = false;
    for (const auto& c : tb.fixed) {
      if (u > c.rate) {
        u -= c.rate;
        continue;
      }
      done = true;
      if (c.kind == 0) {
        ++out.state[c.target];
        out.arrivals += 1.0;
        trace(t, "arrival", c.target, out.env);
        if (out.state[c.target] > kPopulationCap) out.overflow = true;
      } else if (c.kind == 1) {
        out.arrivals += 1.0;
        out.losses += 1.0;
        trace(t, "refused", -1, out.env);
      } else {
        const auto& tr = m.transitions[c.target];
        double lost = 0.0;
        for (int q = 0; q < n; ++q) {
          lost += static_cast<double>(tr.loss_weights(q)) *
                  static_cast<double>(out.state[q]);
        }
        out.losses += lost;
        for (int r = 0; r < n; ++r) {
          std::int64_t acc = 0;
          for (int q = 0; q < n; ++q) acc += tr.matrix(r, q) * out.state[q];
          scratch[r] = acc;
          if (acc > kPopulationCap) out.overflow = true;
        }
        out.state.swap(scratch);
        out.env = tr.to_env;
        trace(t, "jump", c.target, out.env);
      }
      break;
    }
    if (!done) {
      // Service completion: pick the queue, then the destination.
      for (int q = 0; q < n && !done; ++q) {
        const double qrate = static_cast<double>(out.state[q]) * tb.out_rate[q];
        if (u > qrate) {
          u -= qrate;
          continue;
        }
        double v = u / static_cast<double>(out.state[q]);
        int dest = n;  // fall back to the last positive route on round-off
        for (int k = 0; k <= n; ++k) {
          if (tb.routes[q][k] <= 0.0) continue;
          dest = k;
          if (v <= tb.routes[q][k]) break;
          v -= tb.routes[q][k];
        }
        --out.state[q];
        if (dest == 0) {
          if (counted[q]) out.losses += 1.0;
          trace(t, "leave", q, out.env);
        } else {
          ++out.state[dest - 1];
          trace(t, "route", q, out.env);
        }
        done = true;
      }
      if (!done) {
        // Round-off beyond the last channel: treat as the last nonzero one.
        // Extremely rare; re-drawing keeps the law exact.
        continue;
      }
    }
    if (out.overflow) return out;
  }
  return out;
}

inline Estimate summarize(std::vector<double>& values) {
  Estimate e;
  const std::size_t r = values.size();
  if (r == 0) return e;
  e.mean = pairwise_sum(values) / static_cast<double>(r);
  if (r > 1) {
    for (double& v : values) v = (v - e.mean) * (v - e.mean);
    e.sd = std::sqrt(pairwise_sum(values) / static_cast<double>(r - 1));
  }
  e.half_width = 1.96 * e.sd / std::sqrt(static_cast<double>(r));
  return e;
}

}  // namespace detail

/// Replicated exact simulation. Replication r uses substream r of the master
/// seed and results are reduced in replication order, so the output is
/// independent of the number of workers.
inline SimulationResult simulate(const NetworkModel& m,
                                 const SimulationConfig& cfg) {
  require(cfg.replications >= 1, "simulate: replications must be >= 1");
  require(std::isfinite(cfg.horizon) && cfg.horizon > 0.0,
          "simulate: horizon must be positive");
  require(cfg.initial_env >= 0 && cfg.initial_env < m.n_env,
          "simulate: initial env out of range");
  require(cfg.initial_state.empty() ||
              static_cast<int>(cfg.initial_state.size()) == m.n_queues,
          "simulate: initial state must have n_queues entries");
  for (auto v : cfg.initial_state) require(v >= 0, "simulate: negative state");
  require(cfg.usage_weights.size() == 0 ||
              cfg.usage_weights.size() == m.state_dim(),
          "simulate: usage weights must have J entries");
  for (int q : cfg.counted_departures) {
    require(q >= 0 && q < m.n_queues, "simulate: counted queue out of range");
  }

  const auto tabs = detail::build_tables(m);
  const std::size_t reps = static_cast<std::size_t>(cfg.replications);
  std::vector<detail::ReplicationOutcome> outcomes(reps);
  parallel_for(
      reps,
      [&](std::size_t r) {
        outcomes[r] = detail::run_replication(m, tabs, cfg,
                                              static_cast<std::int64_t>(r));
      },
      cfg.trace ? 1u : cfg.threads, 256);

  SimulationResult res;
  std::vector<std::size_t> kept;
  kept.reserve(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    if (outcomes[r].overflow) {
      ++res.overflowed;
    } else {
      kept.push_back(r);
    }
  }
  res.replications = static_cast<std::int64_t>(kept.size());
  std::vector<double> buf(kept.size());
  auto collect = [&](auto&& value) {
    for (std::size_t k = 0; k < kept.size(); ++k) buf[k] = value(outcomes[kept[k]]);
    return detail::summarize(buf);
  };
  res.arrivals = collect([](const auto& o) { return o.arrivals; });
  res.losses = collect([](const auto& o) { return o.losses; });
  res.usage = collect([](const auto& o) { return o.usage; });
  for (int i = 0; i < m.n_env; ++i) {
    res.env_at_horizon.push_back(
        collect([i](const auto& o) { return o.env == i ? 1.0 : 0.0; }));
    for (int q = 0; q < m.n_queues; ++q) {
      res.mean_at_horizon.push_back(collect([i, q](const auto& o) {
        return o.env == i ? static_cast<double>(o.state[q]) : 0.0;
      }));
    }
  }
  return res;
}

}  // namespace mtnet::oracles
