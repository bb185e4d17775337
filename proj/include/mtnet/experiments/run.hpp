#pragma once

#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mtnet/experiments/metrics.hpp"
#include "mtnet/experiments/search.hpp"
#include "mtnet/oracles/retrial_closed_form.hpp"
#include "mtnet/parallel.hpp"

namespace mtnet::experiments {

using json = nlohmann::json;

struct Grid {
  std::string variable;
  double min = 0.0;
  double max = 1.0;
  int points = 2;
  bool log = false;

  std::vector<double> values() const {
    require(std::isfinite(min) && std::isfinite(max), "grid bounds must be finite");
    require(points >= 2, "grid needs at least 2 points");
    require(!log || (min > 0.0 && max > 0.0), "log grid needs positive bounds");
    std::vector<double> v(static_cast<std::size_t>(points));
    for (int k = 0; k < points; ++k) {
      const double s = static_cast<double>(k) / (points - 1);
      v[k] = log ? std::exp(std::log(min) + s * (std::log(max) - std::log(min)))
                 : min + s * (max - min);
    }
    v.front() = min;
    v.back() = max;
    return v;
  }
};

/// A named reproduction. `params` overrides the experiment defaults; unknown
/// keys are rejected. Without a grid the experiment's default grid is used.
struct ExperimentSpec {
  std::string name;
  std::map<std::string, double> params;
  std::optional<Grid> grid;
  unsigned threads = 0;
};

using Cell = std::variant<double, std::string>;

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;
  json summary = json::object();

  double number(std::size_t row, const std::string& column) const {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == column) {
        const auto* d = std::get_if<double>(&rows.at(row)[c]);
        return d ? *d : std::nan("");
      }
    }
    throw ArgumentError("no column named " + column);
  }
  std::string text(std::size_t row, const std::string& column) const {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == column) {
        const auto* s = std::get_if<std::string>(&rows.at(row)[c]);
        return s ? *s : std::string();
      }
    }
    throw ArgumentError("no column named " + column);
  }
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {
      "retrial-exp1", "retrial-exp2", "retrial-cost", "storage-exp1",
      "storage-exp2", "storage-exp3", "rerouting-threshold"};
  return names;
}

namespace detail {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

class Params {
 public:
  Params(std::map<std::string, double> defaults, const std::map<std::string, double>& overrides)
      : values_(std::move(defaults)) {
    for (const auto& [k, v] : overrides) {
      if (!values_.count(k)) throw ArgumentError("unknown parameter: " + k);
      if (!std::isfinite(v)) throw ArgumentError("parameter " + k + " must be finite");
      values_[k] = v;
    }
  }
  double operator[](const std::string& k) const { return values_.at(k); }
  json to_json() const { return json(values_); }

 private:
  std::map<std::string, double> values_;
};

inline std::map<std::string, double> retrial_defaults() {
  return {{"lambda", 100.0}, {"kappa", 2.0}, {"nu", 2.0},      {"mu", 1.0},
          {"gamma_u", 0.1},  {"gamma_d", 0.5}, {"target", 0.1}};
}

inline RetrialScalarParams retrial_from(const Params& p) {
  RetrialScalarParams r;
  r.lambda = p["lambda"];
  r.kappa = p["kappa"];
  r.nu = p["nu"];
  r.mu = p["mu"];
  r.gamma_u = p["gamma_u"];
  r.gamma_d = p["gamma_d"];
  return r;
}

inline builders::PremiumStorageParams storage_from(const Params& p) {
  builders::PremiumStorageParams s;
  s.lambda = p["lambda"];
  s.premium = p["premium"];
  s.copy_rate = p["copy_rate"];
  s.gamma_u = p["gamma_u"];
  s.gamma_d = p["gamma_d"];
  return s;
}

/// Evaluates `row(x)` for every grid value concurrently; rows come back in
/// grid order. A throwing point becomes a row of NaNs with the message in the
/// trailing "error" column.
template <class RowFn>
void sweep(Table& table, const std::vector<double>& xs, unsigned threads, RowFn&& row) {
  const std::size_t width = table.header.size();
  table.rows.assign(xs.size(), {});
  parallel_for(
      xs.size(),
      [&](std::size_t k) {
        std::vector<Cell> r;
        try {
          r = row(xs[k]);
          r.emplace_back(std::string());
        } catch (const std::exception& e) {
          r.assign(width - 1, kNaN);
          r[0] = xs[k];
          r.emplace_back(std::string(e.what()));
        }
        table.rows[k] = std::move(r);
      },
      threads, 1);
}

inline Grid grid_or(const ExperimentSpec& spec, Grid fallback,
                    std::initializer_list<const char*> allowed) {
  Grid g = spec.grid.value_or(fallback);
  bool ok = false;
  for (const char* a : allowed) ok = ok || g.variable == a;
  if (!ok) {
    std::string msg = spec.name + ": grid variable must be one of";
    for (const char* a : allowed) msg += std::string(" ") + a;
    throw ArgumentError(msg);
  }
  return g;
}

inline json threshold_json(const ThresholdResult& r, const std::string& variable) {
  json j = {{"variable", variable}, {"status", r.status()}, {"evaluations", r.evaluations}};
  j["value"] = r.feasible ? json(r.value) : json(nullptr);
  j["metric"] = r.metric;
  return j;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Threshold queries and cost optimisations

/// Smallest repair rate with loss ratio <= target (ratio decreases in gamma_d).
inline ThresholdResult retrial_repair_threshold(RetrialScalarParams p, double target,
                                                double lo = 1e-3, double hi = 1e4) {
  return threshold_search(
      [p](double gd) mutable {
        p.gamma_d = gd;
        return retrial_loss_ratio(p);
      },
      lo, hi, target, Monotonicity::kDecreasing);
}

/// Largest failure rate with loss ratio <= target (ratio increases in gamma_u).
inline ThresholdResult retrial_failure_threshold(RetrialScalarParams p, double target,
                                                 double lo = 1e-7, double hi = 10.0) {
  return threshold_search(
      [p](double gu) mutable {
        p.gamma_u = gu;
        return retrial_loss_ratio(p);
      },
      lo, hi, target, Monotonicity::kIncreasing);
}

struct RetrialCostOptimum {
  bool feasible = false;
  double gamma_u = detail::kNaN;
  double gamma_d = detail::kNaN;
  double cost = detail::kNaN;
  double loss_ratio = detail::kNaN;
};

/// min rho_u / gamma_u + rho_d * gamma_d subject to loss ratio <= target:
/// for each gamma_u the cheapest feasible gamma_d is the repair threshold.
inline double retrial_pair_cost(RetrialScalarParams p, double target, double rho_u,
                                double rho_d, double gamma_u, double* gamma_d_out = nullptr) {
  p.gamma_u = gamma_u;
  const ThresholdResult t = retrial_repair_threshold(p, target);
  if (!t.feasible) return std::numeric_limits<double>::infinity();
  if (gamma_d_out) *gamma_d_out = t.value;
  return rho_u / gamma_u + rho_d * t.value;
}

// ---------------------------------------------------------------------------
// Tables

inline Table run_retrial_sweep(const ExperimentSpec& spec, bool repair_panel) {
  auto defaults = detail::retrial_defaults();
  defaults["gamma_u"] = 0.1;
  defaults["gamma_d"] = 0.5;
  defaults["target"] = repair_panel ? 0.1 : 0.01;
  const detail::Params prm(defaults, spec.params);
  const Grid g = repair_panel
                     ? detail::grid_or(spec, {"gamma_d", 0.5, 20.0, 40, false}, {"gamma_d"})
                     : detail::grid_or(spec, {"gamma_u", 1e-4, 0.1, 40, true}, {"gamma_u"});
  const RetrialScalarParams base = detail::retrial_from(prm);
  Table t;
  t.header = {g.variable, "loss_ratio", "error"};
  detail::sweep(t, g.values(), spec.threads, [&](double x) {
    RetrialScalarParams p = base;
    (repair_panel ? p.gamma_d : p.gamma_u) = x;
    return std::vector<Cell>{x, retrial_loss_ratio(p)};
  });
  const double target = prm["target"];
  const ThresholdResult r = repair_panel ? retrial_repair_threshold(base, target)
                                         : retrial_failure_threshold(base, target);
  t.summary["threshold"] = detail::threshold_json(r, g.variable);
  t.summary["target"] = target;
  if (repair_panel) {
    t.summary["loss_floor"] =
        oracles::retrial_loss_floor(base.kappa, base.nu, base.mu, base.gamma_u);
  }
  t.summary["params"] = prm.to_json();
  return t;
}

inline Table run_retrial_cost(const ExperimentSpec& spec) {
  auto defaults = detail::retrial_defaults();
  defaults["rho_u"] = 1.0;
  defaults["rho_d"] = 1.0;
  const detail::Params prm(defaults, spec.params);
  const Grid g = detail::grid_or(spec, {"gamma_u", 1e-3, 0.2, 30, true}, {"gamma_u"});
  const RetrialScalarParams base = detail::retrial_from(prm);
  const double target = prm["target"], rho_u = prm["rho_u"], rho_d = prm["rho_d"];
  require(rho_u > 0.0 && rho_d > 0.0, "retrial-cost: cost coefficients must be positive");
  Table t;
  t.header = {"gamma_u", "gamma_d_min", "cost", "status", "error"};
  detail::sweep(t, g.values(), spec.threads, [&](double gu) {
    double gd = detail::kNaN;
    const double c = retrial_pair_cost(base, target, rho_u, rho_d, gu, &gd);
    const bool ok = std::isfinite(c);
    return std::vector<Cell>{gu, gd, ok ? c : detail::kNaN,
                             std::string(ok ? "feasible" : "infeasible")};
  });
  // Grid argmin, refined by golden section between its neighbours.
  std::size_t best = t.rows.size();
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const double c = t.number(k, "cost");
    if (std::isfinite(c) && (best == t.rows.size() || c < t.number(best, "cost"))) best = k;
  }
  RetrialCostOptimum opt;
  if (best < t.rows.size()) {
    const auto xs = g.values();
    const double a = xs[best == 0 ? 0 : best - 1];
    const double b = xs[std::min(best + 1, xs.size() - 1)];
    auto f = [&](double log_gu) {
      return retrial_pair_cost(base, target, rho_u, rho_d, std::exp(log_gu));
    };
    MinimumResult m{std::log(xs[best]), t.number(best, "cost"), 0};
    if (a < b) {
      const MinimumResult refined = golden_section(f, std::log(a), std::log(b), 1e-6);
      if (refined.value < m.value) m = refined;
    }
    opt.feasible = true;
    opt.gamma_u = std::exp(m.x);
    opt.cost = retrial_pair_cost(base, target, rho_u, rho_d, opt.gamma_u, &opt.gamma_d);
    RetrialScalarParams at = base;
    at.gamma_u = opt.gamma_u;
    at.gamma_d = opt.gamma_d;
    opt.loss_ratio = retrial_loss_ratio(at);
  }
  t.summary["optimum"] =
      opt.feasible ? json{{"gamma_u", opt.gamma_u}, {"gamma_d", opt.gamma_d},
                          {"cost", opt.cost}, {"loss_ratio", opt.loss_ratio}}
                   : json{{"status", "empty feasible set"}};
  t.summary["params"] = prm.to_json();
  return t;
}

inline std::map<std::string, double> storage_defaults() {
  return {{"lambda", 1e4}, {"premium", 0.5}, {"copy_rate", 24.0}, {"gamma_u", 0.01},
          {"gamma_d", 2.0}, {"T", 1.0}};
}

inline Table run_storage_exp1(const ExperimentSpec& spec) {
  const detail::Params prm(storage_defaults(), spec.params);
  const Grid g = detail::grid_or(spec, {"premium", 0.0, 1.0, 21, false},
                                 {"premium", "gamma_u", "gamma_d", "copy_rate"});
  Table t;
  t.header = {g.variable, "arrivals", "losses", "usage", "loss_fraction", "error"};
  detail::sweep(t, g.values(), spec.threads, [&](double x) {
    auto p = detail::storage_from(prm);
    if (g.variable == "premium") p.premium = x;
    if (g.variable == "gamma_u") p.gamma_u = x;
    if (g.variable == "gamma_d") p.gamma_d = x;
    if (g.variable == "copy_rate") p.copy_rate = x;
    const auto m = premium_storage_metrics(p, prm["T"]);
    return std::vector<Cell>{x, m.arrivals, m.losses, m.usage, m.loss_fraction()};
  });
  t.summary["params"] = prm.to_json();
  return t;
}

/// Cost rho * E Z_l + E Z_s is linear in p (means are linear in the arrival
/// split), so the optimum is p = 0 or p = 1 and the switch happens at
/// rho* = (Z_s(1) - Z_s(0)) / (Z_l(0) - Z_l(1)).
inline Table run_storage_exp2(const ExperimentSpec& spec) {
  auto defaults = storage_defaults();
  defaults["gamma_u"] = 1.0;
  defaults["rho_min"] = 1e-2;
  defaults["rho_max"] = 1e3;
  defaults["rho_points"] = 21;
  const detail::Params prm(defaults, spec.params);
  const Grid g = detail::grid_or(spec, {"gamma_d", 0.5, 24.0, 20, false},
                                 {"gamma_d", "gamma_u"});
  const Grid rho_grid{"rho", prm["rho_min"], prm["rho_max"],
                      static_cast<int>(prm["rho_points"]), true};
  const auto rhos = rho_grid.values();
  const auto xs = g.values();

  struct Endpoints {
    CumulativeMetrics basic, premium;
    std::string error;
  };
  std::vector<Endpoints> ends(xs.size());
  parallel_for(
      xs.size(),
      [&](std::size_t k) {
        try {
          auto p = detail::storage_from(prm);
          (g.variable == "gamma_d" ? p.gamma_d : p.gamma_u) = xs[k];
          p.premium = 0.0;
          ends[k].basic = premium_storage_metrics(p, prm["T"]);
          p.premium = 1.0;
          ends[k].premium = premium_storage_metrics(p, prm["T"]);
        } catch (const std::exception& e) {
          ends[k].error = e.what();
        }
      },
      spec.threads, 1);

  Table t;
  t.header = {g.variable, "rho", "cost_p0", "cost_p1", "p_star", "rho_star", "error"};
  json boundary = json::array();
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto& e = ends[k];
    const double d_loss = e.basic.losses - e.premium.losses;
    const double d_usage = e.premium.usage - e.basic.usage;
    const double rho_star = e.error.empty() && d_loss > 0.0 ? d_usage / d_loss : detail::kNaN;
    boundary.push_back({{g.variable, xs[k]}, {"rho_star", rho_star}});
    for (double rho : rhos) {
      if (!e.error.empty()) {
        t.rows.push_back({xs[k], rho, detail::kNaN, detail::kNaN, detail::kNaN,
                          detail::kNaN, e.error});
        continue;
      }
      const double c0 = e.basic.cost(rho, 1.0);
      const double c1 = e.premium.cost(rho, 1.0);
      t.rows.push_back({xs[k], rho, c0, c1, c1 < c0 ? 1.0 : 0.0, rho_star, std::string()});
    }
  }
  t.summary["boundary"] = boundary;
  t.summary["params"] = prm.to_json();
  return t;
}

struct StorageThresholdReport {
  ThresholdResult search;
  double fraction_at_max = detail::kNaN;
};

inline StorageThresholdReport storage_repair_threshold(builders::PremiumStorageParams p,
                                                       double T, double target,
                                                       double gd_max) {
  auto fraction = [&](double gd) {
    auto q = p;
    q.gamma_d = gd;
    return premium_storage_metrics(q, T).loss_fraction();
  };
  StorageThresholdReport r;
  r.search = threshold_search(fraction, 0.0, gd_max, target, Monotonicity::kDecreasing);
  r.fraction_at_max = fraction(gd_max);
  return r;
}

inline Table run_storage_exp3(const ExperimentSpec& spec) {
  auto defaults = storage_defaults();
  defaults["gamma_u"] = 0.1;
  defaults["T"] = 2.0;
  defaults["target"] = 0.05;
  defaults["gd_max"] = 24.0;
  const detail::Params prm(defaults, spec.params);
  const Grid g = detail::grid_or(spec, {"premium", 0.0, 1.0, 21, false}, {"premium"});
  const double T = prm["T"], target = prm["target"], gd_max = prm["gd_max"];
  Table t;
  t.header = {"premium", "gamma_d_bar", "loss_fraction", "status", "error"};
  detail::sweep(t, g.values(), spec.threads, [&](double x) {
    auto p = detail::storage_from(prm);
    p.premium = x;
    const auto r = storage_repair_threshold(p, T, target, gd_max);
    return std::vector<Cell>{x, r.search.feasible ? r.search.value : detail::kNaN,
                             r.search.feasible ? r.search.metric : r.fraction_at_max,
                             r.search.status()};
  });

  // Regime boundaries in p: the loss fraction at a fixed repair rate is
  // decreasing in p, so each boundary is a threshold search in p.
  auto boundary = [&](double gd) {
    auto fraction = [&](double prem) {
      auto p = detail::storage_from(prm);
      p.premium = prem;
      p.gamma_d = gd;
      return premium_storage_metrics(p, T).loss_fraction();
    };
    const ThresholdResult r = threshold_search(fraction, 0.0, 1.0, target,
                                               Monotonicity::kDecreasing);
    return r.feasible ? json(r.value) : json(nullptr);
  };
  t.summary["feasible_from_premium"] = boundary(gd_max);
  t.summary["unconstrained_from_premium"] = boundary(0.0);
  t.summary["params"] = prm.to_json();
  return t;
}

struct ReroutingComparison {
  CumulativeMetrics rerouting;
  CumulativeMetrics direct_only;
  double rho_star = detail::kNaN;  // NaN: one mechanism dominates
};

/// Critical loss/usage cost ratio at which rerouting and plain direct routing
/// cost the same, by bisection on log(rho) of the cost difference.
inline ReroutingComparison rerouting_break_even(builders::ReroutingParams p, double T,
                                                double rho_lo = 1e-8, double rho_hi = 1e8) {
  ReroutingComparison out;
  p.rerouting = true;
  out.rerouting = rerouting_metrics(p, T);
  p.rerouting = false;
  out.direct_only = rerouting_metrics(p, T);
  auto diff = [&](double log_rho) {
    const double rho = std::exp(log_rho);
    return out.rerouting.cost(rho, 1.0) - out.direct_only.cost(rho, 1.0);
  };
  double a = std::log(rho_lo), b = std::log(rho_hi);
  double fa = diff(a), fb = diff(b);
  if (!(fa * fb < 0.0)) return out;
  while (b - a > 1e-12 * std::max(1.0, std::abs(a))) {
    const double mid = 0.5 * (a + b);
    const double fm = diff(mid);
    if ((fm < 0.0) == (fa < 0.0)) {
      a = mid;
      fa = fm;
    } else {
      b = mid;
    }
  }
  out.rho_star = std::exp(0.5 * (a + b));
  return out;
}

inline Table run_rerouting_threshold(const ExperimentSpec& spec) {
  const detail::Params prm({{"lambda", 1.0}, {"mu", 1.0}, {"gamma_u", 0.1},
                            {"gamma_d", 1.0}, {"T", 10.0}},
                           spec.params);
  const Grid g = detail::grid_or(spec, {"gamma_d", 0.1, 10.0, 20, true},
                                 {"gamma_d", "gamma_u"});
  Table t;
  t.header = {g.variable, "losses_rerouting", "usage_rerouting", "losses_direct",
              "usage_direct", "rho_star", "error"};
  detail::sweep(t, g.values(), spec.threads, [&](double x) {
    double gu = prm["gamma_u"], gd = prm["gamma_d"];
    (g.variable == "gamma_d" ? gd : gu) = x;
    const auto p = builders::ring3_rerouting_params(prm["lambda"], prm["mu"], gu, gd);
    const auto c = rerouting_break_even(p, prm["T"]);
    return std::vector<Cell>{x, c.rerouting.losses, c.rerouting.usage,
                             c.direct_only.losses, c.direct_only.usage, c.rho_star};
  });
  t.summary["params"] = prm.to_json();
  return t;
}

inline Table run_experiment(const ExperimentSpec& spec) {
  if (spec.name == "retrial-exp1") return run_retrial_sweep(spec, true);
  if (spec.name == "retrial-exp2") return run_retrial_sweep(spec, false);
  if (spec.name == "retrial-cost") return run_retrial_cost(spec);
  if (spec.name == "storage-exp1") return run_storage_exp1(spec);
  if (spec.name == "storage-exp2") return run_storage_exp2(spec);
  if (spec.name == "storage-exp3") return run_storage_exp3(spec);
  if (spec.name == "rerouting-threshold") return run_rerouting_threshold(spec);
  throw ArgumentError("unknown experiment: " + spec.name);
}

// ---------------------------------------------------------------------------
// Output

inline void write_csv(std::ostream& os, const Table& t) {
  const auto old = os.precision();
  os << std::setprecision(17);
  for (std::size_t c = 0; c < t.header.size(); ++c) os << (c ? "," : "") << t.header[c];
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) os << ',';
      if (const auto* d = std::get_if<double>(&row[c])) {
        if (std::isnan(*d)) {
          os << "nan";
        } else {
          os << *d;
        }
      } else {
        std::string s = std::get<std::string>(row[c]);
        if (s.find_first_of(",\"\n") != std::string::npos) {
          std::string q = "\"";
          for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
          s = q + "\"";
        }
        os << s;
      }
    }
    os << '\n';
  }
  os.precision(old);
}

inline json table_json(const Table& t) {
  json rows = json::array();
  for (const auto& row : t.rows) {
    json r = json::object();
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (const auto* d = std::get_if<double>(&row[c])) {
        r[t.header[c]] = std::isnan(*d) ? json(nullptr) : json(*d);
      } else {
        r[t.header[c]] = std::get<std::string>(row[c]);
      }
    }
    rows.push_back(std::move(r));
  }
  return {{"columns", t.header}, {"rows", rows}, {"summary", t.summary}};
}

}  // namespace mtnet::experiments
