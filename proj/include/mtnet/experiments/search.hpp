#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "mtnet/core.hpp"

namespace mtnet::experiments {

enum class Monotonicity { kDecreasing, kIncreasing };

/// Outcome of a threshold search.
///  - feasible, !constrained: the whole range meets the target; `value` is
///    the least demanding endpoint (lo for decreasing metrics, hi for
///    increasing ones).
///  - feasible, constrained: `value` is the boundary, on the feasible side.
///  - !feasible: `metric` is the best value attainable within the bounds.
struct ThresholdResult {
  bool feasible = false;
  bool constrained = true;
  double value = std::nan("");
  double metric = std::nan("");
  int evaluations = 0;

  std::string status() const {
    if (!feasible) return "infeasible";
    return constrained ? "feasible" : "unconstrained";
  }
};

/// Finds the boundary of {x in [lo, hi] : metric(x) <= target} for a monotone
/// metric by bisection down to relative width `rel_width`. Monotonicity is
/// asserted on the endpoints only.
inline ThresholdResult threshold_search(const std::function<double(double)>& metric,
                                        double lo, double hi, double target,
                                        Monotonicity dir,
                                        double rel_width = 1e-6) {
  require(std::isfinite(lo) && std::isfinite(hi) && lo < hi,
          "threshold search: bounds must be finite with lo < hi");
  ThresholdResult r;
  const double f_lo = metric(lo);
  const double f_hi = metric(hi);
  r.evaluations = 2;
  const bool decreasing = dir == Monotonicity::kDecreasing;
  if (decreasing ? f_lo < f_hi : f_lo > f_hi) {
    throw ArgumentError("threshold search: metric is not " +
                        std::string(decreasing ? "decreasing" : "increasing") +
                        " over the bounds (f(lo) = " + std::to_string(f_lo) +
                        ", f(hi) = " + std::to_string(f_hi) + ")");
  }
  // Endpoint where the target is easiest / hardest to meet.
  const double easy_x = decreasing ? hi : lo;
  const double easy_f = decreasing ? f_hi : f_lo;
  const double hard_x = decreasing ? lo : hi;
  const double hard_f = decreasing ? f_lo : f_hi;
  if (easy_f > target) {
    r.value = easy_x;
    r.metric = easy_f;
    return r;
  }
  r.feasible = true;
  if (hard_f <= target) {
    r.constrained = false;
    r.value = hard_x;
    r.metric = hard_f;
    return r;
  }
  // Invariant: metric(good) <= target < metric(bad).
  double good = easy_x, bad = hard_x, f_good = easy_f;
  while (std::abs(good - bad) > rel_width * std::max(std::abs(good), std::abs(bad))) {
    const double mid = 0.5 * (good + bad);
    const double f = metric(mid);
    ++r.evaluations;
    if (f <= target) {
      good = mid;
      f_good = f;
    } else {
      bad = mid;
    }
    if (r.evaluations > 400) break;
  }
  r.value = good;
  r.metric = f_good;
  return r;
}

struct MinimumResult {
  double x = 0.0;
  double value = 0.0;
  int evaluations = 0;
};

/// Golden-section minimisation of a unimodal function on [a, b].
inline MinimumResult golden_section(const std::function<double(double)>& f,
                                    double a, double b, double rel_tol = 1e-8) {
  require(a < b, "golden section: a < b required");
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  MinimumResult r;
  r.evaluations = 2;
  while (b - a > rel_tol * (std::abs(a) + std::abs(b)) && r.evaluations < 300) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
    ++r.evaluations;
  }
  if (fc <= fd) {
    r.x = c;
    r.value = fc;
  } else {
    r.x = d;
    r.value = fd;
  }
  return r;
}

}  // namespace mtnet::experiments
