#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "mtnet/core.hpp"

namespace mtnet::numerics {

using OdeRhs = std::function<Vector(double, const Vector&)>;

struct OdeOptions {
  double tol = 1e-10;  // used as both absolute and relative tolerance
  double initial_step = 0.0;  // 0 picks T/100
  long max_steps = 10'000'000;
};

/// Integrates y' = f(t, y) from 0 to t_end with the embedded Dormand-Prince
/// 5(4) pair (local extrapolation, FSAL). Returns y(t_end).
inline Vector integrate_ode(const OdeRhs& f, const Vector& y0, double t_end,
                            const OdeOptions& opt = {}) {
  require(std::isfinite(t_end) && t_end >= 0.0,
          "integrate_ode: horizon must be finite and >= 0");
  require(opt.tol > 0.0, "integrate_ode: tolerance must be positive");
  if (t_end == 0.0) return y0;

  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5,
                          c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                          a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113,
                          b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                          b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695,
                          e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;

  Vector y = y0;
  double t = 0.0;
  double h = opt.initial_step > 0.0 ? opt.initial_step : t_end / 100.0;
  Vector k1 = f(t, y);
  for (long step = 0; step < opt.max_steps; ++step) {
    if (t >= t_end) return y;
    bool last = false;
    if (t + h >= t_end) {
      h = t_end - t;
      last = true;
    }
    const Vector k2 = f(t + c2 * h, y + h * (a21 * k1));
    const Vector k3 = f(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
    const Vector k4 = f(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vector k5 = f(t + c5 * h,
                        y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vector k6 = f(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 +
                                        a64 * k4 + a65 * k5));
    Vector y_new =
        y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Vector k7 = f(t + h, y_new);
    const Vector err =
        h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double norm = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double scale =
          opt.tol + opt.tol * std::max(std::abs(y(i)), std::abs(y_new(i)));
      norm += (err(i) / scale) * (err(i) / scale);
    }
    norm = y.size() > 0 ? std::sqrt(norm / static_cast<double>(y.size()))
                        : 0.0;
    if (!std::isfinite(norm)) throw NumericError("integrate_ode: non-finite");

    if (norm <= 1.0) {
      t = last ? t_end : t + h;
      y = std::move(y_new);
      k1 = k7;
    }
    const double factor =
        norm == 0.0 ? 5.0
                    : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
    h *= norm <= 1.0 ? factor : std::min(1.0, factor);
    if (h <= 16.0 * std::numeric_limits<double>::epsilon() *
                 std::max(1.0, std::abs(t))) {
      throw NumericError("integrate_ode: step size underflow at t = " +
                         std::to_string(t));
    }
  }
  throw NumericError("integrate_ode: step budget exhausted");
}

}  // namespace mtnet::numerics
