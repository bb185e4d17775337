#pragma once

#include <cmath>
#include <string>

#include "mtnet/core.hpp"

namespace mtnet::oracles {

/// Stationary means of the single unreliable station with a retrial pool
/// (env 1 = up, env 2 = down) and its loss ratio, in closed form.
struct RetrialStationary {
  double station_up = 0.0;  // Mbar_11: station queue, station up
  double pool_up = 0.0;     // Mbar_21: retrial pool, station up
  double pool_down = 0.0;   // Mbar_22: retrial pool, station down
  double loss_ratio = 0.0;  // nu (Mbar_21 + Mbar_22) / lambda
  double eta = 0.0;
};

inline RetrialStationary retrial_closed_form(double lambda, double kappa,
                                             double nu, double mu,
                                             double gamma_u, double gamma_d) {
  for (double v : {lambda, kappa, nu, mu, gamma_u, gamma_d}) {
    require(std::isfinite(v) && v > 0.0,
            "retrial_closed_form: parameters must be positive");
  }
  const double big_gamma = gamma_u + gamma_d;
  RetrialStationary r;
  r.eta = (kappa + nu + gamma_u) * (nu + gamma_d) / gamma_d -
          kappa * gamma_u / (mu + gamma_u) - gamma_u;
  if (!(r.eta > 0.0)) {
    throw NumericError("retrial_closed_form: eta = " + std::to_string(r.eta) +
                       " <= 0, outside the formula's validity");
  }
  r.pool_up = lambda * gamma_u / (big_gamma * r.eta) *
              ((mu + gamma_u + gamma_d) / (mu + gamma_u));
  r.station_up =
      (kappa * r.pool_up + lambda * gamma_d / big_gamma) / (mu + gamma_u);
  r.pool_down = (kappa + nu + gamma_u) / gamma_d * r.pool_up;
  r.loss_ratio = nu / lambda * (r.pool_up + r.pool_down);
  return r;
}

/// Limit of the loss ratio as the repair rate grows without bound.
inline double retrial_loss_floor(double kappa, double nu, double mu,
                                 double gamma_u) {
  return nu * gamma_u / (kappa * mu + nu * mu + nu * gamma_u);
}

}  // namespace mtnet::oracles
