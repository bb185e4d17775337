#pragma once

#include <set>
#include <vector>

#include "mtnet/analysis.hpp"
#include "mtnet/builders.hpp"

// Metrics of the application models, always through the analysis module.

namespace mtnet::experiments {

struct RetrialScalarParams {
  double lambda = 100.0;
  double kappa = 2.0;
  double nu = 2.0;
  double mu = 1.0;
  double gamma_u = 0.1;
  double gamma_d = 2.1496;

  builders::RetrialNetworkParams network() const {
    return builders::single_retrial_params(lambda, kappa, nu, mu, gamma_u, gamma_d);
  }
};

/// Long-run fraction of arrivals that renege from the retrial pool, from the
/// stationary means of the assembled model.
inline double retrial_loss_ratio(const RetrialScalarParams& p) {
  const auto net = p.network();
  const NetworkModel m = builders::build_retrial_network(net);
  const StationaryMoments st = stationary_mean(assemble(m));
  double reneging = 0.0;
  for (int q : builders::retrial_loss_queues(net)) {
    for (int i = 0; i < m.n_env; ++i) {
      reneging += m.leave_rate(i, q) * st.mean(m.index(i, q));
    }
  }
  return reneging / p.lambda;
}

/// E Z_a(T), E Z_l(T), E Z_s(T) of a model started empty in env 0.
struct CumulativeMetrics {
  double arrivals = 0.0;
  double losses = 0.0;
  double usage = 0.0;

  double loss_fraction() const { return arrivals > 0.0 ? losses / arrivals : 0.0; }
  double cost(double rho_loss, double rho_usage) const {
    return rho_loss * losses + rho_usage * usage;
  }
};

/// Arrivals and losses from counter queues (transient means only); usage from
/// the time integral of the mean.
inline CumulativeMetrics cumulative_metrics(const NetworkModel& m,
                                            const std::set<int>& counted,
                                            const std::vector<double>& usage_weights,
                                            double T) {
  const InitialCondition ic = InitialCondition::empty(m);
  const CumulativeCounts c = cumulative_counts_by_counter(m, counted, ic, T);
  CumulativeMetrics out;
  out.arrivals = c.arrivals;
  out.losses = c.losses;
  out.usage = metric_w(assemble(m), ic, per_queue_weights(m, usage_weights), T);
  return out;
}

inline CumulativeMetrics premium_storage_metrics(const builders::PremiumStorageParams& p,
                                                 double T) {
  return cumulative_metrics(builders::build_premium_storage(p), {},
                            builders::premium_storage_copy_weights(), T);
}

inline CumulativeMetrics rerouting_metrics(const builders::ReroutingParams& p, double T) {
  return cumulative_metrics(builders::build_rerouting_network(p), {},
                            builders::rerouting_usage_weights(p.pairs()), T);
}

}  // namespace mtnet::experiments
