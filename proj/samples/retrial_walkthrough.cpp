// Unreliable station with a retrial pool: transient and stationary means,
// the loss ratio, and the repair rate needed for at most 10% losses.

#include <iostream>

#include "mtnet/analysis.hpp"
#include "mtnet/builders.hpp"
#include "mtnet/experiments/run.hpp"

int main() {
  using namespace mtnet;
  const auto params = builders::single_retrial_params(100, 2, 2, 1, 0.1, 2.0);
  const NetworkModel model = builders::build_retrial_network(params);
  ensure_valid(model);

  const AssembledSystem sys = assemble(model);
  const InitialCondition start = InitialCondition::empty(model);
  for (double t : {0.5, 1.0, 5.0}) {
    const TransientState s = transient_state(sys, start, t);
    std::cout << "t=" << t << "  mean=" << s.mean.transpose() << '\n';
  }

  const StationaryMoments st = stationary_mean(sys);
  std::cout << "omega=" << st.verdict.omega << "  stationary mean=" << st.mean.transpose()
            << '\n';

  experiments::RetrialScalarParams p;
  p.gamma_d = 2.0;
  std::cout << "loss ratio at gamma_d=2: " << experiments::retrial_loss_ratio(p) << '\n';
  const auto thr = experiments::retrial_repair_threshold(p, 0.10);
  std::cout << "smallest gamma_d with loss ratio <= 0.10: " << thr.value << " ("
            << thr.status() << ")\n";
}
