#include <gtest/gtest.h>

#include <json.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "mtnet/analysis.hpp"
#include "mtnet/builders.hpp"
#include "mtnet/oracles/retrial_closed_form.hpp"
#include "mtnet/oracles/simulate.hpp"
#include "mtnet/oracles/truncated.hpp"
#include "test_support.hpp"

using namespace mtnet;
using namespace mtnet::oracles;

namespace {

NetworkModel retrial(double lambda, double gu, double gd) {
  return builders::build_retrial_network(
      builders::single_retrial_params(lambda, 2, 2, 1, gu, gd));
}

double poisson_pmf(double mean, int k) {
  return std::exp(-mean + k * std::log(mean) - std::lgamma(k + 1.0));
}

}  // namespace

// --- closed form -----------------------------------------------------------

TEST(RetrialClosedForm, ReferencePoint) {
  const auto r = retrial_closed_form(100, 2, 2, 1, 0.1, 0.5);
  const double eta = 4.1 * 2.5 / 0.5 - 0.2 / 1.1 - 0.1;
  EXPECT_DOUBLE_EQ(r.eta, eta);
  EXPECT_NEAR(r.pool_up, 100 * 0.1 / (0.6 * eta) * (1.6 / 1.1), 1e-12);
  EXPECT_NEAR(r.loss_ratio, 2.0 / 100 * (r.pool_up + r.pool_down), 1e-15);
}

TEST(RetrialClosedForm, AgreesWithStationaryMeanOnRandomParameters) {
  std::mt19937_64 g(1234);
  for (int k = 0; k < 200; ++k) {
    const double lambda = fixtures::uniform(g, 0.1, 200);
    const double kappa = fixtures::uniform(g, 0.1, 5);
    const double nu = fixtures::uniform(g, 0.1, 5);
    const double mu = fixtures::uniform(g, 0.1, 5);
    const double gu = std::exp(fixtures::uniform(g, std::log(1e-3), std::log(2.0)));
    const double gd = std::exp(fixtures::uniform(g, std::log(1e-2), std::log(50.0)));
    const auto cf = retrial_closed_form(lambda, kappa, nu, mu, gu, gd);
    const auto m = builders::build_retrial_network(
        builders::single_retrial_params(lambda, kappa, nu, mu, gu, gd));
    const auto st = stationary_mean(assemble(m));
    EXPECT_NEAR(st.mean(0), cf.station_up, 1e-9 * cf.station_up);
    EXPECT_NEAR(st.mean(1), cf.pool_up, 1e-9 * cf.pool_up);
    EXPECT_NEAR(st.mean(3), cf.pool_down, 1e-9 * cf.pool_down);
  }
}

TEST(RetrialClosedForm, FloorIsTheFastRepairLimit) {
  const double floor = retrial_loss_floor(2, 2, 1, 0.1);
  EXPECT_NEAR(floor, 0.2 / 4.2, 1e-15);
  const auto r = retrial_closed_form(100, 2, 2, 1, 0.1, 1e7);
  EXPECT_NEAR(r.loss_ratio, floor, 1e-6);
  EXPECT_GT(r.loss_ratio, floor);
}

TEST(RetrialClosedForm, VanishesWithoutFailures) {
  const auto r = retrial_closed_form(100, 2, 2, 1, 1e-9, 0.5);
  EXPECT_LT(r.loss_ratio, 1e-7);
}

TEST(RetrialClosedForm, RejectsNonPositiveParameters) {
  EXPECT_THROW(retrial_closed_form(100, 2, 2, 1, 0.0, 0.5), ArgumentError);
}

// --- simulation ------------------------------------------------------------

TEST(Simulate, InfiniteServerMean) {
  const double lambda = 10, T = 10;
  SimulationConfig cfg;
  cfg.replications = 10000;
  cfg.horizon = T;
  cfg.seed = 7;
  cfg.counted_departures = {0};
  const auto res = simulate(builders::build_single_queue(lambda, 1), cfg);
  EXPECT_EQ(res.replications, 10000);
  EXPECT_EQ(res.overflowed, 0);
  const double mean = lambda * (1 - std::exp(-T));
  EXPECT_TRUE(res.mean_at_horizon[0].covers(mean))
      << res.mean_at_horizon[0].mean << " +- " << res.mean_at_horizon[0].half_width;
  // Poisson: variance equals the mean.
  EXPECT_NEAR(res.mean_at_horizon[0].sd, std::sqrt(mean), 0.1);
  EXPECT_TRUE(res.arrivals.covers(lambda * T));
  EXPECT_TRUE(res.losses.covers(lambda * T - mean));
}

TEST(Simulate, RetrialAgreesWithTransientMean) {
  const auto m = retrial(10, 0.3, 1.0);
  const double T = 3;
  SimulationConfig cfg;
  cfg.replications = 20000;
  cfg.horizon = T;
  cfg.seed = 99;
  cfg.counted_departures = {1};
  cfg.usage_weights = per_queue_weights(m, {1.0, 1.0});
  const auto res = simulate(m, cfg);
  const auto sys = assemble(m);
  const auto ic = InitialCondition::empty(m);
  const Vector mean = transient_mean(sys, ic, T);
  for (int k = 0; k < sys.J(); ++k) {
    // Several simultaneous checks on one seed: about 4 sigma.
    const auto& e = res.mean_at_horizon[k];
    EXPECT_LE(std::abs(e.mean - mean(k)), 2.05 * e.half_width + 1e-12) << k;
  }
  const auto counts = cumulative_counts_by_integral(m, {1}, ic, T);
  EXPECT_LE(std::abs(res.losses.mean - counts.losses), 2.05 * res.losses.half_width);
  EXPECT_LE(std::abs(res.arrivals.mean - counts.arrivals), 2.05 * res.arrivals.half_width);
  const double usage = metric_w(sys, ic, cfg.usage_weights, T);
  EXPECT_LE(std::abs(res.usage.mean - usage), 2.05 * res.usage.half_width);
}

TEST(Simulate, IndependentOfThreadCount) {
  const auto m = builders::build_premium_storage({.lambda = 50});
  SimulationConfig cfg;
  cfg.replications = 1500;
  cfg.horizon = 2;
  cfg.seed = 3;
  cfg.usage_weights = per_queue_weights(m, builders::premium_storage_copy_weights());
  cfg.threads = 1;
  const auto a = simulate(m, cfg);
  cfg.threads = 4;
  const auto b = simulate(m, cfg);
  EXPECT_EQ(a.losses.mean, b.losses.mean);
  EXPECT_EQ(a.losses.sd, b.losses.sd);
  EXPECT_EQ(a.usage.mean, b.usage.mean);
  for (std::size_t k = 0; k < a.mean_at_horizon.size(); ++k) {
    EXPECT_EQ(a.mean_at_horizon[k].mean, b.mean_at_horizon[k].mean);
  }
}

TEST(Simulate, SeedsGiveDistinctStreams) {
  EXPECT_NE(substream_seed(1, 0), substream_seed(1, 1));
  EXPECT_NE(substream_seed(1, 0), substream_seed(2, 0));
  EXPECT_EQ(substream_seed(5, 17), substream_seed(5, 17));
}

TEST(Simulate, OverflowGuard) {
  SimulationConfig cfg;
  cfg.replications = 20;
  cfg.horizon = 1;
  cfg.initial_state = {1};
  const auto m = builders::build_scalar_jump_model(0, 0, {{60.0, 2}});
  const auto res = simulate(m, cfg);
  EXPECT_GT(res.overflowed, 0);
  EXPECT_EQ(res.replications + res.overflowed, 20);
}

TEST(Simulate, TraceIsOneBasedJsonLines) {
  const auto m = retrial(5, 0.5, 0.5);
  std::ostringstream os;
  SimulationConfig cfg;
  cfg.replications = 2;
  cfg.horizon = 2;
  cfg.trace = &os;
  simulate(m, cfg);
  std::istringstream is(os.str());
  std::string line;
  int lines = 0;
  bool saw_jump = false;
  while (std::getline(is, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_GE(j.at("queue").get<int>(), 1);
    EXPECT_GE(j.at("env").get<int>(), 1);
    EXPECT_LE(j.at("env").get<int>(), 2);
    EXPECT_LE(j.at("t").get<double>(), 2.0);
    saw_jump = saw_jump || j.at("kind") == "jump";
    ++lines;
  }
  EXPECT_GT(lines, 5);
  EXPECT_TRUE(saw_jump);
}

TEST(Simulate, RejectsBadConfig) {
  const auto m = builders::build_single_queue(1, 1);
  SimulationConfig cfg;
  cfg.horizon = -1;
  EXPECT_THROW(simulate(m, cfg), ArgumentError);
  cfg.horizon = 1;
  cfg.initial_env = 3;
  EXPECT_THROW(simulate(m, cfg), ArgumentError);
}

TEST(Simulate, DecoupledQueuesMatchSeparateRuns) {
  // Two non-interacting queues: each marginal mean is its own M/M/inf.
  NetworkModel m = make_empty_model(2, 1);
  m.arrival_rates << 4.0, 9.0;
  m.departure_rates[0](0, 0) = 2.0;
  m.departure_rates[0](1, 0) = 0.5;
  SimulationConfig cfg;
  cfg.replications = 8000;
  cfg.horizon = 1.5;
  const auto res = simulate(m, cfg);
  // Two checks on one seed: use the 99.9% band.
  const double z = 3.29 / 1.96;
  const auto& a = res.mean_at_horizon[0];
  const auto& b = res.mean_at_horizon[1];
  EXPECT_LE(std::abs(a.mean - 2.0 * (1 - std::exp(-3.0))), z * a.half_width);
  EXPECT_LE(std::abs(b.mean - 18.0 * (1 - std::exp(-0.75))), z * b.half_width);
}

TEST(Simulate, IntervalsCoverAtTheNominalRate) {
  // 100 independent studies of R = 200; the 95% interval should miss about
  // five times. Reduced scale to keep the unit suite fast.
  const double lambda = 5, T = 1;
  const auto m = builders::build_single_queue(lambda, 1);
  const double mean = lambda * (1 - std::exp(-T));
  int covered = 0;
  for (int study = 0; study < 100; ++study) {
    SimulationConfig cfg;
    cfg.replications = 200;
    cfg.horizon = T;
    cfg.seed = 1000 + study;
    covered += simulate(m, cfg).mean_at_horizon[0].covers(mean);
  }
  EXPECT_GE(covered, 88);
  EXPECT_LE(covered, 100);
}

// --- truncated master equation --------------------------------------------

TEST(Truncated, PureDeathIsBinomial) {
  const auto m = builders::build_single_queue(0, 1);
  const double T = 0.7;
  const auto d = truncated_distribution(m, {6}, {6}, 0, T);
  const double p = std::exp(-T);
  for (int k = 0; k <= 6; ++k) {
    const double ref = std::tgamma(7.0) / (std::tgamma(k + 1.0) * std::tgamma(7.0 - k)) *
                       std::pow(p, k) * std::pow(1 - p, 6 - k);
    EXPECT_NEAR(d.probability({k}, 0), ref, 1e-10);
  }
  EXPECT_LT(d.leak, 1e-9);  // Poisson tail tolerance is 1e-10
}

TEST(Truncated, EmptyStartIsPoisson) {
  const double lambda = 8, T = 2;
  const auto m = builders::build_single_queue(lambda, 1);
  const auto d = truncated_distribution(m, {60}, {0}, 0, T);
  const double mean = lambda * (1 - std::exp(-T));
  for (int k : {0, 3, 7, 12, 20}) {
    EXPECT_NEAR(d.probability({k}, 0), poisson_pmf(mean, k), 1e-10);
  }
  EXPECT_NEAR(d.mean()(0), mean, 1e-8);
}

TEST(Truncated, MassIsConservedUpToLeak) {
  const auto m = retrial(20, 0.3, 1.0);
  const auto d = truncated_distribution(m, {60, 60}, {0, 0}, 0, 2.0);
  EXPECT_NEAR(d.prob.sum(), 1.0 - d.leak, 1e-12);
  EXPECT_TRUE((d.prob.array() >= -1e-15).all());
  EXPECT_FALSE(d.flagged);
}

TEST(Truncated, SmallBoxLeaksAndIsFlagged) {
  const auto m = builders::build_single_queue(20, 1);
  const auto d = truncated_distribution(m, {5}, {0}, 0, 3.0);
  EXPECT_GT(d.leak, 0.5);
  EXPECT_TRUE(d.flagged);
}

TEST(Truncated, MeansMatchTransientMeanOnRetrial) {
  const auto m = retrial(20, 0.3, 1.0);
  const double T = 2.0;
  const auto d = truncated_distribution(m, {60, 60}, {0, 0}, 0, T);
  const Vector exact = transient_mean(assemble(m), InitialCondition::empty(m), T);
  EXPECT_LE((d.mean() - exact).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Truncated, RejectsBadInput) {
  const auto m = builders::build_single_queue(1, 1);
  EXPECT_THROW(truncated_distribution(m, {3}, {4}, 0, 1.0), ArgumentError);
  EXPECT_THROW(truncated_distribution(m, {3, 3}, {0}, 0, 1.0), ArgumentError);
  TruncationOptions opt;
  opt.max_states = 10;
  EXPECT_THROW(truncated_distribution(m, {20}, {0}, 0, 1.0, opt), ArgumentError);
}
