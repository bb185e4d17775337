#include <gtest/gtest.h>

#include "mtnet/analysis.hpp"
#include "mtnet/builders.hpp"

using namespace mtnet;
using namespace mtnet::builders;

namespace {

void expect_columns_at_most_one(const NetworkModel& m) {
  for (const auto& t : m.transitions) {
    const IntVector sums = t.matrix.colwise().sum();
    EXPECT_LE(sums.maxCoeff(), 1) << "transition " << t.from_env << "->" << t.to_env;
  }
}

const MultiplicativeTransition& find(const NetworkModel& m, int from, int to) {
  for (const auto& t : m.transitions) {
    if (t.from_env == from && t.to_env == to) return t;
  }
  throw std::runtime_error("no such transition");
}

}  // namespace

TEST(Subsets, CanonicalOrder) {
  EXPECT_EQ(ordered_subsets(2, true), (std::vector<std::uint32_t>{3, 1, 2, 0}));
  EXPECT_EQ(ordered_subsets(2, false), (std::vector<std::uint32_t>{3, 1, 2}));
  EXPECT_EQ(ordered_subsets(3, true),
            (std::vector<std::uint32_t>{7, 3, 5, 6, 1, 2, 4, 0}));
  EXPECT_EQ(subset_label(5, 3), "{1,3}");
  EXPECT_EQ(subset_label(0, 3), "{}");
  EXPECT_THROW(ordered_subsets(0, true), ArgumentError);
}

TEST(Retrial, SingleStationMatrices) {
  const auto m = build_retrial_network(single_retrial_params(100, 2, 3, 1, 0.1, 0.5));
  ASSERT_EQ(m.n_queues, 2);
  ASSERT_EQ(m.n_env, 2);
  EXPECT_TRUE(validate(m).ok());
  EXPECT_EQ(m.arrival_rates(0, 0), 100);
  EXPECT_EQ(m.arrival_rates(0, 1), 0);
  EXPECT_EQ(m.arrival_rates(1, 0), 0);
  EXPECT_EQ(m.arrival_rates(1, 1), 100);
  EXPECT_EQ(m.departure_rates[0](0, 0), 1);  // service
  EXPECT_EQ(m.departure_rates[0](1, 1), 2);  // retrial to the station
  EXPECT_EQ(m.departure_rates[0](1, 0), 3);  // renege
  EXPECT_EQ(m.departure_rates[1](1, 1), 0);  // no retrial while down
  EXPECT_EQ(m.departure_rates[1](1, 0), 3);
  EXPECT_EQ(m.labels.env, (std::vector<std::string>{"up={1}", "up={}"}));
  EXPECT_EQ(retrial_loss_queues(single_retrial_params(1, 1, 1, 1, 1, 1)), std::set<int>{1});
  expect_columns_at_most_one(m);
}

TEST(Retrial, TwoStations) {
  auto p = single_retrial_params(10, 2, 2, 1, 0.1, 0.5);
  p.arrival = {10, 5};
  p.routing = Matrix::Zero(2, 3);
  p.routing << 0.5, 0.0, 0.5, 1.0, 0.0, 0.0;
  p.retrial = {2, 1};
  p.renege = {2, 0};
  p.up_rate = {0.1, 0.2};
  p.down_rate = {0.5, 1.0};
  const auto m = build_retrial_network(p);
  EXPECT_TRUE(validate(m).ok()) << validate(m).to_string();
  EXPECT_EQ(m.n_queues, 4);
  EXPECT_EQ(m.n_env, 4);
  EXPECT_EQ(m.labels.env[1], "up={1}");
  // Station 2 down in env 1: routing from station 1 goes to pool 2.
  EXPECT_EQ(m.departure_rates[1](0, 2), 0.0);
  EXPECT_EQ(m.departure_rates[1](0, 4), 0.5);
  EXPECT_EQ(m.departure_rates[0](0, 2), 0.5);
  EXPECT_EQ(retrial_loss_queues(p), std::set<int>{2});
  expect_columns_at_most_one(m);
  EXPECT_TRUE(stability(assemble(m)).stable);
}

TEST(Retrial, RejectsSelfRouting) {
  auto p = single_retrial_params(10, 2, 2, 1, 0.1, 0.5);
  p.routing(0, 1) = 1.0;
  EXPECT_THROW(build_retrial_network(p), ArgumentError);
}

TEST(Retrial, NoFailuresKeepsThePoolEmpty) {
  const auto m = build_retrial_network(single_retrial_params(100, 2, 2, 1, 0.0, 0.5));
  EXPECT_FALSE(validate(m).ok());  // the up state is absorbing
  EXPECT_TRUE(validate(m, {.require_irreducible = false}).ok());
  const auto s = transient_state(assemble(m), InitialCondition::empty(m), 5.0);
  EXPECT_EQ(s.mean(1), 0.0);
  EXPECT_NEAR(s.mean(0), 100 * (1 - std::exp(-5.0)), 1e-10);
}

TEST(Rerouting, Ring3FailureMatrixByHand) {
  const auto m = build_rerouting_network(ring3_rerouting_params(1, 1, 0.1, 2));
  ASSERT_EQ(m.n_queues, 6);
  ASSERT_EQ(m.n_env, 8);
  EXPECT_TRUE(validate(m).ok());
  // All up -> link 1 fails: env {2,3} sits at position 3.
  const auto& t = find(m, 0, 3);
  EXPECT_EQ(t.rate, 0.1);
  IntMatrix a = IntMatrix::Identity(6, 6);
  a(0, 0) = 0;
  a(3, 0) = 1;  // direct 1 detours
  a(4, 4) = 0;  // indirect 2 uses link 1
  a(5, 5) = 0;  // indirect 3 uses link 1
  EXPECT_EQ(t.matrix, a);
  IntVector c = IntVector::Zero(6);
  c(4) = 1;
  c(5) = 1;
  EXPECT_EQ(t.loss_weights, c);
  // Repair of link 1 brings indirect clients back to the direct route.
  const auto& r = find(m, 3, 0);
  EXPECT_EQ(r.rate, 2.0);
  EXPECT_EQ(r.matrix(0, 3), 1);
  EXPECT_EQ(r.matrix(3, 3), 0);
  expect_columns_at_most_one(m);
}

TEST(Rerouting, SecondFailureWithoutDetour) {
  const auto m = build_rerouting_network(ring3_rerouting_params(1, 1, 0.1, 2));
  // From {2,3}, link 2 fails -> {3} at position 6. Direct 2 has no detour.
  const auto& t = find(m, 3, 6);
  EXPECT_EQ(t.matrix(1, 1), 0);
  EXPECT_EQ(t.matrix.col(1).sum(), 0);
  EXPECT_EQ(t.loss_weights(1), 1);
  EXPECT_EQ(t.loss_weights(3), 1);  // indirect 1 runs over link 2
  // Only link 3 up: pairs 1 and 2 are refused.
  EXPECT_EQ(m.rejected_arrival_rates(6), 2.0);
  EXPECT_EQ(m.rejected_arrival_rates(7), 3.0);
}

TEST(Rerouting, AllUpHasNoLoss) {
  const auto m = build_rerouting_network(ring3_rerouting_params(2, 1, 0.1, 2));
  EXPECT_EQ(m.rejected_arrival_rates(0), 0.0);
  EXPECT_EQ(m.arrival_rates.row(0).head(3).sum(), 6.0);
  EXPECT_EQ(m.arrival_rates.row(0).tail(3).sum(), 0.0);
  EXPECT_EQ(m.arrival_rates(3, 3), 2.0);  // pair 1 rerouted while link 1 is down
}

TEST(Rerouting, UsageWeights) {
  EXPECT_EQ(rerouting_usage_weights(3), (std::vector<double>{1, 1, 1, 2, 2, 2}));
}

TEST(Rerouting, WithoutReroutingDirectClientsAreLost) {
  auto p = ring3_rerouting_params(1, 1, 0.1, 2);
  p.rerouting = false;
  const auto m = build_rerouting_network(p);
  const auto& t = find(m, 0, 3);
  EXPECT_EQ(t.loss_weights(0), 1);
  EXPECT_EQ(t.matrix.col(0).sum(), 0);
  EXPECT_EQ(m.rejected_arrival_rates(3), 1.0);
}

TEST(Rerouting, RejectsBadDetours) {
  auto p = ring3_rerouting_params(1, 1, 0.1, 2);
  p.indirect[0] = {{0, 2}};
  EXPECT_THROW(build_rerouting_network(p), ArgumentError);
}

TEST(Rerouting, CounterRouteMatchesIntegralRoute) {
  const auto m = build_rerouting_network(ring3_rerouting_params(1, 1, 0.3, 1));
  const auto ic = InitialCondition::empty(m);
  const auto a = cumulative_counts_by_counter(m, {}, ic, 10.0);
  const auto b = cumulative_counts_by_integral(m, {}, ic, 10.0);
  EXPECT_NEAR(a.losses, b.losses, 1e-10 * b.losses);
  EXPECT_NEAR(a.arrivals, 30.0, 1e-9);
  EXPECT_NEAR(b.arrivals, 30.0, 1e-9);
}

TEST(Storage, TwoLocations) {
  StorageParams p;
  p.locations = 2;
  p.arrival = {5, 1, 2};
  p.up_rate = {0.1, 0.2};
  p.down_rate = {1, 2};
  const auto m = build_storage_network(p);
  ASSERT_EQ(m.n_queues, 3);
  ASSERT_EQ(m.n_env, 4);
  EXPECT_TRUE(validate(m).ok()) << validate(m).to_string();
  EXPECT_EQ(storage_single_location_begin(2), 1);
  EXPECT_EQ(m.labels.queues, (std::vector<std::string>{"files{1,2}", "files{1}", "files{2}"}));

  // Only location 1 up: files aimed at {1,2} land on {1}; {2} is refused.
  EXPECT_EQ(m.arrival_rates(1, 1), 6.0);
  EXPECT_EQ(m.arrival_rates(1, 0), 0.0);
  EXPECT_EQ(m.rejected_arrival_rates(1), 2.0);
  EXPECT_EQ(m.rejected_arrival_rates(3), 8.0);

  // Location 1 fails from all-up: {1,2} -> {2}, {1} is lost.
  const auto& t = find(m, 0, 2);
  IntMatrix a(3, 3);
  a << 0, 0, 0, 0, 0, 0, 1, 0, 1;
  EXPECT_EQ(t.matrix, a);
  EXPECT_EQ(t.loss_weights, (IntVector(3) << 0, 1, 0).finished());
  EXPECT_EQ(find(m, 2, 0).matrix, identity_matrix(3));
  expect_columns_at_most_one(m);
  EXPECT_EQ(storage_copy_weights(2), (std::vector<double>{2, 1, 1}));
}

TEST(Storage, TransfersIntoDownSubsetsAreSuppressed) {
  StorageParams p;
  p.locations = 2;
  p.arrival = {0, 1, 0};
  p.transfer = Matrix::Zero(3, 4);
  p.transfer(1, 1) = 4.0;  // copy {1} -> {1,2}
  p.up_rate = {0.1, 0.1};
  p.down_rate = {1, 1};
  const auto m = build_storage_network(p);
  EXPECT_EQ(m.departure_rates[0](1, 1), 4.0);
  EXPECT_EQ(m.departure_rates[1](1, 1), 0.0);
}

TEST(Storage, SingleLocationCollapse) {
  StorageParams p;
  p.locations = 1;
  p.arrival = {3};
  p.up_rate = {0.5};
  p.down_rate = {2};
  const auto m = build_storage_network(p);
  ASSERT_EQ(m.n_queues, 1);
  ASSERT_EQ(m.n_env, 2);
  EXPECT_EQ(m.arrival_rates(0, 0), 3.0);
  EXPECT_EQ(m.rejected_arrival_rates(1), 3.0);
  const auto& t = find(m, 0, 1);
  EXPECT_EQ(t.matrix(0, 0), 0);
  EXPECT_EQ(t.loss_weights(0), 1);
}

TEST(Storage, ThreeLocationQueueOrder) {
  EXPECT_EQ(storage_subsets(3), (std::vector<std::uint32_t>{7, 3, 5, 6, 1, 2, 4}));
  EXPECT_EQ(storage_single_location_begin(3), 4);
  StorageParams p;
  p.locations = 3;
  p.arrival.assign(7, 1.0);
  p.up_rate.assign(3, 0.1);
  p.down_rate.assign(3, 1.0);
  const auto m = build_storage_network(p);
  EXPECT_TRUE(validate(m).ok());
  EXPECT_EQ(m.n_env, 8);
  // Location 3 fails from all-up: {1,2,3} -> {1,2}.
  const auto& t = find(m, 0, 1);
  EXPECT_EQ(t.matrix(1, 0), 1);
  EXPECT_EQ(t.matrix(4, 2), 1);  // {1,3} -> {1}
  EXPECT_EQ(t.loss_weights(6), 1);
  expect_columns_at_most_one(m);
}

TEST(PremiumStorage, Extremes) {
  const auto basic_only = build_premium_storage({.premium = 0.0});
  EXPECT_EQ(basic_only.arrival_rates.col(kPremiumA).sum(), 0.0);
  EXPECT_EQ(basic_only.arrival_rates.col(kPremiumB).sum(), 0.0);
  const auto premium_only = build_premium_storage({.premium = 1.0});
  EXPECT_EQ(premium_only.arrival_rates.col(kBasicA).sum(), 0.0);
  EXPECT_EQ(premium_only.arrival_rates.col(kBasicB).sum(), 0.0);
  EXPECT_THROW(build_premium_storage({.premium = 1.5}), ArgumentError);
}

TEST(PremiumStorage, Structure) {
  const auto m = build_premium_storage({.lambda = 100, .premium = 0.3});
  EXPECT_TRUE(validate(m).ok()) << validate(m).to_string();
  EXPECT_DOUBLE_EQ(m.arrival_rates.row(0).sum(), 100.0);
  EXPECT_DOUBLE_EQ(m.arrival_rates.row(1).sum(), 100.0);
  EXPECT_EQ(m.rejected_arrival_rates(3), 100.0);
  EXPECT_EQ(m.departure_rates[0](kPremiumA, kPremiumBoth + 1), 24.0);
  EXPECT_EQ(m.departure_rates[1](kPremiumA, kPremiumBoth + 1), 0.0);
  // A fails: premium files on both keep their B copy.
  const auto& t = find(m, 0, 2);
  EXPECT_EQ(t.matrix(kPremiumB, kPremiumBoth), 1);
  EXPECT_EQ(t.matrix(kPremiumA, kPremiumA), 0);
  EXPECT_EQ(t.loss_weights(kPremiumA), 1);
  EXPECT_EQ(t.loss_weights(kBasicA), 1);
  EXPECT_EQ(t.loss_weights(kPremiumBoth), 0);
  expect_columns_at_most_one(m);
  EXPECT_EQ(premium_storage_copy_weights(), (std::vector<double>{1, 1, 2, 1, 1}));
}

TEST(SmallModels, ScalarJumps) {
  const auto m = build_scalar_jump_model(1, 2, {{0.5, 3}, {0.1, 0}});
  EXPECT_EQ(m.transitions.size(), 2u);
  EXPECT_EQ(m.transitions[0].matrix(0, 0), 3);
  EXPECT_THROW(build_scalar_jump_model(1, 1, {{1.0, -1}}), ArgumentError);
}
