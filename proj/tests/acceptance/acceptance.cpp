// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit when
// any of them fails.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "mtnet/analysis.hpp"
#include "mtnet/builders.hpp"
#include "mtnet/experiments/metrics.hpp"
#include "mtnet/experiments/run.hpp"
#include "mtnet/numerics/eigen.hpp"
#include "mtnet/numerics/expm.hpp"
#include "mtnet/numerics/ode.hpp"
#include "mtnet/oracles/retrial_closed_form.hpp"
#include "mtnet/oracles/simulate.hpp"
#include "mtnet/oracles/truncated.hpp"
#include "test_support.hpp"

using namespace mtnet;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double max_abs(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Retrial station of the worked example.
constexpr double kLambda = 100, kKappa = 2, kNu = 2, kMu = 1, kGu = 0.1;

NetworkModel example_retrial(double gd) {
  return builders::build_retrial_network(
      builders::single_retrial_params(kLambda, kKappa, kNu, kMu, kGu, gd));
}

builders::StorageParams two_location_storage() {
  builders::StorageParams p;
  p.locations = 2;
  p.arrival = {5.0, 1.0, 2.0};
  p.transfer = Matrix::Zero(3, 4);
  p.transfer(1, 1) = 4.0;  // copy {1} -> {1,2}
  p.transfer(2, 1) = 3.0;  // copy {2} -> {1,2}
  p.transfer(0, 0) = 0.2;  // deletion
  p.up_rate = {0.1, 0.2};
  p.down_rate = {1.0, 2.0};
  return p;
}

// 1 --------------------------------------------------------------------------
Verdict closed_form_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 g(20240601);
  int done = 0, draws = 0;
  double worst = 0.0;
  while (done < 100) {
    ++draws;
    const double lambda = fixtures::uniform(g, 0.1, 200);
    const double kappa = fixtures::uniform(g, 0.1, 5);
    const double nu = fixtures::uniform(g, 0.1, 5);
    const double mu = fixtures::uniform(g, 0.1, 5);
    const double gu = std::exp(fixtures::uniform(g, std::log(1e-3), std::log(5.0)));
    const double gd = std::exp(fixtures::uniform(g, std::log(1e-2), std::log(50.0)));
    oracles::RetrialStationary cf;
    try {
      cf = oracles::retrial_closed_form(lambda, kappa, nu, mu, gu, gd);
    } catch (const NumericError&) {
      continue;  // eta <= 0
    }
    const auto st = stationary_mean(assemble(builders::build_retrial_network(
        builders::single_retrial_params(lambda, kappa, nu, mu, gu, gd))));
    const double ref[] = {cf.station_up, cf.pool_up, 0.0, cf.pool_down};
    for (int k = 0; k < 4; ++k) {
      const double err = ref[k] == 0.0 ? std::abs(st.mean(k))
                                       : std::abs(st.mean(k) - ref[k]) / std::abs(ref[k]);
      worst = std::max(worst, err);
    }
    ++done;
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 1.0,
          fmt("100 sets (%d draws), max relative error %.2e, %.3f s", draws, worst, secs)};
}

// 2 --------------------------------------------------------------------------
Verdict repair_threshold() {
  const auto t0 = Clock::now();
  experiments::RetrialScalarParams p;
  const auto r = experiments::retrial_repair_threshold(p, 0.10);
  const double secs = seconds_since(t0);
  const double gap = std::abs(r.value - 2.1496);
  return {r.feasible && gap <= 1e-3 && secs < 1.0,
          fmt("gamma_d = %.7f (%s), |gap to 2.1496| = %.2e, tolerance 1e-3, %.3f s",
              r.value, r.status().c_str(), gap, secs)};
}

// 3 --------------------------------------------------------------------------
Verdict loss_floor() {
  experiments::RetrialScalarParams p;
  p.gamma_d = 1e6;
  const double l = experiments::retrial_loss_ratio(p);
  const double floor = 0.2 / 4.2;
  const double floor_fn = oracles::retrial_loss_floor(kKappa, kNu, kMu, kGu);
  return {std::abs(l - floor) <= 1e-4 && std::abs(floor_fn - floor) <= 1e-15,
          fmt("loss ratio at gamma_d = 1e6: %.9f, floor %.9f, gap %.2e", l, floor,
              std::abs(l - floor))};
}

// 4 --------------------------------------------------------------------------
Verdict failure_threshold() {
  experiments::RetrialScalarParams p;
  p.gamma_d = 0.5;
  const auto r = experiments::retrial_failure_threshold(p, 0.01);
  const double gap = std::abs(r.value - 0.0037);
  return {r.feasible && gap <= 2e-4,
          fmt("gamma_u = %.7f (%s), |gap to 0.0037| = %.2e, tolerance 2e-4", r.value,
              r.status().c_str(), gap)};
}

// 5 --------------------------------------------------------------------------
Verdict four_paths() {
  const auto t0 = Clock::now();
  const double T = 5.0;
  const auto m = example_retrial(0.5);
  const auto sys = assemble(m);
  const auto ic = InitialCondition::empty(m);
  const Vector closed = transient_mean(sys, ic, T);

  numerics::OdeOptions ode_opt;
  ode_opt.tol = 1e-12;
  const Vector ode = numerics::integrate_ode(
      [&](double t, const Vector& y) { return moment_ode_rhs(sys, t, ic.env_dist, y); },
      ic.mean, T, ode_opt);
  const double ode_err = max_abs(closed - ode);

  const auto trunc = oracles::truncated_distribution(m, {200, 200}, {0, 0}, 0, T);
  const double trunc_err = max_abs(closed - trunc.mean());

  oracles::SimulationConfig cfg;
  cfg.replications = 100000;
  cfg.horizon = T;
  cfg.seed = 1;
  const auto sim = oracles::simulate(m, cfg);
  int covered = 0;
  std::ostringstream misses;
  for (int k = 0; k < sys.J(); ++k) {
    const auto& e = sim.mean_at_horizon[k];
    if (std::abs(e.mean - closed(k)) <= e.half_width) {
      ++covered;
    } else {
      misses << " [entry " << k + 1 << ": " << e.mean << " +- " << e.half_width << " vs "
             << closed(k) << "]";
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = ode_err <= 1e-8 && trunc_err <= trunc.leak + 1e-6 &&
                  covered == sys.J() && sim.overflowed == 0 && secs < 120.0;
  return {ok, fmt("ODE %.2e; truncated %.2e (leak %.2e); simulation %d/%d inside CI; %.1f s",
                  ode_err, trunc_err, trunc.leak, covered, sys.J(), secs) +
                  misses.str()};
}

// 6 --------------------------------------------------------------------------
Verdict integral_vs_quadrature() {
  using boost::math::quadrature::gauss_kronrod;
  double worst = 0.0;
  auto check = [&](const NetworkModel& m, const InitialCondition& ic, double T) {
    const auto sys = assemble(m);
    const Vector closed = integrated_mean(sys, ic, T);
    // Cache transient means: every component is integrated on the same nodes.
    std::map<double, Vector> cache;
    auto mean_at = [&](double t) -> const Vector& {
      auto it = cache.find(t);
      if (it == cache.end()) it = cache.emplace(t, transient_mean(sys, ic, t)).first;
      return it->second;
    };
    Vector quad(sys.J());
    for (int k = 0; k < sys.J(); ++k) {
      quad(k) = gauss_kronrod<double, 61>::integrate(
          [&](double t) { return mean_at(t)(k); }, 0.0, T, 15, 1e-13);
    }
    worst = std::max(worst, max_abs(closed - quad) / max_abs(quad));
  };
  const auto retrial = example_retrial(0.5);
  check(retrial, InitialCondition::empty(retrial), 5.0);
  check(retrial, InitialCondition::point(retrial, {30.0, 10.0}, 1), 5.0);
  const auto storage = builders::build_storage_network(two_location_storage());
  check(storage, InitialCondition::empty(storage), 3.0);
  check(storage, InitialCondition::point(storage, {4.0, 2.0, 1.0}, 0), 3.0);
  return {worst <= 1e-7, fmt("max relative deviation %.2e over 4 cases", worst)};
}

// 7 --------------------------------------------------------------------------
Verdict stability_flip() {
  const double mu = 1.0;
  double worst = 0.0;
  bool flips = true;
  for (double alpha : {mu * (1 - 1e-3), mu * (1 + 1e-3)}) {
    const auto v = stability(assemble(builders::build_scalar_jump_model(1.0, mu, {{alpha, 2}})));
    worst = std::max(worst, std::abs(v.omega - (alpha * (2 - 1) - mu)));
    flips = flips && v.stable == (alpha < mu);
  }
  return {flips && worst <= 1e-9,
          fmt("stable below, unstable above alpha = mu: %s; omega error %.2e",
              flips ? "yes" : "no", worst)};
}

// 8 --------------------------------------------------------------------------
Verdict storage_structure() {
  auto p = two_location_storage();
  p.transfer = Matrix();
  const auto m = builders::build_storage_network(p);
  auto find = [&m](int from, int to) -> const MultiplicativeTransition* {
    for (const auto& t : m.transitions) {
      if (t.from_env == from - 1 && t.to_env == to - 1) return &t;
    }
    return nullptr;
  };
  IntMatrix loc2_down(3, 3), loc1_down(3, 3);
  loc2_down << 0, 0, 0, 1, 1, 0, 0, 0, 0;
  loc1_down << 0, 0, 0, 0, 0, 0, 1, 0, 1;
  const IntMatrix id = identity_matrix(3);
  const double gu1 = p.up_rate[0], gu2 = p.up_rate[1];
  const double gd1 = p.down_rate[0], gd2 = p.down_rate[1];
  struct Expect {
    int from, to;
    const IntMatrix* a;
    double rate;
  };
  const Expect expect[] = {
      {1, 2, &loc2_down, gu2}, {3, 4, &loc2_down, gu2}, {1, 3, &loc1_down, gu1},
      {2, 4, &loc1_down, gu1}, {2, 1, &id, gd2},        {4, 3, &id, gd2},
      {3, 1, &id, gd1},        {4, 2, &id, gd1}};
  int matched = 0;
  for (const auto& e : expect) {
    const auto* t = find(e.from, e.to);
    if (t && t->matrix == *e.a && t->rate == e.rate) ++matched;
  }
  const bool count_ok = m.transitions.size() == 8;
  // Arrivals: all up -> own subset; one location up -> the surviving part.
  Matrix lam(4, 3);
  lam << 5, 1, 2,  //
      0, 6, 0,     //
      0, 0, 7,     //
      0, 0, 0;
  Vector refused(4);
  refused << 0, 2, 1, 8;
  const bool rates_ok = m.arrival_rates == lam && m.rejected_arrival_rates == refused;
  return {matched == 8 && count_ok && rates_ok,
          fmt("%d/8 transitions match, %zu transitions total, arrival rates %s", matched,
              m.transitions.size(), rates_ok ? "match" : "differ")};
}

// 9 --------------------------------------------------------------------------
Verdict storage_shapes() {
  const auto t0 = Clock::now();
  const auto exp1 = experiments::run_experiment({.name = "storage-exp1"});
  bool monotone = exp1.rows.size() == 21;
  for (std::size_t r = 1; r < exp1.rows.size(); ++r) {
    monotone = monotone && exp1.number(r, "usage") > exp1.number(r - 1, "usage") &&
               exp1.number(r, "losses") < exp1.number(r - 1, "losses");
  }
  const auto exp3 = experiments::run_experiment({.name = "storage-exp3"});
  std::string at03, at07;
  for (std::size_t r = 0; r < exp3.rows.size(); ++r) {
    const double p = exp3.number(r, "premium");
    if (std::abs(p - 0.3) < 1e-9) at03 = exp3.text(r, "status");
    if (std::abs(p - 0.7) < 1e-9) at07 = exp3.text(r, "status");
  }
  const auto& lo_j = exp3.summary["feasible_from_premium"];
  const auto& hi_j = exp3.summary["unconstrained_from_premium"];
  const double lo = lo_j.is_number() ? lo_j.get<double>() : NAN;
  const double hi = hi_j.is_number() ? hi_j.get<double>() : NAN;
  const double secs = seconds_since(t0);
  const bool ok = monotone && at03 == "infeasible" && at07 == "feasible" &&
                  std::abs(lo - 0.5) <= 0.1 && std::abs(hi - 0.8) <= 0.1 && secs < 60.0;
  return {ok, fmt("monotone curves: %s; p=0.3 %s, p=0.7 %s; boundaries %.4f, %.4f; %.1f s",
                  monotone ? "yes" : "no", at03.c_str(), at07.c_str(), lo, hi, secs)};
}

// 10 -------------------------------------------------------------------------
Verdict counter_identity() {
  double worst = 0.0;
  auto check = [&](const NetworkModel& m, const std::set<int>& counted, double T) {
    const auto ic = InitialCondition::empty(m);
    const auto a = cumulative_counts_by_counter(m, counted, ic, T);
    const auto b = cumulative_counts_by_integral(m, counted, ic, T);
    worst = std::max(worst, std::abs(a.losses - b.losses));
  };
  check(example_retrial(0.5), {1}, 5.0);
  check(builders::build_rerouting_network(builders::ring3_rerouting_params(1, 1, 0.1, 1)), {},
        10.0);
  check(builders::build_storage_network(two_location_storage()), {0}, 3.0);
  check(builders::build_premium_storage({}), {}, 1.0);
  check(builders::build_premium_storage({.gamma_u = 0.1}), {}, 2.0);
  return {worst <= 1e-8, fmt("max |counter - integral| = %.2e over 5 models", worst)};
}

// 11 -------------------------------------------------------------------------
Verdict numerics_suite() {
  std::mt19937_64 g(11);
  auto norm1 = [](const Matrix& a) { return a.cwiseAbs().colwise().sum().maxCoeff(); };
  double semigroup = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    const int d = 1 + trial % 20;
    const Matrix b = fixtures::random_stable(g, d);
    const double s = fixtures::uniform(g, 0, 2), t = fixtures::uniform(g, 0, 2);
    const Matrix e = numerics::expm(b, s + t);
    semigroup = std::max(
        semigroup, norm1(e - numerics::expm(b, s) * numerics::expm(b, t)) / norm1(e));
  }
  const auto sys = assemble(example_retrial(0.5));
  double columns = 0.0;
  for (double t : {0.1, 1.0, 10.0}) {
    const Matrix e = numerics::expm(sys.A_env.transpose(), t);
    columns = std::max(columns, (e.colwise().sum().array() - 1.0).abs().maxCoeff());
  }
  double spectral = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix b = fixtures::random_stable_metzler(g, 2 + trial % 12);
    const Matrix e = numerics::expm(b, 1.0);
    Vector v = Vector::Ones(b.rows());
    double rho = 0.0;
    for (int it = 0; it < 10000; ++it) {
      const Vector w = e * v;
      const double next = w.norm() / v.norm();
      v = w / w.norm();
      const bool settled = std::abs(next - rho) <= 1e-15 * next;
      rho = next;
      if (settled) break;
    }
    spectral = std::max(spectral,
                        std::abs(std::exp(numerics::spectral_abscissa(b)) - rho) / rho);
  }
  return {semigroup <= 1e-10 && columns <= 1e-12 && spectral <= 1e-8,
          fmt("semigroup %.2e (<= 1e-10), column sums %.2e (<= 1e-12), e^omega %.2e (<= 1e-8)",
              semigroup, columns, spectral)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  int only = 0;
  app.add_option("--only", only, "Run a single criterion (1-11)")->check(CLI::Range(1, 11));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"closed-form equivalence", closed_form_equivalence},
      {"repair-rate threshold", repair_threshold},
      {"loss-ratio floor", loss_floor},
      {"failure-rate threshold", failure_threshold},
      {"four-path agreement", four_paths},
      {"integrated mean vs quadrature", integral_vs_quadrature},
      {"stability verdict", stability_flip},
      {"two-location storage matrices", storage_structure},
      {"premium storage shapes", storage_shapes},
      {"counter-augmentation identity", counter_identity},
      {"numerics suite", numerics_suite},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (only && only != id) continue;
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << " ("
              << criteria[k].first << "): " << v.detail << std::endl;
    failures += v.pass ? 0 : 1;
  }
  return failures ? 1 : 0;
}
