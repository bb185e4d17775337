// Command line front end: model files, analysis, simulation, searches and
// experiment reproduction.
//
// Exit codes: 0 ok, 1 usage error, 2 invalid model, 3 numeric failure.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mtnet/analysis.hpp"
#include "mtnet/assembly.hpp"
#include "mtnet/experiments/run.hpp"
#include "mtnet/model_io.hpp"
#include "mtnet/oracles/simulate.hpp"
#include "mtnet/templates.hpp"

namespace {

using json = nlohmann::json;
using namespace mtnet;

enum Exit { kOk = 0, kUsage = 1, kInvalidModel = 2, kNumeric = 3 };

std::map<std::string, double> parse_assignments(const std::vector<std::string>& items) {
  std::map<std::string, double> out;
  for (const auto& s : items) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ArgumentError("expected key=value, got " + s);
    try {
      out[s.substr(0, eq)] = std::stod(s.substr(eq + 1));
    } catch (const std::exception&) {
      throw ArgumentError("not a number: " + s);
    }
  }
  return out;
}

// var:min:max:points[:log]
experiments::Grid parse_grid(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.size() != 4 && parts.size() != 5) {
    throw ArgumentError("grid must be var:min:max:points[:log]");
  }
  experiments::Grid g;
  g.variable = parts[0];
  try {
    g.min = std::stod(parts[1]);
    g.max = std::stod(parts[2]);
    g.points = std::stoi(parts[3]);
  } catch (const std::exception&) {
    throw ArgumentError("grid bounds must be numbers: " + s);
  }
  if (parts.size() == 5) {
    if (parts[4] != "log" && parts[4] != "lin") throw ArgumentError("grid scale is lin or log");
    g.log = parts[4] == "log";
  }
  return g;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  for (std::string p; std::getline(ss, p, ',');) {
    try {
      out.push_back(std::stod(p));
    } catch (const std::exception&) {
      throw ArgumentError("not a number in list: " + p);
    }
  }
  return out;
}

NetworkModel load_valid_model(const std::string& path) {
  NetworkModel m = io::load_model(path);
  ensure_valid(m);
  return m;
}

InitialCondition initial_condition(const NetworkModel& m, const std::string& state, int env) {
  if (env < 1 || env > m.n_env) throw ArgumentError("--env must be in 1..n_env");
  if (state.empty()) return InitialCondition::empty(m, env - 1);
  return InitialCondition::point(m, parse_list(state), env - 1);
}

/// Sends output to a file when a path is given, else stdout.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw ArgumentError("cannot write " + path);
    }
  }
  std::ostream& out() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

void print_json(std::ostream& os, const json& j) { os << j.dump(2) << '\n'; }

int run_validate(const std::string& path, const std::string& format) {
  NetworkModel m;
  try {
    m = io::load_model(path);
  } catch (const ModelError& e) {
    if (format == "json") {
      print_json(std::cout, {{"valid", false}, {"issues", {e.what()}}});
    } else {
      std::cout << "invalid\n  " << e.what() << '\n';
    }
    return kInvalidModel;
  }
  const auto rep = validate(m);
  if (format == "json") {
    print_json(std::cout, {{"valid", rep.ok()}, {"issues", rep.issues}});
  } else if (rep.ok()) {
    std::cout << "valid: " << m.n_queues << " queues, " << m.n_env << " environment states, "
              << m.transitions.size() << " transitions\n";
  } else {
    std::cout << "invalid\n" << rep.to_string();
  }
  return rep.ok() ? kOk : kInvalidModel;
}

struct AnalyzeOptions {
  std::string model, state, format = "json", out;
  int env = 1;
  double t0 = 0.0, t1 = 1.0;
  int steps = 1;
  bool stationary = false;
};

int run_analyze(const AnalyzeOptions& o) {
  const NetworkModel m = load_valid_model(o.model);
  const AssembledSystem sys = assemble(m);
  Sink sink(o.out);
  if (o.stationary) {
    const StabilityVerdict v = stability(sys);
    if (!v.stable) {
      std::cerr << "stationary analysis refused: omega = " << std::setprecision(17) << v.omega
                << " (" << v.note() << ")\n";
      return kNumeric;
    }
    const StationaryMoments st = stationary_mean(sys);
    TransientState s;
    s.t = std::numeric_limits<double>::infinity();
    s.env_dist = st.env_dist;
    s.mean = st.mean;
    json j = io::transient_to_json(m, s);
    j["t"] = "inf";
    j["omega"] = v.omega;
    if (o.format == "csv") {
      sink.out() << std::setprecision(17) << "env,queue,mean\n";
      for (int i = 0; i < m.n_env; ++i) {
        for (int q = 0; q < m.n_queues; ++q) {
          sink.out() << io::env_name(m, i) << ',' << io::queue_name(m, q) << ','
                     << st.mean(m.index(i, q)) + 0.0 << '\n';
        }
      }
    } else {
      print_json(sink.out(), j);
    }
    return kOk;
  }
  if (o.steps < 1 || o.t0 < 0.0 || o.t1 < o.t0) {
    throw ArgumentError("need 0 <= t0 <= t1 and steps >= 1");
  }
  const InitialCondition ic = initial_condition(m, o.state, o.env);
  ic.check(m);
  json points = json::array();
  if (o.format == "csv") {
    sink.out() << std::setprecision(17) << "t";
    for (int i = 0; i < m.n_env; ++i) sink.out() << ",pi_" << io::env_name(m, i);
    for (int i = 0; i < m.n_env; ++i) {
      for (int q = 0; q < m.n_queues; ++q) {
        sink.out() << ",mean_" << io::env_name(m, i) << '_' << io::queue_name(m, q);
      }
    }
    for (int i = 0; i < m.n_env; ++i) {
      for (int q = 0; q < m.n_queues; ++q) {
        sink.out() << ",integrated_" << io::env_name(m, i) << '_' << io::queue_name(m, q);
      }
    }
    sink.out() << '\n';
  }
  for (int k = 0; k <= o.steps; ++k) {
    const double t = o.t0 + (o.t1 - o.t0) * k / o.steps;
    const TransientState s = transient_state(sys, ic, t);
    if (o.format == "csv") {
      sink.out() << t;
      for (double v : s.env_dist) sink.out() << ',' << v;
      for (double v : s.mean) sink.out() << ',' << v + 0.0;
      for (double v : *s.integrated_mean) sink.out() << ',' << v + 0.0;
      sink.out() << '\n';
    } else {
      points.push_back(io::transient_to_json(m, s));
    }
    if (o.t1 == o.t0) break;
  }
  if (o.format != "csv") print_json(sink.out(), points);
  return kOk;
}

struct SimulateOptions {
  std::string model, state, count, usage, trace, format = "json", out;
  int env = 1;
  std::int64_t reps = 1000;
  std::uint64_t seed = 1;
  double horizon = 1.0;
  unsigned threads = 0;
};

int run_simulate(const SimulateOptions& o) {
  const NetworkModel m = load_valid_model(o.model);
  oracles::SimulationConfig cfg;
  cfg.replications = o.reps;
  cfg.seed = o.seed;
  cfg.horizon = o.horizon;
  cfg.threads = o.threads;
  if (o.env < 1 || o.env > m.n_env) throw ArgumentError("--env must be in 1..n_env");
  cfg.initial_env = o.env - 1;
  if (!o.state.empty()) {
    for (double v : parse_list(o.state)) {
      if (v < 0 || v != std::floor(v)) throw ArgumentError("--state entries must be counts");
      cfg.initial_state.push_back(static_cast<std::int64_t>(v));
    }
  }
  if (!o.count.empty()) {
    for (double q : parse_list(o.count)) cfg.counted_departures.insert(static_cast<int>(q) - 1);
  }
  if (!o.usage.empty()) cfg.usage_weights = per_queue_weights(m, parse_list(o.usage));
  std::unique_ptr<std::ofstream> trace;
  if (!o.trace.empty()) {
    trace = std::make_unique<std::ofstream>(o.trace);
    if (!*trace) throw ArgumentError("cannot write " + o.trace);
    cfg.trace = trace.get();
  }
  const auto r = oracles::simulate(m, cfg);
  auto est = [](const oracles::Estimate& e) {
    return json{{"mean", e.mean}, {"sd", e.sd}, {"half_width", e.half_width}};
  };
  Sink sink(o.out);
  if (o.format == "csv") {
    sink.out() << std::setprecision(17) << "metric,mean,sd,half_width\n";
    auto row = [&](const std::string& name, const oracles::Estimate& e) {
      sink.out() << name << ',' << e.mean << ',' << e.sd << ',' << e.half_width << '\n';
    };
    row("arrivals", r.arrivals);
    row("losses", r.losses);
    row("usage", r.usage);
    for (int i = 0; i < m.n_env; ++i) {
      row("pi_" + io::env_name(m, i), r.env_at_horizon[i]);
      for (int q = 0; q < m.n_queues; ++q) {
        row("mean_" + io::env_name(m, i) + "_" + io::queue_name(m, q),
            r.mean_at_horizon[m.index(i, q)]);
      }
    }
  } else {
    json means = json::object();
    for (int i = 0; i < m.n_env; ++i) {
      json row = json::object();
      for (int q = 0; q < m.n_queues; ++q) {
        row[io::queue_name(m, q)] = est(r.mean_at_horizon[m.index(i, q)]);
      }
      means[io::env_name(m, i)] = row;
    }
    json pis = json::array();
    for (const auto& e : r.env_at_horizon) pis.push_back(est(e));
    print_json(sink.out(), {{"replications", r.replications},
                            {"overflowed", r.overflowed},
                            {"horizon", o.horizon},
                            {"seed", o.seed},
                            {"arrivals", est(r.arrivals)},
                            {"losses", est(r.losses)},
                            {"usage", est(r.usage)},
                            {"loss_ratio", r.loss_ratio()},
                            {"pi", pis},
                            {"mean", means}});
  }
  if (r.overflowed > 0) {
    std::cerr << r.overflowed << " replication(s) aborted: population exceeded 2^31\n";
    return kNumeric;
  }
  return kOk;
}

struct SearchOptions {
  std::string template_name = "retrial", variable = "gamma_d";
  std::vector<std::string> params;
  double target = 0.1, lo = 1e-3, hi = 1e4, horizon = 2.0;
};

int run_search(const SearchOptions& o) {
  const auto prm = parse_assignments(o.params);
  using experiments::Monotonicity;
  std::function<double(double)> metric;
  Monotonicity dir = Monotonicity::kDecreasing;
  std::string metric_name;
  if (o.template_name == "retrial") {
    experiments::RetrialScalarParams base;
    for (const auto& [k, v] : prm) {
      if (k == "lambda") base.lambda = v;
      else if (k == "kappa") base.kappa = v;
      else if (k == "nu") base.nu = v;
      else if (k == "mu") base.mu = v;
      else if (k == "gamma_u") base.gamma_u = v;
      else if (k == "gamma_d") base.gamma_d = v;
      else throw ArgumentError("unknown retrial parameter: " + k);
    }
    if (o.variable != "gamma_d" && o.variable != "gamma_u") {
      throw ArgumentError("retrial search variable is gamma_d or gamma_u");
    }
    dir = o.variable == "gamma_d" ? Monotonicity::kDecreasing : Monotonicity::kIncreasing;
    metric_name = "loss_ratio";
    metric = [base, var = o.variable](double x) {
      auto p = base;
      (var == "gamma_d" ? p.gamma_d : p.gamma_u) = x;
      return experiments::retrial_loss_ratio(p);
    };
  } else if (o.template_name == "premium-storage") {
    builders::PremiumStorageParams base;
    for (const auto& [k, v] : prm) {
      if (k == "lambda") base.lambda = v;
      else if (k == "premium") base.premium = v;
      else if (k == "copy_rate") base.copy_rate = v;
      else if (k == "gamma_u") base.gamma_u = v;
      else if (k == "gamma_d") base.gamma_d = v;
      else throw ArgumentError("unknown storage parameter: " + k);
    }
    double builders::PremiumStorageParams::*field = nullptr;
    if (o.variable == "gamma_d") field = &builders::PremiumStorageParams::gamma_d;
    if (o.variable == "premium") field = &builders::PremiumStorageParams::premium;
    if (o.variable == "copy_rate") field = &builders::PremiumStorageParams::copy_rate;
    if (o.variable == "gamma_u") {
      field = &builders::PremiumStorageParams::gamma_u;
      dir = Monotonicity::kIncreasing;
    }
    if (!field) throw ArgumentError("storage search variable: gamma_d, gamma_u, premium, copy_rate");
    metric_name = "loss_fraction";
    metric = [base, field, T = o.horizon](double x) {
      auto p = base;
      p.*field = x;
      return experiments::premium_storage_metrics(p, T).loss_fraction();
    };
  } else {
    throw ArgumentError("search templates: retrial, premium-storage");
  }
  const auto r = experiments::threshold_search(metric, o.lo, o.hi, o.target, dir);
  json j = {{"template", o.template_name}, {"variable", o.variable},
            {"metric", metric_name},       {"target", o.target},
            {"status", r.status()},        {"achieved", r.metric},
            {"evaluations", r.evaluations}};
  j["value"] = r.feasible ? json(r.value) : json(nullptr);
  if (!r.feasible) j["limiting_value"] = r.metric;
  print_json(std::cout, j);
  return kOk;
}

struct ExperimentOptions {
  std::string name, grid, out, format = "csv";
  std::vector<std::string> params;
  unsigned threads = 0;
};

int run_experiment_cmd(const ExperimentOptions& o) {
  experiments::ExperimentSpec spec;
  spec.name = o.name;
  spec.params = parse_assignments(o.params);
  if (!o.grid.empty()) spec.grid = parse_grid(o.grid);
  spec.threads = o.threads;
  const auto table = experiments::run_experiment(spec);
  Sink sink(o.out);
  if (o.format == "json") {
    print_json(sink.out(), experiments::table_json(table));
  } else {
    experiments::write_csv(sink.out(), table);
    if (!table.summary.empty()) std::cerr << table.summary.dump(2) << '\n';
  }
  return kOk;
}

int run_dump(const std::string& model, const std::string& dir, const std::string& which) {
  const NetworkModel m = load_valid_model(model);
  const AssembledSystem s = assemble(m);
  const std::map<std::string, const Matrix*> mats = {
      {"L", &s.L},   {"M", &s.M},   {"A", &s.A},   {"A_env", &s.A_env},
      {"MA", &s.MA}, {"C", &s.C},   {"C1", &s.C1}, {"C2", &s.C2}};
  if (!which.empty()) {
    const auto it = mats.find(which);
    if (it == mats.end()) throw ArgumentError("unknown matrix: " + which);
    write_matrix_csv(std::cout, *it->second);
    return kOk;
  }
  std::filesystem::create_directories(dir);
  for (const auto& [name, mat] : mats) {
    std::ofstream f(std::filesystem::path(dir) / (name + ".csv"));
    if (!f) throw ArgumentError("cannot write into " + dir);
    write_matrix_csv(f, *mat);
  }
  std::cout << "wrote " << mats.size() << " matrices to " << dir << '\n';
  return kOk;
}

int run_build(const std::string& name, const std::string& params, const std::string& out) {
  json p = json::object();
  if (!params.empty()) {
    std::ifstream f(params);
    try {
      if (f) {
        f >> p;
      } else {
        p = json::parse(params);
      }
    } catch (const json::exception& e) {
      throw ArgumentError(std::string("parameters are not valid JSON: ") + e.what());
    }
  }
  const NetworkModel m = templates::build_from_template(name, p);
  const auto rep = validate(m);
  Sink sink(out);
  print_json(sink.out(), io::model_to_json(m));
  if (!rep.ok()) {
    std::cerr << rep.to_string();
    return kInvalidModel;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Markov-modulated infinite-server queue networks with multiplicative transitions"};
  app.require_subcommand(1);
  const std::vector<std::string> formats = {"json", "csv"};

  std::string model, validate_format = "text";
  auto* validate_cmd = app.add_subcommand("validate", "check a model file");
  validate_cmd->add_option("--model,model", model, "model JSON file")->required();
  validate_cmd->add_option("--format", validate_format)->check(CLI::IsMember({"text", "json"}));

  AnalyzeOptions an;
  auto* analyze_cmd = app.add_subcommand("analyze", "transient or stationary first moments");
  analyze_cmd->add_option("--model", an.model, "model JSON file")->required();
  analyze_cmd->add_option("--t0", an.t0, "first time point");
  analyze_cmd->add_option("--t1", an.t1, "last time point");
  analyze_cmd->add_option("--steps", an.steps, "number of intervals between t0 and t1");
  analyze_cmd->add_flag("--stationary", an.stationary, "stationary means (stable models only)");
  analyze_cmd->add_option("--env", an.env, "initial environment state (1-based)");
  analyze_cmd->add_option("--state", an.state, "initial population, comma separated");
  analyze_cmd->add_option("--format", an.format)->check(CLI::IsMember(formats));
  analyze_cmd->add_option("--out", an.out, "output file (default stdout)");

  SimulateOptions si;
  auto* simulate_cmd = app.add_subcommand("simulate", "exact replicated simulation");
  simulate_cmd->add_option("--model", si.model, "model JSON file")->required();
  simulate_cmd->add_option("--reps", si.reps, "replications");
  simulate_cmd->add_option("--seed", si.seed, "master seed");
  simulate_cmd->add_option("--horizon", si.horizon, "time horizon T");
  simulate_cmd->add_option("--env", si.env, "initial environment state (1-based)");
  simulate_cmd->add_option("--state", si.state, "initial population, comma separated");
  simulate_cmd->add_option("--count", si.count, "queues (1-based) whose departures are losses");
  simulate_cmd->add_option("--usage", si.usage, "per-queue usage weights, comma separated");
  simulate_cmd->add_option("--trace", si.trace, "write JSON-lines event trace here");
  simulate_cmd->add_option("--threads", si.threads, "worker threads (0 = all cores)");
  simulate_cmd->add_option("--format", si.format)->check(CLI::IsMember(formats));
  simulate_cmd->add_option("--out", si.out, "output file (default stdout)");

  SearchOptions se;
  auto* search_cmd = app.add_subcommand("search", "bisection for a loss threshold");
  search_cmd->add_option("--template", se.template_name)
      ->check(CLI::IsMember({"retrial", "premium-storage"}));
  search_cmd->add_option("--variable", se.variable, "rate to tune");
  search_cmd->add_option("--target", se.target, "maximal allowed loss ratio / fraction");
  search_cmd->add_option("--lo", se.lo, "lower bound of the variable");
  search_cmd->add_option("--hi", se.hi, "upper bound of the variable");
  search_cmd->add_option("--horizon", se.horizon, "T for storage loss fractions");
  search_cmd->add_option("--param", se.params, "fixed parameter key=value (repeatable)");

  ExperimentOptions ex;
  auto* experiment_cmd = app.add_subcommand("experiment", "reproduce a numerical experiment");
  experiment_cmd->add_option("name", ex.name)
      ->required()
      ->check(CLI::IsMember(experiments::experiment_names()));
  experiment_cmd->add_option("--param", ex.params, "parameter override key=value (repeatable)");
  experiment_cmd->add_option("--grid", ex.grid, "sweep var:min:max:points[:log]");
  experiment_cmd->add_option("--out", ex.out, "output file (default stdout)");
  experiment_cmd->add_option("--format", ex.format)->check(CLI::IsMember(formats));
  experiment_cmd->add_option("--threads", ex.threads, "worker threads (0 = all cores)");

  std::string dump_dir = "matrices", dump_which;
  auto* dump_cmd = app.add_subcommand("dump-matrices", "write assembled matrices as CSV");
  dump_cmd->add_option("--model", model, "model JSON file")->required();
  dump_cmd->add_option("--out-dir", dump_dir, "directory for L.csv, M.csv, ...");
  dump_cmd->add_option("--matrix", dump_which, "print a single matrix to stdout");

  std::string build_name, build_params, build_out;
  auto* build_cmd = app.add_subcommand("build", "emit a model file from a template");
  build_cmd->add_option("template", build_name)
      ->required()
      ->check(CLI::IsMember(templates::template_names()));
  build_cmd->add_option("--params", build_params, "parameter JSON file or literal");
  build_cmd->add_option("--out", build_out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*validate_cmd) return run_validate(model, validate_format);
    if (*analyze_cmd) return run_analyze(an);
    if (*simulate_cmd) return run_simulate(si);
    if (*search_cmd) return run_search(se);
    if (*experiment_cmd) return run_experiment_cmd(ex);
    if (*dump_cmd) return run_dump(model, dump_dir, dump_which);
    if (*build_cmd) return run_build(build_name, build_params, build_out);
  } catch (const ModelError& e) {
    std::cerr << "invalid model: " << e.what() << '\n';
    return kInvalidModel;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
