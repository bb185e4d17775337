#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtnet/analysis.hpp"
#include "mtnet/core.hpp"
#include "mtnet/model.hpp"

// JSON model files. Environment indices are 1-based in files and 0-based in
// memory. Matrices are arrays of rows.

namespace mtnet::io {

using json = nlohmann::json;

namespace detail {

inline Matrix read_matrix(const json& j, int rows, int cols, const char* what) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows) {
    throw ModelError(std::string(what) + ": expected " + std::to_string(rows) +
                     " rows");
  }
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      throw ModelError(std::string(what) + ": row " + std::to_string(r + 1) +
                       " must have " + std::to_string(cols) + " entries");
    }
    for (int c = 0; c < cols; ++c) {
      if (!row[c].is_number()) {
        throw ModelError(std::string(what) + ": non-numeric entry");
      }
      m(r, c) = row[c].get<double>();
    }
  }
  return m;
}

inline IntMatrix read_int_matrix(const json& j, int n, const char* what) {
  const Matrix d = read_matrix(j, n, n, what);
  IntMatrix out(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (d(r, c) != std::floor(d(r, c))) {
        throw ModelError(std::string(what) + ": entries must be integers");
      }
      out(r, c) = static_cast<std::int64_t>(d(r, c));
    }
  }
  return out;
}

template <class M>
json matrix_json(const M& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
  return out;
}

}  // namespace detail

/// Parses a model. Shape errors throw ModelError; rate and structure checks
/// are left to validate().
inline NetworkModel model_from_json(const json& j) {
  if (!j.is_object()) throw ModelError("model file must be a JSON object");
  for (const char* key : {"n_queues", "n_env", "arrival_rates", "departure_rates"}) {
    if (!j.contains(key)) throw ModelError(std::string("missing key: ") + key);
  }
  const int n = j.at("n_queues").get<int>();
  const int envs = j.at("n_env").get<int>();
  if (n <= 0 || envs <= 0) throw ModelError("n_queues and n_env must be positive");
  NetworkModel m = make_empty_model(n, envs);
  m.arrival_rates = detail::read_matrix(j.at("arrival_rates"), envs, n, "arrival_rates");
  const auto& dep = j.at("departure_rates");
  if (!dep.is_array() || static_cast<int>(dep.size()) != envs) {
    throw ModelError("departure_rates: expected one N x (N+1) matrix per env");
  }
  for (int i = 0; i < envs; ++i) {
    m.departure_rates[i] = detail::read_matrix(dep[i], n, n + 1, "departure_rates");
  }
  if (j.contains("transitions")) {
    for (const auto& t : j.at("transitions")) {
      MultiplicativeTransition tr;
      tr.from_env = t.at("from").get<int>() - 1;
      tr.to_env = t.at("to").get<int>() - 1;
      tr.rate = t.at("rate").get<double>();
      tr.matrix = detail::read_int_matrix(t.at("matrix"), n, "transition matrix");
      tr.loss_weights = IntVector::Zero(n);
      if (t.contains("loss_weights")) {
        const auto& c = t.at("loss_weights");
        if (!c.is_array() || static_cast<int>(c.size()) != n) {
          throw ModelError("loss_weights must have n_queues entries");
        }
        for (int q = 0; q < n; ++q) tr.loss_weights(q) = c[q].get<std::int64_t>();
      }
      m.transitions.push_back(std::move(tr));
    }
  }
  if (j.contains("rejected_arrival_rates")) {
    const auto& r = j.at("rejected_arrival_rates");
    if (!r.is_array() || static_cast<int>(r.size()) != envs) {
      throw ModelError("rejected_arrival_rates must have n_env entries");
    }
    for (int i = 0; i < envs; ++i) m.rejected_arrival_rates(i) = r[i].get<double>();
  }
  if (j.contains("labels")) {
    const auto& l = j.at("labels");
    if (l.contains("queues")) m.labels.queues = l.at("queues").get<std::vector<std::string>>();
    if (l.contains("env")) m.labels.env = l.at("env").get<std::vector<std::string>>();
  }
  return m;
}

inline json model_to_json(const NetworkModel& m) {
  json j;
  j["n_queues"] = m.n_queues;
  j["n_env"] = m.n_env;
  j["arrival_rates"] = detail::matrix_json(m.arrival_rates);
  j["departure_rates"] = json::array();
  for (const auto& d : m.departure_rates) j["departure_rates"].push_back(detail::matrix_json(d));
  j["transitions"] = json::array();
  for (const auto& t : m.transitions) {
    json c = json::array();
    for (Eigen::Index q = 0; q < t.loss_weights.size(); ++q) c.push_back(t.loss_weights(q));
    j["transitions"].push_back({{"from", t.from_env + 1},
                                {"to", t.to_env + 1},
                                {"rate", t.rate},
                                {"matrix", detail::matrix_json(t.matrix)},
                                {"loss_weights", c}});
  }
  if (m.rejected_arrival_rates.size() && m.rejected_arrival_rates.any()) {
    j["rejected_arrival_rates"] = detail::vector_json(m.rejected_arrival_rates);
  }
  if (!m.labels.queues.empty() || !m.labels.env.empty()) {
    j["labels"] = {{"queues", m.labels.queues}, {"env", m.labels.env}};
  }
  return j;
}

inline NetworkModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open model file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ModelError(std::string("malformed JSON: ") + e.what());
  }
  try {
    return model_from_json(j);
  } catch (const json::exception& e) {
    throw ModelError(std::string("bad model file: ") + e.what());
  }
}

inline std::string queue_name(const NetworkModel& m, int q) {
  return q < static_cast<int>(m.labels.queues.size()) ? m.labels.queues[q]
                                                      : "q" + std::to_string(q + 1);
}

inline std::string env_name(const NetworkModel& m, int i) {
  return i < static_cast<int>(m.labels.env.size()) ? m.labels.env[i]
                                                   : "e" + std::to_string(i + 1);
}

/// {t, pi, mean, integrated_mean}; means are keyed by env label, then queue.
inline json transient_to_json(const NetworkModel& m, const TransientState& s) {
  auto keyed = [&m](const Vector& v) {
    json out = json::object();
    for (int i = 0; i < m.n_env; ++i) {
      json row = json::object();
      for (int q = 0; q < m.n_queues; ++q) row[queue_name(m, q)] = v(m.index(i, q));
      out[env_name(m, i)] = std::move(row);
    }
    return out;
  };
  json j;
  j["t"] = s.t;
  j["pi"] = detail::vector_json(s.env_dist);
  j["mean"] = keyed(s.mean);
  if (s.integrated_mean) j["integrated_mean"] = keyed(*s.integrated_mean);
  return j;
}

}  // namespace mtnet::io
