#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "mtnet/builders.hpp"
#include "mtnet/core.hpp"

// Builder templates addressed by name with a JSON parameter object, as used
// by the command line tool. Link/location indices in parameters are 1-based.

namespace mtnet::templates {

using json = nlohmann::json;

inline const std::vector<std::string>& template_names() {
  static const std::vector<std::string> names = {"single-queue", "retrial", "rerouting",
                                                 "storage", "premium-storage"};
  return names;
}

namespace detail {

inline double num(const json& p, const char* key, double fallback) {
  return p.contains(key) ? p.at(key).get<double>() : fallback;
}

inline std::vector<double> vec(const json& p, const char* key) {
  if (!p.contains(key)) throw ArgumentError(std::string("missing parameter: ") + key);
  return p.at(key).get<std::vector<double>>();
}

inline Matrix mat(const json& p, const char* key) {
  if (!p.contains(key)) throw ArgumentError(std::string("missing parameter: ") + key);
  const auto rows = p.at(key).get<std::vector<std::vector<double>>>();
  if (rows.empty()) return Matrix();
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r].size() == rows[0].size(), std::string(key) + ": ragged rows");
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

}  // namespace detail

/// Builds a model from a template. Scalar shorthands: retrial accepts
/// {lambda, kappa, nu, mu, gamma_u, gamma_d} for one station; rerouting
/// accepts {lambda, mu, gamma_u, gamma_d} for the three-link ring.
inline NetworkModel build_from_template(const std::string& name, const json& p) {
  try {
    if (name == "single-queue") {
      return builders::build_single_queue(detail::num(p, "lambda", 1.0),
                                          detail::num(p, "mu", 1.0));
    }
    if (name == "retrial") {
      if (!p.contains("arrival")) {
        return builders::build_retrial_network(builders::single_retrial_params(
            detail::num(p, "lambda", 100.0), detail::num(p, "kappa", 2.0),
            detail::num(p, "nu", 2.0), detail::num(p, "mu", 1.0),
            detail::num(p, "gamma_u", 0.1), detail::num(p, "gamma_d", 2.1496)));
      }
      builders::RetrialNetworkParams r;
      r.arrival = detail::vec(p, "arrival");
      r.routing = detail::mat(p, "routing");
      r.retrial = detail::vec(p, "retrial");
      r.renege = detail::vec(p, "renege");
      r.up_rate = detail::vec(p, "up_rate");
      r.down_rate = detail::vec(p, "down_rate");
      return builders::build_retrial_network(r);
    }
    if (name == "rerouting") {
      builders::ReroutingParams r;
      if (!p.contains("arrival")) {
        r = builders::ring3_rerouting_params(
            detail::num(p, "lambda", 1.0), detail::num(p, "mu", 1.0),
            detail::num(p, "gamma_u", 0.1), detail::num(p, "gamma_d", 1.0));
      } else {
        r.arrival = detail::vec(p, "arrival");
        r.service = detail::vec(p, "service");
        r.up_rate = detail::vec(p, "up_rate");
        r.down_rate = detail::vec(p, "down_rate");
        for (const auto& route : p.at("indirect")) {
          const auto links = route.get<std::vector<int>>();
          require(links.size() == 2, "indirect routes have exactly two links");
          r.indirect.push_back({links[0] - 1, links[1] - 1});
        }
      }
      if (p.contains("rerouting")) r.rerouting = p.at("rerouting").get<bool>();
      return builders::build_rerouting_network(r);
    }
    if (name == "storage") {
      builders::StorageParams s;
      s.locations = p.at("locations").get<int>();
      s.arrival = detail::vec(p, "arrival");
      if (p.contains("transfer")) s.transfer = detail::mat(p, "transfer");
      s.up_rate = detail::vec(p, "up_rate");
      s.down_rate = detail::vec(p, "down_rate");
      return builders::build_storage_network(s);
    }
    if (name == "premium-storage") {
      builders::PremiumStorageParams s;
      s.lambda = detail::num(p, "lambda", s.lambda);
      s.premium = detail::num(p, "premium", s.premium);
      s.copy_rate = detail::num(p, "copy_rate", s.copy_rate);
      s.gamma_u = detail::num(p, "gamma_u", s.gamma_u);
      s.gamma_d = detail::num(p, "gamma_d", s.gamma_d);
      return builders::build_premium_storage(s);
    }
  } catch (const json::exception& e) {
    throw ArgumentError("template " + name + ": bad parameters: " + e.what());
  }
  throw ArgumentError("unknown template: " + name);
}

}  // namespace mtnet::templates
