#pragma once
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "demlab/attack_search.hpp"
#include "demlab/models.hpp"
#include "demlab/optimize.hpp"

namespace demlab {

// Run configuration for the command-line tools. Every field defaults to the
// reference receiver parameters, the resolved values are embedded in each
// output header, and unknown keys are rejected rather than ignored.
struct RunConfig {
  ReceiverModel receiver;
  LinkModel link;
  std::vector<double> loss_grid_db{3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
  EveDetectorModel eve;
  SearchThresholds thresholds;
  OptimizerConfig optimizer;
  std::string scan_preset = "paper-like";
  std::string scan_path;  // when set, overrides the preset
  std::uint64_t seed = 1;

  void validate() const {
    receiver.validate();
    link.validate();
    eve.validate();
    thresholds.validate();
    optimizer.validate();
    if (loss_grid_db.empty())
      throw std::domain_error("RunConfig: empty loss grid");
    for (double l : loss_grid_db)
      if (!(l >= 0.0)) throw std::domain_error("RunConfig: negative loss");
  }
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

using nlohmann::json;

inline void require_keys(const json& obj, const std::string& where,
                         const std::set<std::string>& allowed) {
  if (!obj.is_object())
    throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key))
      throw ConfigError(where + ": unknown key '" + key + "'");
}

inline double num(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number())
    throw ConfigError(std::string(key) + ": expected a number");
  return obj[key].get<double>();
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
  using detail::num;
  using detail::require_keys;
  RunConfig cfg;

  require_keys(j, "config",
               {"receiver", "link", "eve", "thresholds", "optimizer", "scan",
                "seed"});

  if (j.contains("receiver")) {
    const auto& r = j["receiver"];
    require_keys(r, "receiver", {"eta_det", "c"});
    cfg.receiver.eta_det = num(r, "eta_det", cfg.receiver.eta_det);
    if (r.contains("c")) {
      if (!r["c"].is_array() || r["c"].size() != 4)
        throw ConfigError("receiver.c: expected 4 background probabilities");
      for (int i = 0; i < 4; ++i)
        cfg.receiver.background.v[i] = r["c"][i].get<double>();
    }
  }

  if (j.contains("link")) {
    const auto& l = j["link"];
    require_keys(l, "link",
                 {"fidelity_ab", "fidelity_eb", "loss_db", "loss_grid_db"});
    cfg.link.fidelity_ab = num(l, "fidelity_ab", cfg.link.fidelity_ab);
    cfg.link.fidelity_eb = num(l, "fidelity_eb", cfg.link.fidelity_eb);
    cfg.link.loss_db = num(l, "loss_db", cfg.link.loss_db);
    if (l.contains("loss_grid_db")) {
      if (!l["loss_grid_db"].is_array() || l["loss_grid_db"].empty())
        throw ConfigError("link.loss_grid_db: expected a non-empty array");
      cfg.loss_grid_db.clear();
      for (const auto& x : l["loss_grid_db"])
        cfg.loss_grid_db.push_back(x.get<double>());
    }
  }

  if (j.contains("eve")) {
    const auto& e = j["eve"];
    require_keys(e, "eve", {"eta_e", "dark"});
    cfg.eve.eta_e = num(e, "eta_e", cfg.eve.eta_e);
    cfg.eve.dark = num(e, "dark", cfg.eve.dark);
  }

  if (j.contains("thresholds")) {
    const auto& t = j["thresholds"];
    require_keys(t, "thresholds", {"eta_min", "delta_min"});
    for (const char* field : {"eta_min", "delta_min"}) {
      if (!t.contains(field)) continue;
      const auto& m = t[field];
      require_keys(m, std::string("thresholds.") + field, {"H", "V", "D", "A"});
      for (Pol p : kAllPols) {
        const std::string key{name_of(p)};
        if (!m.contains(key)) continue;
        const double v = m[key].get<double>();
        if (std::string(field) == "eta_min")
          cfg.thresholds.eta_min[index_of(p)] = v;
        else
          cfg.thresholds.delta_min[index_of(p)] = v;
      }
    }
  }

  if (j.contains("optimizer")) {
    const auto& o = j["optimizer"];
    require_keys(o, "optimizer",
                 {"mode", "mu_max", "constraint_tol", "objective_tol",
                  "max_iters", "restarts"});
    if (o.contains("mode")) {
      const std::string m = o["mode"].get<std::string>();
      if (m == "total")
        cfg.optimizer.mode = OptimizerMode::TotalRate;
      else if (m == "perpol")
        cfg.optimizer.mode = OptimizerMode::PerPolarizationRates;
      else
        throw ConfigError("optimizer.mode: expected 'total' or 'perpol'");
    }
    cfg.optimizer.mu_max = num(o, "mu_max", cfg.optimizer.mu_max);
    cfg.optimizer.constraint_tol =
        num(o, "constraint_tol", cfg.optimizer.constraint_tol);
    cfg.optimizer.objective_tol =
        num(o, "objective_tol", cfg.optimizer.objective_tol);
    cfg.optimizer.max_iters =
        static_cast<int>(num(o, "max_iters", cfg.optimizer.max_iters));
    cfg.optimizer.restarts =
        static_cast<int>(num(o, "restarts", cfg.optimizer.restarts));
  }

  if (j.contains("scan")) {
    const auto& s = j["scan"];
    require_keys(s, "scan", {"preset", "path"});
    if (s.contains("preset")) cfg.scan_preset = s["preset"].get<std::string>();
    if (s.contains("path")) cfg.scan_path = s["path"].get<std::string>();
  }

  if (j.contains("seed")) {
    const auto& s = j["seed"];
    if (!s.is_number_integer() ||
        (!s.is_number_unsigned() && s.get<std::int64_t>() < 0))
      throw ConfigError("seed: expected a non-negative integer");
    cfg.seed = s.get<std::uint64_t>();
  }
  cfg.optimizer.seed = cfg.seed;

  try {
    cfg.validate();
  } catch (const std::domain_error& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["receiver"]["eta_det"] = cfg.receiver.eta_det;
  j["receiver"]["c"] = cfg.receiver.background.v;
  j["link"]["fidelity_ab"] = cfg.link.fidelity_ab;
  j["link"]["fidelity_eb"] = cfg.link.fidelity_eb;
  j["link"]["loss_db"] = cfg.link.loss_db;
  j["link"]["loss_grid_db"] = cfg.loss_grid_db;
  j["eve"]["eta_e"] = cfg.eve.eta_e;
  j["eve"]["dark"] = cfg.eve.dark;
  for (Pol p : kAllPols) {
    const std::string key{name_of(p)};
    j["thresholds"]["eta_min"][key] = cfg.thresholds.eta_min[index_of(p)];
    j["thresholds"]["delta_min"][key] = cfg.thresholds.delta_min[index_of(p)];
  }
  j["optimizer"]["mode"] =
      cfg.optimizer.mode == OptimizerMode::TotalRate ? "total" : "perpol";
  j["optimizer"]["mu_max"] = cfg.optimizer.mu_max;
  j["optimizer"]["constraint_tol"] = cfg.optimizer.constraint_tol;
  j["optimizer"]["objective_tol"] = cfg.optimizer.objective_tol;
  j["optimizer"]["max_iters"] = cfg.optimizer.max_iters;
  j["optimizer"]["restarts"] = cfg.optimizer.restarts;
  j["scan"]["preset"] = cfg.scan_preset;
  if (!cfg.scan_path.empty()) j["scan"]["path"] = cfg.scan_path;
  j["seed"] = cfg.seed;
  return j;
}

inline RunConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  return config_from_json(j);
}

// Header lines carrying full provenance for output files.
inline std::vector<std::string> provenance_header(const RunConfig& cfg,
                                                  const std::string& command) {
  return {
      "demlab " + command,
      "config: " + config_to_json(cfg).dump(),
      "seed: " + std::to_string(cfg.seed),
      "rng_version: " + std::to_string(kRngVersion),
  };
}

}  // namespace demlab
