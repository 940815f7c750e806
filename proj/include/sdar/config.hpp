#pragma once

// Deployment configuration: thresholds, context horizon, microphone
// geometry, VAD threshold. Loaded from a single JSON document; absent
// fields take the defaults below.

#include <array>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace sdar {

struct DeploymentConfig {
  double tau = 0.70;                      // forward threshold on modulated confidence
  double tau_suppress = 0.30;             // below this the segment is confidently non-device
  double context_horizon_s = 8.0;         // temporal context window
  double cost_ratio = 1.0;                // C = c_fwd / c_miss, reported only
  std::vector<std::array<double, 3>> mic_geometry = {{{0.0, 0.0, 0.0}}};
  double vad_energy_threshold_dbfs = -60.0;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (!(tau >= 0.0 && tau <= 1.0)) {
      throw std::invalid_argument("config: tau must be in [0, 1]");
    }
    if (!(tau_suppress >= 0.0)) {
      throw std::invalid_argument("config: tau_suppress must be >= 0");
    }
    if (!(tau_suppress < tau)) {
      throw std::invalid_argument("config: tau_suppress must be < tau");
    }
    if (!(context_horizon_s > 0.0)) {
      throw std::invalid_argument("config: context_horizon_s must be > 0");
    }
    if (!(cost_ratio > 0.0)) {
      throw std::invalid_argument("config: cost_ratio must be > 0");
    }
    if (mic_geometry.empty()) {
      throw std::invalid_argument("config: mic_geometry needs at least one position");
    }
  }
};

inline nlohmann::json to_json(const DeploymentConfig& cfg) {
  nlohmann::json geo = nlohmann::json::array();
  for (const auto& p : cfg.mic_geometry) geo.push_back({p[0], p[1], p[2]});
  return nlohmann::json{
      {"tau", cfg.tau},
      {"tau_suppress", cfg.tau_suppress},
      {"context_horizon_s", cfg.context_horizon_s},
      {"cost_ratio", cfg.cost_ratio},
      {"mic_geometry", geo},
      {"vad_energy_threshold_dbfs", cfg.vad_energy_threshold_dbfs},
      {"rng_seed", cfg.rng_seed},
  };
}

inline DeploymentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::runtime_error("config: document must be a JSON object");
  DeploymentConfig cfg;
  try {
    if (j.contains("tau")) cfg.tau = j.at("tau").get<double>();
    if (j.contains("tau_suppress")) cfg.tau_suppress = j.at("tau_suppress").get<double>();
    if (j.contains("context_horizon_s")) {
      cfg.context_horizon_s = j.at("context_horizon_s").get<double>();
    }
    if (j.contains("cost_ratio")) cfg.cost_ratio = j.at("cost_ratio").get<double>();
    if (j.contains("vad_energy_threshold_dbfs")) {
      cfg.vad_energy_threshold_dbfs = j.at("vad_energy_threshold_dbfs").get<double>();
    }
    if (j.contains("rng_seed")) cfg.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    if (j.contains("mic_geometry")) {
      cfg.mic_geometry.clear();
      for (const auto& p : j.at("mic_geometry")) {
        if (!p.is_array() || p.size() != 3) {
          throw std::runtime_error("config: mic_geometry entries must be [x, y, z]");
        }
        cfg.mic_geometry.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config: invalid field type: " + std::string(e.what()));
  }
  cfg.validate();
  return cfg;
}

inline DeploymentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config: parse error in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

inline void save_config(const DeploymentConfig& cfg, const std::string& path) {
  cfg.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << to_json(cfg).dump(2) << "\n";
}

}  // namespace sdar
