#pragma once

#include <fstream>
#include <string>

#include "json.hpp"
#include "simcal/scenario.hpp"

namespace simcal::test {

/// Reference values produced by tests/oracles/make_frozen.py.
inline const nlohmann::json& frozen() {
  static const nlohmann::json doc = [] {
    std::ifstream in(SIMCAL_FROZEN_ORACLES);
    return nlohmann::json::parse(in);
  }();
  return doc;
}

inline std::string config_path(const std::string& name) { return std::string(SIMCAL_CONFIG_DIR) + "/" + name; }

/// All impairments and noise removed.
inline ScenarioConfig ideal_scenario() {
  ScenarioConfig cfg = table1_scenario();
  cfg.noiseless = true;
  cfg.rf_amp_sigma = 0.0;
  cfg.rf_phase_rad = {0.0, 0.0};
  cfg.tau_s = {0.0, 0.0};
  cfg.e = {0.0, 0.0};
  return cfg;
}

}  // namespace simcal::test
