#pragma once

// Toolkit configuration: one JSON object with a section per module.
//
//   {
//     "seed": 0,
//     "sim":         { ...SimConfig fields... },
//     "datagen":     { "k_obs": 10, "gps_noise": 0 },
//     "cem":         { "population": 100, ..., "model_variant": "deterministic" },
//     "bounds":      { "arr_min": 0, "arr_max": 6, ... },
//     "filter":      { "n_particles": 500, ... },
//     "experiments": { "max_demand_grid": [...], "xi_grid": [...], ... }
//   }
//
// Every field is optional; an empty file gives the defaults. Unknown fields
// and invalid values raise ConfigError naming the field path.

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "bussim/cem.hpp"
#include "bussim/experiments.hpp"
#include "bussim/objective.hpp"
#include "bussim/pf.hpp"
#include "bussim/state.hpp"

namespace bussim {

struct ToolkitConfig {
  std::uint64_t seed = 0;
  sim::SimConfig sim;
  int k_obs = 10;
  double gps_noise = 0.0;
  sim::Variant model_variant = sim::Variant::kDeterministic;
  calib::CemHyperparams cem;
  calib::ParameterSpace bounds;  // num_stops follows sim.num_stops
  pf::FilterConfig filter;
  exp::ExperimentConfig experiments;

  void validate() const;
  // Experiment settings with every module section folded in.
  exp::ExperimentConfig experiment() const;
  // The calibrated model: sim geometry with model_variant.
  sim::SimConfig model_config() const;
};

ToolkitConfig config_from_json(const nlohmann::json& j);
ToolkitConfig config_from_text(const std::string& text);
ToolkitConfig load_config(const std::string& path);
nlohmann::json to_json(const ToolkitConfig& c);

}  // namespace bussim
