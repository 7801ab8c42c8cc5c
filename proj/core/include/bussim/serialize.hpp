#pragma once

#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "bussim/observation.hpp"
#include "bussim/state.hpp"

namespace bussim::sim {

void to_json(nlohmann::json& j, const BusState& b);
void from_json(const nlohmann::json& j, BusState& b);
void to_json(nlohmann::json& j, const StopState& s);
void from_json(const nlohmann::json& j, StopState& s);
void to_json(nlohmann::json& j, const ModelParams& p);
void from_json(const nlohmann::json& j, ModelParams& p);
void to_json(nlohmann::json& j, const StateVector& s);
void from_json(const nlohmann::json& j, StateVector& s);
void to_json(nlohmann::json& j, const SimConfig& c);
// Strict: unknown keys and invariant violations raise ConfigError with the
// field path prefixed by `path`. Missing keys keep their defaults.
SimConfig sim_config_from_json(const nlohmann::json& j, const std::string& path = "sim");

// Self-describing text record of a full model state. Doubles round-trip exactly.
std::string state_to_text(const StateVector& s);
StateVector state_from_text(const std::string& text);

}  // namespace bussim::sim

namespace bussim::io {

// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

// 16-hex-digit FNV-1a hash of the compact JSON dump.
std::string fingerprint(const nlohmann::json& j);

// `time_s,bus_id,status,position_m,speed_mps,occupancy`, one row per bus per frame.
void write_trajectory_csv(std::ostream& out, const sim::ObservationSeries& series);
void write_trajectory_csv(const std::string& path, const sim::ObservationSeries& series);
sim::ObservationSeries read_trajectory_csv(std::istream& in);
sim::ObservationSeries read_trajectory_csv(const std::string& path);

}  // namespace bussim::io
