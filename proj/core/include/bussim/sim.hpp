#pragma once

// Markovian bus-route engine: one route of equally spaced stops, a fleet of
// buses dispatched at a fixed headway, Poisson (or expected) boarding,
// proportional alighting, linear dwell time, and one scalar traffic speed.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "bussim/observation.hpp"
#include "bussim/rng.hpp"
#include "bussim/state.hpp"

namespace bussim::sim {

// Round half away from zero; the rounding used for every passenger count.
inline long round_count(double x) noexcept { return static_cast<long>(std::lround(x)); }

// Accelerate toward the traffic speed (clamped at it) and advance.
BusState update_motion(BusState bus, double traffic_speed, double dt);

// Passengers waiting after `gap` seconds at `arr` passengers/second. kTruth and
// kStochastic draw from Poisson(arr * gap); kDeterministic uses the rounded mean.
int boarding_count(double arr, double gap, Variant variant, Rng& rng);

// Boarders limited by the free seats: min(boarders, capacity - occupancy).
int apply_capacity(int boarders, int capacity, int occupancy);

// round(dep * occupancy); never more than the occupancy.
int alighting_count(double dep, int occupancy);

// theta[0] + theta[1] * boarders + theta[2] * alighters.
double dwell_time(int boarders, int alighters, const std::array<double, 3>& theta);

// Parameter drift at time t: traffic speed scaled by (1 - (t/T) xi/100),
// arrival rates by (1 + (t/T) xi/100). Departure fractions are untouched.
ModelParams apply_dynamics(const ModelParams& base, double t, double horizon, double xi_percent);

// Inclusive geofence test; a visited stop never triggers again.
bool in_geofence(double bus_position, const StopState& stop, bool already_visited = false);

// Throws std::invalid_argument if `params` does not fit the route in `cfg`.
void validate_params(const ModelParams& params, const SimConfig& cfg);

// Fleet at the depot (all idle), stops laid out every cfg.stop_spacing metres.
StateVector initial_state(const SimConfig& cfg, const ModelParams& params);

// Advance `state` by one tick in place. Requires state.clock + dt <= horizon.
void advance(StateVector& state, const SimConfig& cfg, Rng& rng);

inline StateVector step(StateVector state, const SimConfig& cfg, Rng& rng) {
  advance(state, cfg, rng);
  return state;
}

// Advance until state.tick == target_tick.
void run_until(StateVector& state, const SimConfig& cfg, Rng& rng, std::int64_t target_tick);

ObservationVector extract_observation(const StateVector& state);
void observe_into(const StateVector& state, std::span<ObservationRow> out);

// Full run from t = 0; records one frame after every tick (times dt .. T).
ObservationSeries simulate(const SimConfig& cfg, const ModelParams& params, Rng& rng);
ObservationSeries simulate(const SimConfig& cfg, const ModelParams& params, std::uint64_t seed);

// Position-only variant of simulate(): frame-major, fleet_size values per frame.
std::vector<double> simulate_positions(const SimConfig& cfg, const ModelParams& params, Rng& rng);

std::int64_t ticks_for(double seconds, double dt);

}  // namespace bussim::sim
