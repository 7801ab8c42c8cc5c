#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace bussim::sim {

// Which flavour of the bus-route model is being run.
//   kTruth         stochastic boarding + parameter drift (the synthetic "reality")
//   kStochastic    stochastic boarding, static parameters
//   kDeterministic expected boarding, static parameters
enum class Variant { kTruth, kStochastic, kDeterministic };

enum class BusStatus : int { kIdle = 0, kMoving = 1, kDwelling = 2, kFinished = 3 };

std::string_view to_string(Variant v) noexcept;
std::string_view to_string(BusStatus s) noexcept;
Variant variant_from_string(std::string_view name);
BusStatus status_from_string(std::string_view name);

struct BusState {
  int bus_id = 0;
  double dispatch_time = 0.0;  // seconds
  double acceleration = 3.0;   // m/s^2
  double speed = 0.0;          // m/s
  double position = 0.0;       // metres from the route origin
  int occupancy = 0;
  BusStatus status = BusStatus::kIdle;
  double leave_stop_time = 0.0;  // meaningful while kDwelling
  // Stops are visited in route order, so the visited list is always the
  // prefix [0, next_stop).
  std::size_t next_stop = 0;
  int capacity = 85;

  std::vector<int> visited_stops() const;
  bool active() const noexcept {
    return status == BusStatus::kMoving || status == BusStatus::kDwelling;
  }

  friend bool operator==(const BusState&, const BusState&) = default;
};

struct ArrivalRecord {
  int bus_id = 0;
  double time = 0.0;
  friend bool operator==(const ArrivalRecord&, const ArrivalRecord&) = default;
};

// Dynamic state of a stop. Rates live in ModelParams.
struct StopState {
  int stop_id = 0;
  double position = 0.0;
  double geofence_radius = 50.0;
  // Arrival time of the most recent bus; the boarding gap for the next bus is
  // measured from here. Starts at the service origin t = 0.
  double last_visit_time = 0.0;
  std::vector<ArrivalRecord> arrivals;

  friend bool operator==(const StopState&, const StopState&) = default;
};

// The calibrated / assimilated parameter vector. Rates are per second.
struct ModelParams {
  std::vector<double> arr;  // passengers / second, one per stop
  std::vector<double> dep;  // alighting fraction in [0, 1], last entry 1
  double traffic_speed = 14.0;

  std::size_t num_stops() const noexcept { return arr.size(); }
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct StateVector {
  std::int64_t tick = 0;
  double clock = 0.0;
  std::vector<BusState> buses;
  std::vector<StopState> stops;
  ModelParams params;
  // Parameters at t = 0. The truth variant drifts `params` away from these.
  ModelParams base_params;

  friend bool operator==(const StateVector&, const StateVector&) = default;
};

struct SimConfig {
  Variant variant = Variant::kTruth;
  int fleet_size = 10;
  int num_stops = 20;
  double stop_spacing = 2000.0;  // metres
  double dt = 1.0;               // seconds per tick
  double horizon = 10800.0;      // seconds
  double headway = 600.0;        // seconds between dispatches
  std::array<double, 3> theta{3.0, 1.0, 0.85};  // fixed, per boarder, per alighter (s)
  double acceleration = 3.0;                     // m/s^2
  double dynamic_rate = 0.0;                     // xi, percent over the horizon
  double min_demand = 0.5;                       // passengers / minute
  double max_demand = 2.0;                       // passengers / minute
  double geofence = 50.0;                        // metres
  int capacity = 85;
  double initial_speed = 14.0;  // m/s
  std::uint64_t rng_seed = 0;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;

  std::size_t num_frames() const;
  double route_length() const noexcept { return stop_spacing * (num_stops - 1); }
  // Poisson boarding is used by the stochastic variant, and by the truth
  // variant whenever the demand interval is non-degenerate. With
  // min_demand == max_demand the truth collapses onto the deterministic model.
  bool stochastic_boarding() const noexcept;
  bool drifting() const noexcept { return variant == Variant::kTruth && dynamic_rate != 0.0; }
  double min_demand_per_second() const noexcept { return min_demand / 60.0; }
  double max_demand_per_second() const noexcept { return max_demand / 60.0; }
};

}  // namespace bussim::sim
