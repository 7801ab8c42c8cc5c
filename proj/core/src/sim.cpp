#include "bussim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace bussim::sim {

namespace {

[[noreturn]] void invalid(const std::string& what) { throw std::invalid_argument(what); }

void drift_in_place(ModelParams& out, const ModelParams& base, double t, double horizon, double xi) {
  const double frac = (t / horizon) * (xi / 100.0);
  out.traffic_speed = base.traffic_speed * (1.0 - frac);
  out.arr.resize(base.arr.size());
  for (std::size_t m = 0; m < base.arr.size(); ++m) out.arr[m] = base.arr[m] * (1.0 + frac);
  out.dep = base.dep;
}

}  // namespace

std::string_view to_string(Variant v) noexcept {
  switch (v) {
    case Variant::kTruth: return "truth";
    case Variant::kStochastic: return "stochastic";
    case Variant::kDeterministic: return "deterministic";
  }
  return "?";
}

std::string_view to_string(BusStatus s) noexcept {
  switch (s) {
    case BusStatus::kIdle: return "IDLE";
    case BusStatus::kMoving: return "MOVING";
    case BusStatus::kDwelling: return "DWELLING";
    case BusStatus::kFinished: return "FINISHED";
  }
  return "?";
}

Variant variant_from_string(std::string_view name) {
  if (name == "truth") return Variant::kTruth;
  if (name == "stochastic") return Variant::kStochastic;
  if (name == "deterministic") return Variant::kDeterministic;
  invalid("unknown model variant '" + std::string(name) + "' (expected truth|stochastic|deterministic)");
}

BusStatus status_from_string(std::string_view name) {
  if (name == "IDLE" || name == "0") return BusStatus::kIdle;
  if (name == "MOVING" || name == "1") return BusStatus::kMoving;
  if (name == "DWELLING" || name == "2") return BusStatus::kDwelling;
  if (name == "FINISHED" || name == "3") return BusStatus::kFinished;
  invalid("unknown bus status '" + std::string(name) + "'");
}

std::vector<int> BusState::visited_stops() const {
  std::vector<int> out(next_stop);
  for (std::size_t i = 0; i < next_stop; ++i) out[i] = static_cast<int>(i);
  return out;
}

void SimConfig::validate() const {
  if (!(dt > 0.0)) invalid("sim.dt must be > 0");
  if (!(horizon > 0.0)) invalid("sim.horizon must be > 0");
  const double frames = horizon / dt;
  if (std::abs(frames - std::round(frames)) > 1e-9 * std::max(1.0, frames))
    invalid("sim.horizon must be a whole number of ticks (horizon / dt)");
  if (num_stops < 2) invalid("sim.num_stops must be >= 2");
  if (fleet_size < 1) invalid("sim.fleet_size must be >= 1");
  if (!(stop_spacing > 0.0)) invalid("sim.stop_spacing must be > 0");
  if (headway < 0.0) invalid("sim.headway must be >= 0");
  for (double th : theta)
    if (!(th >= 0.0)) invalid("sim.theta entries must be >= 0");
  if (!(acceleration > 0.0)) invalid("sim.acceleration must be > 0");
  if (!(dynamic_rate < 100.0)) invalid("sim.dynamic_rate must be < 100 (percent)");
  if (!(min_demand > 0.0)) invalid("sim.min_demand must be > 0");
  if (!(max_demand >= min_demand)) invalid("sim.max_demand must be >= sim.min_demand");
  if (!(geofence >= 0.0) || !(2.0 * geofence < stop_spacing))
    invalid("sim.geofence must be >= 0 and smaller than half the stop spacing");
  if (capacity < 1) invalid("sim.capacity must be >= 1");
  if (!(initial_speed > 0.0)) invalid("sim.initial_speed must be > 0");
}

std::size_t SimConfig::num_frames() const {
  return static_cast<std::size_t>(std::llround(horizon / dt));
}

bool SimConfig::stochastic_boarding() const noexcept {
  switch (variant) {
    case Variant::kStochastic: return true;
    case Variant::kTruth: return max_demand > min_demand;
    case Variant::kDeterministic: return false;
  }
  return false;
}

BusState update_motion(BusState bus, double traffic_speed, double dt) {
  if (bus.speed < traffic_speed) bus.speed = std::min(bus.speed + bus.acceleration * dt, traffic_speed);
  bus.position += bus.speed * dt;
  return bus;
}

int boarding_count(double arr, double gap, Variant variant, Rng& rng) {
  const double mean = arr * gap;
  if (!(mean > 0.0)) return 0;
  if (variant == Variant::kDeterministic) return static_cast<int>(round_count(mean));
  std::poisson_distribution<int> draw(mean);
  return draw(rng);
}

int apply_capacity(int boarders, int capacity, int occupancy) {
  return std::max(0, std::min(boarders, capacity - occupancy));
}

int alighting_count(double dep, int occupancy) {
  if (occupancy <= 0) return 0;
  const long a = round_count(dep * occupancy);
  return static_cast<int>(std::clamp<long>(a, 0, occupancy));
}

double dwell_time(int boarders, int alighters, const std::array<double, 3>& theta) {
  return theta[0] + theta[1] * boarders + theta[2] * alighters;
}

ModelParams apply_dynamics(const ModelParams& base, double t, double horizon, double xi_percent) {
  ModelParams out;
  drift_in_place(out, base, t, horizon, xi_percent);
  return out;
}

bool in_geofence(double bus_position, const StopState& stop, bool already_visited) {
  if (already_visited) return false;
  return std::abs(bus_position - stop.position) <= stop.geofence_radius;
}

void validate_params(const ModelParams& params, const SimConfig& cfg) {
  const auto m = static_cast<std::size_t>(cfg.num_stops);
  if (params.arr.size() != m || params.dep.size() != m)
    invalid("params: expected " + std::to_string(m) + " arrival and departure rates, got " +
            std::to_string(params.arr.size()) + " and " + std::to_string(params.dep.size()));
  for (double a : params.arr)
    if (!(a >= 0.0) || !std::isfinite(a)) invalid("params.arr entries must be finite and >= 0");
  for (double d : params.dep)
    if (!(d >= 0.0 && d <= 1.0)) invalid("params.dep entries must lie in [0, 1]");
  if (params.dep.back() != 1.0) invalid("params.dep at the final stop must be 1");
  if (!(params.traffic_speed > 0.0) || !std::isfinite(params.traffic_speed))
    invalid("params.traffic_speed must be finite and > 0");
}

StateVector initial_state(const SimConfig& cfg, const ModelParams& params) {
  validate_params(params, cfg);
  StateVector s;
  s.buses.resize(static_cast<std::size_t>(cfg.fleet_size));
  for (int j = 0; j < cfg.fleet_size; ++j) {
    BusState& b = s.buses[static_cast<std::size_t>(j)];
    b.bus_id = j;
    b.dispatch_time = j * cfg.headway;
    b.acceleration = cfg.acceleration;
    b.capacity = cfg.capacity;
  }
  s.stops.resize(static_cast<std::size_t>(cfg.num_stops));
  for (int m = 0; m < cfg.num_stops; ++m) {
    StopState& st = s.stops[static_cast<std::size_t>(m)];
    st.stop_id = m;
    st.position = m * cfg.stop_spacing;
    st.geofence_radius = cfg.geofence;
    st.arrivals.reserve(static_cast<std::size_t>(cfg.fleet_size));
  }
  s.params = params;
  s.base_params = params;
  return s;
}

void advance(StateVector& s, const SimConfig& cfg, Rng& rng) {
  const double t_next = static_cast<double>(s.tick + 1) * cfg.dt;
  if (t_next > cfg.horizon * (1.0 + 1e-12))
    throw std::out_of_range("sim::advance: clock " + std::to_string(s.clock) + " + dt exceeds the horizon");

  const Variant boarding = cfg.stochastic_boarding() ? cfg.variant : Variant::kDeterministic;
  const std::size_t last_stop = s.stops.size() - 1;

  for (BusState& bus : s.buses) {
    switch (bus.status) {
      case BusStatus::kIdle:
        if (t_next > bus.dispatch_time) {
          bus.status = BusStatus::kMoving;
          bus.speed = 0.0;
        }
        break;

      case BusStatus::kMoving: {
        const std::size_t m = bus.next_stop;
        StopState& stop = s.stops[m];
        // A stop passed without landing inside its fence (speed * dt wider
        // than the fence) still counts as reached.
        const bool reached =
            in_geofence(bus.position, stop) || bus.position > stop.position + stop.geofence_radius;
        if (!reached) {
          bus = update_motion(bus, s.params.traffic_speed, cfg.dt);
          break;
        }
        bus.speed = 0.0;
        stop.arrivals.push_back({bus.bus_id, t_next});
        const int alighters = alighting_count(s.params.dep[m], bus.occupancy);
        bus.occupancy -= alighters;
        ++bus.next_stop;
        if (m == last_stop) {
          bus.status = BusStatus::kFinished;
          stop.last_visit_time = t_next;
          break;
        }
        const double gap = t_next - stop.last_visit_time;
        int boarders = boarding_count(s.params.arr[m], gap, boarding, rng);
        boarders = apply_capacity(boarders, bus.capacity, bus.occupancy);
        bus.occupancy += boarders;
        bus.leave_stop_time = t_next + dwell_time(boarders, alighters, cfg.theta);
        stop.last_visit_time = t_next;
        bus.status = BusStatus::kDwelling;
        break;
      }

      case BusStatus::kDwelling:
        if (t_next >= bus.leave_stop_time) bus.status = BusStatus::kMoving;
        break;

      case BusStatus::kFinished:
        break;
    }
  }

  ++s.tick;
  s.clock = t_next;
  if (cfg.drifting()) drift_in_place(s.params, s.base_params, t_next, cfg.horizon, cfg.dynamic_rate);
}

void run_until(StateVector& state, const SimConfig& cfg, Rng& rng, std::int64_t target_tick) {
  while (state.tick < target_tick) advance(state, cfg, rng);
}

void observe_into(const StateVector& state, std::span<ObservationRow> out) {
  for (std::size_t j = 0; j < state.buses.size(); ++j) {
    const BusState& b = state.buses[j];
    if (b.status == BusStatus::kIdle) {
      out[j] = ObservationRow{};
    } else {
      out[j] = ObservationRow{b.status, b.position, b.speed, b.occupancy};
    }
  }
}

ObservationVector extract_observation(const StateVector& state) {
  ObservationVector v;
  v.time = state.clock;
  v.rows.resize(state.buses.size());
  observe_into(state, v.rows);
  return v;
}

ObservationSeries simulate(const SimConfig& cfg, const ModelParams& params, Rng& rng) {
  StateVector s = initial_state(cfg, params);
  const std::size_t frames = cfg.num_frames();
  ObservationSeries out(s.buses.size(), cfg.dt);
  out.reserve(frames);
  std::vector<ObservationRow> rows(s.buses.size());
  for (std::size_t f = 0; f < frames; ++f) {
    advance(s, cfg, rng);
    observe_into(s, rows);
    out.append(s.clock, rows);
  }
  return out;
}

ObservationSeries simulate(const SimConfig& cfg, const ModelParams& params, std::uint64_t seed) {
  Rng rng(seed);
  return simulate(cfg, params, rng);
}

std::vector<double> simulate_positions(const SimConfig& cfg, const ModelParams& params, Rng& rng) {
  StateVector s = initial_state(cfg, params);
  const std::size_t frames = cfg.num_frames();
  const std::size_t n = s.buses.size();
  std::vector<double> out(frames * n);
  for (std::size_t f = 0; f < frames; ++f) {
    advance(s, cfg, rng);
    for (std::size_t j = 0; j < n; ++j) out[f * n + j] = s.buses[j].position;
  }
  return out;
}

std::int64_t ticks_for(double seconds, double dt) { return std::llround(seconds / dt); }

}  // namespace bussim::sim
