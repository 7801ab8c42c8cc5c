#include <cmath>
#include <stdexcept>

#include <gtest/gtest.h>

#include "bussim/serialize.hpp"
#include "bussim/sim.hpp"
#include "test_support.hpp"

namespace bussim::sim {
namespace {

using testing::flat_params;
using testing::small_config;

BusState moving_bus(double speed) {
  BusState b;
  b.status = BusStatus::kMoving;
  b.speed = speed;
  b.acceleration = 3.0;
  return b;
}

TEST(Motion, AcceleratesFromRest) {
  const BusState b = update_motion(moving_bus(0.0), 14.0, 1.0);
  EXPECT_EQ(b.speed, 3.0);
  EXPECT_EQ(b.position, 3.0);
}

TEST(Motion, HoldsTrafficSpeed) { EXPECT_EQ(update_motion(moving_bus(14.0), 14.0, 1.0).speed, 14.0); }

TEST(Motion, ClampsAtTrafficSpeed) {
  const BusState b = update_motion(moving_bus(13.0), 14.0, 1.0);
  EXPECT_EQ(b.speed, 14.0);
  EXPECT_EQ(b.position, 14.0);
}

TEST(Boarding, ZeroRateBoardsNobody) {
  Rng rng(1);
  for (Variant v : {Variant::kTruth, Variant::kStochastic, Variant::kDeterministic})
    EXPECT_EQ(boarding_count(0.0, 600.0, v, rng), 0);
}

TEST(Boarding, DeterministicUsesRoundedMean) {
  Rng rng(1);
  EXPECT_EQ(boarding_count(0.05, 100.0, Variant::kDeterministic, rng), 5);
}

TEST(Boarding, PoissonMeanWithinThreeSigma) {
  Rng rng(2024);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += boarding_count(0.05, 100.0, Variant::kStochastic, rng);
  EXPECT_NEAR(sum / n, 5.0, 3.0 * std::sqrt(5.0 / n));
}

TEST(Capacity, Examples) {
  EXPECT_EQ(apply_capacity(5, 85, 0), 5);
  EXPECT_EQ(apply_capacity(10, 85, 85), 0);
  EXPECT_EQ(apply_capacity(20, 85, 80), 5);
}

TEST(Alighting, Examples) {
  EXPECT_EQ(alighting_count(0.3, 0), 0);
  EXPECT_EQ(alighting_count(1.0, 7), 7);
  EXPECT_EQ(alighting_count(0.5, 10), 5);
}

TEST(Dwell, Examples) {
  const std::array<double, 3> theta{3.0, 1.0, 0.85};
  EXPECT_DOUBLE_EQ(dwell_time(0, 0, theta), 3.0);
  EXPECT_DOUBLE_EQ(dwell_time(10, 0, theta), 13.0);
  EXPECT_DOUBLE_EQ(dwell_time(4, 4, theta), 10.4);
}

TEST(Dynamics, NoDriftAtZeroRateOrTimeZero) {
  const ModelParams p = flat_params(4, 2.0, 0.2, 14.0);
  EXPECT_EQ(apply_dynamics(p, 900.0, 1800.0, 0.0), p);
  EXPECT_EQ(apply_dynamics(p, 0.0, 1800.0, 10.0), p);
}

TEST(Dynamics, FullDriftAtHorizon) {
  const ModelParams p = flat_params(4, 2.0, 0.2, 14.0);
  const ModelParams q = apply_dynamics(p, 1800.0, 1800.0, 10.0);
  EXPECT_NEAR(q.traffic_speed, 12.6, 1e-12);
  for (std::size_t m = 0; m < p.arr.size(); ++m) {
    EXPECT_NEAR(q.arr[m], 1.1 * p.arr[m], 1e-15);
    EXPECT_EQ(q.dep[m], p.dep[m]);
  }
}

TEST(Geofence, InclusiveBoundary) {
  StopState stop;
  stop.position = 1000.0;
  stop.geofence_radius = 50.0;
  EXPECT_TRUE(in_geofence(1000.0, stop));
  EXPECT_TRUE(in_geofence(1050.0, stop));
  EXPECT_TRUE(in_geofence(950.0, stop));
  EXPECT_FALSE(in_geofence(1051.0, stop));
  EXPECT_FALSE(in_geofence(1000.0, stop, /*already_visited=*/true));
}

TEST(Step, FinishedFleetOnlyAdvancesClock) {
  const SimConfig cfg = small_config();
  StateVector s = initial_state(cfg, flat_params(cfg.num_stops, 1.0, 0.2));
  for (auto& b : s.buses) b.status = BusStatus::kFinished;
  Rng rng(3);
  const StateVector next = step(s, cfg, rng);
  StateVector expected = s;
  expected.tick += 1;
  expected.clock += cfg.dt;
  EXPECT_EQ(next, expected);
}

TEST(Step, BusWaitsForDispatchTime) {
  SimConfig cfg = small_config();
  cfg.headway = 100.0;
  StateVector s = initial_state(cfg, flat_params(cfg.num_stops, 1.0, 0.2));
  Rng rng(3);
  run_until(s, cfg, rng, 50);
  EXPECT_EQ(s.buses[1].dispatch_time, 100.0);
  EXPECT_EQ(s.buses[1].status, BusStatus::kIdle);
  EXPECT_EQ(s.buses[0].status, BusStatus::kMoving);
}

TEST(Step, RejectsStepPastHorizon) {
  const SimConfig cfg = small_config();
  StateVector s = initial_state(cfg, flat_params(cfg.num_stops, 1.0, 0.2));
  Rng rng(3);
  run_until(s, cfg, rng, ticks_for(cfg.horizon, cfg.dt));
  EXPECT_THROW(advance(s, cfg, rng), std::out_of_range);
}

TEST(Simulate, DeterministicRunsAreBitIdentical) {
  const SimConfig cfg = small_config(Variant::kDeterministic);
  const ModelParams p = flat_params(cfg.num_stops, 2.0, 0.3);
  EXPECT_EQ(simulate(cfg, p, 1), simulate(cfg, p, 99));
}

TEST(Simulate, RecordsOneFramePerTick) {
  const SimConfig cfg = small_config();
  const auto series = simulate(cfg, flat_params(cfg.num_stops, 2.0, 0.3), 1);
  ASSERT_EQ(series.num_frames(), cfg.num_frames());
  EXPECT_EQ(series.num_rows(), cfg.num_frames() * static_cast<std::size_t>(cfg.fleet_size));
  EXPECT_DOUBLE_EQ(series.time(0), cfg.dt);
  EXPECT_DOUBLE_EQ(series.times().back(), cfg.horizon);
}

TEST(Simulate, PositionsMatchFullObservations) {
  const SimConfig cfg = small_config(Variant::kStochastic);
  const ModelParams p = flat_params(cfg.num_stops, 2.0, 0.3);
  Rng a(5), b(5);
  const auto full = simulate(cfg, p, a);
  const auto pos = simulate_positions(cfg, p, b);
  ASSERT_EQ(pos.size(), full.num_rows());
  for (std::size_t i = 0; i < pos.size(); ++i) EXPECT_EQ(pos[i], full.rows()[i].position);
}

TEST(Simulate, TruthCollapsesOntoDeterministicModel) {
  SimConfig truth = small_config(Variant::kTruth);
  truth.min_demand = truth.max_demand = 0.5;
  truth.dynamic_rate = 0.0;
  SimConfig det = truth;
  det.variant = Variant::kDeterministic;
  const ModelParams p = flat_params(truth.num_stops, 0.5, 0.3);
  EXPECT_EQ(simulate(truth, p, 11), simulate(det, p, 12));
}

TEST(Observation, FreshStateIsAllZero) {
  const SimConfig cfg = small_config();
  const StateVector s = initial_state(cfg, flat_params(cfg.num_stops, 1.0, 0.2));
  const ObservationVector o = extract_observation(s);
  ASSERT_EQ(o.rows.size(), 3u);
  for (const auto& r : o.rows) EXPECT_EQ(r, ObservationRow{});
}

TEST(Observation, ProjectsActiveBus) {
  const SimConfig cfg = small_config();
  StateVector s = initial_state(cfg, flat_params(cfg.num_stops, 1.0, 0.2));
  s.buses[0].status = BusStatus::kMoving;
  s.buses[0].position = 1500.0;
  s.buses[0].speed = 12.0;
  s.buses[0].occupancy = 20;
  const ObservationVector o = extract_observation(s);
  EXPECT_EQ(o.rows[0], (ObservationRow{BusStatus::kMoving, 1500.0, 12.0, 20}));
}

// Occupancy bookkeeping for every dwell event of a stochastic run.
TEST(Invariants, OccupancyStaysWithinCapacity) {
  SimConfig cfg = small_config(Variant::kStochastic);
  cfg.capacity = 12;
  StateVector s = initial_state(cfg, flat_params(cfg.num_stops, 6.0, 0.1));
  Rng rng(8);
  const auto total = ticks_for(cfg.horizon, cfg.dt);
  while (s.tick < total) {
    const StateVector before = s;
    advance(s, cfg, rng);
    for (std::size_t j = 0; j < s.buses.size(); ++j) {
      const auto& b = s.buses[j];
      EXPECT_GE(b.occupancy, 0);
      EXPECT_LE(b.occupancy, cfg.capacity);
      if (before.buses[j].status == BusStatus::kMoving && b.status == BusStatus::kDwelling) {
        const std::size_t m = before.buses[j].next_stop;
        const int alighters = alighting_count(before.params.dep[m], before.buses[j].occupancy);
        EXPECT_GE(b.occupancy, before.buses[j].occupancy - alighters);
      }
    }
  }
  for (const auto& b : s.buses) EXPECT_EQ(b.status, BusStatus::kFinished);
}

TEST(Invariants, PositionsNeverDecrease) {
  const SimConfig cfg = small_config(Variant::kStochastic);
  Rng rng(4);
  const auto pos = simulate_positions(cfg, flat_params(cfg.num_stops, 3.0, 0.3), rng);
  const std::size_t fleet = static_cast<std::size_t>(cfg.fleet_size);
  for (std::size_t f = 1; f < pos.size() / fleet; ++f)
    for (std::size_t j = 0; j < fleet; ++j) EXPECT_GE(pos[f * fleet + j], pos[(f - 1) * fleet + j]);
}

// Restoring a serialized state and continuing is indistinguishable from never stopping.
TEST(Invariants, SerializedStateResumesIdentically) {
  SimConfig cfg = small_config(Variant::kTruth);
  cfg.max_demand = 3.0;
  cfg.dynamic_rate = 10.0;
  StateVector s = initial_state(cfg, flat_params(cfg.num_stops, 2.0, 0.3));
  Rng rng(21);
  run_until(s, cfg, rng, 700);

  StateVector restored = state_from_text(state_to_text(s));
  EXPECT_EQ(restored, s);
  Rng a(77), b(77);
  run_until(s, cfg, a, 1500);
  run_until(restored, cfg, b, 1500);
  EXPECT_EQ(restored, s);
}

TEST(Params, ValidationRejectsBadVectors) {
  const SimConfig cfg = small_config();
  ModelParams p = flat_params(cfg.num_stops, 1.0, 0.2);
  p.dep.back() = 0.5;
  EXPECT_THROW(validate_params(p, cfg), std::invalid_argument);
  p = flat_params(cfg.num_stops - 1, 1.0, 0.2);
  EXPECT_THROW(validate_params(p, cfg), std::invalid_argument);
  p = flat_params(cfg.num_stops, -1.0, 0.2);
  EXPECT_THROW(validate_params(p, cfg), std::invalid_argument);
}

TEST(Config, RejectsZeroTimeStep) {
  SimConfig cfg = small_config();
  cfg.dt = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace bussim::sim
