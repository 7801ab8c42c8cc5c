#include <cmath>

#include <gtest/gtest.h>

#include "bussim/datagen.hpp"
#include "bussim/objective.hpp"
#include "test_support.hpp"

namespace bussim::calib {
namespace {

TEST(PerformanceIndex, IdenticalRunsScoreZero) {
  const std::vector<std::vector<double>> runs{{0.0, 10.0, 20.0, 30.0}, {1.0, 11.0, 19.0, 33.0}};
  EXPECT_EQ(performance_index(runs, runs, 2), 0.0);
}

TEST(PerformanceIndex, SingleBusSingleFrame) {
  const std::vector<std::vector<double>> sim{{100.0}}, obs{{120.0}};
  EXPECT_DOUBLE_EQ(performance_index(sim, obs, 1), 20.0);
}

TEST(PerformanceIndex, LinearInConstantOffset) {
  const std::vector<std::vector<double>> obs{{0.0, 50.0, 80.0}, {5.0, 40.0, 90.0}};
  auto shifted = [&](double d) {
    auto s = obs;
    for (auto& run : s)
      for (double& x : run) x += d;
    return s;
  };
  const double one = performance_index(shifted(7.0), obs, 1);
  EXPECT_DOUBLE_EQ(one, 7.0);
  EXPECT_DOUBLE_EQ(performance_index(shifted(14.0), obs, 1), 2.0 * one);
}

TEST(PerformanceIndex, StdTermUsesSampleDeviation) {
  // obs std at the single point: sample std of {0, 2} = sqrt(2); sim has one run (std 0).
  const std::vector<std::vector<double>> sim{{1.0}}, obs{{0.0}, {2.0}};
  EXPECT_DOUBLE_EQ(performance_index(sim, obs, 1), std::sqrt(2.0));
}

TEST(ParameterSpace, EncodeDecodeRoundTrip) {
  ParameterSpace space;
  space.num_stops = 4;
  const auto p = testing::flat_params(4, 1.5, 0.25, 12.0);
  const auto x = space.encode(p);
  ASSERT_EQ(x.size(), space.dims());
  const auto q = space.decode(x);
  EXPECT_EQ(q.dep.back(), 1.0);
  for (std::size_t m = 0; m < 4; ++m) EXPECT_DOUBLE_EQ(q.arr[m], p.arr[m]);
  EXPECT_DOUBLE_EQ(q.traffic_speed, 12.0);
}

TEST(ParameterSpace, ArrivalBoundFollowsDemand) {
  ParameterSpace space;
  sim::SimConfig truth;
  truth.max_demand = 2.0;
  truth.dynamic_rate = 10.0;
  const auto s = space.for_truth(truth);
  EXPECT_DOUBLE_EQ(s.arr_max, 2.2);
  ParameterSpace fixed;
  fixed.arr_max_from_demand = false;
  fixed.arr_max = 5.0;
  EXPECT_EQ(fixed.for_truth(truth).arr_max, 5.0);
}

TEST(Objective, PerfectModelScoresZero) {
  sim::SimConfig cfg = testing::small_config(sim::Variant::kTruth);
  cfg.min_demand = cfg.max_demand = 0.5;
  const auto sc = datagen::make_scenario(cfg, 3, 3);
  const auto hist = datagen::generate_historical(sc);
  sim::SimConfig model = cfg;
  model.variant = sim::Variant::kDeterministic;
  const Objective obj(hist, model, 5);
  EXPECT_EQ(obj.replications(), 1);
  EXPECT_EQ(obj(sc.params0, 1), 0.0);
}

TEST(Objective, RejectsGeometryMismatch) {
  sim::SimConfig cfg = testing::small_config(sim::Variant::kTruth);
  const auto hist = datagen::generate_historical(datagen::make_scenario(cfg, 3, 2));
  sim::SimConfig model = cfg;
  model.fleet_size = 4;
  EXPECT_THROW(Objective(hist, model, 1), std::invalid_argument);
}

}  // namespace
}  // namespace bussim::calib
