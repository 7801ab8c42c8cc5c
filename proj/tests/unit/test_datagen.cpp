#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "bussim/datagen.hpp"
#include "test_support.hpp"

namespace bussim::datagen {
namespace {

TEST(SampleParams, DegenerateDemandGivesConstantRates) {
  Rng rng(1);
  const auto p = sample_params(0.5, 0.5, 20, 14.0, rng);
  for (double a : p.arr) EXPECT_EQ(a, 0.5 / 60.0);
}

TEST(SampleParams, DeparturesSortedEndingAtOne) {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const auto p = sample_params(0.5, 2.0, 12, 14.0, rng);
    ASSERT_EQ(p.dep.size(), 12u);
    EXPECT_TRUE(std::is_sorted(p.dep.begin(), p.dep.end()));
    EXPECT_EQ(p.dep.back(), 1.0);
    for (std::size_t m = 0; m + 1 < p.dep.size(); ++m) {
      EXPECT_GE(p.dep[m], 0.05);
      EXPECT_LT(p.dep[m], 0.5);
    }
  }
}

TEST(SampleParams, ArrivalMeanMatchesUniformMean) {
  Rng rng(3);
  const int n = 10000;
  double sum = 0.0;
  int count = 0;
  while (count < n) {
    for (double a : sample_params(0.5, 2.0, 2, 14.0, rng).arr) {
      if (count == n) break;
      sum += a * 60.0;
      ++count;
    }
  }
  const double se = 1.5 / std::sqrt(12.0) / std::sqrt(static_cast<double>(n));
  EXPECT_NEAR(sum / n, 1.25, 3.0 * se);
}

TEST(Historical, CollapsedTruthGivesIdenticalRuns) {
  sim::SimConfig cfg = testing::small_config(sim::Variant::kTruth);
  cfg.min_demand = cfg.max_demand = 0.5;
  cfg.dynamic_rate = 0.0;
  const auto sc = make_scenario(cfg, 4, 2);
  const auto hist = generate_historical(sc);
  ASSERT_EQ(hist.runs.size(), 2u);
  EXPECT_EQ(hist.runs[0], hist.runs[1]);
  EXPECT_EQ(generate_realtime(sc).runs.front(), hist.runs[0]);
}

TEST(Historical, StochasticRunsDiffer) {
  sim::SimConfig cfg = testing::small_config(sim::Variant::kTruth);
  cfg.max_demand = 2.0;
  const auto sc = make_scenario(cfg, 5, 10);
  const auto hist = generate_historical(sc);
  ASSERT_EQ(hist.runs.size(), 10u);
  for (std::size_t k = 1; k < hist.runs.size(); ++k) EXPECT_NE(hist.runs[0], hist.runs[k]);
  const auto rt = generate_realtime(sc);
  for (const auto& run : hist.runs) EXPECT_NE(rt.runs.front(), run);
  EXPECT_EQ(rt.fingerprint, hist.fingerprint);
  EXPECT_EQ(hist.fingerprint, sc.fingerprint());
}

TEST(Historical, RowCountIsRunsTimesFleetTimesFrames) {
  sim::SimConfig cfg = testing::small_config(sim::Variant::kTruth);
  const auto sc = make_scenario(cfg, 6, 3);
  const auto hist = generate_historical(sc);
  std::size_t rows = 0;
  for (const auto& r : hist.runs) rows += r.num_rows();
  EXPECT_EQ(rows, 3u * 3u * static_cast<std::size_t>(cfg.horizon / cfg.dt));
  // Pre-dispatch slots are zeroed.
  EXPECT_EQ(hist.runs[0].at(0, 2), sim::ObservationRow{});
}

TEST(Historical, ReproducibleAndThreadCountFree) {
  sim::SimConfig cfg = testing::small_config(sim::Variant::kTruth);
  cfg.dynamic_rate = 10.0;
  const auto sc = make_scenario(cfg, 7, 4, 3.0);
  const auto a = generate_historical(sc, 1);
  const auto b = generate_historical(sc, 3);
  EXPECT_EQ(a.runs, b.runs);
}

TEST(Historical, GpsNoiseLeavesIdleRowsAlone) {
  sim::SimConfig cfg = testing::small_config(sim::Variant::kTruth);
  const auto noisy = generate_realtime(make_scenario(cfg, 8, 2, 5.0)).runs.front();
  const auto clean = generate_realtime(make_scenario(cfg, 8, 2, 0.0)).runs.front();
  bool moved = false;
  for (std::size_t i = 0; i < clean.num_rows(); ++i) {
    if (!clean.rows()[i].active()) {
      EXPECT_EQ(noisy.rows()[i].position, clean.rows()[i].position);
    } else if (noisy.rows()[i].position != clean.rows()[i].position) {
      moved = true;
    }
  }
  EXPECT_TRUE(moved);
}

TEST(Scenario, RealtimeSeedDistinctFromHistorical) {
  const auto sc = make_scenario(testing::small_config(sim::Variant::kTruth), 9, 10);
  for (auto s : sc.seed_historical) EXPECT_NE(s, sc.seed_realtime);
  auto bad = sc;
  bad.seed_realtime = bad.seed_historical[3];
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace bussim::datagen
