#include <cmath>

#include <gtest/gtest.h>

#include "bussim/cem.hpp"
#include "bussim/errors.hpp"

namespace bussim::calib {
namespace {

Bounds box(double lo, double hi, std::size_t dims = 1) {
  return Bounds{std::vector<double>(dims, lo), std::vector<double>(dims, hi)};
}

TEST(Cem, ConvergesOnQuadratic) {
  CemHyperparams h;
  h.population = 50;
  h.iterations = 30;
  h.elite_ratio = 0.2;
  h.smoothing = 0.7;
  const ObjectiveFn f = [](std::span<const double> x, std::uint64_t) { return (x[0] - 2.0) * (x[0] - 2.0); };
  const auto res = cem_optimize(box(-10, 10), h, f, 42);
  EXPECT_LE(res.state.iteration, 30);
  EXPECT_NEAR(res.state.mu[0], 2.0, 0.05);
  EXPECT_NEAR(res.state.best[0], 2.0, 0.05);
}

TEST(Cem, WholePopulationEliteKeepsPopulationMean) {
  CemHyperparams h;
  h.population = 40;
  h.iterations = 5;
  h.elite_ratio = 1.0;
  h.smoothing = 1.0;
  h.sigma_tolerance = 0.0;
  ASSERT_EQ(h.elite_count(), 40u);
  const ObjectiveFn f = [](std::span<const double> x, std::uint64_t) { return std::abs(x[0]); };
  const auto res = cem_optimize(box(-100, 100), h, f, 3);
  for (const auto& rec : res.trace) EXPECT_NEAR(rec.mean[0], rec.population_mean[0], 1e-9);
}

TEST(Cem, BestEverIsMonotone) {
  CemHyperparams h;
  h.population = 20;
  h.iterations = 25;
  const ObjectiveFn f = [](std::span<const double> x, std::uint64_t) {
    return (x[0] - 1.0) * (x[0] - 1.0) + (x[1] + 3.0) * (x[1] + 3.0);
  };
  const auto res = cem_optimize(box(-10, 10, 2), h, f, 9);
  for (std::size_t i = 1; i < res.trace.size(); ++i) EXPECT_LE(res.trace[i].best_pi, res.trace[i - 1].best_pi);
  EXPECT_EQ(res.state.best_pi, res.trace.back().best_pi);
}

TEST(Cem, CandidatesStayInsideBox) {
  CemHyperparams h;
  h.population = 30;
  h.iterations = 10;
  const auto b = box(0.0, 1.0, 3);
  const ObjectiveFn f = [&](std::span<const double> x, std::uint64_t) {
    EXPECT_TRUE(b.contains(x));
    return -x[0];  // pushes against the upper wall
  };
  const auto res = cem_optimize(b, h, f, 1);
  EXPECT_TRUE(b.contains(res.state.best));
}

TEST(Cem, ResultIndependentOfJobs) {
  CemHyperparams h;
  h.population = 25;
  h.iterations = 8;
  const ObjectiveFn f = [](std::span<const double> x, std::uint64_t seed) {
    return std::abs(x[0] - 0.3) + static_cast<double>(seed % 7) * 1e-3;
  };
  CemOptions one, four;
  four.jobs = 4;
  const auto a = cem_optimize(box(-1, 1), h, f, 5, one);
  const auto b = cem_optimize(box(-1, 1), h, f, 5, four);
  EXPECT_EQ(a.state.mu, b.state.mu);
  EXPECT_EQ(a.state.best, b.state.best);
}

TEST(Cem, StopsOnSigmaTolerance) {
  CemHyperparams h;
  h.population = 50;
  h.iterations = 500;
  h.sigma_tolerance = 1e-2;
  const ObjectiveFn f = [](std::span<const double> x, std::uint64_t) { return x[0] * x[0]; };
  const auto res = cem_optimize(box(-1, 1), h, f, 2);
  EXPECT_TRUE(res.converged);
  EXPECT_LT(res.state.iteration, 500);
}

TEST(CemHyperparams, Validation) {
  CemHyperparams h;
  h.elite_ratio = 1.5;
  try {
    h.validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "cem.elite_ratio");
    EXPECT_NE(std::string(e.what()).find("elite ratio must lie in (0,1)"), std::string::npos);
  }
  h = {};
  h.population = 0;
  EXPECT_THROW(h.validate(), ConfigError);
  h = {};
  h.smoothing = 0.0;
  EXPECT_THROW(h.validate(), ConfigError);
}

TEST(CemHyperparams, EliteCountRoundsUp) {
  CemHyperparams h;
  h.population = 45;
  h.elite_ratio = 0.1;
  EXPECT_EQ(h.elite_count(), 5u);
}

}  // namespace
}  // namespace bussim::calib
