#include <gtest/gtest.h>

#include "bussim/config.hpp"
#include "bussim/errors.hpp"

namespace bussim {
namespace {

std::string field_of(const std::string& text) {
  try {
    config_from_text(text).validate();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

TEST(Config, EmptyTextGivesDefaults) {
  const ToolkitConfig c = config_from_text("");
  const ToolkitConfig d;
  EXPECT_EQ(to_json(c), to_json(d));
  EXPECT_EQ(config_from_text("  \n").sim.fleet_size, 10);
  EXPECT_EQ(c.cem.population, 100);
  EXPECT_EQ(c.filter.n_particles, 500);
  EXPECT_TRUE(c.bounds.arr_max_from_demand);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, RejectsEliteRatioAboveOne) {
  try {
    config_from_text(R"({"cem": {"elite_ratio": 1.5}})").validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("elite ratio must lie in (0,1)"), std::string::npos);
  }
}

TEST(Config, RejectsZeroTimeStep) { EXPECT_EQ(field_of(R"({"sim": {"dt": 0}})").rfind("sim", 0), 0u); }

TEST(Config, ReportsFieldPaths) {
  EXPECT_EQ(field_of(R"({"filter": {"n_particles": 1}})"), "filter.n_particles");
  EXPECT_EQ(field_of(R"({"cem": {"popultion": 10}})"), "cem.popultion");
  EXPECT_EQ(field_of(R"({"bogus": 1})"), "bogus");
  EXPECT_EQ(field_of(R"({"filter": {"obs_noise": "wide"}})"), "filter.obs_noise");
  EXPECT_EQ(field_of(R"({"bounds": {"arr_max": "lots"}})"), "bounds.arr_max");
  EXPECT_EQ(field_of("{not json"), "config");
}

TEST(Config, SectionsAreApplied) {
  const auto c = config_from_text(R"({
    "seed": 17,
    "sim": {"fleet_size": 4, "num_stops": 8},
    "datagen": {"k_obs": 5},
    "cem": {"population": 30, "model_variant": "stochastic"},
    "bounds": {"arr_max": 4.0},
    "filter": {"obs_noise": 12.5, "model_variant": "deterministic"},
    "experiments": {"xi_grid": [0, 10], "include_s4": true}
  })");
  EXPECT_EQ(c.seed, 17u);
  EXPECT_EQ(c.sim.fleet_size, 4);
  EXPECT_EQ(c.bounds.num_stops, 8);
  EXPECT_FALSE(c.bounds.arr_max_from_demand);
  EXPECT_EQ(c.model_variant, sim::Variant::kStochastic);
  EXPECT_EQ(c.filter.model_variant, sim::Variant::kDeterministic);
  const auto e = c.experiment();
  EXPECT_EQ(e.k_obs, 5);
  EXPECT_EQ(e.cem.population, 30);
  EXPECT_EQ(e.filter.obs_noise, 12.5);
  EXPECT_EQ(e.xi_grid, (std::vector<double>{0, 10}));
  EXPECT_TRUE(e.include_s4);
  EXPECT_EQ(e.truth.variant, sim::Variant::kTruth);
}

TEST(Config, JsonRoundTrip) {
  const auto c = config_from_text(R"({"seed": 3, "filter": {"diversify_speed_frac": 0.01}})");
  EXPECT_EQ(to_json(config_from_json(to_json(c))), to_json(c));
}

TEST(Config, MissingFileIsAnError) { EXPECT_THROW(load_config("/nonexistent/bussim.json"), std::runtime_error); }

}  // namespace
}  // namespace bussim
