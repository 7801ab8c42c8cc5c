#include "bussim/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bussim/errors.hpp"
#include "bussim/serialize.hpp"
#include "json_reader.hpp"

namespace bussim {

namespace {

using nlohmann::json;

void read_variant(detail::ObjectReader& r, const char* key, sim::Variant& out) {
  std::string name;
  if (!r.read(key, name)) return;
  try {
    out = sim::variant_from_string(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(r.field(key), e.what());
  }
}

void read_optional(detail::ObjectReader& r, const char* key, std::optional<double>& out) {
  double v = 0.0;
  if (r.read(key, v)) out = v;
}

void read_cem(const json& j, ToolkitConfig& c) {
  detail::ObjectReader r(j, "cem");
  r.read("population", c.cem.population);
  r.read("iterations", c.cem.iterations);
  r.read("elite_ratio", c.cem.elite_ratio);
  r.read("smoothing", c.cem.smoothing);
  r.read("replications", c.cem.replications);
  r.read("sigma_tolerance", c.cem.sigma_tolerance);
  read_variant(r, "model_variant", c.model_variant);
  r.finish();
}

void read_bounds(const json& j, ToolkitConfig& c) {
  detail::ObjectReader r(j, "bounds");
  r.read("arr_min", c.bounds.arr_min);
  // "arr_max": "demand" (default) follows each cell's maxDemand and xi.
  if (const json* a = r.child("arr_max")) {
    if (a->is_string()) {
      if (a->get<std::string>() != "demand") throw ConfigError(r.field("arr_max"), "expected a number or \"demand\"");
      c.bounds.arr_max_from_demand = true;
    } else if (a->is_number()) {
      c.bounds.arr_max = a->get<double>();
      c.bounds.arr_max_from_demand = false;
    } else {
      throw ConfigError(r.field("arr_max"), "expected a number or \"demand\"");
    }
  }
  r.read("dep_min", c.bounds.dep_min);
  r.read("dep_max", c.bounds.dep_max);
  r.read("speed_min", c.bounds.speed_min);
  r.read("speed_max", c.bounds.speed_max);
  r.finish();
}

void read_filter(const json& j, ToolkitConfig& c) {
  detail::ObjectReader r(j, "filter");
  auto& f = c.filter;
  r.read("n_particles", f.n_particles);
  r.read("obs_noise", f.obs_noise);
  r.read("diversify_frac", f.diversify_frac);
  read_optional(r, "diversify_arr_frac", f.diversify_arr_frac);
  read_optional(r, "diversify_dep_frac", f.diversify_dep_frac);
  read_optional(r, "diversify_speed_frac", f.diversify_speed_frac);
  r.read("obs_interval", f.obs_interval);
  read_variant(r, "model_variant", f.model_variant);
  r.read("resample_on_neff", f.resample_on_neff);
  r.read("neff_threshold", f.neff_threshold);
  r.read("forecast_horizon", f.forecast_horizon);
  r.read("forecast_particles", f.forecast_particles);
  r.finish();
}

void read_experiments(const json& j, ToolkitConfig& c) {
  detail::ObjectReader r(j, "experiments");
  auto& e = c.experiments;
  r.read("max_demand_grid", e.max_demand_grid);
  r.read("xi_grid", e.xi_grid);
  r.read("fixed_xi", e.fixed_xi);
  r.read("fixed_max_demand", e.fixed_max_demand);
  r.read("replications", e.replications);
  r.read("include_s4", e.include_s4);
  r.finish();
}

}  // namespace

exp::ExperimentConfig ToolkitConfig::experiment() const {
  exp::ExperimentConfig e = experiments;
  e.truth = sim;
  e.truth.variant = sim::Variant::kTruth;
  e.model_variant = model_variant;
  e.k_obs = k_obs;
  e.gps_noise = gps_noise;
  e.space = bounds;
  e.space.num_stops = sim.num_stops;
  e.cem = cem;
  e.filter = filter;
  e.min_demand = sim.min_demand;
  return e;
}

sim::SimConfig ToolkitConfig::model_config() const {
  sim::SimConfig m = sim;
  m.variant = model_variant;
  return m;
}

void ToolkitConfig::validate() const {
  try {
    sim.validate();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    const auto space = msg.find(' ');
    throw ConfigError(msg.substr(0, space), space == std::string::npos ? msg : msg.substr(space + 1));
  }
  experiment().validate();
}

ToolkitConfig config_from_json(const json& j) {
  ToolkitConfig c;
  detail::ObjectReader r(j, "");
  r.read("seed", c.seed);
  if (const json* s = r.child("sim")) c.sim = sim::sim_config_from_json(*s, "sim");
  if (const json* d = r.child("datagen")) {
    detail::ObjectReader dr(*d, "datagen");
    dr.read("k_obs", c.k_obs);
    dr.read("gps_noise", c.gps_noise);
    dr.finish();
  }
  if (const json* s = r.child("cem")) read_cem(*s, c);
  if (const json* s = r.child("bounds")) read_bounds(*s, c);
  if (const json* s = r.child("filter")) read_filter(*s, c);
  if (const json* s = r.child("experiments")) read_experiments(*s, c);
  r.finish();
  c.bounds.num_stops = c.sim.num_stops;
  c.validate();
  return c;
}

ToolkitConfig config_from_text(const std::string& text) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return config_from_json(json::object());
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("not valid JSON (") + e.what() + ")");
  }
  return config_from_json(j);
}

ToolkitConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_text(ss.str());
}

json to_json(const ToolkitConfig& c) {
  json j;
  j["seed"] = c.seed;
  json s;
  sim::to_json(s, c.sim);
  j["sim"] = s;
  j["datagen"] = {{"k_obs", c.k_obs}, {"gps_noise", c.gps_noise}};
  j["cem"] = {{"population", c.cem.population},
              {"iterations", c.cem.iterations},
              {"elite_ratio", c.cem.elite_ratio},
              {"smoothing", c.cem.smoothing},
              {"replications", c.cem.replications},
              {"sigma_tolerance", c.cem.sigma_tolerance},
              {"model_variant", std::string(sim::to_string(c.model_variant))}};
  j["bounds"] = {{"arr_min", c.bounds.arr_min},
                 {"arr_max", c.bounds.arr_max_from_demand ? json("demand") : json(c.bounds.arr_max)},
                 {"dep_min", c.bounds.dep_min},     {"dep_max", c.bounds.dep_max},
                 {"speed_min", c.bounds.speed_min}, {"speed_max", c.bounds.speed_max}};
  const auto& f = c.filter;
  json fj = {{"n_particles", f.n_particles},
             {"obs_noise", f.obs_noise},
             {"diversify_frac", f.diversify_frac},
             {"obs_interval", f.obs_interval},
             {"model_variant", std::string(sim::to_string(f.model_variant))},
             {"resample_on_neff", f.resample_on_neff},
             {"neff_threshold", f.neff_threshold},
             {"forecast_horizon", f.forecast_horizon},
             {"forecast_particles", f.forecast_particles}};
  if (f.diversify_arr_frac) fj["diversify_arr_frac"] = *f.diversify_arr_frac;
  if (f.diversify_dep_frac) fj["diversify_dep_frac"] = *f.diversify_dep_frac;
  if (f.diversify_speed_frac) fj["diversify_speed_frac"] = *f.diversify_speed_frac;
  j["filter"] = fj;
  const auto& e = c.experiments;
  j["experiments"] = {{"max_demand_grid", e.max_demand_grid}, {"xi_grid", e.xi_grid},
                      {"fixed_xi", e.fixed_xi},               {"fixed_max_demand", e.fixed_max_demand},
                      {"replications", e.replications},       {"include_s4", e.include_s4}};
  return j;
}

}  // namespace bussim
