#include "bussim/datagen.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "bussim/parallel.hpp"
#include "bussim/serialize.hpp"
#include "bussim/sim.hpp"

namespace bussim::datagen {

namespace {

sim::SimConfig as_truth(sim::SimConfig cfg) {
  cfg.variant = sim::Variant::kTruth;
  return cfg;
}

sim::ObservationSeries with_gps_noise(const sim::ObservationSeries& clean, double sigma, Rng& rng) {
  sim::ObservationSeries noisy(clean.fleet_size(), clean.dt());
  noisy.reserve(clean.num_frames());
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<sim::ObservationRow> rows(clean.fleet_size());
  for (std::size_t f = 0; f < clean.num_frames(); ++f) {
    auto src = clean.frame(f);
    std::copy(src.begin(), src.end(), rows.begin());
    for (auto& r : rows)
      if (r.active()) r.position += noise(rng);
    noisy.append(clean.time(f), rows);
  }
  return noisy;
}

sim::ObservationSeries run_truth(const GroundTruthScenario& sc, std::uint64_t seed) {
  const sim::SimConfig cfg = as_truth(sc.sim_config);
  auto series = sim::simulate(cfg, sc.params0, seed);
  if (sc.gps_noise_std > 0.0) {
    Rng rng = make_rng(seed, {stream::kObservationNoise});
    series = with_gps_noise(series, sc.gps_noise_std, rng);
  }
  return series;
}

}  // namespace

std::string_view to_string(DatasetKind k) noexcept {
  return k == DatasetKind::kHistorical ? "historical" : "realtime";
}

sim::ModelParams sample_params(double min_demand, double max_demand, int num_stops, double initial_speed,
                               Rng& rng) {
  if (!(min_demand > 0.0) || !(max_demand >= min_demand))
    throw std::invalid_argument("sample_params: demand bounds must satisfy 0 < minDemand <= maxDemand");
  if (num_stops < 2) throw std::invalid_argument("sample_params: need at least 2 stops");
  if (!(initial_speed > 0.0)) throw std::invalid_argument("sample_params: initial speed must be > 0");

  sim::ModelParams p;
  p.arr.resize(static_cast<std::size_t>(num_stops));
  std::uniform_real_distribution<double> demand(min_demand, max_demand);
  for (double& a : p.arr) a = (min_demand == max_demand ? min_demand : demand(rng)) / 60.0;

  std::uniform_real_distribution<double> alight(0.05, 0.5);
  p.dep.resize(static_cast<std::size_t>(num_stops) - 1);
  for (double& d : p.dep) d = alight(rng);
  std::sort(p.dep.begin(), p.dep.end());
  p.dep.push_back(1.0);

  p.traffic_speed = initial_speed;
  return p;
}

void GroundTruthScenario::validate() const {
  sim_config.validate();
  sim::validate_params(params0, sim_config);
  const double lo = sim_config.min_demand_per_second(), hi = sim_config.max_demand_per_second();
  const double slack = 1e-12 * std::max(1.0, hi);
  for (double a : params0.arr)
    if (a < lo - slack || a > hi + slack)
      throw std::invalid_argument("scenario: params0 arrival rate outside [minDemand, maxDemand]");
  std::set<std::uint64_t> seen(seed_historical.begin(), seed_historical.end());
  if (seen.size() != seed_historical.size()) throw std::invalid_argument("scenario: duplicate historical seed");
  if (seen.count(seed_realtime)) throw std::invalid_argument("scenario: real-time seed reused by a historical run");
  if (gps_noise_std < 0.0) throw std::invalid_argument("scenario: gps_noise_std must be >= 0");
}

std::string GroundTruthScenario::fingerprint() const {
  nlohmann::json j;
  j["sim"] = as_truth(sim_config);
  j["sim"].erase("rng_seed");
  j["params0"] = params0;
  j["gps_noise_std"] = gps_noise_std;
  return io::fingerprint(j);
}

GroundTruthScenario make_scenario(const sim::SimConfig& truth, std::uint64_t master_seed, int k_obs,
                                  double gps_noise_std) {
  if (k_obs < 1) throw std::invalid_argument("make_scenario: K_O must be >= 1");
  GroundTruthScenario sc;
  sc.sim_config = as_truth(truth);
  sc.sim_config.rng_seed = master_seed;
  Rng rng = make_rng(master_seed, {stream::kScenarioParams});
  sc.params0 = sample_params(truth.min_demand, truth.max_demand, truth.num_stops, truth.initial_speed, rng);
  for (int k = 0; k < k_obs; ++k)
    sc.seed_historical.push_back(derive_seed(master_seed, {stream::kHistorical, static_cast<std::uint64_t>(k)}));
  sc.seed_realtime = derive_seed(master_seed, {stream::kRealtime});
  sc.gps_noise_std = gps_noise_std;
  sc.validate();
  return sc;
}

Dataset generate_historical(const GroundTruthScenario& scenario, int jobs) {
  scenario.validate();
  if (scenario.seed_historical.size() < 2)
    throw std::invalid_argument("generate_historical: K_O must be >= 2");
  Dataset ds;
  ds.kind = DatasetKind::kHistorical;
  ds.fingerprint = scenario.fingerprint();
  ds.runs.resize(scenario.seed_historical.size());
  parallel_for(ds.runs.size(), jobs,
               [&](std::size_t k) { ds.runs[k] = run_truth(scenario, scenario.seed_historical[k]); });
  return ds;
}

Dataset generate_realtime(const GroundTruthScenario& scenario) {
  scenario.validate();
  Dataset ds;
  ds.kind = DatasetKind::kRealtime;
  ds.fingerprint = scenario.fingerprint();
  ds.runs.push_back(run_truth(scenario, scenario.seed_realtime));
  return ds;
}

}  // namespace bussim::datagen
