#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bussim/observation.hpp"
#include "bussim/rng.hpp"
#include "bussim/state.hpp"

namespace bussim::datagen {

enum class DatasetKind { kHistorical, kRealtime };

struct GroundTruthScenario {
  sim::ModelParams params0;
  sim::SimConfig sim_config;  // always run as the truth variant
  std::vector<std::uint64_t> seed_historical;
  std::uint64_t seed_realtime = 0;
  double gps_noise_std = 0.0;  // metres; added to active rows only

  // Seeds distinct, params inside the sampling bounds, config valid.
  void validate() const;
  // Hash of the simulation config and params0; shared by every dataset
  // generated from this scenario.
  std::string fingerprint() const;
};

struct Dataset {
  DatasetKind kind = DatasetKind::kHistorical;
  std::vector<sim::ObservationSeries> runs;
  std::string fingerprint;
};

// Arrival rates ~ U(min, max) passengers/minute (stored per second),
// departure fractions = sorted U(0.05, 0.5) with the last set to 1, traffic
// speed = initial_speed.
sim::ModelParams sample_params(double min_demand, double max_demand, int num_stops, double initial_speed,
                               Rng& rng);

// Draws params0 from `truth` and derives K_O historical seeds plus one
// real-time seed from `master_seed`.
GroundTruthScenario make_scenario(const sim::SimConfig& truth, std::uint64_t master_seed, int k_obs,
                                  double gps_noise_std = 0.0);

Dataset generate_historical(const GroundTruthScenario& scenario, int jobs = 1);
Dataset generate_realtime(const GroundTruthScenario& scenario);

std::string_view to_string(DatasetKind k) noexcept;

}  // namespace bussim::datagen
