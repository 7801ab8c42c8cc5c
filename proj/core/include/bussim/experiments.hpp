#pragma once

// Identical-twin experiments: per replication, draw a ground truth, generate
// historical and real-time data, then score
//   S1  free run with parameters sampled from the prior
//   S2  free run with CEM-calibrated parameters
//   S3  particle filter started from the calibrated parameters
//   S4  particle filter started from prior-sampled parameters (optional)
// against the real-time truth. S1/S2 are scored on the whole run, S3/S4 on
// their forecasts issued at each assimilation time.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bussim/cem.hpp"
#include "bussim/objective.hpp"
#include "bussim/observation.hpp"
#include "bussim/pf.hpp"
#include "bussim/state.hpp"

namespace bussim::exp {

enum class ScenarioId { kNoCalibration = 1, kCalibrated = 2, kCalibratedPf = 3, kPfOnly = 4 };

std::string_view to_string(ScenarioId id) noexcept;
ScenarioId scenario_from_int(int n);
bool needs_calibration(ScenarioId id) noexcept;

// Root mean squared difference of two equally long series.
double rmse(std::span<const double> pred, std::span<const double> truth);

// Positions (frame-major, fleet per frame, aligned with truth frames) scored
// against the truth rows where the true bus is dispatched and unfinished.
double trajectory_rmse(std::span<const double> positions, const sim::ObservationSeries& truth);

// Every forecast window concatenated and scored against the truth rows where
// the true bus is dispatched and unfinished.
double forecast_rmse(std::span<const pf::Forecast> forecasts, const sim::ObservationSeries& truth);

struct ExperimentConfig {
  sim::SimConfig truth;  // route geometry and model constants; demand and xi set per cell
  sim::Variant model_variant = sim::Variant::kDeterministic;  // free-run and calibration model
  int k_obs = 10;
  double gps_noise = 0.0;
  calib::ParameterSpace space;
  calib::CemHyperparams cem;
  pf::FilterConfig filter;

  double min_demand = 0.5;
  std::vector<double> max_demand_grid{0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5};
  std::vector<double> xi_grid{0.0, 2.5, 5.0, 7.5, 10.0, 12.5, 15.0, 17.5};
  double fixed_xi = 7.0;          // during the maxDemand sweep
  double fixed_max_demand = 2.0;  // during the xi sweep
  int replications = 10;
  bool include_s4 = false;

  void validate() const;  // ConfigError with "experiments.*" paths
  // Truth config for one cell.
  sim::SimConfig truth_for(double max_demand, double xi) const;
  // Model config (variant = model_variant) sharing the truth geometry.
  sim::SimConfig model_config() const;
};

struct Cell {
  std::string axis;  // "maxDemand", "xi", or "grid"
  double max_demand = 0.0;
  double xi = 0.0;
  double axis_value() const;
};

// Prior used by S1 and S4: arrival and departure rates drawn as for the
// truth, traffic speed uniform over the calibration bounds.
sim::ModelParams sample_prior(const sim::SimConfig& truth, const calib::ParameterSpace& space, Rng& rng);

struct ScenarioOutcome {
  double rmse = 0.0;
  // Plot-ready trajectory aligned with the truth frames: the free run for
  // S1/S2, the latest forecast at each time for S3/S4 (NaN before the first).
  std::vector<double> trajectory;
};

struct ScenarioInputs {
  const sim::ObservationSeries* realtime = nullptr;
  sim::SimConfig truth;                           // the config the real-time data came from
  std::optional<sim::ModelParams> calibrated;     // required by S2 and S3
};

// One scenario against one real-time run. `seed` drives the prior draw,
// stochastic free runs and the filter.
ScenarioOutcome run_scenario(ScenarioId id, const ScenarioInputs& in, const ExperimentConfig& cfg,
                             std::uint64_t seed, int jobs = 1);

struct ReplicationResult {
  int replication = 0;
  std::uint64_t seed = 0;
  double calibration_pi = 0.0;
  std::array<double, 4> rmse{};  // S1..S4; NaN when not run
};

struct CellResult {
  Cell cell;
  std::vector<ReplicationResult> replications;
  std::array<double, 4> mean{};
  // Truth and scenario trajectories of replication 0, for overlays.
  std::vector<double> overlay_truth;
  std::array<std::vector<double>, 4> overlay;
  std::vector<double> overlay_times;
  std::size_t fleet_size = 0;
};

// Seed of replication `rep` of the cell; depends only on (master, cell values, rep).
std::uint64_t replication_seed(std::uint64_t master, const Cell& cell, int rep);

ReplicationResult run_replication(const ExperimentConfig& cfg, const Cell& cell, int rep, std::uint64_t master,
                                  CellResult* overlay_out = nullptr);

// Replications run on up to `jobs` threads; the reduction is in replication order.
std::vector<CellResult> run_cells(const ExperimentConfig& cfg, std::span<const Cell> cells, std::uint64_t master,
                                  int jobs = 1);

// maxDemand sweep at fixed xi, then xi sweep at fixed maxDemand.
std::vector<Cell> sweep_cells(const ExperimentConfig& cfg);

struct ExperimentReport {
  std::vector<CellResult> cells;
  bool include_s4 = false;
};

ExperimentReport sensitivity_sweep(const ExperimentConfig& cfg, std::uint64_t master, int jobs = 1);

// parameter,value,rmse_s1,rmse_s2,rmse_s3[,rmse_s4]
void write_report_csv(std::ostream& out, const ExperimentReport& report);
// parameter,value,max_demand,xi,replication,seed,calibration_pi,rmse_s1,...
void write_replications_csv(std::ostream& out, const ExperimentReport& report);
// time_s,bus_id,truth_m,s1_m,s2_m,s3_m[,s4_m]
void write_overlay_csv(std::ostream& out, const CellResult& cell, bool include_s4);

}  // namespace bussim::exp
