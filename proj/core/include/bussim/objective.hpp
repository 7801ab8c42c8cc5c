#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bussim/cem.hpp"
#include "bussim/datagen.hpp"
#include "bussim/rng.hpp"
#include "bussim/state.hpp"

namespace bussim::calib {

// Box over the calibrated parameters. The search vector has 2M entries:
// arr[0..M), dep[0..M-1), traffic speed. dep[M-1] is pinned to 1.
// Arrival bounds are given per minute and converted to per second.
struct ParameterSpace {
  int num_stops = 20;
  double arr_min = 0.0;  // passengers / minute
  double arr_max = 6.0;
  // When set, for_truth() replaces arr_max by the largest rate the truth can
  // reach: maxDemand * (1 + xi / 100).
  bool arr_max_from_demand = true;
  double dep_min = 0.0;
  double dep_max = 0.6;
  double speed_min = 5.0;  // m/s
  double speed_max = 25.0;

  ParameterSpace for_truth(const sim::SimConfig& truth) const;

  std::size_t dims() const noexcept { return 2 * static_cast<std::size_t>(num_stops); }
  Bounds bounds() const;
  sim::ModelParams decode(std::span<const double> x) const;
  std::vector<double> encode(const sim::ModelParams& p) const;
  // Uniform draw over the whole box (the "uncalibrated" prior).
  sim::ModelParams sample_uniform(Rng& rng) const;
  void validate() const;  // ConfigError with "bounds.*" paths
};

// Performance index between simulated replications and observed instances:
//   PI = 1/(N T) sum_t sum_j ( |mean_i sim - mean_o obs| + |std_i sim - std_o obs| )
// with sample standard deviations (K - 1 denominators; 0 for a single run).
// Each run is frame-major, fleet_size positions per frame.
double performance_index(std::span<const std::vector<double>> sim_runs,
                         std::span<const std::vector<double>> obs_runs, std::size_t fleet_size);

class Objective {
 public:
  // `model` is the variant being calibrated; replications is forced to 1 for
  // the deterministic variant. Throws std::invalid_argument when the dataset
  // geometry (fleet, horizon, dt) does not match `model`.
  Objective(const datagen::Dataset& historical, sim::SimConfig model, int replications);

  double operator()(const sim::ModelParams& params, std::uint64_t seed) const;
  double from_runs(std::span<const std::vector<double>> sim_runs) const;

  int replications() const noexcept { return replications_; }
  const sim::SimConfig& model() const noexcept { return model_; }

 private:
  sim::SimConfig model_;
  int replications_;
  std::size_t fleet_;
  std::size_t frames_;
  std::vector<double> obs_mean_;
  std::vector<double> obs_std_;
};

struct CalibrationResult {
  sim::ModelParams params;  // pi*
  CemResult cem;
};

CalibrationResult calibrate(const datagen::Dataset& historical, const sim::SimConfig& model,
                            const ParameterSpace& space, const CemHyperparams& hyper, std::uint64_t seed,
                            int jobs = 1);

}  // namespace bussim::calib
