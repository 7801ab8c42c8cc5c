#pragma once

// Bootstrap particle filter over the bus-route model. Each particle carries a
// full state vector (buses, stops, parameters). Every assimilation round:
// predict with the model, weight against GPS positions, record the posterior,
// optionally forecast ahead, SIR-resample, and roughen the parameter
// sub-vector so the ensemble can follow drifting parameters.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "bussim/objective.hpp"
#include "bussim/observation.hpp"
#include "bussim/rng.hpp"
#include "bussim/state.hpp"

namespace bussim::pf {

struct Particle {
  sim::StateVector state;
  double weight = 0.0;
  std::uint64_t stream_id = 0;
};

using ParticleSet = std::vector<Particle>;

struct FilterConfig {
  int n_particles = 500;
  double obs_noise = 20.0;         // metres, likelihood width
  double diversify_frac = 0.0;     // roughening std as a fraction of each bound range
  // Per-group overrides of diversify_frac.
  std::optional<double> diversify_arr_frac;
  std::optional<double> diversify_dep_frac;
  std::optional<double> diversify_speed_frac;
  double obs_interval = 30.0;      // seconds between assimilations
  sim::Variant model_variant = sim::Variant::kStochastic;
  bool resample_on_neff = false;   // false: resample every round
  double neff_threshold = 0.5;     // fraction of N_P, used when resample_on_neff
  double forecast_horizon = 300.0; // seconds ahead; 0 = to the end of the run; < 0 = no forecasts
  int forecast_particles = 50;     // particles propagated per forecast; 0 = all

  void validate(double dt) const;  // ConfigError with "filter.*" paths
};

// Per-dimension roughening std in search-vector coordinates.
std::vector<double> diversify_std(const calib::ParameterSpace& space, double frac);
std::vector<double> diversify_std(const calib::ParameterSpace& space, const FilterConfig& cfg);

using ParamSampler = std::function<sim::ModelParams(std::size_t particle, Rng& rng)>;

// N_P particles at t = 0 with params = center + N(0, std) (clamped), uniform weights.
ParticleSet init_particles(const sim::ModelParams& center, const sim::SimConfig& model,
                           const calib::ParameterSpace& space, std::span<const double> std, int n_particles,
                           Rng& rng);
// Each particle's params drawn independently by `sampler`.
ParticleSet init_particles(const ParamSampler& sampler, const sim::SimConfig& model, int n_particles,
                           std::uint64_t seed);

// Step every particle forward to `until_tick` on its own stream
// (seed, stream_id, round). Weights are untouched.
void predict(ParticleSet& particles, const sim::SimConfig& model, std::int64_t until_tick, std::uint64_t seed,
             std::uint64_t round, int jobs = 1);

struct WeightResult {
  double n_eff = 0.0;
  bool degenerate = false;  // likelihood underflowed everywhere; weights reset to uniform
  std::size_t observed_buses = 0;
};

// w_i <- w_i * exp(-|pos_i - pos_obs|^2 / (2 sigma^2)) over buses active in the
// observation, then normalised. Throws if the observation time differs from
// the particle clock.
WeightResult weight(ParticleSet& particles, const sim::ObservationVector& obs, double sigma_obs);

double effective_sample_size(const ParticleSet& particles);

// Systematic resampling positions (u + k) / N for k = 0..N-1, u in [0, 1).
std::vector<std::size_t> systematic_indices(std::span<const double> weights, std::size_t n, double u);
ParticleSet resample(const ParticleSet& particles, Rng& rng);

// Adds N(0, std_k) to the parameter sub-vector only; clamps to the box and
// keeps the final departure fraction at 1.
void diversify(ParticleSet& particles, const calib::ParameterSpace& space, std::span<const double> std, Rng& rng);

// Weighted mean of positions, speeds, occupancies and parameters; statuses by
// weighted majority.
sim::StateVector estimate_state(const ParticleSet& particles);

struct FilterStep {
  double time = 0.0;
  std::vector<double> estimated_position;
  std::vector<double> observed_position;
  std::vector<int> observed_active;  // 1 where the observed bus is dispatched and unfinished
  double n_eff = 0.0;
  bool degenerate = false;
  bool resampled = false;
  sim::ModelParams param_mean;
};

struct Forecast {
  double issue_time = 0.0;
  std::vector<double> times;      // issue_time + dt .. issue_time + horizon
  std::vector<double> positions;  // frame-major, fleet_size per frame (ensemble mean)
};

struct FilterResult {
  std::vector<FilterStep> steps;
  std::vector<Forecast> forecasts;
  std::size_t fleet_size = 0;
};

// Frames of `realtime` that fall on the assimilation grid (multiples of obs_interval).
std::vector<sim::ObservationVector> assimilation_schedule(const sim::ObservationSeries& realtime, double obs_interval);

// `model.variant` is overridden by cfg.model_variant. Observation times must
// increase; gaps are bridged by prediction.
FilterResult run_filter(ParticleSet particles, const sim::SimConfig& model, const calib::ParameterSpace& space,
                        std::span<const sim::ObservationVector> observations, const FilterConfig& cfg,
                        std::uint64_t seed, int jobs = 1);

// Convenience: particles initialised around `calibrated`, observations from
// the real-time series on the assimilation grid.
FilterResult run_filter(const sim::ModelParams& calibrated, const sim::SimConfig& model,
                        const calib::ParameterSpace& space, const sim::ObservationSeries& realtime,
                        const FilterConfig& cfg, std::uint64_t seed, int jobs = 1);

}  // namespace bussim::pf
