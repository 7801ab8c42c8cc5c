#include "bussim/objective.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "bussim/errors.hpp"
#include "bussim/sim.hpp"

namespace bussim::calib {

namespace {

std::vector<double> positions_of(const sim::ObservationSeries& s) {
  std::vector<double> out(s.num_rows());
  const auto& rows = s.rows();
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = rows[i].position;
  return out;
}

// Per-cell mean and sample standard deviation across runs.
void moments(std::span<const std::vector<double>> runs, std::vector<double>& mean, std::vector<double>& sd) {
  const std::size_t cells = runs.front().size();
  const auto k = static_cast<double>(runs.size());
  mean.assign(cells, 0.0);
  sd.assign(cells, 0.0);
  for (const auto& r : runs)
    for (std::size_t c = 0; c < cells; ++c) mean[c] += r[c];
  for (double& m : mean) m /= k;
  if (runs.size() < 2) return;
  for (const auto& r : runs)
    for (std::size_t c = 0; c < cells; ++c) {
      const double d = r[c] - mean[c];
      sd[c] += d * d;
    }
  for (double& s : sd) s = std::sqrt(s / (k - 1.0));
}

void check_runs(std::span<const std::vector<double>> runs, const char* what) {
  if (runs.empty()) throw std::invalid_argument(std::string("performance_index: no ") + what + " runs");
  for (const auto& r : runs)
    if (r.size() != runs.front().size())
      throw std::invalid_argument(std::string("performance_index: ") + what + " runs differ in length");
}

}  // namespace

void ParameterSpace::validate() const {
  if (num_stops < 2) throw ConfigError("bounds.num_stops", "must be >= 2");
  if (!(arr_min >= 0.0 && arr_max > arr_min)) throw ConfigError("bounds.arr_max", "need 0 <= arr_min < arr_max");
  if (!(dep_min >= 0.0 && dep_max <= 1.0 && dep_max > dep_min))
    throw ConfigError("bounds.dep_max", "need 0 <= dep_min < dep_max <= 1");
  if (!(speed_min > 0.0 && speed_max > speed_min))
    throw ConfigError("bounds.speed_max", "need 0 < speed_min < speed_max");
}

ParameterSpace ParameterSpace::for_truth(const sim::SimConfig& truth) const {
  ParameterSpace out = *this;
  out.num_stops = truth.num_stops;
  if (arr_max_from_demand) {
    out.arr_max = truth.max_demand * (1.0 + truth.dynamic_rate / 100.0);
    out.arr_max_from_demand = false;
  }
  return out;
}

Bounds ParameterSpace::bounds() const {
  const auto m = static_cast<std::size_t>(num_stops);
  Bounds b;
  b.lower.reserve(dims());
  b.upper.reserve(dims());
  for (std::size_t i = 0; i < m; ++i) {
    b.lower.push_back(arr_min / 60.0);
    b.upper.push_back(arr_max / 60.0);
  }
  for (std::size_t i = 0; i + 1 < m; ++i) {
    b.lower.push_back(dep_min);
    b.upper.push_back(dep_max);
  }
  b.lower.push_back(speed_min);
  b.upper.push_back(speed_max);
  return b;
}

sim::ModelParams ParameterSpace::decode(std::span<const double> x) const {
  if (x.size() != dims()) throw std::invalid_argument("ParameterSpace::decode: wrong candidate length");
  const auto m = static_cast<std::size_t>(num_stops);
  sim::ModelParams p;
  p.arr.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(m));
  p.dep.assign(x.begin() + static_cast<std::ptrdiff_t>(m), x.begin() + static_cast<std::ptrdiff_t>(2 * m - 1));
  p.dep.push_back(1.0);
  p.traffic_speed = x.back();
  return p;
}

std::vector<double> ParameterSpace::encode(const sim::ModelParams& p) const {
  const auto m = static_cast<std::size_t>(num_stops);
  if (p.arr.size() != m || p.dep.size() != m) throw std::invalid_argument("ParameterSpace::encode: wrong stop count");
  std::vector<double> x(p.arr);
  x.insert(x.end(), p.dep.begin(), p.dep.end() - 1);
  x.push_back(p.traffic_speed);
  return x;
}

sim::ModelParams ParameterSpace::sample_uniform(Rng& rng) const {
  const Bounds b = bounds();
  std::vector<double> x(b.size());
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = std::uniform_real_distribution<double>(b.lower[k], b.upper[k])(rng);
  return decode(x);
}

double performance_index(std::span<const std::vector<double>> sim_runs,
                         std::span<const std::vector<double>> obs_runs, std::size_t fleet_size) {
  check_runs(sim_runs, "simulated");
  check_runs(obs_runs, "observed");
  if (sim_runs.front().size() != obs_runs.front().size())
    throw std::invalid_argument("performance_index: simulated and observed runs differ in length");
  if (fleet_size == 0 || sim_runs.front().size() % fleet_size != 0)
    throw std::invalid_argument("performance_index: run length is not a multiple of the fleet size");
  std::vector<double> sm, ss, om, os;
  moments(sim_runs, sm, ss);
  moments(obs_runs, om, os);
  double total = 0.0;
  for (std::size_t c = 0; c < sm.size(); ++c) total += std::abs(sm[c] - om[c]) + std::abs(ss[c] - os[c]);
  return total / static_cast<double>(sm.size());
}

Objective::Objective(const datagen::Dataset& historical, sim::SimConfig model, int replications)
    : model_(std::move(model)), replications_(replications) {
  model_.validate();
  if (historical.runs.empty()) throw std::invalid_argument("objective: historical dataset has no runs");
  if (model_.variant == sim::Variant::kDeterministic) replications_ = 1;
  if (replications_ < 1) throw std::invalid_argument("objective: K_I must be >= 1");
  fleet_ = static_cast<std::size_t>(model_.fleet_size);
  frames_ = model_.num_frames();
  std::vector<std::vector<double>> obs;
  obs.reserve(historical.runs.size());
  for (const auto& run : historical.runs) {
    if (run.fleet_size() != fleet_ || run.num_frames() != frames_ ||
        std::abs(run.dt() - model_.dt) > 1e-9 * model_.dt)
      throw std::invalid_argument("objective: dataset geometry (fleet " + std::to_string(run.fleet_size()) +
                                  ", frames " + std::to_string(run.num_frames()) + ") does not match the model (fleet " +
                                  std::to_string(fleet_) + ", frames " + std::to_string(frames_) + ")");
    obs.push_back(positions_of(run));
  }
  moments(obs, obs_mean_, obs_std_);
}

double Objective::from_runs(std::span<const std::vector<double>> sim_runs) const {
  check_runs(sim_runs, "simulated");
  if (sim_runs.front().size() != obs_mean_.size())
    throw std::invalid_argument("objective: simulated run length does not match the dataset");
  std::vector<double> sm, ss;
  moments(sim_runs, sm, ss);
  double total = 0.0;
  for (std::size_t c = 0; c < sm.size(); ++c)
    total += std::abs(sm[c] - obs_mean_[c]) + std::abs(ss[c] - obs_std_[c]);
  return total / static_cast<double>(sm.size());
}

double Objective::operator()(const sim::ModelParams& params, std::uint64_t seed) const {
  std::vector<std::vector<double>> runs(static_cast<std::size_t>(replications_));
  for (int i = 0; i < replications_; ++i) {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(i)});
    runs[static_cast<std::size_t>(i)] = sim::simulate_positions(model_, params, rng);
  }
  return from_runs(runs);
}

CalibrationResult calibrate(const datagen::Dataset& historical, const sim::SimConfig& model,
                            const ParameterSpace& space, const CemHyperparams& hyper, std::uint64_t seed,
                            int jobs) {
  space.validate();
  if (space.num_stops != model.num_stops)
    throw std::invalid_argument("calibrate: parameter space and model disagree on the number of stops");
  const Objective objective(historical, model, hyper.replications);
  auto fn = [&](std::span<const double> x, std::uint64_t s) { return objective(space.decode(x), s); };
  CemOptions opts;
  opts.jobs = jobs;
  CalibrationResult out;
  out.cem = cem_optimize(space.bounds(), hyper, fn, seed, opts);
  out.params = space.decode(out.cem.state.best);
  return out;
}

}  // namespace bussim::calib
