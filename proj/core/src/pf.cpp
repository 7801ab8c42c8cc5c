#include "bussim/pf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

#include "bussim/errors.hpp"
#include "bussim/parallel.hpp"
#include "bussim/sim.hpp"

namespace bussim::pf {

namespace {

// Stream keys under the filter seed.
constexpr std::uint64_t kPredictStream = 0;
constexpr std::uint64_t kResampleStream = 1;
constexpr std::uint64_t kDiversifyStream = 2;
constexpr std::uint64_t kForecastPick = 3;
constexpr std::uint64_t kForecastStream = 4;

// Forecast trajectories are reduced in fixed-size blocks so the summation
// order, and hence the output bits, do not depend on the thread count.
constexpr std::size_t kForecastBlock = 16;

void set_uniform(ParticleSet& ps) {
  const double w = 1.0 / static_cast<double>(ps.size());
  for (auto& p : ps) p.weight = w;
}

Forecast make_forecast(const ParticleSet& ps, const sim::SimConfig& model, std::int64_t end_tick, int n_forecast,
                       std::uint64_t seed, std::uint64_t round, int jobs) {
  const sim::StateVector& ref = ps.front().state;
  Forecast fc;
  fc.issue_time = ref.clock;
  const std::int64_t start = ref.tick;
  const auto frames = static_cast<std::size_t>(std::max<std::int64_t>(0, end_tick - start));
  const std::size_t fleet = ref.buses.size();
  fc.times.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) fc.times[f] = static_cast<double>(start + 1 + static_cast<std::int64_t>(f)) * model.dt;
  fc.positions.assign(frames * fleet, 0.0);
  if (frames == 0) return fc;

  std::vector<std::size_t> members;
  std::vector<double> member_weight;
  if (n_forecast <= 0 || static_cast<std::size_t>(n_forecast) >= ps.size()) {
    for (std::size_t i = 0; i < ps.size(); ++i) {
      members.push_back(i);
      member_weight.push_back(ps[i].weight);
    }
  } else {
    std::vector<double> w(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) w[i] = ps[i].weight;
    Rng pick = make_rng(seed, {kForecastPick, round});
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(pick);
    members = systematic_indices(w, static_cast<std::size_t>(n_forecast), u);
    member_weight.assign(members.size(), 1.0 / static_cast<double>(members.size()));
  }

  std::vector<std::vector<double>> buffers(std::min(kForecastBlock, members.size()));
  for (std::size_t block = 0; block < members.size(); block += kForecastBlock) {
    const std::size_t count = std::min(kForecastBlock, members.size() - block);
    parallel_for(count, jobs, [&](std::size_t b) {
      const std::size_t k = block + b;
      sim::StateVector s = ps[members[k]].state;
      Rng rng = make_rng(seed, {kForecastStream, round, static_cast<std::uint64_t>(k)});
      auto& buf = buffers[b];
      buf.resize(frames * fleet);
      for (std::size_t f = 0; f < frames; ++f) {
        sim::advance(s, model, rng);
        for (std::size_t j = 0; j < fleet; ++j) buf[f * fleet + j] = s.buses[j].position;
      }
    });
    for (std::size_t b = 0; b < count; ++b) {
      const double w = member_weight[block + b];
      const auto& buf = buffers[b];
      for (std::size_t c = 0; c < fc.positions.size(); ++c) fc.positions[c] += w * buf[c];
    }
  }
  return fc;
}

}  // namespace

void FilterConfig::validate(double dt) const {
  if (n_particles < 2) throw ConfigError("filter.n_particles", "must be >= 2");
  if (!(obs_noise > 0.0)) throw ConfigError("filter.obs_noise", "must be > 0");
  if (!(diversify_frac >= 0.0)) throw ConfigError("filter.diversify_frac", "must be >= 0");
  if (diversify_arr_frac && !(*diversify_arr_frac >= 0.0)) throw ConfigError("filter.diversify_arr_frac", "must be >= 0");
  if (diversify_dep_frac && !(*diversify_dep_frac >= 0.0)) throw ConfigError("filter.diversify_dep_frac", "must be >= 0");
  if (diversify_speed_frac && !(*diversify_speed_frac >= 0.0))
    throw ConfigError("filter.diversify_speed_frac", "must be >= 0");
  if (!(obs_interval > 0.0)) throw ConfigError("filter.obs_interval", "must be > 0");
  const double k = obs_interval / dt;
  if (std::abs(k - std::round(k)) > 1e-9 * std::max(1.0, k))
    throw ConfigError("filter.obs_interval", "must be a multiple of sim.dt");
  if (!(neff_threshold > 0.0 && neff_threshold <= 1.0))
    throw ConfigError("filter.neff_threshold", "must lie in (0,1]");
  if (forecast_particles < 0) throw ConfigError("filter.forecast_particles", "must be >= 0");
}

std::vector<double> diversify_std(const calib::ParameterSpace& space, double frac) {
  const calib::Bounds b = space.bounds();
  std::vector<double> out(b.size());
  for (std::size_t k = 0; k < b.size(); ++k) out[k] = frac * b.range(k);
  return out;
}

std::vector<double> diversify_std(const calib::ParameterSpace& space, const FilterConfig& cfg) {
  std::vector<double> out = diversify_std(space, cfg.diversify_frac);
  const calib::Bounds b = space.bounds();
  const auto m = static_cast<std::size_t>(space.num_stops);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto& group = k < m ? cfg.diversify_arr_frac : k + 1 < out.size() ? cfg.diversify_dep_frac
                                                                              : cfg.diversify_speed_frac;
    if (group) out[k] = *group * b.range(k);
  }
  return out;
}

ParticleSet init_particles(const sim::ModelParams& center, const sim::SimConfig& model,
                           const calib::ParameterSpace& space, std::span<const double> std, int n_particles,
                           Rng& rng) {
  if (n_particles < 1) throw std::invalid_argument("init_particles: need at least one particle");
  const sim::StateVector base = sim::initial_state(model, center);
  ParticleSet ps(static_cast<std::size_t>(n_particles));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    ps[i].state = base;
    ps[i].stream_id = i;
  }
  set_uniform(ps);
  diversify(ps, space, std, rng);
  for (auto& p : ps) p.state.base_params = p.state.params;
  return ps;
}

ParticleSet init_particles(const ParamSampler& sampler, const sim::SimConfig& model, int n_particles,
                           std::uint64_t seed) {
  if (n_particles < 1) throw std::invalid_argument("init_particles: need at least one particle");
  ParticleSet ps(static_cast<std::size_t>(n_particles));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(i)});
    ps[i].state = sim::initial_state(model, sampler(i, rng));
    ps[i].stream_id = i;
  }
  set_uniform(ps);
  return ps;
}

void predict(ParticleSet& particles, const sim::SimConfig& model, std::int64_t until_tick, std::uint64_t seed,
             std::uint64_t round, int jobs) {
  parallel_for(particles.size(), jobs, [&](std::size_t i) {
    Particle& p = particles[i];
    if (p.state.tick >= until_tick) return;
    Rng rng = make_rng(seed, {kPredictStream, p.stream_id, round});
    sim::run_until(p.state, model, rng, until_tick);
  });
}

double effective_sample_size(const ParticleSet& particles) {
  double sum = 0.0, sq = 0.0;
  for (const auto& p : particles) {
    sum += p.weight;
    sq += p.weight * p.weight;
  }
  return sq > 0.0 ? (sum * sum) / sq : 0.0;
}

WeightResult weight(ParticleSet& particles, const sim::ObservationVector& obs, double sigma_obs) {
  if (particles.empty()) throw std::invalid_argument("weight: empty particle set");
  if (!(sigma_obs > 0.0)) throw std::invalid_argument("weight: sigma_obs must be > 0");
  WeightResult res;
  for (const auto& p : particles) {
    if (std::abs(p.state.clock - obs.time) > 1e-6 * std::max(1.0, std::abs(obs.time)))
      throw std::invalid_argument("weight: observation time " + std::to_string(obs.time) +
                                  " differs from particle clock " + std::to_string(p.state.clock));
    if (p.state.buses.size() != obs.rows.size())
      throw std::invalid_argument("weight: observation fleet size differs from the model");
  }
  for (const auto& r : obs.rows) res.observed_buses += r.active() ? 1 : 0;

  const double inv2s2 = 1.0 / (2.0 * sigma_obs * sigma_obs);
  std::vector<double> logw(particles.size());
  double max_logw = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < particles.size(); ++i) {
    double sq = 0.0;
    const auto& buses = particles[i].state.buses;
    for (std::size_t j = 0; j < obs.rows.size(); ++j) {
      if (!obs.rows[j].active()) continue;
      const double d = buses[j].position - obs.rows[j].position;
      sq += d * d;
    }
    const double prior = particles[i].weight;
    logw[i] = (prior > 0.0 ? std::log(prior) : -std::numeric_limits<double>::infinity()) - sq * inv2s2;
    if (logw[i] > max_logw) max_logw = logw[i];
  }

  if (!std::isfinite(max_logw)) {
    set_uniform(particles);
    res.degenerate = true;
    res.n_eff = static_cast<double>(particles.size());
    return res;
  }

  double total = 0.0;
  for (std::size_t i = 0; i < particles.size(); ++i) {
    particles[i].weight = std::exp(logw[i] - max_logw);
    total += particles[i].weight;
  }
  // Weights stay strictly positive.
  constexpr double kFloor = 1e-300;
  double floored = 0.0;
  for (auto& p : particles) {
    p.weight = std::max(p.weight / total, kFloor);
    floored += p.weight;
  }
  for (auto& p : particles) p.weight /= floored;
  res.n_eff = effective_sample_size(particles);
  return res;
}

std::vector<std::size_t> systematic_indices(std::span<const double> weights, std::size_t n, double u) {
  if (weights.empty()) throw std::invalid_argument("systematic_indices: no weights");
  if (!(u >= 0.0 && u < 1.0)) throw std::invalid_argument("systematic_indices: u must lie in [0, 1)");
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw std::invalid_argument("systematic_indices: weights sum to zero");
  // Positions and cumulative weights are compared in units of 1/n so that
  // positions landing on a boundary (uniform weights, u = 0) resolve the
  // same way regardless of rounding in the running sum.
  constexpr double kSnap = 1e-9;
  const double scale = static_cast<double>(n) / total;
  std::vector<std::size_t> out(n);
  std::size_t i = 0;
  double cumulative = weights[0] * scale;
  const auto last = weights.size() - 1;
  for (std::size_t k = 0; k < n; ++k) {
    const double pos = u + static_cast<double>(k);
    while (i < last && pos >= cumulative - kSnap) cumulative += weights[++i] * scale;
    out[k] = i;
  }
  return out;
}

ParticleSet resample(const ParticleSet& particles, Rng& rng) {
  std::vector<double> w(particles.size());
  for (std::size_t i = 0; i < particles.size(); ++i) w[i] = particles[i].weight;
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const auto idx = systematic_indices(w, particles.size(), u);
  ParticleSet out;
  out.reserve(particles.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out.push_back(particles[idx[k]]);
    out.back().stream_id = k;
  }
  set_uniform(out);
  return out;
}

void diversify(ParticleSet& particles, const calib::ParameterSpace& space, std::span<const double> std, Rng& rng) {
  if (std.size() != space.dims()) throw std::invalid_argument("diversify: std vector has the wrong length");
  bool any = false;
  for (double s : std) any = any || s > 0.0;
  if (!any) return;
  const calib::Bounds b = space.bounds();
  std::normal_distribution<double> z(0.0, 1.0);
  for (auto& p : particles) {
    std::vector<double> x = space.encode(p.state.params);
    for (std::size_t k = 0; k < x.size(); ++k)
      if (std[k] > 0.0) x[k] += std[k] * z(rng);
    b.clamp(x);
    p.state.params = space.decode(x);
  }
}

sim::StateVector estimate_state(const ParticleSet& particles) {
  if (particles.empty()) throw std::invalid_argument("estimate_state: empty particle set");
  double total = 0.0;
  std::size_t best = 0;
  for (std::size_t i = 0; i < particles.size(); ++i) {
    total += particles[i].weight;
    if (particles[i].weight > particles[best].weight) best = i;
  }
  sim::StateVector est = particles[best].state;
  const std::size_t fleet = est.buses.size();
  const std::size_t stops = est.params.num_stops();

  // Means are accumulated as offsets from the reference particle, which keeps
  // them exact when every particle agrees.
  const sim::StateVector& ref = particles[best].state;
  std::vector<double> pos(fleet, 0.0), speed(fleet, 0.0), occ(fleet, 0.0);
  std::vector<std::map<int, double>> votes(fleet);
  sim::ModelParams pm;
  pm.arr.assign(stops, 0.0);
  pm.dep.assign(stops, 0.0);
  pm.traffic_speed = 0.0;
  for (const auto& p : particles) {
    const double w = p.weight / total;
    for (std::size_t j = 0; j < fleet; ++j) {
      const auto& b = p.state.buses[j];
      const auto& r = ref.buses[j];
      pos[j] += w * (b.position - r.position);
      speed[j] += w * (b.speed - r.speed);
      occ[j] += w * (b.occupancy - r.occupancy);
      votes[j][static_cast<int>(b.status)] += w;
    }
    for (std::size_t m = 0; m < stops; ++m) {
      pm.arr[m] += w * (p.state.params.arr[m] - ref.params.arr[m]);
      pm.dep[m] += w * (p.state.params.dep[m] - ref.params.dep[m]);
    }
    pm.traffic_speed += w * (p.state.params.traffic_speed - ref.params.traffic_speed);
  }
  for (std::size_t m = 0; m < stops; ++m) {
    pm.arr[m] += ref.params.arr[m];
    pm.dep[m] += ref.params.dep[m];
  }
  pm.traffic_speed += ref.params.traffic_speed;
  for (std::size_t j = 0; j < fleet; ++j) {
    auto& b = est.buses[j];
    b.position = ref.buses[j].position + pos[j];
    b.speed = ref.buses[j].speed + speed[j];
    b.occupancy = static_cast<int>(std::lround(ref.buses[j].occupancy + occ[j]));
    const auto winner = std::max_element(votes[j].begin(), votes[j].end(),
                                         [](const auto& a, const auto& c) { return a.second < c.second; });
    b.status = static_cast<sim::BusStatus>(winner->first);
  }
  est.params = pm;
  return est;
}

std::vector<sim::ObservationVector> assimilation_schedule(const sim::ObservationSeries& realtime, double obs_interval) {
  std::vector<sim::ObservationVector> out;
  if (!(obs_interval > 0.0)) throw std::invalid_argument("assimilation_schedule: interval must be > 0");
  for (std::size_t f = 0; f < realtime.num_frames(); ++f) {
    const double t = realtime.time(f);
    const double k = t / obs_interval;
    if (std::abs(k - std::round(k)) <= 1e-9 * std::max(1.0, k) && std::round(k) >= 1.0)
      out.push_back(realtime.vector_at(f));
  }
  return out;
}

FilterResult run_filter(ParticleSet particles, const sim::SimConfig& model_in, const calib::ParameterSpace& space,
                        std::span<const sim::ObservationVector> observations, const FilterConfig& cfg,
                        std::uint64_t seed, int jobs) {
  sim::SimConfig model = model_in;
  model.variant = cfg.model_variant;
  model.validate();
  cfg.validate(model.dt);
  if (particles.empty()) throw std::invalid_argument("run_filter: empty particle set");

  const std::vector<double> rough = diversify_std(space, cfg);
  bool roughen = false;
  for (double r : rough) roughen = roughen || r > 0.0;
  const auto total_ticks = static_cast<std::int64_t>(model.num_frames());
  const std::int64_t horizon_ticks = cfg.forecast_horizon > 0.0 ? sim::ticks_for(cfg.forecast_horizon, model.dt) : 0;

  FilterResult result;
  result.fleet_size = particles.front().state.buses.size();
  double last_time = particles.front().state.clock;
  std::uint64_t round = 0;
  for (const auto& obs : observations) {
    if (!(obs.time > last_time))
      throw std::invalid_argument("run_filter: observation timestamps must increase (got " + std::to_string(obs.time) +
                                  " after " + std::to_string(last_time) + ")");
    last_time = obs.time;
    const std::int64_t tick = sim::ticks_for(obs.time, model.dt);
    if (tick > total_ticks) throw std::invalid_argument("run_filter: observation beyond the model horizon");
    ++round;

    predict(particles, model, tick, seed, round, jobs);
    const WeightResult wr = weight(particles, obs, cfg.obs_noise);

    FilterStep step;
    step.time = obs.time;
    step.n_eff = wr.n_eff;
    step.degenerate = wr.degenerate;
    const sim::StateVector est = estimate_state(particles);
    for (std::size_t j = 0; j < result.fleet_size; ++j) {
      step.estimated_position.push_back(est.buses[j].position);
      step.observed_position.push_back(obs.rows[j].position);
      step.observed_active.push_back(obs.rows[j].active() ? 1 : 0);
    }
    step.param_mean = est.params;

    if (cfg.forecast_horizon >= 0.0 && tick < total_ticks) {
      const std::int64_t end = horizon_ticks > 0 ? std::min(total_ticks, tick + horizon_ticks) : total_ticks;
      result.forecasts.push_back(make_forecast(particles, model, end, cfg.forecast_particles, seed, round, jobs));
    }

    const bool do_resample =
        !cfg.resample_on_neff || wr.n_eff < cfg.neff_threshold * static_cast<double>(particles.size());
    if (do_resample) {
      Rng rng = make_rng(seed, {kResampleStream, round});
      particles = resample(particles, rng);
    }
    step.resampled = do_resample;
    if (roughen) {
      Rng rng = make_rng(seed, {kDiversifyStream, round});
      diversify(particles, space, rough, rng);
    }
    result.steps.push_back(std::move(step));
  }
  return result;
}

FilterResult run_filter(const sim::ModelParams& calibrated, const sim::SimConfig& model_in,
                        const calib::ParameterSpace& space, const sim::ObservationSeries& realtime,
                        const FilterConfig& cfg, std::uint64_t seed, int jobs) {
  sim::SimConfig model = model_in;
  model.variant = cfg.model_variant;
  Rng init_rng = make_rng(seed, {stream::kFilter});
  ParticleSet ps = init_particles(calibrated, model, space, diversify_std(space, cfg),
                                  cfg.n_particles, init_rng);
  const auto schedule = assimilation_schedule(realtime, cfg.obs_interval);
  return run_filter(std::move(ps), model, space, schedule, cfg, seed, jobs);
}

}  // namespace bussim::pf
