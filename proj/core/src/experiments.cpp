#include "bussim/experiments.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "bussim/datagen.hpp"
#include "bussim/errors.hpp"
#include "bussim/parallel.hpp"
#include "bussim/serialize.hpp"
#include "bussim/sim.hpp"

namespace bussim::exp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string cell_value(double v) { return std::isnan(v) ? std::string() : io::format_double(v); }

// Most recent forecast at each truth frame; NaN before the first issue.
std::vector<double> latest_forecast_trajectory(std::span<const pf::Forecast> forecasts,
                                               const sim::ObservationSeries& truth) {
  const std::size_t fleet = truth.fleet_size();
  std::vector<double> out(truth.num_rows(), kNaN);
  for (std::size_t k = 0; k < forecasts.size(); ++k) {
    const auto& fc = forecasts[k];
    const double until = k + 1 < forecasts.size() ? forecasts[k + 1].issue_time : std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < fc.times.size() && fc.times[f] <= until + 1e-9; ++f) {
      const auto frame = truth.frame_at_time(fc.times[f]);
      if (!frame) continue;
      for (std::size_t j = 0; j < fleet; ++j) out[*frame * fleet + j] = fc.positions[f * fleet + j];
    }
  }
  return out;
}

std::vector<double> posterior_trajectory(const pf::FilterResult& res, const sim::ObservationSeries& truth) {
  const std::size_t fleet = truth.fleet_size();
  std::vector<double> out(truth.num_rows(), kNaN);
  for (const auto& s : res.steps) {
    const auto frame = truth.frame_at_time(s.time);
    if (!frame) continue;
    for (std::size_t j = 0; j < fleet; ++j) out[*frame * fleet + j] = s.estimated_position[j];
  }
  return out;
}

// RMSE over truth-active rows where `pred` is defined.
double defined_rmse(std::span<const double> pred, const sim::ObservationSeries& truth) {
  double sq = 0.0;
  std::size_t n = 0;
  const auto& rows = truth.rows();
  for (std::size_t c = 0; c < rows.size(); ++c) {
    if (!rows[c].active() || std::isnan(pred[c])) continue;
    const double d = pred[c] - rows[c].position;
    sq += d * d;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("rmse: no active truth rows to score");
  return std::sqrt(sq / static_cast<double>(n));
}

}  // namespace

std::string_view to_string(ScenarioId id) noexcept {
  switch (id) {
    case ScenarioId::kNoCalibration: return "s1_no_calibration";
    case ScenarioId::kCalibrated: return "s2_calibrated";
    case ScenarioId::kCalibratedPf: return "s3_calibrated_pf";
    case ScenarioId::kPfOnly: return "s4_pf_only";
  }
  return "unknown";
}

ScenarioId scenario_from_int(int n) {
  if (n < 1 || n > 4) throw std::invalid_argument("scenario must be 1, 2, 3 or 4 (got " + std::to_string(n) + ")");
  return static_cast<ScenarioId>(n);
}

bool needs_calibration(ScenarioId id) noexcept {
  return id == ScenarioId::kCalibrated || id == ScenarioId::kCalibratedPf;
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("rmse: length mismatch (" + std::to_string(pred.size()) + " vs " +
                                std::to_string(truth.size()) + ")");
  if (pred.empty()) throw std::invalid_argument("rmse: empty series");
  double sq = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    sq += d * d;
  }
  return std::sqrt(sq / static_cast<double>(pred.size()));
}

double trajectory_rmse(std::span<const double> positions, const sim::ObservationSeries& truth) {
  if (positions.size() != truth.num_rows())
    throw std::invalid_argument("rmse: trajectory has " + std::to_string(positions.size()) + " values, truth has " +
                                std::to_string(truth.num_rows()));
  return defined_rmse(positions, truth);
}

double forecast_rmse(std::span<const pf::Forecast> forecasts, const sim::ObservationSeries& truth) {
  const std::size_t fleet = truth.fleet_size();
  double sq = 0.0;
  std::size_t n = 0;
  for (const auto& fc : forecasts) {
    if (fc.positions.size() != fc.times.size() * fleet)
      throw std::invalid_argument("rmse: forecast fleet size differs from the truth");
    for (std::size_t f = 0; f < fc.times.size(); ++f) {
      const auto frame = truth.frame_at_time(fc.times[f]);
      if (!frame) throw std::invalid_argument("rmse: forecast time " + std::to_string(fc.times[f]) + " not in truth");
      for (std::size_t j = 0; j < fleet; ++j) {
        const auto& row = truth.at(*frame, j);
        if (!row.active()) continue;
        const double d = fc.positions[f * fleet + j] - row.position;
        sq += d * d;
        ++n;
      }
    }
  }
  if (n == 0) throw std::invalid_argument("rmse: no active truth rows inside the forecasts");
  return std::sqrt(sq / static_cast<double>(n));
}

void ExperimentConfig::validate() const {
  truth.validate();
  if (k_obs < 2) throw ConfigError("datagen.k_obs", "must be >= 2");
  if (!(gps_noise >= 0.0)) throw ConfigError("datagen.gps_noise", "must be >= 0");
  space.validate();
  if (space.num_stops != truth.num_stops) throw ConfigError("bounds.num_stops", "must equal sim.num_stops");
  cem.validate();
  filter.validate(truth.dt);
  if (!(min_demand > 0.0)) throw ConfigError("experiments.min_demand", "must be > 0");
  if (replications < 1) throw ConfigError("experiments.replications", "must be >= 1");
  if (max_demand_grid.empty() && xi_grid.empty()) throw ConfigError("experiments", "both sweep grids are empty");
  for (double md : max_demand_grid)
    if (!(md >= min_demand)) throw ConfigError("experiments.max_demand_grid", "values must be >= min_demand");
  for (double xi : xi_grid)
    if (!(xi >= 0.0 && xi < 100.0)) throw ConfigError("experiments.xi_grid", "values must lie in [0, 100)");
  if (!(fixed_xi >= 0.0 && fixed_xi < 100.0)) throw ConfigError("experiments.fixed_xi", "must lie in [0, 100)");
  if (!(fixed_max_demand >= min_demand))
    throw ConfigError("experiments.fixed_max_demand", "must be >= min_demand");
}

sim::SimConfig ExperimentConfig::truth_for(double max_demand, double xi) const {
  sim::SimConfig t = truth;
  t.variant = sim::Variant::kTruth;
  t.min_demand = min_demand;
  t.max_demand = max_demand;
  t.dynamic_rate = xi;
  return t;
}

sim::SimConfig ExperimentConfig::model_config() const {
  sim::SimConfig m = truth;
  m.variant = model_variant;
  return m;
}

double Cell::axis_value() const { return axis == "xi" ? xi : max_demand; }

sim::ModelParams sample_prior(const sim::SimConfig& truth, const calib::ParameterSpace& space, Rng& rng) {
  sim::ModelParams p =
      datagen::sample_params(truth.min_demand, truth.max_demand, truth.num_stops, truth.initial_speed, rng);
  p.traffic_speed = std::uniform_real_distribution<double>(space.speed_min, space.speed_max)(rng);
  return p;
}

ScenarioOutcome run_scenario(ScenarioId id, const ScenarioInputs& in, const ExperimentConfig& cfg,
                             std::uint64_t seed, int jobs) {
  if (!in.realtime) throw std::invalid_argument("run_scenario: no real-time data");
  if (needs_calibration(id) && !in.calibrated)
    throw std::invalid_argument(std::string("run_scenario: ") + std::string(to_string(id)) +
                                " needs a calibration result");
  const sim::ObservationSeries& truth = *in.realtime;
  if (truth.fleet_size() != static_cast<std::size_t>(in.truth.fleet_size) || truth.num_frames() != in.truth.num_frames())
    throw std::invalid_argument("run_scenario: real-time data does not match the configured fleet/horizon");

  sim::SimConfig model = in.truth;
  model.variant = cfg.model_variant;
  const calib::ParameterSpace space = cfg.space.for_truth(in.truth);
  ScenarioOutcome out;

  if (id == ScenarioId::kNoCalibration || id == ScenarioId::kCalibrated) {
    sim::ModelParams params;
    if (id == ScenarioId::kCalibrated) {
      params = *in.calibrated;
    } else {
      Rng prior = make_rng(seed, {stream::kPriorParams});
      params = sample_prior(in.truth, space, prior);
    }
    Rng rng = make_rng(seed, {stream::kFreeRun, static_cast<std::uint64_t>(id)});
    out.trajectory = sim::simulate_positions(model, params, rng);
    out.rmse = trajectory_rmse(out.trajectory, truth);
    return out;
  }

  const std::uint64_t filter_seed = derive_seed(seed, {stream::kFilter, static_cast<std::uint64_t>(id)});
  pf::FilterResult res;
  if (id == ScenarioId::kCalibratedPf) {
    res = pf::run_filter(*in.calibrated, model, space, truth, cfg.filter, filter_seed, jobs);
  } else {
    sim::SimConfig fmodel = model;
    fmodel.variant = cfg.filter.model_variant;
    const sim::SimConfig prior_cfg = in.truth;
    pf::ParamSampler sampler = [&](std::size_t, Rng& rng) { return sample_prior(prior_cfg, space, rng); };
    auto particles = pf::init_particles(sampler, fmodel, cfg.filter.n_particles,
                                        derive_seed(seed, {stream::kPriorParams, 4}));
    const auto schedule = pf::assimilation_schedule(truth, cfg.filter.obs_interval);
    res = pf::run_filter(std::move(particles), fmodel, space, schedule, cfg.filter, filter_seed, jobs);
  }
  if (!res.forecasts.empty()) {
    out.rmse = forecast_rmse(res.forecasts, truth);
    out.trajectory = latest_forecast_trajectory(res.forecasts, truth);
  } else {
    out.trajectory = posterior_trajectory(res, truth);
    out.rmse = defined_rmse(out.trajectory, truth);
  }
  return out;
}

std::uint64_t replication_seed(std::uint64_t master, const Cell& cell, int rep) {
  return derive_seed(master, {stream::kReplication, std::bit_cast<std::uint64_t>(cell.max_demand),
                              std::bit_cast<std::uint64_t>(cell.xi), static_cast<std::uint64_t>(rep)});
}

ReplicationResult run_replication(const ExperimentConfig& cfg, const Cell& cell, int rep, std::uint64_t master,
                                  CellResult* overlay_out) {
  ReplicationResult r;
  r.replication = rep;
  r.seed = replication_seed(master, cell, rep);
  r.rmse.fill(kNaN);

  const sim::SimConfig truth = cfg.truth_for(cell.max_demand, cell.xi);
  const auto scenario = datagen::make_scenario(truth, r.seed, cfg.k_obs, cfg.gps_noise);
  const auto historical = datagen::generate_historical(scenario);
  const auto realtime = datagen::generate_realtime(scenario);

  sim::SimConfig model = truth;
  model.variant = cfg.model_variant;
  const auto calibration =
      calib::calibrate(historical, model, cfg.space.for_truth(truth), cfg.cem, derive_seed(r.seed, {stream::kCalibration}));
  r.calibration_pi = calibration.cem.state.best_pi;

  ScenarioInputs in;
  in.realtime = &realtime.runs.front();
  in.truth = truth;
  in.calibrated = calibration.params;
  const int last = cfg.include_s4 ? 4 : 3;
  for (int s = 1; s <= last; ++s) {
    auto outcome = run_scenario(static_cast<ScenarioId>(s), in, cfg, r.seed);
    r.rmse[static_cast<std::size_t>(s - 1)] = outcome.rmse;
    if (overlay_out) overlay_out->overlay[static_cast<std::size_t>(s - 1)] = std::move(outcome.trajectory);
  }
  if (overlay_out) {
    const auto& rt = realtime.runs.front();
    overlay_out->fleet_size = rt.fleet_size();
    overlay_out->overlay_times = rt.times();
    overlay_out->overlay_truth.resize(rt.num_rows());
    for (std::size_t c = 0; c < rt.num_rows(); ++c) overlay_out->overlay_truth[c] = rt.rows()[c].position;
  }
  return r;
}

std::vector<CellResult> run_cells(const ExperimentConfig& cfg, std::span<const Cell> cells, std::uint64_t master,
                                  int jobs) {
  cfg.validate();
  const auto reps = static_cast<std::size_t>(cfg.replications);
  std::vector<CellResult> out(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    out[c].cell = cells[c];
    out[c].replications.resize(reps);
  }
  parallel_for(cells.size() * reps, jobs, [&](std::size_t task) {
    const std::size_t c = task / reps, r = task % reps;
    out[c].replications[r] = run_replication(cfg, cells[c], static_cast<int>(r), master, r == 0 ? &out[c] : nullptr);
  });
  for (auto& cr : out) {
    for (std::size_t s = 0; s < 4; ++s) {
      double sum = 0.0;
      for (const auto& r : cr.replications) sum += r.rmse[s];
      cr.mean[s] = sum / static_cast<double>(reps);
    }
  }
  return out;
}

std::vector<Cell> sweep_cells(const ExperimentConfig& cfg) {
  std::vector<Cell> cells;
  for (double md : cfg.max_demand_grid) cells.push_back({"maxDemand", md, cfg.fixed_xi});
  for (double xi : cfg.xi_grid) cells.push_back({"xi", cfg.fixed_max_demand, xi});
  return cells;
}

ExperimentReport sensitivity_sweep(const ExperimentConfig& cfg, std::uint64_t master, int jobs) {
  const auto cells = sweep_cells(cfg);
  ExperimentReport rep;
  rep.include_s4 = cfg.include_s4;
  rep.cells = run_cells(cfg, cells, master, jobs);
  return rep;
}

void write_report_csv(std::ostream& out, const ExperimentReport& report) {
  out << "parameter,value,max_demand,xi,replications,rmse_s1,rmse_s2,rmse_s3";
  if (report.include_s4) out << ",rmse_s4";
  out << '\n';
  for (const auto& c : report.cells) {
    out << c.cell.axis << ',' << io::format_double(c.cell.axis_value()) << ',' << io::format_double(c.cell.max_demand)
        << ',' << io::format_double(c.cell.xi) << ',' << c.replications.size();
    for (std::size_t s = 0; s < (report.include_s4 ? 4u : 3u); ++s) out << ',' << cell_value(c.mean[s]);
    out << '\n';
  }
}

void write_replications_csv(std::ostream& out, const ExperimentReport& report) {
  out << "parameter,value,max_demand,xi,replication,seed,calibration_pi,rmse_s1,rmse_s2,rmse_s3";
  if (report.include_s4) out << ",rmse_s4";
  out << '\n';
  for (const auto& c : report.cells)
    for (const auto& r : c.replications) {
      out << c.cell.axis << ',' << io::format_double(c.cell.axis_value()) << ','
          << io::format_double(c.cell.max_demand) << ',' << io::format_double(c.cell.xi) << ',' << r.replication
          << ',' << r.seed << ',' << io::format_double(r.calibration_pi);
      for (std::size_t s = 0; s < (report.include_s4 ? 4u : 3u); ++s) out << ',' << cell_value(r.rmse[s]);
      out << '\n';
    }
}

void write_overlay_csv(std::ostream& out, const CellResult& cell, bool include_s4) {
  out << "time_s,bus_id,truth_m,s1_m,s2_m,s3_m";
  if (include_s4) out << ",s4_m";
  out << '\n';
  const std::size_t fleet = cell.fleet_size;
  const std::size_t n_s = include_s4 ? 4 : 3;
  for (std::size_t f = 0; f < cell.overlay_times.size(); ++f)
    for (std::size_t j = 0; j < fleet; ++j) {
      const std::size_t c = f * fleet + j;
      out << io::format_double(cell.overlay_times[f]) << ',' << j << ',' << io::format_double(cell.overlay_truth[c]);
      for (std::size_t s = 0; s < n_s; ++s) {
        const auto& tr = cell.overlay[s];
        out << ',' << (c < tr.size() ? cell_value(tr[c]) : std::string());
      }
      out << '\n';
    }
}

}  // namespace bussim::exp
