#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bussim/config.hpp"
#include "bussim/datagen.hpp"
#include "bussim/errors.hpp"
#include "bussim/experiments.hpp"
#include "bussim/objective.hpp"
#include "bussim/persist.hpp"
#include "bussim/pf.hpp"
#include "bussim/rng.hpp"
#include "bussim/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bussim;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitProvenance = 3;

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

struct Loaded {
  ToolkitConfig cfg;
  std::uint64_t seed = 0;
};

Loaded load(const Common& c) {
  Loaded l;
  l.cfg = c.config.empty() ? config_from_text("") : load_config(c.config);
  l.seed = c.seed.value_or(l.cfg.seed);
  l.cfg.seed = l.seed;
  l.cfg.validate();
  return l;
}

std::string join_argv(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

io::RunManifest base_manifest(const std::string& command, const Loaded& l) {
  io::RunManifest m;
  m.command = command;
  m.config = to_json(l.cfg);
  m.seeds["master"] = l.seed;
  return m;
}

// The calibrated model must share the dataset's route, fleet and clock.
void require_same_geometry(const sim::SimConfig& cfg, const sim::SimConfig& data, const std::string& data_fp) {
  std::vector<std::string> diffs;
  auto check = [&](const char* name, double a, double b) {
    if (a != b) diffs.push_back(std::string(name) + " " + io::format_double(a) + " vs " + io::format_double(b));
  };
  check("fleet_size", cfg.fleet_size, data.fleet_size);
  check("num_stops", cfg.num_stops, data.num_stops);
  check("stop_spacing", cfg.stop_spacing, data.stop_spacing);
  check("dt", cfg.dt, data.dt);
  check("horizon", cfg.horizon, data.horizon);
  check("headway", cfg.headway, data.headway);
  check("geofence", cfg.geofence, data.geofence);
  check("capacity", cfg.capacity, data.capacity);
  check("acceleration", cfg.acceleration, data.acceleration);
  for (std::size_t k = 0; k < 3; ++k) check("theta", cfg.theta[k], data.theta[k]);
  if (diffs.empty()) return;
  json cj, dj;
  sim::to_json(cj, cfg);
  sim::to_json(dj, data);
  std::string msg = "config does not match dataset " + data_fp + " (config sim " + io::fingerprint(cj) +
                    ", dataset sim " + io::fingerprint(dj) + "):";
  for (const auto& d : diffs) msg += " " + d + ";";
  throw ProvenanceError(msg);
}

sim::SimConfig model_for(const ToolkitConfig& cfg, const sim::SimConfig& truth) {
  sim::SimConfig m = truth;
  m.variant = cfg.model_variant;
  return m;
}

int cmd_generate(const Common& c, std::optional<double> max_demand, std::optional<double> xi,
                 const std::string& command) {
  const auto t0 = std::chrono::steady_clock::now();
  Loaded l = load(c);
  if (max_demand) l.cfg.sim.max_demand = *max_demand;
  if (xi) l.cfg.sim.dynamic_rate = *xi;
  sim::SimConfig truth = l.cfg.sim;
  truth.variant = sim::Variant::kTruth;
  try {
    truth.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("sim", e.what());
  }
  const auto scenario = datagen::make_scenario(truth, l.seed, l.cfg.k_obs, l.cfg.gps_noise);
  const auto hist = datagen::generate_historical(scenario, c.jobs);
  const auto rt = datagen::generate_realtime(scenario);
  auto m = base_manifest(command, l);
  m.wall_clock_s = seconds_since(t0);
  m = io::write_dataset(c.out, scenario, hist, rt, std::move(m));
  std::cout << "dataset " << m.fingerprint << " -> " << c.out << "\n";
  return 0;
}

int cmd_calibrate(const Common& c, const std::string& data_dir, const std::string& command) {
  const auto t0 = std::chrono::steady_clock::now();
  Loaded l = load(c);
  const auto data = io::read_dataset(data_dir);
  require_same_geometry(l.cfg.sim, data.scenario.sim_config, data.manifest.fingerprint);
  const sim::SimConfig model = model_for(l.cfg, data.scenario.sim_config);
  const auto space = l.cfg.bounds.for_truth(data.scenario.sim_config);
  const std::uint64_t seed = derive_seed(l.seed, {stream::kCalibration});
  const auto result = calib::calibrate(data.historical, model, space, l.cfg.cem, seed, c.jobs);
  auto m = base_manifest(command, l);
  m.seeds["calibration"] = seed;
  m.inputs["dataset"] = data.manifest.fingerprint;
  m.wall_clock_s = seconds_since(t0);
  m = io::write_calibration(c.out, result, l.cfg.cem, space, model, std::move(m));
  std::cout << "calibration " << m.fingerprint << " PI* " << io::format_double(result.cem.state.best_pi)
            << " V* " << io::format_double(result.params.traffic_speed) << " -> " << c.out << "\n";
  return 0;
}

struct Chain {
  io::LoadedDataset data;
  std::optional<io::LoadedCalibration> calibration;
};

Chain load_chain(const std::string& data_dir, const std::string& calib_dir) {
  Chain ch{io::read_dataset(data_dir), std::nullopt};
  if (!calib_dir.empty()) {
    ch.calibration = io::read_calibration(calib_dir);
    io::require_fingerprint("calibration '" + calib_dir + "' dataset", ch.calibration->dataset_fingerprint,
                            ch.data.manifest.fingerprint);
  }
  return ch;
}

int cmd_assimilate(const Common& c, const std::string& data_dir, const std::string& calib_dir,
                   const std::string& command) {
  const auto t0 = std::chrono::steady_clock::now();
  Loaded l = load(c);
  const Chain ch = load_chain(data_dir, calib_dir);
  const auto& truth = ch.data.scenario.sim_config;
  const auto space = l.cfg.bounds.for_truth(truth);
  const std::uint64_t seed = derive_seed(l.seed, {stream::kFilter});
  const auto& realtime = ch.data.realtime.runs.front();
  const auto res =
      pf::run_filter(ch.calibration->params, ch.calibration->model, space, realtime, l.cfg.filter, seed, c.jobs);

  fs::create_directories(c.out);
  std::ostringstream log, fc;
  io::write_filter_log(log, res);
  io::write_forecasts(fc, res);
  io::write_text(fs::path(c.out) / "filter_log.csv", log.str());
  io::write_text(fs::path(c.out) / "forecasts.csv", fc.str());

  auto m = base_manifest(command, l);
  m.kind = "filter";
  m.seeds["filter"] = seed;
  m.inputs["dataset"] = ch.data.manifest.fingerprint;
  m.inputs["calibration"] = ch.calibration->manifest.fingerprint;
  m.outputs = {"filter_log.csv", "forecasts.csv"};
  m.payload["rounds"] = res.steps.size();
  m.payload["forecasts"] = res.forecasts.size();
  if (!res.forecasts.empty()) m.payload["forecast_rmse"] = exp::forecast_rmse(res.forecasts, realtime);
  m.wall_clock_s = seconds_since(t0);
  m.seal();
  io::write_manifest(c.out, m);
  std::cout << "filter " << m.fingerprint << " rounds " << res.steps.size() << " -> " << c.out << "\n";
  return 0;
}

int cmd_scenario(const Common& c, int id_num, const std::string& data_dir, const std::string& calib_dir,
                 const std::string& command) {
  const auto t0 = std::chrono::steady_clock::now();
  Loaded l = load(c);
  const auto id = exp::scenario_from_int(id_num);
  if (exp::needs_calibration(id) && calib_dir.empty())
    throw ConfigError("--calibration", std::string(exp::to_string(id)) + " needs a calibration directory");
  const Chain ch = load_chain(data_dir, calib_dir);

  exp::ExperimentConfig ecfg = l.cfg.experiment();
  exp::ScenarioInputs in;
  in.realtime = &ch.data.realtime.runs.front();
  in.truth = ch.data.scenario.sim_config;
  if (ch.calibration) in.calibrated = ch.calibration->params;
  const auto outcome = exp::run_scenario(id, in, ecfg, l.seed, c.jobs);

  fs::create_directories(c.out);
  const auto& rt = *in.realtime;
  std::ostringstream traj;
  traj << "time_s,bus_id,truth_m,pred_m\n";
  const std::size_t fleet = rt.fleet_size();
  for (std::size_t row = 0; row < rt.num_rows(); ++row) {
    const auto& r = rt.rows()[row];
    traj << io::format_double(rt.time(row / fleet)) << ',' << row % fleet << ',' << io::format_double(r.position) << ','
         << io::format_double(outcome.trajectory[row]) << '\n';
  }
  io::write_text(fs::path(c.out) / "trajectory.csv", traj.str());

  auto m = base_manifest(command, l);
  m.kind = "scenario";
  m.inputs["dataset"] = ch.data.manifest.fingerprint;
  if (ch.calibration) m.inputs["calibration"] = ch.calibration->manifest.fingerprint;
  m.outputs = {"trajectory.csv"};
  m.payload["scenario"] = std::string(exp::to_string(id));
  m.payload["rmse"] = outcome.rmse;
  m.wall_clock_s = seconds_since(t0);
  m.seal();
  io::write_manifest(c.out, m);
  std::cout << exp::to_string(id) << " rmse " << io::format_double(outcome.rmse) << " -> " << c.out << "\n";
  return 0;
}

std::string overlay_name(const exp::Cell& cell) {
  return cell.axis + "_" + io::format_double(cell.axis_value()) + ".csv";
}

int cmd_sweep(const Common& c, std::optional<int> replications, const std::vector<double>& max_demand,
              const std::vector<double>& xi, const std::string& command) {
  const auto t0 = std::chrono::steady_clock::now();
  Loaded l = load(c);
  if (replications) l.cfg.experiments.replications = *replications;
  if (!max_demand.empty()) l.cfg.experiments.max_demand_grid = max_demand;
  if (!xi.empty()) l.cfg.experiments.xi_grid = xi;
  l.cfg.validate();
  const auto ecfg = l.cfg.experiment();
  const auto report = exp::sensitivity_sweep(ecfg, l.seed, c.jobs);

  const fs::path out(c.out);
  fs::create_directories(out / "overlays");
  std::ostringstream rep, reps;
  exp::write_report_csv(rep, report);
  exp::write_replications_csv(reps, report);
  io::write_text(out / "report.csv", rep.str());
  io::write_text(out / "replications.csv", reps.str());

  auto m = base_manifest(command, l);
  m.kind = "sweep";
  m.outputs = {"report.csv", "replications.csv"};
  for (const auto& cell : report.cells) {
    std::ostringstream ov;
    exp::write_overlay_csv(ov, cell, report.include_s4);
    const std::string name = overlay_name(cell.cell);
    io::write_text(out / "overlays" / name, ov.str());
    m.outputs.push_back("overlays/" + name);
  }
  m.payload["report_fingerprint"] = io::fingerprint(json(rep.str()));
  m.payload["cells"] = report.cells.size();
  m.wall_clock_s = seconds_since(t0);
  m.seal();
  io::write_manifest(out, m);
  std::cout << rep.str();
  return 0;
}

void add_common(CLI::App* sub, Common& c, bool needs_out = true) {
  sub->add_option("--config", c.config, "JSON config file (defaults when omitted)")->check(CLI::ExistingFile);
  auto* o = sub->add_option("--out", c.out, "Output directory");
  if (needs_out) o->required();
  sub->add_option("--seed", c.seed, "Master seed (overrides the config)");
  sub->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber)->default_val(1);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bus route simulation, calibration and data assimilation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(BUSSIM_VERSION));

  Common common;
  std::optional<double> max_demand, xi;
  std::string data_dir, calib_dir;
  int scenario = 0;
  std::optional<int> replications;
  std::vector<double> md_grid, xi_grid;

  auto* gen = app.add_subcommand("generate", "Generate historical and real-time datasets");
  add_common(gen, common);
  gen->add_option("--max-demand", max_demand, "Override sim.max_demand (passengers/minute)");
  gen->add_option("--xi", xi, "Override sim.dynamic_rate (percent)");

  auto* cal = app.add_subcommand("calibrate", "Calibrate parameters against historical data");
  add_common(cal, common);
  cal->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);

  auto* asm_ = app.add_subcommand("assimilate", "Run the particle filter over the real-time data");
  add_common(asm_, common);
  asm_->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  asm_->add_option("--calibration", calib_dir, "Calibration directory")->required()->check(CLI::ExistingDirectory);

  auto* sc = app.add_subcommand("scenario", "Run one scenario against the real-time data");
  add_common(sc, common);
  sc->add_option("--scenario", scenario, "1 no calibration, 2 calibrated, 3 calibrated + filter, 4 filter only")
      ->required()
      ->check(CLI::Range(1, 4));
  sc->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  sc->add_option("--calibration", calib_dir, "Calibration directory")->check(CLI::ExistingDirectory);

  auto* sw = app.add_subcommand("sweep", "Sensitivity sweep over maxDemand and xi");
  add_common(sw, common);
  sw->add_option("--replications", replications, "Replications per cell")->check(CLI::PositiveNumber);
  sw->add_option("--max-demand", md_grid, "maxDemand grid (replaces experiments.max_demand_grid)");
  sw->add_option("--xi", xi_grid, "xi grid (replaces experiments.xi_grid)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const std::string command = join_argv(argc, argv);
  try {
    if (gen->parsed()) return cmd_generate(common, max_demand, xi, command);
    if (cal->parsed()) return cmd_calibrate(common, data_dir, command);
    if (asm_->parsed()) return cmd_assimilate(common, data_dir, calib_dir, command);
    if (sc->parsed()) return cmd_scenario(common, scenario, data_dir, calib_dir, command);
    if (sw->parsed()) return cmd_sweep(common, replications, md_grid, xi_grid, command);
  } catch (const ConfigError& e) {
    std::cerr << "bussim: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ProvenanceError& e) {
    std::cerr << "bussim: provenance error: " << e.what() << "\n";
    return kExitProvenance;
  } catch (const std::exception& e) {
    std::cerr << "bussim: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
