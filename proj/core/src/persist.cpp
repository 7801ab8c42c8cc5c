#include "bussim/persist.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bussim/errors.hpp"
#include "bussim/serialize.hpp"

namespace bussim::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw std::runtime_error(where + ": missing '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw std::runtime_error(where + ": bad '" + key + "' (" + e.what() + ")");
  }
}

json hyper_json(const calib::CemHyperparams& h) {
  return {{"population", h.population},     {"iterations", h.iterations},
          {"elite_ratio", h.elite_ratio},   {"smoothing", h.smoothing},
          {"replications", h.replications}, {"sigma_tolerance", h.sigma_tolerance}};
}

json space_json(const calib::ParameterSpace& s) {
  return {{"num_stops", s.num_stops}, {"arr_min", s.arr_min},     {"arr_max", s.arr_max},
          {"dep_min", s.dep_min},     {"dep_max", s.dep_max},     {"speed_min", s.speed_min},
          {"speed_max", s.speed_max}};
}

void check_geometry(const sim::ObservationSeries& run, const sim::SimConfig& cfg, const std::string& name) {
  if (run.fleet_size() != static_cast<std::size_t>(cfg.fleet_size) || run.num_frames() != cfg.num_frames() ||
      std::abs(run.dt() - cfg.dt) > 1e-9 * cfg.dt)
    throw ProvenanceError(name + " does not match the dataset manifest (fleet " + std::to_string(run.fleet_size()) +
                          ", frames " + std::to_string(run.num_frames()) + "; manifest fleet " +
                          std::to_string(cfg.fleet_size) + ", frames " + std::to_string(cfg.num_frames()) + ")");
}

}  // namespace

void RunManifest::seal() {
  json j;
  j["kind"] = kind;
  j["config"] = config;
  j["seeds"] = seeds;
  j["inputs"] = inputs;
  j["payload"] = payload;
  fingerprint = io::fingerprint(j);
}

json RunManifest::to_json() const {
  json j;
  j["record"] = "bussim.manifest";
  j["version"] = 1;
  j["kind"] = kind;
  j["command"] = command;
  j["toolkit_version"] = toolkit_version;
  j["config"] = config;
  j["seeds"] = seeds;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["fingerprint"] = fingerprint;
  j["wall_clock_s"] = wall_clock_s;
  j["payload"] = payload;
  return j;
}

RunManifest RunManifest::from_json(const json& j) {
  const std::string where = "manifest";
  if (j.value("record", std::string()) != "bussim.manifest") throw std::runtime_error("not a bussim manifest");
  if (j.value("version", 0) != 1) throw std::runtime_error("unsupported manifest version");
  RunManifest m;
  m.kind = get<std::string>(j, "kind", where);
  m.command = j.value("command", std::string());
  m.toolkit_version = j.value("toolkit_version", std::string());
  m.config = j.value("config", json::object());
  m.seeds = j.value("seeds", json::object());
  m.inputs = j.value("inputs", std::map<std::string, std::string>{});
  m.outputs = j.value("outputs", std::vector<std::string>{});
  m.fingerprint = get<std::string>(j, "fingerprint", where);
  m.wall_clock_s = j.value("wall_clock_s", 0.0);
  m.payload = j.value("payload", json::object());
  return m;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void write_manifest(const fs::path& dir, const RunManifest& m) {
  fs::create_directories(dir);
  write_text(dir / "manifest.json", m.to_json().dump(2) + "\n");
}

RunManifest read_manifest(const fs::path& dir) {
  RunManifest m = RunManifest::from_json(read_json_file(dir / "manifest.json"));
  RunManifest check = m;
  check.seal();
  if (check.fingerprint != m.fingerprint)
    throw ProvenanceError("manifest in '" + dir.string() + "' was modified: stored fingerprint " + m.fingerprint +
                          ", content hashes to " + check.fingerprint);
  return m;
}

void require_fingerprint(const std::string& what, const std::string& expected, const std::string& actual) {
  if (expected != actual)
    throw ProvenanceError(what + ": fingerprint mismatch (expected " + expected + ", got " + actual + ")");
}

RunManifest write_dataset(const fs::path& dir, const datagen::GroundTruthScenario& scenario,
                          const datagen::Dataset& historical, const datagen::Dataset& realtime,
                          RunManifest manifest) {
  fs::create_directories(dir);
  manifest.kind = "dataset";
  manifest.outputs.clear();
  for (std::size_t k = 0; k < historical.runs.size(); ++k) {
    const std::string name = "run_" + std::to_string(k) + ".csv";
    write_trajectory_csv((dir / name).string(), historical.runs[k]);
    manifest.outputs.push_back(name);
  }
  write_trajectory_csv((dir / "realtime.csv").string(), realtime.runs.front());
  manifest.outputs.push_back("realtime.csv");

  json sc;
  json s;
  sim::to_json(s, scenario.sim_config);
  sc["sim"] = s;
  json p;
  sim::to_json(p, scenario.params0);
  sc["params0"] = p;
  sc["seed_historical"] = scenario.seed_historical;
  sc["seed_realtime"] = scenario.seed_realtime;
  sc["gps_noise_std"] = scenario.gps_noise_std;
  manifest.payload["scenario"] = sc;
  manifest.payload["scenario_fingerprint"] = scenario.fingerprint();
  manifest.payload["historical_runs"] = historical.runs.size();
  manifest.seal();
  write_manifest(dir, manifest);
  return manifest;
}

LoadedDataset read_dataset(const fs::path& dir) {
  LoadedDataset out;
  out.manifest = read_manifest(dir);
  if (out.manifest.kind != "dataset")
    throw ProvenanceError("'" + dir.string() + "' holds a " + out.manifest.kind + " artifact, not a dataset");
  const json& pl = out.manifest.payload;
  const std::string where = "dataset manifest";
  const json sc = get<json>(pl, "scenario", where);
  out.scenario.sim_config = sim::sim_config_from_json(get<json>(sc, "sim", where), "scenario.sim");
  sim::from_json(get<json>(sc, "params0", where), out.scenario.params0);
  out.scenario.seed_historical = get<std::vector<std::uint64_t>>(sc, "seed_historical", where);
  out.scenario.seed_realtime = get<std::uint64_t>(sc, "seed_realtime", where);
  out.scenario.gps_noise_std = get<double>(sc, "gps_noise_std", where);
  require_fingerprint("dataset scenario", get<std::string>(pl, "scenario_fingerprint", where),
                      out.scenario.fingerprint());

  const auto runs = get<std::size_t>(pl, "historical_runs", where);
  out.historical.kind = datagen::DatasetKind::kHistorical;
  out.historical.fingerprint = out.scenario.fingerprint();
  for (std::size_t k = 0; k < runs; ++k) {
    const std::string name = "run_" + std::to_string(k) + ".csv";
    out.historical.runs.push_back(read_trajectory_csv((dir / name).string()));
    check_geometry(out.historical.runs.back(), out.scenario.sim_config, name);
  }
  out.realtime.kind = datagen::DatasetKind::kRealtime;
  out.realtime.fingerprint = out.historical.fingerprint;
  out.realtime.runs.push_back(read_trajectory_csv((dir / "realtime.csv").string()));
  check_geometry(out.realtime.runs.back(), out.scenario.sim_config, "realtime.csv");
  return out;
}

void write_cem_trace(std::ostream& out, const calib::CemResult& result) {
  const std::size_t dims = result.state.mu.size();
  out << "iteration,best_pi,iteration_best_pi,elite_threshold,max_relative_sigma";
  for (std::size_t k = 0; k < dims; ++k) out << ",mu_" << k;
  for (std::size_t k = 0; k < dims; ++k) out << ",sigma_" << k;
  out << '\n';
  for (const auto& r : result.trace) {
    out << r.iteration << ',' << format_double(r.best_pi) << ',' << format_double(r.iteration_best_pi) << ','
        << format_double(r.elite_threshold) << ',' << format_double(r.max_relative_sigma);
    for (double v : r.mean) out << ',' << format_double(v);
    for (double v : r.sigma) out << ',' << format_double(v);
    out << '\n';
  }
}

RunManifest write_calibration(const fs::path& dir, const calib::CalibrationResult& result,
                              const calib::CemHyperparams& hyper, const calib::ParameterSpace& space,
                              const sim::SimConfig& model, RunManifest manifest) {
  fs::create_directories(dir);
  manifest.kind = "calibration";
  std::ostringstream trace;
  write_cem_trace(trace, result.cem);
  write_text(dir / "cem_trace.csv", trace.str());
  manifest.outputs = {"cem_trace.csv"};

  json p;
  sim::to_json(p, result.params);
  json m;
  sim::to_json(m, model);
  manifest.payload["params"] = p;
  manifest.payload["best_pi"] = result.cem.state.best_pi;
  manifest.payload["mu"] = result.cem.state.mu;
  manifest.payload["sigma"] = result.cem.state.sigma;
  manifest.payload["iterations"] = result.cem.state.iteration;
  manifest.payload["converged"] = result.cem.converged;
  manifest.payload["hyperparams"] = hyper_json(hyper);
  manifest.payload["bounds"] = space_json(space);
  manifest.payload["model"] = m;
  manifest.seal();
  write_manifest(dir, manifest);
  return manifest;
}

LoadedCalibration read_calibration(const fs::path& dir) {
  LoadedCalibration out;
  out.manifest = read_manifest(dir);
  if (out.manifest.kind != "calibration")
    throw ProvenanceError("'" + dir.string() + "' holds a " + out.manifest.kind + " artifact, not a calibration");
  const std::string where = "calibration manifest";
  sim::from_json(get<json>(out.manifest.payload, "params", where), out.params);
  out.model = sim::sim_config_from_json(get<json>(out.manifest.payload, "model", where), "model");
  auto it = out.manifest.inputs.find("dataset");
  if (it == out.manifest.inputs.end()) throw ProvenanceError("calibration manifest names no dataset");
  out.dataset_fingerprint = it->second;
  return out;
}

void write_filter_log(std::ostream& out, const pf::FilterResult& result) {
  const std::size_t fleet = result.fleet_size;
  const std::size_t stops = result.steps.empty() ? 0 : result.steps.front().param_mean.num_stops();
  out << "time_s,n_eff,degenerate,resampled";
  for (std::size_t j = 0; j < fleet; ++j) out << ",est_" << j;
  for (std::size_t j = 0; j < fleet; ++j) out << ",obs_" << j;
  for (std::size_t m = 0; m < stops; ++m) out << ",mean_arr_" << m;
  for (std::size_t m = 0; m < stops; ++m) out << ",mean_dep_" << m;
  out << ",mean_speed\n";
  for (const auto& s : result.steps) {
    out << format_double(s.time) << ',' << format_double(s.n_eff) << ',' << (s.degenerate ? 1 : 0) << ','
        << (s.resampled ? 1 : 0);
    for (double v : s.estimated_position) out << ',' << format_double(v);
    for (std::size_t j = 0; j < fleet; ++j)
      out << ',' << (s.observed_active[j] ? format_double(s.observed_position[j]) : std::string());
    for (double v : s.param_mean.arr) out << ',' << format_double(v);
    for (double v : s.param_mean.dep) out << ',' << format_double(v);
    out << ',' << format_double(s.param_mean.traffic_speed) << '\n';
  }
}

void write_forecasts(std::ostream& out, const pf::FilterResult& result) {
  const std::size_t fleet = result.fleet_size;
  out << "issue_time_s,time_s,bus_id,position_m\n";
  for (const auto& fc : result.forecasts)
    for (std::size_t f = 0; f < fc.times.size(); ++f)
      for (std::size_t j = 0; j < fleet; ++j)
        out << format_double(fc.issue_time) << ',' << format_double(fc.times[f]) << ',' << j << ','
            << format_double(fc.positions[f * fleet + j]) << '\n';
}

}  // namespace bussim::io
