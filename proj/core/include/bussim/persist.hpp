#pragma once

// On-disk artifacts. Every output directory holds one manifest.json:
//
//   {
//     "record": "bussim.manifest", "version": 1,
//     "kind": "dataset" | "calibration" | "filter" | "scenario" | "sweep",
//     "command": "...", "toolkit_version": "...",
//     "config": {...}, "seeds": {...},
//     "inputs": { "<artifact>": "<fingerprint>", ... },
//     "outputs": [ "run_0.csv", ... ],
//     "fingerprint": "<hash of kind, config, seeds, inputs and payload>",
//     "wall_clock_s": 1.23,
//     "payload": { kind-specific content }
//   }
//
// Wall-clock time is excluded from the fingerprint so that identical runs
// produce identical fingerprints.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bussim/cem.hpp"
#include "bussim/datagen.hpp"
#include "bussim/objective.hpp"
#include "bussim/pf.hpp"
#include "bussim/state.hpp"

namespace bussim::io {

struct RunManifest {
  std::string kind;
  std::string command;
  std::string toolkit_version = BUSSIM_VERSION;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json seeds = nlohmann::json::object();
  std::map<std::string, std::string> inputs;
  std::vector<std::string> outputs;
  double wall_clock_s = 0.0;
  nlohmann::json payload = nlohmann::json::object();
  std::string fingerprint;  // filled by seal()

  void seal();
  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

void write_manifest(const std::filesystem::path& dir, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& dir);

// Dataset directory: manifest.json, run_<k>.csv, realtime.csv. The manifest
// fingerprint is the scenario fingerprint, shared by both datasets.
RunManifest write_dataset(const std::filesystem::path& dir, const datagen::GroundTruthScenario& scenario,
                          const datagen::Dataset& historical, const datagen::Dataset& realtime,
                          RunManifest manifest);

struct LoadedDataset {
  RunManifest manifest;
  datagen::GroundTruthScenario scenario;
  datagen::Dataset historical;
  datagen::Dataset realtime;
};

// Reads the dataset back and checks the stored fingerprint and geometry.
LoadedDataset read_dataset(const std::filesystem::path& dir);

// Calibration directory: manifest.json (pi*, final mu/sigma, hyperparameters,
// dataset fingerprint) and cem_trace.csv.
RunManifest write_calibration(const std::filesystem::path& dir, const calib::CalibrationResult& result,
                              const calib::CemHyperparams& hyper, const calib::ParameterSpace& space,
                              const sim::SimConfig& model, RunManifest manifest);

struct LoadedCalibration {
  RunManifest manifest;
  sim::ModelParams params;
  sim::SimConfig model;
  std::string dataset_fingerprint;
};

LoadedCalibration read_calibration(const std::filesystem::path& dir);

// iteration,best_pi,iteration_best_pi,elite_threshold,max_relative_sigma,mu_0..,sigma_0..
void write_cem_trace(std::ostream& out, const calib::CemResult& result);
// time_s,n_eff,degenerate,resampled,est_<j>..,obs_<j>..,mean_arr_<m>..,mean_dep_<m>..,mean_speed
void write_filter_log(std::ostream& out, const pf::FilterResult& result);
// issue_time_s,time_s,bus_id,position_m
void write_forecasts(std::ostream& out, const pf::FilterResult& result);

// Throws ProvenanceError when `actual` differs from `expected`.
void require_fingerprint(const std::string& what, const std::string& expected, const std::string& actual);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace bussim::io
