// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tarmac/airmap.hpp"
#include "tarmac/common.hpp"
#include "tarmac/ingest.hpp"
#include "tarmac/model.hpp"
#include "tarmac/scenes.hpp"
#include "tarmac/scorer.hpp"

namespace tarmac::bench {

struct NoValidSteps : Error {
  using Error::Error;
};
struct TooFewDays : Error {
  using Error::Error;
};
struct MissingShards : Error {
  using Error::Error;
};

/// One agent's candidate futures: M mode-mean trajectories of F steps.
struct AgentModes {
  int M = 0, F = 0;
  std::vector<double> xyz;  // M x F x 3

  double at(int m, int t, int c) const {
    return xyz[(static_cast<std::size_t>(m) * F + t) * 3 + c];
  }
  double& at(int m, int t, int c) {
    return xyz[(static_cast<std::size_t>(m) * F + t) * 3 + c];
  }
};

/// Minimum-over-modes average displacement over valid steps 1..F_eval.
/// Planar (x, y) by default; `planar=false` uses 3D displacement.
double min_ade(const AgentModes& pred, const std::vector<double>& gt_xyz,
               const std::vector<std::uint8_t>& gt_valid, int F_eval, bool planar = true);

/// Minimum-over-modes displacement at step F_eval (last valid step if masked
/// earlier).
double min_fde(const AgentModes& pred, const std::vector<double>& gt_xyz,
               const std::vector<std::uint8_t>& gt_valid, int F_eval, bool planar = true);

struct SplitManifest {
  // airport id -> (train days, test days)
  std::map<std::string, std::pair<std::vector<int>, std::vector<int>>> airports;

  static SplitManifest from_json(const std::string& text);
  std::string to_json() const;
};

/// Seeded day split: shuffle, first min(ceil(ratio*n), n-1) days to train so
/// at least one test day always exists. Disjoint by construction.
SplitManifest split_days(const std::map<std::string, std::vector<int>>& days_per_airport,
                         double ratio = 0.8, std::uint64_t seed = 0);

/// Constant-velocity baseline: extrapolate each agent from its last observed
/// velocity for F steps (zero-velocity hold when fewer than 2 valid observed
/// samples exist).
struct BaselinePrediction {
  int K = 0, F = 0;
  std::vector<double> xyz;  // K x F x 3
  double at(int k, int t, int c) const {
    return xyz[(static_cast<std::size_t>(k) * F + t) * 3 + c];
  }
};

BaselinePrediction constant_velocity_baseline(const scenes::Scene& scene);

/// Per-agent candidate futures for one scene; empty result = skip scene.
using Predictor = std::function<std::vector<AgentModes>(const scenes::Scene&)>;

Predictor cv_predictor();
Predictor model_predictor(const model::ModelParams& params, const model::ModelConfig& cfg);

struct PerSceneRecord {
  std::string airport_id;
  int day_id = 0;
  std::int64_t start_frame = 0;
  double made = 0.0;
  double mfde = 0.0;
  int agents = 0;
};

struct EvalResult {
  std::string airport_id;
  int horizon = 0;             // F_eval: 20 or 50
  double made = 0.0;
  double mfde = 0.0;
  std::int64_t scene_count = 0;
  std::vector<PerSceneRecord> records;
};

/// mADE/mFDE averaged over every (scene, agent) with at least one valid
/// observed and one valid future step.
EvalResult evaluate(const std::vector<scenes::Scene>& scenes, const Predictor& predictor,
                    int F_eval, bool planar = true, const std::string& airport_id = "");

// ---------------------------------------------------------------------------
// Synthetic airports and traffic (desk-scale stand-in corpus).

enum class AirportSize { small, medium };

AirportSize airport_size_from_name(const std::string& name);

struct SynthAirport {
  std::string airport_id;
  std::string topology;  // "P" (parallel) or "I" (intersecting)
  geo::LatLon datum;
  airmap::RoutingGraph raw;
  airmap::AirportGraph graph;  // compiled: classified, extended, supersampled

  // Generator-facing geometry (local meters).
  struct Runway {
    geo::Vec2 a, b;
  };
  std::vector<Runway> runways;
  std::vector<double> connector_x;  // connector columns on runway 0
  double spine_y = 400.0;
  double hold_off = 60.0;   // hold line distance from the runway centerline
  double hold_len = 15.0;
};

/// Procedural airport: small = two parallel runways (P), medium = two
/// intersecting runways sharing a junction node (I). Raw tags run through the
/// regular map compiler.
SynthAirport synth_airport(std::uint64_t seed, AirportSize size, double spacing_m = 10.0);

struct TrafficConfig {
  int moving_agents = 8;
  int stationary_agents = 0;
  int duration_s = 600;
  double accel_cap_mps2 = 3.0;   // |dv/dt| bound on every generated track
  double runway_speed_cap = 90.0;
  double taxi_speed_cap = 15.0;
  // Behavior mix: take-off roll, landing+vacate, remainder taxi-and-hold.
  double p_takeoff = 0.30;
  double p_landing = 0.40;
};

/// 1 Hz kinematic tracks covering take-off roll, landing, runway vacate,
/// taxi, and hold-short waits, plus optional parked (stationary) agents.
std::vector<ingest::AgentTrack> synth_traffic(const SynthAirport& apt, const TrafficConfig& cfg,
                                              std::uint64_t seed);

// ---------------------------------------------------------------------------
// Benchmark sweeps.

struct ExperimentSpec {
  enum class Kind { single, multi };
  Kind kind = Kind::single;
  int seen = 0;   // multi: number of training airports
  int total = 0;  // multi: airports in the sweep

  static ExperimentSpec parse(const std::string& text);  // "single" | "multi:seen=2of3"
  std::string name() const;
};

struct BenchRecord {
  std::string experiment;
  std::string airport_id;
  int horizon = 0;
  bool seen = true;
  double made = 0.0;
  double mfde = 0.0;
  std::int64_t scene_count = 0;
};

/// Render records as the benchmark table layout: one table per horizon, one
/// row per experiment, "mADE / mFDE" cells per airport plus an Average
/// column; unseen cells are marked. Formats: "md" or "csv".
std::string render_report(const std::vector<BenchRecord>& records, const std::string& format);

std::string records_to_csv(const std::vector<BenchRecord>& records);
std::vector<BenchRecord> records_from_csv(const std::string& text);

struct BenchmarkConfig {
  std::vector<ExperimentSpec> experiments;
  AirportSize size = AirportSize::small;
  int airports = 3;
  int days = 4;
  std::uint64_t seed = 0;
  int train_steps = 200;
  int batch_size = 8;
  scenes::SceneConfig scene_cfg;
  model::ModelConfig model_cfg;
  model::LossConfig loss_cfg;
  scorer::ScoreConfig score_cfg;
  std::vector<int> horizons = {20, 50};
};

/// Full synthetic benchmark: generate airports + per-day traffic, mine
/// scenes, split days, train per experiment, evaluate every airport at each
/// horizon (marking seen/unseen).
std::vector<BenchRecord> run_benchmark(const BenchmarkConfig& cfg);

}  // namespace tarmac::bench
