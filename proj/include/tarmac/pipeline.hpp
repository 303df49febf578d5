// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tarmac/bench.hpp"
#include "tarmac/common.hpp"
#include "tarmac/model.hpp"
#include "tarmac/scenes.hpp"
#include "tarmac/scorer.hpp"

namespace tarmac::cli {

struct TrainConfig {
  int steps = 250;
  int batch_size = 8;
  double lr = 1e-4;
};

/// Everything a pipeline stage needs, with full defaults so `demo` runs with
/// zero arguments. The hash ties artifacts of consecutive stages together.
struct PipelineConfig {
  scenes::SceneConfig scene;
  model::ModelConfig model;
  model::LossConfig loss;
  scorer::ScoreConfig score;
  TrainConfig train;
  std::uint64_t seed = 0;

  static PipelineConfig from_json(const std::string& text);
  std::string to_json() const;
  std::string config_hash() const;  // over the scene config (shard compatibility)
};

/// Thread budget for stage-internal parallelism (TARMAC_THREADS, default 1).
int thread_count();

/// Tracks are stored as Table-style CSVs named <airport>_d<day>_h<hour>.csv.
struct TrackFile {
  std::string path;
  std::string airport_id;
  int day = 0;
  int hour = 0;
};

std::vector<TrackFile> list_track_files(const std::string& dir);

int cmd_ingest(const std::string& in_path, const std::string& fence_path,
               const std::string& out_dir, int max_gap_s);
int cmd_compile_map(const std::string& in_path, const std::string& out_path, double spacing_m,
                    double datum_lat, double datum_lon, const std::string& rules_path);
int cmd_mine(const std::string& tracks_dir, const std::string& map_path,
             const std::string& out_dir, std::uint64_t seed, const std::string& strategy,
             const PipelineConfig& cfg);
int cmd_score_stats(const std::string& tracks_dir, const std::string& map_path,
                    const std::string& strategy, std::uint64_t seed, const std::string& out_dir,
                    const PipelineConfig& cfg);
int cmd_train(const std::string& shards_dir, const std::string& out_ckpt, std::uint64_t seed,
              const PipelineConfig& cfg);
int cmd_eval(const std::string& ckpt_path, const std::string& shards_dir, int horizon,
             const std::string& out_dir, const PipelineConfig& cfg);
int cmd_report(const std::string& in_dir, const std::string& format);
int cmd_bench(const std::string& experiments, const std::string& synthetic, std::uint64_t seed,
              const std::string& out_dir, const PipelineConfig& cfg);

/// Self-contained synthetic end-to-end run; writes tracks, maps, shards,
/// stats, checkpoint, reports and SVG plots under out_dir. Returns 0 on
/// success, nonzero with the failing stage on stderr.
int run_demo(std::uint64_t seed, const std::string& out_dir);

/// Render one scene (map, observed, ground truth, predicted modes) as SVG.
std::string render_scene_svg(const airmap::AirportGraph& graph, const scenes::Scene& scene,
                             const model::Prediction& pred);

}  // namespace tarmac::cli
