// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tarmac/airmap.hpp"
#include "tarmac/common.hpp"
#include "tarmac/ingest.hpp"
#include "tarmac/scorer.hpp"

namespace tarmac::scenes {

struct SceneConfig {
  int T = 60;          // scene length, seconds
  int H = 10;          // observed history
  int F = 50;          // future horizon
  int K = 5;           // max selected agents
  int P = 100;         // context patch size
  int min_agents = 2;
  int max_agents = 15;
  int stride = 10;     // window stride, seconds

  void validate() const;  // H + F == T, 1 <= K <= max_agents, min_agents >= 1

  static SceneConfig from_json(const std::string& text);
  std::string to_json() const;
  std::string config_hash() const;
};

/// Zero-padding contract: valid=false implies every numeric field is 0.
struct AgentState {
  double x = 0.0, y = 0.0, z = 0.0;
  double theta = 0.0;
  bool valid = false;
};

/// A T-second window in world coordinates, before selection / ego transform.
struct RawScene {
  std::string airport_id;
  int day_id = 0;
  std::int64_t start_frame = 0;
  std::vector<std::string> agent_ids;   // N agents
  std::vector<AgentState> states;       // N x T, row-major

  int agent_count() const { return static_cast<int>(agent_ids.size()); }
  const AgentState& at(int agent, int t) const;
  AgentState& at(int agent, int t);
};

/// Slide T-second windows over the tracks at the configured stride. A window
/// is emitted iff the number of agents with at least one valid observed
/// sample is within [min_agents, max_agents] after truncating over-populated
/// windows to the max_agents with most valid samples (ties by id).
std::vector<RawScene> window_scenes(const std::vector<ingest::AgentTrack>& tracks,
                                    const SceneConfig& cfg, const std::string& airport_id,
                                    int day_id);

/// Final scene: K agent rows over T steps in the ego frame at t_o, per-agent
/// context patches, and the world pose needed to undo the transform.
struct Scene {
  int T = 0, H = 0, F = 0, K = 0, P = 0;
  std::string airport_id;
  int day_id = 0;
  std::int64_t start_frame = 0;
  std::vector<std::string> agent_ids;       // K entries; empty string = padding row
  std::vector<AgentState> agents;           // K x T
  int ego_index = 0;
  int t_o = 0;                              // last observed index: H - 1
  std::vector<double> patches;              // K x P x 7
  std::vector<std::uint8_t> patch_valid;    // K x P
  geo::Pose2 frame_of_reference;            // ego world pose at t_o

  const AgentState& at(int agent, int t) const;
  AgentState& at(int agent, int t);
  double patch_at(int agent, int p, int c) const;
};

struct NoValidEgo : Error {
  using Error::Error;
};

/// Select up to K agents, draw the ego uniformly among the selected agents
/// valid at t_o, and express trajectories and patches in the ego frame.
Scene assemble_scene(const RawScene& raw, const airmap::PatchIndex& map_index,
                     const scorer::ConflictPoints& map_pts, const scorer::ScoreConfig& score_cfg,
                     const SceneConfig& cfg, scorer::Strategy strategy, std::uint64_t seed);

/// Observed windows of a raw scene, in the scorer's shape.
std::vector<scorer::ObsWindow> observed_windows(const RawScene& raw, const SceneConfig& cfg);

struct VersionMismatch : Error {
  using Error::Error;
};
struct CorruptPayload : Error {
  using Error::Error;
};

/// Lossless versioned binary round-trip with deterministic bytes.
std::string serialize_scene(const Scene& s);
Scene deserialize_scene(std::string_view bytes);

/// Append-only shard of serialized scenes (u32 length prefix per scene) with
/// a JSON index sidecar {count, config_hash, seed}.
class ShardWriter {
 public:
  ShardWriter(std::string path, std::string config_hash, std::uint64_t seed);
  void append(const Scene& s);
  /// Writes <path> and <path>.index.json.
  void finalize();
  int count() const { return count_; }

 private:
  std::string path_;
  std::string config_hash_;
  std::uint64_t seed_;
  std::string buffer_;
  int count_ = 0;
};

struct ShardIndex {
  int count = 0;
  std::string config_hash;
  std::uint64_t seed = 0;
};

ShardIndex read_shard_index(const std::string& shard_path);
std::vector<Scene> read_shard(const std::string& shard_path);

/// All scenes from every "*.shard" file under a directory (sorted by path).
std::vector<Scene> read_shard_dir(const std::string& dir,
                                  const std::string& expect_config_hash = "");

}  // namespace tarmac::scenes
