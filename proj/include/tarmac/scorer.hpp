// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tarmac/airmap.hpp"
#include "tarmac/common.hpp"
#include "tarmac/geometry.hpp"

namespace tarmac::scorer {

/// Weights, normalization caps and thresholds of the criticality score.
/// The weighted-sum contract lives in this struct; it is loadable from JSON
/// so experiments can pin their own values.
struct ScoreConfig {
  double w_speed = 1.0, w_accel = 1.0, w_jerk = 1.0, w_hold = 1.0;
  double w_separation = 1.0, w_time_to_conflict = 1.0;
  // Caps normalize each raw term into [0,1] before weighting.
  double speed_cap_mps = 90.0;
  double accel_cap_mps2 = 3.0;
  double jerk_cap_mps3 = 2.0;
  double hold_cap = 10.0;
  double v_stationary_mps = 0.5;
  double d_sep_m = 200.0;
  double r_conflict_m = 50.0;
  double lookahead_s = 60.0;

  static ScoreConfig from_json(const std::string& text);
  std::string to_json() const;
  std::string config_hash() const;
};

struct ScoreBreakdown {
  double speed_term = 0.0;
  double accel_term = 0.0;
  double jerk_term = 0.0;
  double hold_wait_term = 0.0;
  double separation_term = 0.0;
  double time_to_conflict_term = 0.0;
  double total = 0.0;
};

/// One agent's observed window at 1 Hz, world frame, meters.
struct ObsWindow {
  std::string agent_id;
  std::vector<double> x, y;          // length H
  std::vector<std::uint8_t> valid;   // length H

  int steps() const { return static_cast<int>(x.size()); }
  bool valid_at_last() const { return !valid.empty() && valid.back(); }
};

struct WindowTooShort : Error {
  using Error::Error;
};

/// Conflict points: runway-taxiway junction nodes plus hold-line nodes.
/// `hold_pts` is the hold-line subset used by the waiting term.
struct ConflictPoints {
  std::vector<geo::Vec2> pts;
  std::vector<geo::Vec2> hold_pts;

  static ConflictPoints build(const airmap::AirportGraph& g);
};

/// Kinematic terms of one agent: mean speed / accel / jerk magnitudes from
/// 1 Hz position differences, plus the inverse-hold-line-distance waiting
/// term. Terms are cap-normalized into [0,1]. Needs >= 3 valid samples in the
/// trailing run (jerk is a second difference of the speed sequence).
ScoreBreakdown kinematic_score(const ObsWindow& window, const ConflictPoints& map_pts,
                               const ScoreConfig& cfg);

struct PairScore {
  double separation = 0.0;        // max over time of max(0, 1 - d/d_sep)
  double time_to_conflict = 0.0;  // 1 / (1 + tau)
};

/// Symmetric pairwise interaction terms; degenerate extrapolations give a
/// zero time-to-conflict component.
PairScore interaction_score(const ObsWindow& a, const ObsWindow& b,
                            const ConflictPoints& map_pts, const ScoreConfig& cfg);

/// Independent oracle hook: earliest time within the lookahead at which both
/// constant-velocity extrapolations are simultaneously within r_conflict of
/// the same conflict point; infinity when none.
double time_to_conflict_s(const ObsWindow& a, const ObsWindow& b,
                          const ConflictPoints& map_pts, const ScoreConfig& cfg);

/// Score every agent of a scene: kinematic terms plus the per-agent max of
/// the pairwise interaction terms, combined into the weighted total.
std::vector<ScoreBreakdown> score_scene(const std::vector<ObsWindow>& agents,
                                        const ConflictPoints& map_pts, const ScoreConfig& cfg);

enum class Strategy { critical, random };

Strategy strategy_from_name(const std::string& name);
const char* strategy_name(Strategy s);

/// Pick at most K agents. `critical` sorts by descending total score (ties by
/// agent id); `random` samples uniformly without replacement under the seed.
/// Returns indices into `agents`.
std::vector<int> rank_and_select(const std::vector<ObsWindow>& agents,
                                 const ConflictPoints& map_pts, const ScoreConfig& cfg, int K,
                                 Strategy strategy, std::uint64_t seed);

struct SelectionStats {
  std::int64_t total_egos = 0;
  double stationary_ego_fraction = 0.0;
  double avg_closest_conflict_dist_all = 0.0;
  double avg_closest_conflict_dist_stationary = 0.0;
  double avg_closest_conflict_dist_moving = 0.0;
};

/// Re-run selection + ego choice per scene under `strategy` and aggregate the
/// Table-style statistics. Conflict-distance averages are over all selected
/// agents (position at the last observed step), segmented by whether the
/// agent's mean observed speed is below v_stationary.
SelectionStats selection_stats(const std::vector<std::vector<ObsWindow>>& scenes,
                               const ConflictPoints& map_pts, const ScoreConfig& cfg, int K,
                               Strategy strategy, std::uint64_t seed);

}  // namespace tarmac::scorer
