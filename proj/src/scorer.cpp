// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
#include "tarmac/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

namespace tarmac::scorer {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Trailing run of valid samples (the most recent contiguous observation).
std::pair<int, int> trailing_run(const ObsWindow& w) {
  int hi = w.steps();
  while (hi > 0 && !w.valid[static_cast<std::size_t>(hi - 1)]) --hi;
  int lo = hi;
  while (lo > 0 && w.valid[static_cast<std::size_t>(lo - 1)]) --lo;
  return {lo, hi};  // [lo, hi)
}

double nearest_dist(geo::Vec2 p, const std::vector<geo::Vec2>& pts) {
  double best = kInf;
  for (const auto& q : pts) best = std::min(best, geo::dist(p, q));
  return best;
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

/// Speed sequence from 1 Hz position differences over [lo, hi); v[0] padded
/// with v[1] so it has one entry per sample.
std::vector<double> speeds(const ObsWindow& w, int lo, int hi) {
  std::vector<double> v(static_cast<std::size_t>(hi - lo), 0.0);
  for (int t = lo + 1; t < hi; ++t) {
    const double dx = w.x[static_cast<std::size_t>(t)] - w.x[static_cast<std::size_t>(t - 1)];
    const double dy = w.y[static_cast<std::size_t>(t)] - w.y[static_cast<std::size_t>(t - 1)];
    v[static_cast<std::size_t>(t - lo)] = std::hypot(dx, dy);
  }
  if (v.size() >= 2) v[0] = v[1];
  return v;
}

/// Last position and constant-velocity estimate of the trailing run.
struct Extrapolation {
  geo::Vec2 p;
  geo::Vec2 v;
  bool ok = false;
};

Extrapolation extrapolate(const ObsWindow& w) {
  const auto [lo, hi] = trailing_run(w);
  Extrapolation e;
  if (hi - lo < 1) return e;
  e.p = {w.x[static_cast<std::size_t>(hi - 1)], w.y[static_cast<std::size_t>(hi - 1)]};
  if (hi - lo >= 2)
    e.v = {w.x[static_cast<std::size_t>(hi - 1)] - w.x[static_cast<std::size_t>(hi - 2)],
           w.y[static_cast<std::size_t>(hi - 1)] - w.y[static_cast<std::size_t>(hi - 2)]};
  e.ok = true;
  return e;
}

/// Time interval [t0, t1] within [0, lookahead] during which |p + v t - c| <= r,
/// or an empty interval.
bool within_radius_interval(const Extrapolation& e, geo::Vec2 c, double r, double lookahead,
                            double& t0, double& t1) {
  const geo::Vec2 d = e.p - c;
  const double a = geo::dot(e.v, e.v);
  const double b = 2.0 * geo::dot(d, e.v);
  const double cc = geo::dot(d, d) - r * r;
  if (a < 1e-12) {  // stationary
    if (cc > 0.0) return false;
    t0 = 0.0;
    t1 = lookahead;
    return true;
  }
  const double disc = b * b - 4.0 * a * cc;
  if (disc < 0.0) return false;
  const double sq = std::sqrt(disc);
  t0 = std::max(0.0, (-b - sq) / (2.0 * a));
  t1 = std::min(lookahead, (-b + sq) / (2.0 * a));
  return t0 <= t1;
}

}  // namespace

ScoreConfig ScoreConfig::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ScoreConfig c;
  c.w_speed = j.value("w_speed", c.w_speed);
  c.w_accel = j.value("w_accel", c.w_accel);
  c.w_jerk = j.value("w_jerk", c.w_jerk);
  c.w_hold = j.value("w_hold", c.w_hold);
  c.w_separation = j.value("w_separation", c.w_separation);
  c.w_time_to_conflict = j.value("w_time_to_conflict", c.w_time_to_conflict);
  c.speed_cap_mps = j.value("speed_cap_mps", c.speed_cap_mps);
  c.accel_cap_mps2 = j.value("accel_cap_mps2", c.accel_cap_mps2);
  c.jerk_cap_mps3 = j.value("jerk_cap_mps3", c.jerk_cap_mps3);
  c.hold_cap = j.value("hold_cap", c.hold_cap);
  c.v_stationary_mps = j.value("v_stationary_mps", c.v_stationary_mps);
  c.d_sep_m = j.value("d_sep_m", c.d_sep_m);
  c.r_conflict_m = j.value("r_conflict_m", c.r_conflict_m);
  c.lookahead_s = j.value("lookahead_s", c.lookahead_s);
  return c;
}

std::string ScoreConfig::to_json() const {
  nlohmann::json j;
  j["w_speed"] = w_speed;
  j["w_accel"] = w_accel;
  j["w_jerk"] = w_jerk;
  j["w_hold"] = w_hold;
  j["w_separation"] = w_separation;
  j["w_time_to_conflict"] = w_time_to_conflict;
  j["speed_cap_mps"] = speed_cap_mps;
  j["accel_cap_mps2"] = accel_cap_mps2;
  j["jerk_cap_mps3"] = jerk_cap_mps3;
  j["hold_cap"] = hold_cap;
  j["v_stationary_mps"] = v_stationary_mps;
  j["d_sep_m"] = d_sep_m;
  j["r_conflict_m"] = r_conflict_m;
  j["lookahead_s"] = lookahead_s;
  return j.dump(2);
}

std::string ScoreConfig::config_hash() const { return hash_hex(fnv1a(to_json())); }

ConflictPoints ConflictPoints::build(const airmap::AirportGraph& g) {
  ConflictPoints out;
  std::map<airmap::NodeId, int> touches_runway, touches_taxiway;
  for (const auto& e : g.edges) {
    if (e.cls == airmap::EdgeClass::runway) {
      ++touches_runway[e.a];
      ++touches_runway[e.b];
    } else if (e.cls == airmap::EdgeClass::taxiway) {
      ++touches_taxiway[e.a];
      ++touches_taxiway[e.b];
    }
  }
  std::set<airmap::NodeId> conflict_ids;
  for (const auto& [id, _] : touches_runway)
    if (touches_taxiway.count(id)) conflict_ids.insert(id);
  for (const auto id : g.hold_line_nodes()) conflict_ids.insert(id);
  for (const auto id : conflict_ids) {
    const auto& n = g.nodes.at(id);
    out.pts.push_back({n.x_m, n.y_m});
  }
  for (const auto id : g.hold_line_nodes()) {
    const auto& n = g.nodes.at(id);
    out.hold_pts.push_back({n.x_m, n.y_m});
  }
  return out;
}

ScoreBreakdown kinematic_score(const ObsWindow& window, const ConflictPoints& map_pts,
                               const ScoreConfig& cfg) {
  const auto [lo, hi] = trailing_run(window);
  const int n = hi - lo;
  if (n < 3) throw WindowTooShort("kinematic score needs >= 3 valid samples");

  const auto v = speeds(window, lo, hi);
  double speed_sum = 0.0, accel_sum = 0.0, jerk_sum = 0.0;
  for (double s : v) speed_sum += s;
  for (std::size_t t = 1; t < v.size(); ++t) accel_sum += std::abs(v[t] - v[t - 1]);
  for (std::size_t t = 2; t < v.size(); ++t)
    jerk_sum += std::abs(v[t] - 2.0 * v[t - 1] + v[t - 2]);

  double hold = 0.0;
  for (int t = lo; t < hi; ++t) {
    if (v[static_cast<std::size_t>(t - lo)] >= cfg.v_stationary_mps) continue;
    const geo::Vec2 p{window.x[static_cast<std::size_t>(t)], window.y[static_cast<std::size_t>(t)]};
    const double d = nearest_dist(p, map_pts.hold_pts);
    if (std::isfinite(d)) hold += 1.0 / (1.0 + d);
  }

  ScoreBreakdown b;
  b.speed_term = clamp01((speed_sum / n) / cfg.speed_cap_mps);
  b.accel_term = clamp01((accel_sum / (n - 1)) / cfg.accel_cap_mps2);
  b.jerk_term = clamp01((jerk_sum / (n - 2)) / cfg.jerk_cap_mps3);
  b.hold_wait_term = clamp01(hold / cfg.hold_cap);
  b.total = cfg.w_speed * b.speed_term + cfg.w_accel * b.accel_term + cfg.w_jerk * b.jerk_term +
            cfg.w_hold * b.hold_wait_term;
  return b;
}

double time_to_conflict_s(const ObsWindow& a, const ObsWindow& b,
                          const ConflictPoints& map_pts, const ScoreConfig& cfg) {
  const auto ea = extrapolate(a);
  const auto eb = extrapolate(b);
  if (!ea.ok || !eb.ok) return kInf;
  double tau = kInf;
  for (const auto& c : map_pts.pts) {
    double a0, a1, b0, b1;
    if (!within_radius_interval(ea, c, cfg.r_conflict_m, cfg.lookahead_s, a0, a1)) continue;
    if (!within_radius_interval(eb, c, cfg.r_conflict_m, cfg.lookahead_s, b0, b1)) continue;
    const double lo = std::max(a0, b0);
    const double hi = std::min(a1, b1);
    if (lo <= hi) tau = std::min(tau, lo);
  }
  return tau;
}

PairScore interaction_score(const ObsWindow& a, const ObsWindow& b,
                            const ConflictPoints& map_pts, const ScoreConfig& cfg) {
  PairScore out;
  const int n = std::min(a.steps(), b.steps());
  for (int t = 0; t < n; ++t) {
    if (!a.valid[static_cast<std::size_t>(t)] || !b.valid[static_cast<std::size_t>(t)]) continue;
    const double d = std::hypot(a.x[static_cast<std::size_t>(t)] - b.x[static_cast<std::size_t>(t)],
                                a.y[static_cast<std::size_t>(t)] - b.y[static_cast<std::size_t>(t)]);
    out.separation = std::max(out.separation, std::max(0.0, 1.0 - d / cfg.d_sep_m));
  }
  const double tau = time_to_conflict_s(a, b, map_pts, cfg);
  out.time_to_conflict = std::isfinite(tau) ? 1.0 / (1.0 + tau) : 0.0;
  return out;
}

std::vector<ScoreBreakdown> score_scene(const std::vector<ObsWindow>& agents,
                                        const ConflictPoints& map_pts, const ScoreConfig& cfg) {
  const int n = static_cast<int>(agents.size());
  std::vector<ScoreBreakdown> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto [lo, hi] = trailing_run(agents[static_cast<std::size_t>(i)]);
    if (hi - lo >= 3)
      out[static_cast<std::size_t>(i)] =
          kinematic_score(agents[static_cast<std::size_t>(i)], map_pts, cfg);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const auto pair = interaction_score(agents[static_cast<std::size_t>(i)],
                                          agents[static_cast<std::size_t>(j)], map_pts, cfg);
      auto& si = out[static_cast<std::size_t>(i)];
      auto& sj = out[static_cast<std::size_t>(j)];
      si.separation_term = std::max(si.separation_term, pair.separation);
      si.time_to_conflict_term = std::max(si.time_to_conflict_term, pair.time_to_conflict);
      sj.separation_term = std::max(sj.separation_term, pair.separation);
      sj.time_to_conflict_term = std::max(sj.time_to_conflict_term, pair.time_to_conflict);
    }
  }
  for (auto& s : out)
    s.total = cfg.w_speed * s.speed_term + cfg.w_accel * s.accel_term + cfg.w_jerk * s.jerk_term +
              cfg.w_hold * s.hold_wait_term + cfg.w_separation * s.separation_term +
              cfg.w_time_to_conflict * s.time_to_conflict_term;
  return out;
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "critical") return Strategy::critical;
  if (name == "random") return Strategy::random;
  throw Error("unknown strategy: " + name);
}

const char* strategy_name(Strategy s) {
  return s == Strategy::critical ? "critical" : "random";
}

std::vector<int> rank_and_select(const std::vector<ObsWindow>& agents,
                                 const ConflictPoints& map_pts, const ScoreConfig& cfg, int K,
                                 Strategy strategy, std::uint64_t seed) {
  std::vector<int> idx;
  for (int i = 0; i < static_cast<int>(agents.size()); ++i) idx.push_back(i);
  if (idx.empty()) return idx;

  if (strategy == Strategy::random) {
    Rng rng(seed);
    rng.shuffle(idx);
  } else {
    const auto scores = score_scene(agents, map_pts, cfg);
    std::stable_sort(idx.begin(), idx.end(), [&](int l, int r) {
      const double sl = scores[static_cast<std::size_t>(l)].total;
      const double sr = scores[static_cast<std::size_t>(r)].total;
      if (sl != sr) return sl > sr;
      return agents[static_cast<std::size_t>(l)].agent_id <
             agents[static_cast<std::size_t>(r)].agent_id;
    });
  }
  if (static_cast<int>(idx.size()) > K) idx.resize(static_cast<std::size_t>(K));
  return idx;
}

SelectionStats selection_stats(const std::vector<std::vector<ObsWindow>>& scenes,
                               const ConflictPoints& map_pts, const ScoreConfig& cfg, int K,
                               Strategy strategy, std::uint64_t seed) {
  SelectionStats stats;
  double sum_all = 0.0, sum_stationary = 0.0, sum_moving = 0.0;
  std::int64_t n_all = 0, n_stationary = 0, n_moving = 0, stationary_egos = 0;

  auto mean_speed = [](const ObsWindow& w) {
    const auto [lo, hi] = trailing_run(w);
    if (hi - lo < 2) return 0.0;
    const auto v = speeds(w, lo, hi);
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };

  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const auto& agents = scenes[s];
    if (agents.empty()) continue;
    const std::uint64_t scene_seed = fnv1a(&s, sizeof(s), seed ^ 0x5eedULL);
    const auto selected = rank_and_select(agents, map_pts, cfg, K, strategy, scene_seed);

    std::vector<int> ego_candidates;
    for (int i : selected)
      if (agents[static_cast<std::size_t>(i)].valid_at_last()) ego_candidates.push_back(i);
    if (ego_candidates.empty()) continue;
    Rng ego_rng(scene_seed ^ 0xe90ULL);
    const int ego = ego_candidates[ego_rng.uniform_int(ego_candidates.size())];

    ++stats.total_egos;
    if (mean_speed(agents[static_cast<std::size_t>(ego)]) < cfg.v_stationary_mps)
      ++stationary_egos;

    for (int i : selected) {
      const auto& w = agents[static_cast<std::size_t>(i)];
      const auto [lo, hi] = trailing_run(w);
      if (hi - lo < 1) continue;
      const geo::Vec2 p{w.x[static_cast<std::size_t>(hi - 1)],
                        w.y[static_cast<std::size_t>(hi - 1)]};
      const double d = nearest_dist(p, map_pts.pts);
      if (!std::isfinite(d)) continue;
      sum_all += d;
      ++n_all;
      if (mean_speed(w) < cfg.v_stationary_mps) {
        sum_stationary += d;
        ++n_stationary;
      } else {
        sum_moving += d;
        ++n_moving;
      }
    }
  }

  if (stats.total_egos > 0)
    stats.stationary_ego_fraction =
        static_cast<double>(stationary_egos) / static_cast<double>(stats.total_egos);
  if (n_all > 0) stats.avg_closest_conflict_dist_all = sum_all / static_cast<double>(n_all);
  if (n_stationary > 0)
    stats.avg_closest_conflict_dist_stationary = sum_stationary / static_cast<double>(n_stationary);
  if (n_moving > 0) stats.avg_closest_conflict_dist_moving = sum_moving / static_cast<double>(n_moving);
  return stats;
}

}  // namespace tarmac::scorer
