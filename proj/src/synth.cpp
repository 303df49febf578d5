// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
//
// Procedural airports and kinematic surface traffic used as the desk-scale
// stand-in corpus for benchmarks and acceptance runs.
#include <algorithm>
#include <cmath>

#include "tarmac/bench.hpp"

namespace tarmac::bench {

namespace {

using geo::Vec2;

struct RawBuilder {
  airmap::RoutingGraph g;
  geo::LatLon datum;
  airmap::NodeId next_id = 1;

  airmap::NodeId node(Vec2 p) {
    const auto ll = geo::unproject_local(p.x, p.y, datum);
    airmap::RawNode n;
    n.lat = ll.lat;
    n.lon = ll.lon;
    n.x_m = p.x;
    n.y_m = p.y;
    g.nodes[next_id] = n;
    return next_id++;
  }

  void edge(airmap::NodeId a, airmap::NodeId b, const std::string& aeroway) {
    g.edges.push_back({a, b, {{"aeroway", aeroway}}});
  }

  /// Polyline of one class through the given points; returns the node ids.
  std::vector<airmap::NodeId> polyline(const std::vector<Vec2>& pts, const std::string& aeroway) {
    std::vector<airmap::NodeId> ids;
    for (const auto& p : pts) ids.push_back(node(p));
    for (std::size_t i = 1; i < ids.size(); ++i) edge(ids[i - 1], ids[i], aeroway);
    return ids;
  }
};

}  // namespace

AirportSize airport_size_from_name(const std::string& name) {
  if (name == "small") return AirportSize::small;
  if (name == "medium") return AirportSize::medium;
  throw Error("unknown airport size: " + name);
}

SynthAirport synth_airport(std::uint64_t seed, AirportSize size, double spacing_m) {
  Rng rng(seed);
  SynthAirport apt;
  apt.topology = size == AirportSize::small ? "P" : "I";
  apt.airport_id = std::string("SYN") + apt.topology + std::to_string(seed % 100);
  apt.datum = {38.0 + rng.uniform(-5.0, 10.0), -95.0 + rng.uniform(-20.0, 20.0)};
  apt.spine_y = 400.0;
  apt.hold_off = 60.0;
  apt.hold_len = 15.0;

  const double half = size == AirportSize::small ? 1200.0 : 1500.0;
  RawBuilder b;
  b.datum = apt.datum;

  // Runway 0 along the x axis; connector columns between spine and runway.
  apt.runways.push_back({{-half, 0.0}, {half, 0.0}});
  apt.connector_x = {-half, -half / 2.0, 0.0, half / 2.0, half};

  std::vector<Vec2> rwy0;
  for (double x : apt.connector_x) rwy0.push_back({x, 0.0});
  const auto rwy0_ids = b.polyline(rwy0, "runway");

  if (size == AirportSize::small) {
    // Second parallel runway, no connectors (arrival/overflow strip).
    apt.runways.push_back({{-half + 200.0, 800.0}, {half - 200.0, 800.0}});
    b.polyline({{-half + 200.0, 800.0}, {half - 200.0, 800.0}}, "runway");
  } else {
    // Second runway crossing runway 0 at the shared center node.
    apt.runways.push_back({{-800.0, -800.0}, {800.0, 800.0}});
    const auto a = b.node({-800.0, -800.0});
    const auto c = b.node({800.0, 800.0});
    const airmap::NodeId center = rwy0_ids[2];  // (0, 0)
    b.edge(a, center, "runway");
    b.edge(center, c, "runway");
  }

  // Taxiway spine parallel to runway 0.
  std::vector<Vec2> spine;
  for (double x : apt.connector_x) spine.push_back({x, apt.spine_y});
  const auto spine_ids = b.polyline(spine, "taxiway");

  // Connectors: spine -> hold line -> runway junction.
  for (std::size_t i = 0; i < apt.connector_x.size(); ++i) {
    const double x = apt.connector_x[i];
    const auto hold_far = b.node({x, apt.hold_off + apt.hold_len});
    const auto hold_near = b.node({x, apt.hold_off});
    b.edge(spine_ids[i], hold_far, "taxiway");
    b.edge(hold_far, hold_near, "holding_position");
    b.edge(hold_near, rwy0_ids[i], "taxiway");
  }

  // Non-movement clutter the classifier must drop.
  const auto ap0 = b.node({-half / 2.0, apt.spine_y + 250.0});
  const auto ap1 = b.node({half / 2.0, apt.spine_y + 250.0});
  b.edge(ap0, ap1, "apron");
  b.edge(ap0, spine_ids[1], "service_road");

  apt.raw = b.g;
  apt.graph = airmap::compile_graph(apt.raw, airmap::ClassifyRules{}, apt.datum, spacing_m);
  return apt;
}

namespace {

/// Arc-length parameterized polyline.
struct Path {
  std::vector<Vec2> pts;
  std::vector<double> cum;  // cumulative length per vertex

  explicit Path(std::vector<Vec2> p) : pts(std::move(p)) {
    cum.assign(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i)
      cum[i] = cum[i - 1] + geo::dist(pts[i - 1], pts[i]);
  }
  double length() const { return cum.back(); }

  Vec2 at(double s) const {
    if (s <= 0.0) return pts.front();
    if (s >= length()) return pts.back();
    std::size_t i = 1;
    while (cum[i] < s) ++i;
    const double t = (s - cum[i - 1]) / (cum[i] - cum[i - 1]);
    return pts[i - 1] + t * (pts[i] - pts[i - 1]);
  }

  Vec2 dir_at(double s) const {
    std::size_t i = 1;
    if (s >= length()) i = pts.size() - 1;
    else while (cum[i] < s) ++i;
    const Vec2 d = pts[i] - pts[i - 1];
    const double n = geo::norm(d);
    return n > 0.0 ? Vec2{d.x / n, d.y / n} : Vec2{1.0, 0.0};
  }
};

/// A target speed that switches when the remaining distance forces braking.
struct SpeedPlan {
  double cruise = 10.0;
  double final_speed = 0.0;   // speed to reach by end of path
  double accel = 1.5;         // nominal accel/decel magnitude
};

struct Sample {
  Vec2 p;
  double speed = 0.0;
  double heading = 0.0;  // math convention, radians
  double z_m = 0.0;
};

/// 1 Hz kinematic rollout along a path: accelerate toward the cruise speed,
/// brake toward final_speed so the end of the path is not overshot, never
/// exceeding the acceleration cap.
std::vector<Sample> roll_path(const Path& path, double v0, const SpeedPlan& plan, double a_cap,
                              int max_steps) {
  std::vector<Sample> out;
  double s = 0.0, v = v0;
  double heading = std::atan2(path.dir_at(0.0).y, path.dir_at(0.0).x);
  for (int step = 0; step < max_steps; ++step) {
    const double remaining = path.length() - s;
    // Brake when the remaining distance only just allows reaching final_speed.
    const double brake_dist =
        (v * v - plan.final_speed * plan.final_speed) / (2.0 * plan.accel);
    double target = plan.cruise;
    if (v > plan.final_speed && remaining <= brake_dist + v) target = plan.final_speed;
    const double dv = std::clamp(target - v, -std::min(plan.accel, a_cap), std::min(plan.accel, a_cap));
    v = std::max(0.0, v + dv);
    s += v;
    const Vec2 p = path.at(std::min(s, path.length()));
    if (v > 1e-9) heading = std::atan2(path.dir_at(std::min(s, path.length())).y,
                                       path.dir_at(std::min(s, path.length())).x);
    out.push_back({p, v, heading, 0.0});
    if (s >= path.length() && v <= plan.final_speed + 1e-9) break;
  }
  return out;
}

ingest::PositionReport to_report(const Sample& smp, std::int64_t frame, const std::string& id,
                                 const geo::LatLon& datum) {
  ingest::PositionReport r;
  r.frame = frame;
  r.agent_id = id;
  r.agent_type = ingest::AgentType::aircraft;
  r.x_km = smp.p.x / 1000.0;
  r.y_km = smp.p.y / 1000.0;
  const auto ll = geo::unproject_local(smp.p.x, smp.p.y, datum);
  r.lat = ll.lat;
  r.lon = ll.lon;
  r.altitude_ft = smp.z_m / geo::kFeetToM;
  r.speed_kt = smp.speed / geo::kKnotsToMps;
  r.heading_deg = geo::wrap_deg360(90.0 - geo::rad2deg(smp.heading));
  r.range_km = geo::norm(smp.p) / 1000.0;
  r.bearing_rad = geo::wrap_pi(std::atan2(smp.p.x, smp.p.y));  // w.r.t. north
  r.interp = false;
  return r;
}

}  // namespace

std::vector<ingest::AgentTrack> synth_traffic(const SynthAirport& apt, const TrafficConfig& cfg,
                                              std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ingest::AgentTrack> tracks;
  const double a_cap = cfg.accel_cap_mps2;
  const auto& rwy = apt.runways[0];
  const double x_min = rwy.a.x, x_max = rwy.b.x;
  int agent_no = 0;

  auto emit = [&](const std::vector<Sample>& samples, std::int64_t t0) {
    if (samples.size() < 2) return;
    ingest::AgentTrack t;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "A%04d", agent_no++);
    t.agent_id = buf;
    t.agent_type = ingest::AgentType::aircraft;
    t.origin_datum = apt.datum;
    for (std::size_t i = 0; i < samples.size(); ++i)
      t.samples.push_back(to_report(samples[i], t0 + static_cast<std::int64_t>(i), t.agent_id,
                                    apt.datum));
    tracks.push_back(std::move(t));
  };

  auto hold_samples = [&](Vec2 p, double heading, int secs) {
    std::vector<Sample> out;
    for (int i = 0; i < secs; ++i) out.push_back({p, 0.0, heading, 0.0});
    return out;
  };

  for (int a = 0; a < cfg.moving_agents; ++a) {
    const std::int64_t t0 = static_cast<std::int64_t>(rng.uniform_int(
        static_cast<std::uint64_t>(std::max(1, cfg.duration_s - 240))));
    const double pick = rng.uniform();
    const bool eastbound = rng.uniform() < 0.5;
    const double dir = eastbound ? 1.0 : -1.0;

    if (pick < cfg.p_takeoff) {
      // Hold-short wait, cross onto the runway, take-off roll to the far end.
      const std::size_t ci =
          1 + rng.uniform_int(static_cast<std::uint64_t>(apt.connector_x.size() - 2));
      const double xc = apt.connector_x[ci];
      const int wait = 10 + static_cast<int>(rng.uniform_int(8));
      const Vec2 hold_pt{xc, apt.hold_off + apt.hold_len};
      std::vector<Sample> samples = hold_samples(hold_pt, -geo::kPi / 2.0, wait);

      Path entry({hold_pt, {xc, 0.0}});
      SpeedPlan enter{5.0, 4.0, 1.2};
      auto cross = roll_path(entry, 0.0, enter, a_cap, 60);
      samples.insert(samples.end(), cross.begin(), cross.end());

      const double end_x = eastbound ? x_max + 1400.0 : x_min - 1400.0;
      Path roll({{xc, 0.0}, {end_x, 0.0}});
      SpeedPlan plan{60.0 + rng.uniform(0.0, 22.0), 75.0, 2.0 + rng.uniform(0.0, 0.8)};
      auto rollout = roll_path(roll, cross.empty() ? 0.0 : cross.back().speed, plan, a_cap, 120);
      // climb-out: altitude rises near the end of the roll
      double z = 0.0;
      for (std::size_t i = 0; i + 1 < rollout.size(); ++i) {
        if (rollout[i].speed > 55.0) z += (rollout[i].speed - 55.0) * 0.35;
        rollout[i + 1].z_m = z;
      }
      (void)dir;
      samples.insert(samples.end(), rollout.begin(), rollout.end());
      emit(samples, t0);
    } else if (pick < cfg.p_takeoff + cfg.p_landing) {
      // Landing + decelerate + vacate at the mid-field connector.
      const std::size_t exit_i = apt.connector_x.size() / 2;
      const double xe = apt.connector_x[exit_i];
      const double start_x = eastbound ? x_min - 250.0 : x_max + 250.0;
      const double thresh_x = eastbound ? x_min : x_max;
      Path approach({{start_x, 0.0}, {xe, 0.0}});
      SpeedPlan land{72.0, 7.0, 2.4};
      auto samples = roll_path(approach, 70.0 + rng.uniform(0.0, 4.0), land, a_cap, 180);
      // Descend to the threshold, ground afterwards.
      const double air_dist = std::abs(thresh_x - start_x);
      for (auto& smp : samples) {
        const double d = std::abs(smp.p.x - start_x);
        smp.z_m = d < air_dist ? 60.0 * (1.0 - d / air_dist) : 0.0;
      }
      Path vacate({{xe, 0.0}, {xe, apt.hold_off}, {xe, apt.spine_y}});
      SpeedPlan out{7.0, 0.0, 1.5};
      auto tail = roll_path(vacate, samples.empty() ? 7.0 : samples.back().speed, out, a_cap, 120);
      samples.insert(samples.end(), tail.begin(), tail.end());
      auto parked = hold_samples(samples.back().p, samples.back().heading,
                                 5 + static_cast<int>(rng.uniform_int(10)));
      samples.insert(samples.end(), parked.begin(), parked.end());
      emit(samples, t0);
    } else {
      // Taxi along the spine, then down to the hold line and wait there.
      std::size_t i0 = rng.uniform_int(apt.connector_x.size());
      std::size_t i1 = rng.uniform_int(apt.connector_x.size());
      if (i0 == i1) i1 = (i1 + 2) % apt.connector_x.size();
      const double xa = apt.connector_x[std::min(i0, i1)];
      const double xb = apt.connector_x[std::max(i0, i1)];
      const bool forward = i0 < i1;
      Path taxi({{forward ? xa : xb, apt.spine_y},
                 {forward ? xb : xa, apt.spine_y},
                 {forward ? xb : xa, apt.hold_off + apt.hold_len}});
      SpeedPlan plan{9.0 + rng.uniform(0.0, 3.0), 0.0, 1.4};
      auto samples = roll_path(taxi, 0.0, plan, a_cap, 400);
      auto wait = hold_samples(samples.back().p, samples.back().heading,
                               10 + static_cast<int>(rng.uniform_int(30)));
      samples.insert(samples.end(), wait.begin(), wait.end());
      emit(samples, t0);
    }
  }

  // Parked agents: stationary for the full duration, away from hold lines.
  for (int a = 0; a < cfg.stationary_agents; ++a) {
    const double x = rng.uniform(x_min, x_max);
    const double y = apt.spine_y + (rng.uniform() < 0.5 ? 0.0 : 250.0);
    auto samples = hold_samples({x, y}, rng.uniform(-geo::kPi, geo::kPi), cfg.duration_s);
    emit(samples, 0);
  }
  return tracks;
}

}  // namespace tarmac::bench
