// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tarmac/common.hpp"
#include "tarmac/geometry.hpp"

namespace tarmac::airmap {

/// Semantic classes, in the fixed one-hot order.
enum class EdgeClass : int { runway = 0, taxiway = 1, hold_line = 2 };

const char* class_name(EdgeClass c);
EdgeClass class_from_name(const std::string& name);

using NodeId = std::int64_t;

struct RawNode {
  double lat = 0.0, lon = 0.0;
  double x_m = 0.0, y_m = 0.0;  // local Cartesian w.r.t. the graph datum
};

struct RawEdge {
  NodeId a = 0, b = 0;
  std::map<std::string, std::string> tags;
};

/// Dense routing graph as loaded from file; may contain non-movement edges.
struct RoutingGraph {
  std::map<NodeId, RawNode> nodes;
  std::vector<RawEdge> edges;

  static RoutingGraph from_json(const std::string& text);
  std::string to_json() const;
};

struct Node {
  double lat = 0.0, lon = 0.0;
  double x_m = 0.0, y_m = 0.0;
};

struct Edge {
  NodeId a = 0, b = 0;
  EdgeClass cls = EdgeClass::taxiway;
};

/// Compiled semantic airport graph. Node/edge orderings are stable so the
/// whole compilation pipeline is byte-deterministic.
struct AirportGraph {
  geo::LatLon datum;
  double spacing_m = 0.0;  // 0 until supersampled
  std::map<NodeId, Node> nodes;
  std::vector<Edge> edges;

  double edge_length_m(const Edge& e) const;
  std::vector<NodeId> hold_line_nodes() const;

  static AirportGraph from_json(const std::string& text);
  std::string to_json() const;
};

/// Declarative tag -> class rules, loadable from JSON so fixtures need not
/// come from any particular map provider.
struct ClassifyRules {
  std::string keep_key = "aeroway";
  std::set<std::string> drop_values = {"apron", "parking_position", "service_road",
                                       "pavement_boundary", "exit_line"};
  std::map<std::string, EdgeClass> class_rules = {
      {"runway", EdgeClass::runway},
      {"taxiway", EdgeClass::taxiway},
      {"holding_position", EdgeClass::hold_line},
      {"hold_line", EdgeClass::hold_line},
  };

  static ClassifyRules from_json(const std::string& text);
  std::string to_json() const;
};

struct UnclassifiableEdge : Error {
  using Error::Error;
};
struct DegenerateRunway : Error {
  using Error::Error;
};
struct EmptyMap : Error {
  using Error::Error;
};

/// Keep movement-area centerline edges, assign each a semantic class, drop
/// everything else, and remove orphan nodes.
AirportGraph filter_and_classify(const RoutingGraph& raw, const ClassifyRules& rules,
                                 const geo::LatLon& datum);

/// Extend every runway polyline endpoint outward by one nautical mile along
/// the terminal segment's bearing.
AirportGraph extend_runways(const AirportGraph& g);

/// Subdivide runway edges longer than `spacing_m` into consecutive edges each
/// at most `spacing_m` long.
AirportGraph supersample_runways(const AirportGraph& g, double spacing_m = 10.0);

/// Full pipeline: classify -> extend -> supersample.
AirportGraph compile_graph(const RoutingGraph& raw, const ClassifyRules& rules,
                           const geo::LatLon& datum, double spacing_m = 10.0);

/// Vectorized edge encoding: start/end descriptors (lat, lon, x_rel, y_rel)
/// plus a one-hot class vector.
struct MapVector {
  std::array<double, 4> d_s{};
  std::array<double, 4> d_e{};
  std::array<double, 3> a{};
};

std::vector<MapVector> vectorize_graph(const AirportGraph& g, const geo::LatLon& datum);

/// Flat node view used for nearest-point patch queries. Class and direction
/// of a shared node come from its lowest-indexed incident edge.
struct PatchPoint {
  geo::Vec2 pos;
  EdgeClass cls = EdgeClass::taxiway;
  geo::Vec2 dir;  // unit direction of the owning edge
  NodeId id = 0;
};

struct PatchIndex {
  std::vector<PatchPoint> points;
  static PatchIndex build(const AirportGraph& g);
};

/// Fixed-size local context: P rows of
///   (x_rel, y_rel, class one-hot x3, dir_x, dir_y),
/// zero-padded with a validity mask when fewer map points exist.
struct ContextPatch {
  static constexpr int kChannels = 7;
  int P = 0;
  std::vector<double> rows;     // P x kChannels
  std::vector<std::uint8_t> valid;  // P

  double at(int p, int c) const { return rows[static_cast<std::size_t>(p) * kChannels + c]; }
};

/// Select the P nodes nearest `select_pos` (ties by (distance, node id)) and
/// express them in `frame_pose`'s frame.
ContextPatch local_patch(const PatchIndex& index, geo::Vec2 select_pos,
                         const geo::Pose2& frame_pose, int P);

/// Spec form: selection point and output frame are the same reference pose.
ContextPatch local_patch(const PatchIndex& index, const geo::Pose2& ref_pose, int P);

}  // namespace tarmac::airmap
