// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
#include "tarmac/airmap.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace tarmac::airmap {

const char* class_name(EdgeClass c) {
  switch (c) {
    case EdgeClass::runway: return "runway";
    case EdgeClass::taxiway: return "taxiway";
    case EdgeClass::hold_line: return "hold_line";
  }
  return "taxiway";
}

EdgeClass class_from_name(const std::string& name) {
  if (name == "runway") return EdgeClass::runway;
  if (name == "taxiway") return EdgeClass::taxiway;
  if (name == "hold_line") return EdgeClass::hold_line;
  throw Error("unknown edge class: " + name);
}

RoutingGraph RoutingGraph::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  RoutingGraph g;
  for (const auto& [key, v] : j.at("nodes").items()) {
    RawNode n;
    n.lat = v.at("lat").get<double>();
    n.lon = v.at("lon").get<double>();
    n.x_m = v.value("x", 0.0);
    n.y_m = v.value("y", 0.0);
    g.nodes[std::stoll(key)] = n;
  }
  for (const auto& e : j.at("edges")) {
    RawEdge edge;
    edge.a = e.at(0).get<NodeId>();
    edge.b = e.at(1).get<NodeId>();
    for (const auto& [k, v] : e.at(2).items()) edge.tags[k] = v.get<std::string>();
    if (!g.nodes.count(edge.a) || !g.nodes.count(edge.b))
      throw Error("edge references unknown node");
    g.edges.push_back(std::move(edge));
  }
  return g;
}

std::string RoutingGraph::to_json() const {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::object();
  for (const auto& [id, n] : nodes)
    j["nodes"][std::to_string(id)] = {{"lat", n.lat}, {"lon", n.lon}, {"x", n.x_m}, {"y", n.y_m}};
  j["edges"] = nlohmann::json::array();
  for (const auto& e : edges) {
    nlohmann::json tags = nlohmann::json::object();
    for (const auto& [k, v] : e.tags) tags[k] = v;
    j["edges"].push_back({e.a, e.b, tags});
  }
  return j.dump(2);
}

double AirportGraph::edge_length_m(const Edge& e) const {
  const auto& a = nodes.at(e.a);
  const auto& b = nodes.at(e.b);
  return std::hypot(b.x_m - a.x_m, b.y_m - a.y_m);
}

std::vector<NodeId> AirportGraph::hold_line_nodes() const {
  std::set<NodeId> ids;
  for (const auto& e : edges)
    if (e.cls == EdgeClass::hold_line) {
      ids.insert(e.a);
      ids.insert(e.b);
    }
  return {ids.begin(), ids.end()};
}

AirportGraph AirportGraph::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  AirportGraph g;
  g.datum.lat = j.at("datum").at(0).get<double>();
  g.datum.lon = j.at("datum").at(1).get<double>();
  g.spacing_m = j.value("spacing_m", 0.0);
  for (const auto& [key, v] : j.at("nodes").items()) {
    Node n{v.at("lat").get<double>(), v.at("lon").get<double>(), v.at("x").get<double>(),
           v.at("y").get<double>()};
    g.nodes[std::stoll(key)] = n;
  }
  for (const auto& e : j.at("edges"))
    g.edges.push_back({e.at(0).get<NodeId>(), e.at(1).get<NodeId>(),
                       class_from_name(e.at(2).get<std::string>())});
  return g;
}

std::string AirportGraph::to_json() const {
  nlohmann::json j;
  j["datum"] = {datum.lat, datum.lon};
  j["class_order"] = {"runway", "taxiway", "hold_line"};
  j["spacing_m"] = spacing_m;
  j["nodes"] = nlohmann::json::object();
  for (const auto& [id, n] : nodes)
    j["nodes"][std::to_string(id)] = {{"lat", n.lat}, {"lon", n.lon}, {"x", n.x_m}, {"y", n.y_m}};
  j["edges"] = nlohmann::json::array();
  for (const auto& e : edges) j["edges"].push_back({e.a, e.b, class_name(e.cls)});
  return j.dump(2);
}

ClassifyRules ClassifyRules::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ClassifyRules r;
  r.keep_key = j.value("keep_key", r.keep_key);
  if (j.contains("drop_values")) {
    r.drop_values.clear();
    for (const auto& v : j["drop_values"]) r.drop_values.insert(v.get<std::string>());
  }
  if (j.contains("class_rules")) {
    r.class_rules.clear();
    for (const auto& [k, v] : j["class_rules"].items())
      r.class_rules[k] = class_from_name(v.get<std::string>());
  }
  return r;
}

std::string ClassifyRules::to_json() const {
  nlohmann::json j;
  j["keep_key"] = keep_key;
  j["drop_values"] = drop_values;
  j["class_rules"] = nlohmann::json::object();
  for (const auto& [k, v] : class_rules) j["class_rules"][k] = class_name(v);
  return j.dump(2);
}

AirportGraph filter_and_classify(const RoutingGraph& raw, const ClassifyRules& rules,
                                 const geo::LatLon& datum) {
  AirportGraph g;
  g.datum = datum;
  for (const auto& e : raw.edges) {
    const auto it = e.tags.find(rules.keep_key);
    if (it == e.tags.end()) continue;                 // not a movement-area tag
    if (rules.drop_values.count(it->second)) continue;
    const auto cls = rules.class_rules.find(it->second);
    if (cls == rules.class_rules.end()) {
      std::string tags;
      for (const auto& [k, v] : e.tags) tags += k + "=" + v + " ";
      throw UnclassifiableEdge("no class rule for edge tags: " + tags);
    }
    g.edges.push_back({e.a, e.b, cls->second});
  }
  for (const auto& e : g.edges) {
    const auto& na = raw.nodes.at(e.a);
    const auto& nb = raw.nodes.at(e.b);
    g.nodes[e.a] = {na.lat, na.lon, na.x_m, na.y_m};
    g.nodes[e.b] = {nb.lat, nb.lon, nb.x_m, nb.y_m};
  }
  return g;
}

namespace {

NodeId next_node_id(const AirportGraph& g) {
  return g.nodes.empty() ? 1 : g.nodes.rbegin()->first + 1;
}

}  // namespace

AirportGraph extend_runways(const AirportGraph& g) {
  AirportGraph out = g;

  // Runway polyline endpoints are degree-1 nodes of the runway subgraph.
  std::map<NodeId, std::vector<std::size_t>> runway_adj;
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    if (g.edges[i].cls != EdgeClass::runway) continue;
    runway_adj[g.edges[i].a].push_back(i);
    runway_adj[g.edges[i].b].push_back(i);
  }

  NodeId next_id = next_node_id(out);
  for (const auto& [node_id, incident] : runway_adj) {
    if (incident.size() != 1) continue;  // interior or junction node
    const Edge& e = g.edges[incident[0]];
    const NodeId inner = (e.a == node_id) ? e.b : e.a;
    const Node& tip = g.nodes.at(node_id);
    const Node& prev = g.nodes.at(inner);
    const double dx = tip.x_m - prev.x_m;
    const double dy = tip.y_m - prev.y_m;
    const double len = std::hypot(dx, dy);
    if (len <= 1e-9) throw DegenerateRunway("zero-length terminal runway segment");
    const double ux = dx / len, uy = dy / len;
    Node ext;
    ext.x_m = tip.x_m + geo::kNauticalMileM * ux;
    ext.y_m = tip.y_m + geo::kNauticalMileM * uy;
    const auto ll = geo::unproject_local(ext.x_m, ext.y_m, g.datum);
    ext.lat = ll.lat;
    ext.lon = ll.lon;
    const NodeId ext_id = next_id++;
    out.nodes[ext_id] = ext;
    out.edges.push_back({node_id, ext_id, EdgeClass::runway});
  }
  return out;
}

AirportGraph supersample_runways(const AirportGraph& g, double spacing_m) {
  if (spacing_m <= 0.0) throw Error("supersample spacing must be positive");
  AirportGraph out;
  out.datum = g.datum;
  out.spacing_m = spacing_m;
  out.nodes = g.nodes;

  NodeId next_id = next_node_id(g);
  for (const auto& e : g.edges) {
    const double len = g.edge_length_m(e);
    if (e.cls != EdgeClass::runway || len <= spacing_m) {
      out.edges.push_back(e);
      continue;
    }
    const int pieces = static_cast<int>(std::ceil(len / spacing_m));
    const Node& a = g.nodes.at(e.a);
    const Node& b = g.nodes.at(e.b);
    NodeId prev = e.a;
    for (int k = 1; k < pieces; ++k) {
      const double t = static_cast<double>(k) / pieces;
      Node n;
      n.x_m = a.x_m + t * (b.x_m - a.x_m);
      n.y_m = a.y_m + t * (b.y_m - a.y_m);
      n.lat = a.lat + t * (b.lat - a.lat);
      n.lon = a.lon + t * (b.lon - a.lon);
      const NodeId id = next_id++;
      out.nodes[id] = n;
      out.edges.push_back({prev, id, EdgeClass::runway});
      prev = id;
    }
    out.edges.push_back({prev, e.b, EdgeClass::runway});
  }
  return out;
}

AirportGraph compile_graph(const RoutingGraph& raw, const ClassifyRules& rules,
                           const geo::LatLon& datum, double spacing_m) {
  return supersample_runways(extend_runways(filter_and_classify(raw, rules, datum)), spacing_m);
}

std::vector<MapVector> vectorize_graph(const AirportGraph& g, const geo::LatLon& datum) {
  std::vector<MapVector> out;
  out.reserve(g.edges.size());
  for (const auto& e : g.edges) {
    const Node& a = g.nodes.at(e.a);
    const Node& b = g.nodes.at(e.b);
    MapVector v;
    v.d_s = {a.lat, a.lon, a.x_m, a.y_m};
    v.d_e = {b.lat, b.lon, b.x_m, b.y_m};
    v.a[static_cast<int>(e.cls)] = 1.0;
    // Descriptors are relative to the requested datum.
    const auto da = geo::project_local(a.lat, a.lon, datum);
    const auto db = geo::project_local(b.lat, b.lon, datum);
    v.d_s[2] = da.x;
    v.d_s[3] = da.y;
    v.d_e[2] = db.x;
    v.d_e[3] = db.y;
    out.push_back(v);
  }
  return out;
}

PatchIndex PatchIndex::build(const AirportGraph& g) {
  PatchIndex index;
  std::map<NodeId, std::size_t> first_edge;
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    first_edge.try_emplace(g.edges[i].a, i);
    first_edge.try_emplace(g.edges[i].b, i);
  }
  for (const auto& [id, owner] : first_edge) {
    const Edge& e = g.edges[owner];
    const Node& a = g.nodes.at(e.a);
    const Node& b = g.nodes.at(e.b);
    const double dx = b.x_m - a.x_m, dy = b.y_m - a.y_m;
    const double len = std::hypot(dx, dy);
    PatchPoint p;
    const Node& n = g.nodes.at(id);
    p.pos = {n.x_m, n.y_m};
    p.cls = e.cls;
    p.dir = len > 0.0 ? geo::Vec2{dx / len, dy / len} : geo::Vec2{1.0, 0.0};
    p.id = id;
    index.points.push_back(p);
  }
  return index;
}

ContextPatch local_patch(const PatchIndex& index, geo::Vec2 select_pos,
                         const geo::Pose2& frame_pose, int P) {
  if (P < 1) throw Error("patch size must be >= 1");
  if (index.points.empty()) throw EmptyMap("patch query on empty map");

  std::vector<std::pair<double, std::size_t>> order;
  order.reserve(index.points.size());
  for (std::size_t i = 0; i < index.points.size(); ++i)
    order.emplace_back(geo::dist(index.points[i].pos, select_pos), i);
  std::sort(order.begin(), order.end(), [&](const auto& l, const auto& r) {
    if (l.first != r.first) return l.first < r.first;
    return index.points[l.second].id < index.points[r.second].id;
  });

  ContextPatch patch;
  patch.P = P;
  patch.rows.assign(static_cast<std::size_t>(P) * ContextPatch::kChannels, 0.0);
  patch.valid.assign(static_cast<std::size_t>(P), 0);

  const double c = std::cos(-frame_pose.theta), s = std::sin(-frame_pose.theta);
  const int n = std::min<int>(P, static_cast<int>(order.size()));
  for (int i = 0; i < n; ++i) {
    const PatchPoint& p = index.points[order[static_cast<std::size_t>(i)].second];
    const geo::Vec2 rel = geo::to_frame(p.pos, frame_pose);
    double* row = &patch.rows[static_cast<std::size_t>(i) * ContextPatch::kChannels];
    row[0] = rel.x;
    row[1] = rel.y;
    row[2 + static_cast<int>(p.cls)] = 1.0;
    row[5] = c * p.dir.x - s * p.dir.y;
    row[6] = s * p.dir.x + c * p.dir.y;
    patch.valid[static_cast<std::size_t>(i)] = 1;
  }
  return patch;
}

ContextPatch local_patch(const PatchIndex& index, const geo::Pose2& ref_pose, int P) {
  return local_patch(index, geo::Vec2{ref_pose.x, ref_pose.y}, ref_pose, P);
}

}  // namespace tarmac::airmap
