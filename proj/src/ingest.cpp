// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
#include "tarmac/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include <json.hpp>

namespace tarmac::ingest {

namespace {

const char* const kColumns[] = {"frame", "id",  "altitude", "range", "bearing",
                                "lat",   "lon", "speed",    "heading", "x",
                                "y",     "type", "interp"};
constexpr int kNumColumns = 13;

double parse_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\r')) ++pos;
  if (pos != s.size()) throw std::invalid_argument("trailing characters");
  if (!std::isfinite(v)) throw std::invalid_argument("non-finite value");
  return v;
}

bool parse_bool(const std::string& raw) {
  const std::string s = lower(raw);
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw std::invalid_argument("not a boolean");
}

std::string strip(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && (s[b] == ' ' || s[b] == '\t')) ++b;
  return s.substr(b);
}

}  // namespace

bool GeoFence::contains(const PositionReport& r) const {
  if (!geo::point_in_polygon(r.lat, r.lon, polygon)) return false;
  return r.altitude_ft - ground_elevation_msl_ft <= ceiling_agl_ft;
}

GeoFence GeoFence::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  GeoFence f;
  for (const auto& v : j.at("polygon"))
    f.polygon.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
  f.ceiling_agl_ft = j.at("ceiling_agl_ft").get<double>();
  f.ground_elevation_msl_ft = j.at("ground_elevation_msl_ft").get<double>();
  if (f.polygon.size() < 3) throw Error("geofence polygon needs >= 3 vertices");
  if (f.ceiling_agl_ft <= 0.0) throw Error("geofence ceiling must be positive");
  return f;
}

std::string GeoFence::to_json() const {
  nlohmann::json j;
  j["polygon"] = nlohmann::json::array();
  for (const auto& v : polygon) j["polygon"].push_back({v.lat, v.lon});
  j["ceiling_agl_ft"] = ceiling_agl_ft;
  j["ground_elevation_msl_ft"] = ground_elevation_msl_ft;
  return j.dump(2);
}

ParseResult parse_track_csv(std::string_view bytes) {
  ParseResult out;
  std::size_t pos = 0;
  int line_no = 0;

  auto next_line = [&](std::string& line) -> bool {
    if (pos >= bytes.size()) return false;
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) {
      line.assign(bytes.substr(pos));
      pos = bytes.size();
    } else {
      line.assign(bytes.substr(pos, nl - pos));
      pos = nl + 1;
    }
    ++line_no;
    return true;
  };

  std::string header;
  if (!next_line(header)) throw FatalHeader("empty input, no header row");
  const auto names = split(strip(header), ',');
  std::map<std::string, int> col;
  for (std::size_t i = 0; i < names.size(); ++i) col[lower(strip(names[i]))] = static_cast<int>(i);

  // A header must look like one: require at least one known column name.
  bool any_known = false;
  for (const char* c : kColumns) any_known = any_known || col.count(c);
  if (!any_known) throw FatalHeader("first row does not name any known column");
  for (const char* c : kColumns)
    if (!col.count(c)) throw MissingColumn(c);

  std::string line;
  while (next_line(line)) {
    const std::string stripped = strip(line);
    if (stripped.empty()) continue;
    const auto fields = split(stripped, ',');
    if (fields.size() < static_cast<std::size_t>(kNumColumns)) {
      out.malformed.push_back({line_no, "expected " + std::to_string(kNumColumns) + " fields"});
      continue;
    }
    auto field = [&](const char* name) { return strip(fields[static_cast<std::size_t>(col[name])]); };
    try {
      PositionReport r;
      const double frame = parse_double(field("frame"));
      r.frame = static_cast<std::int64_t>(std::llround(frame));
      if (r.frame < 0) throw std::invalid_argument("negative frame");
      r.agent_id = field("id");
      if (r.agent_id.empty()) throw std::invalid_argument("empty agent id");
      r.altitude_ft = parse_double(field("altitude"));
      r.range_km = parse_double(field("range"));
      r.bearing_rad = parse_double(field("bearing"));
      r.lat = parse_double(field("lat"));
      r.lon = parse_double(field("lon"));
      if (r.lat < -90.0 || r.lat > 90.0) throw std::invalid_argument("lat out of range");
      if (r.lon < -180.0 || r.lon > 180.0) throw std::invalid_argument("lon out of range");
      r.speed_kt = parse_double(field("speed"));
      r.heading_deg = parse_double(field("heading"));
      r.x_km = parse_double(field("x"));
      r.y_km = parse_double(field("y"));
      const int type = static_cast<int>(parse_double(field("type")));
      if (type < 0 || type > 2) throw std::invalid_argument("type out of range");
      r.agent_type = static_cast<AgentType>(type);
      r.interp = parse_bool(field("interp"));
      out.reports.push_back(std::move(r));
    } catch (const std::exception& e) {
      out.malformed.push_back({line_no, e.what()});
    }
  }
  return out;
}

std::string write_track_csv(const std::vector<PositionReport>& reports) {
  std::string out = "Frame,ID,Altitude,Range,Bearing,Lat,Lon,Speed,Heading,x,y,Type,Interp\n";
  char buf[512];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf),
                  "%lld,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d\n",
                  static_cast<long long>(r.frame), r.agent_id.c_str(), r.altitude_ft, r.range_km,
                  r.bearing_rad, r.lat, r.lon, r.speed_kt, r.heading_deg, r.x_km, r.y_km,
                  static_cast<int>(r.agent_type), r.interp ? 1 : 0);
    out += buf;
  }
  return out;
}

std::vector<PositionReport> filter_airspace(const std::vector<PositionReport>& reports,
                                            const GeoFence& fence) {
  std::vector<PositionReport> kept;
  kept.reserve(reports.size());
  for (const auto& r : reports)
    if (fence.contains(r)) kept.push_back(r);
  return kept;
}

namespace {

PositionReport interpolate(const PositionReport& a, const PositionReport& b,
                           std::int64_t frame) {
  const double t =
      static_cast<double>(frame - a.frame) / static_cast<double>(b.frame - a.frame);
  PositionReport r;
  r.frame = frame;
  r.agent_id = a.agent_id;
  r.agent_type = a.agent_type;
  auto lin = [&](double x, double y) { return x + t * (y - x); };
  r.altitude_ft = lin(a.altitude_ft, b.altitude_ft);
  r.range_km = lin(a.range_km, b.range_km);
  r.lat = lin(a.lat, b.lat);
  r.lon = lin(a.lon, b.lon);
  r.speed_kt = lin(a.speed_kt, b.speed_kt);
  r.x_km = lin(a.x_km, b.x_km);
  r.y_km = lin(a.y_km, b.y_km);
  r.heading_deg = geo::lerp_angle_deg(a.heading_deg, b.heading_deg, t);
  r.bearing_rad = geo::lerp_angle_rad(a.bearing_rad, b.bearing_rad, t);
  r.interp = true;
  return r;
}

}  // namespace

std::vector<AgentTrack> resample_track(const std::vector<PositionReport>& raw,
                                       const ResampleConfig& cfg,
                                       const geo::LatLon& datum) {
  if (raw.size() < 2) throw TooShort("resample needs >= 2 reports");

  // Duplicate frames keep the first occurrence.
  std::vector<PositionReport> reports;
  reports.reserve(raw.size());
  std::set<std::int64_t> seen;
  for (const auto& r : raw)
    if (seen.insert(r.frame).second) reports.push_back(r);
  if (reports.size() < 2) throw TooShort("fewer than 2 distinct frames");
  for (std::size_t i = 1; i < reports.size(); ++i)
    if (reports[i].frame <= reports[i - 1].frame)
      throw NonMonotonicTime("frames not strictly increasing after de-duplication");

  // Split at gaps longer than max_gap, then fill each segment at 1 Hz.
  std::vector<AgentTrack> tracks;
  std::size_t seg_begin = 0;
  for (std::size_t i = 1; i <= reports.size(); ++i) {
    const bool gap = i < reports.size() &&
                     reports[i].frame - reports[i - 1].frame > cfg.max_gap_s;
    if (i == reports.size() || gap) {
      if (i - seg_begin >= 1) {
        AgentTrack t;
        t.agent_id = reports[seg_begin].agent_id;
        t.agent_type = reports[seg_begin].agent_type;
        t.origin_datum = datum;
        std::size_t hi = seg_begin;  // raw index of the segment cursor
        for (std::int64_t f = reports[seg_begin].frame; f <= reports[i - 1].frame; ++f) {
          while (reports[hi].frame < f) ++hi;
          if (reports[hi].frame == f) {
            PositionReport r = reports[hi];
            r.interp = false;  // present in the raw input
            t.samples.push_back(std::move(r));
          } else {
            t.samples.push_back(interpolate(reports[hi - 1], reports[hi], f));
          }
        }
        tracks.push_back(std::move(t));
      }
      seg_begin = i;
    }
  }
  return tracks;
}

std::vector<AgentTrack> tracks_from_reports(const std::vector<PositionReport>& reports,
                                            const ResampleConfig& cfg,
                                            const geo::LatLon& datum) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<PositionReport>> by_agent;
  for (const auto& r : reports) {
    auto [it, inserted] = by_agent.try_emplace(r.agent_id);
    if (inserted) order.push_back(r.agent_id);
    it->second.push_back(r);
  }
  std::vector<AgentTrack> out;
  for (const auto& id : order) {
    const auto& rs = by_agent[id];
    if (rs.size() < 2) continue;  // singleton agents carry no motion
    auto tracks = resample_track(rs, cfg, datum);
    for (auto& t : tracks) out.push_back(std::move(t));
  }
  return out;
}

}  // namespace tarmac::ingest
