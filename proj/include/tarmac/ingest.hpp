// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tarmac/common.hpp"
#include "tarmac/geometry.hpp"

namespace tarmac::ingest {

enum class AgentType : int { aircraft = 0, vehicle = 1, unknown = 2 };

/// One position report row. Fields keep the CSV units (feet, km, knots,
/// degrees); conversion to SI happens at the AgentTrack boundary.
struct PositionReport {
  std::int64_t frame = 0;       // timestamp, seconds
  std::string agent_id;
  double altitude_ft = 0.0;     // mean sea level
  double range_km = 0.0;        // distance from airport datum
  double bearing_rad = 0.0;     // w.r.t. north
  double lat = 0.0;             // decimal degrees
  double lon = 0.0;
  double speed_kt = 0.0;
  double heading_deg = 0.0;
  double x_km = 0.0;            // local Cartesian
  double y_km = 0.0;
  AgentType agent_type = AgentType::unknown;
  bool interp = false;
};

/// 3D geofence: lat/lon polygon plus a ceiling above ground level.
struct GeoFence {
  std::vector<geo::LatLon> polygon;   // >= 3 vertices, closed implicitly
  double ceiling_agl_ft = 2000.0;
  double ground_elevation_msl_ft = 0.0;

  bool contains(const PositionReport& r) const;

  static GeoFence from_json(const std::string& text);
  std::string to_json() const;
};

struct FatalHeader : Error {
  using Error::Error;
};
struct MissingColumn : Error {
  explicit MissingColumn(const std::string& name)
      : Error("missing column: " + name), column(name) {}
  std::string column;
};
struct TooShort : Error {
  using Error::Error;
};
struct NonMonotonicTime : Error {
  using Error::Error;
};

struct MalformedRow {
  int line = 0;  // 1-based line number in the file
  std::string reason;
};

struct ParseResult {
  std::vector<PositionReport> reports;
  std::vector<MalformedRow> malformed;
};

/// Parse a track CSV (header row required, column names case-insensitive).
/// Malformed data rows are skipped and counted; a missing header or column is
/// fatal.
ParseResult parse_track_csv(std::string_view bytes);

/// Symmetric writer; emits the canonical header and %.17g numbers so values
/// round-trip exactly.
std::string write_track_csv(const std::vector<PositionReport>& reports);

/// Keep exactly the reports inside the fence polygon (boundary inclusive) and
/// at most ceiling_agl above ground. Order preserved; total function.
std::vector<PositionReport> filter_airspace(const std::vector<PositionReport>& reports,
                                            const GeoFence& fence);

/// A resampled 1 Hz track for one agent. `samples` keep CSV units; the *_m /
/// *_mps accessors give the canonical SI view used by everything downstream.
struct AgentTrack {
  std::string agent_id;
  AgentType agent_type = AgentType::unknown;
  geo::LatLon origin_datum;
  std::vector<PositionReport> samples;  // consecutive frames, exactly 1 s apart

  std::int64_t first_frame() const { return samples.front().frame; }
  std::int64_t last_frame() const { return samples.back().frame; }
  std::size_t size() const { return samples.size(); }

  double x_m(std::size_t i) const { return samples[i].x_km * 1000.0; }
  double y_m(std::size_t i) const { return samples[i].y_km * 1000.0; }
  double z_m(std::size_t i) const { return samples[i].altitude_ft * geo::kFeetToM; }
  double speed_mps(std::size_t i) const { return samples[i].speed_kt * geo::kKnotsToMps; }
  /// Heading as math angle: radians CCW from +x (east). CSV heading is
  /// degrees clockwise from north.
  double heading_rad(std::size_t i) const {
    return geo::wrap_pi(geo::kPi / 2.0 - geo::deg2rad(samples[i].heading_deg));
  }
};

struct ResampleConfig {
  int max_gap_s = 30;  // gaps longer than this split the agent into tracks
};

/// Resample one agent's reports to exactly 1 Hz. Scalars interpolate
/// linearly, heading/bearing along the shortest arc; interp=true exactly on
/// frames absent from the raw input. Duplicate frames keep the first
/// occurrence. Gaps longer than max_gap split the output.
std::vector<AgentTrack> resample_track(const std::vector<PositionReport>& raw,
                                       const ResampleConfig& cfg = {},
                                       const geo::LatLon& datum = {});

/// Group reports by agent id (first-appearance order) and resample each.
std::vector<AgentTrack> tracks_from_reports(const std::vector<PositionReport>& reports,
                                            const ResampleConfig& cfg = {},
                                            const geo::LatLon& datum = {});

}  // namespace tarmac::ingest
