// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

namespace tarmac::geo {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kEarthRadiusM = 6371000.0;
inline constexpr double kNauticalMileM = 1852.0;
inline constexpr double kFeetToM = 0.3048;
inline constexpr double kKnotsToMps = 0.514444;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Wrap an angle to (-pi, pi].
double wrap_pi(double a);
/// Wrap an angle in degrees to [0, 360).
double wrap_deg360(double a);

/// Interpolate between two angles (radians) along the shortest arc; t in [0,1].
double lerp_angle_rad(double a, double b, double t);
/// Degrees variant, result in [0, 360).
double lerp_angle_deg(double a, double b, double t);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 v) { return std::sqrt(v.x * v.x + v.y * v.y); }
inline double dist(Vec2 a, Vec2 b) { return norm(a - b); }

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

/// Small-area azimuthal-equidistant-style projection around `datum`:
///   x = R * dlon * cos(lat_datum), y = R * dlat   (angles in radians).
/// Round-trips within 1e-9 deg for points within ~20 km of the datum.
Vec2 project_local(double lat, double lon, const LatLon& datum);
LatLon unproject_local(double x_m, double y_m, const LatLon& datum);

/// Great-circle distance (haversine, sphere radius kEarthRadiusM).
double great_circle_m(const LatLon& a, const LatLon& b);

/// A planar pose: position plus heading (radians, CCW from +x).
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

/// Express a world point in the frame of `f` (translate by -pos, rotate by -theta).
Vec2 to_frame(Vec2 p, const Pose2& f);
/// Inverse of to_frame.
Vec2 from_frame(Vec2 p, const Pose2& f);
inline double to_frame_heading(double theta, const Pose2& f) { return wrap_pi(theta - f.theta); }

/// Ray-casting point-in-polygon test over (lat, lon) vertices. The polygon is
/// closed implicitly (last vertex connects to the first). Points on the
/// boundary count as inside.
bool point_in_polygon(double lat, double lon, const std::vector<LatLon>& poly);

}  // namespace tarmac::geo
