// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
#include "tarmac/geometry.hpp"

namespace tarmac::geo {

double wrap_pi(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

double wrap_deg360(double a) {
  a = std::fmod(a, 360.0);
  if (a < 0.0) a += 360.0;
  return a;
}

double lerp_angle_rad(double a, double b, double t) {
  return wrap_pi(a + t * wrap_pi(b - a));
}

double lerp_angle_deg(double a, double b, double t) {
  double delta = std::fmod(b - a, 360.0);
  if (delta > 180.0) delta -= 360.0;
  if (delta <= -180.0) delta += 360.0;
  return wrap_deg360(a + t * delta);
}

Vec2 project_local(double lat, double lon, const LatLon& datum) {
  const double dlat = deg2rad(lat - datum.lat);
  const double dlon = deg2rad(lon - datum.lon);
  return {kEarthRadiusM * dlon * std::cos(deg2rad(datum.lat)), kEarthRadiusM * dlat};
}

LatLon unproject_local(double x_m, double y_m, const LatLon& datum) {
  const double dlat = y_m / kEarthRadiusM;
  const double dlon = x_m / (kEarthRadiusM * std::cos(deg2rad(datum.lat)));
  return {datum.lat + rad2deg(dlat), datum.lon + rad2deg(dlon)};
}

double great_circle_m(const LatLon& a, const LatLon& b) {
  const double p1 = deg2rad(a.lat), p2 = deg2rad(b.lat);
  const double dp = p2 - p1;
  const double dl = deg2rad(b.lon - a.lon);
  const double s = std::sin(dp / 2.0), t = std::sin(dl / 2.0);
  const double h = s * s + std::cos(p1) * std::cos(p2) * t * t;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

Vec2 to_frame(Vec2 p, const Pose2& f) {
  const double c = std::cos(-f.theta), s = std::sin(-f.theta);
  const Vec2 d{p.x - f.x, p.y - f.y};
  return {c * d.x - s * d.y, s * d.x + c * d.y};
}

Vec2 from_frame(Vec2 p, const Pose2& f) {
  const double c = std::cos(f.theta), s = std::sin(f.theta);
  return {c * p.x - s * p.y + f.x, s * p.x + c * p.y + f.y};
}

namespace {

bool on_segment(double px, double py, double ax, double ay, double bx, double by) {
  const double cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
  if (std::abs(cross) > 1e-12) return false;
  const double d = (px - ax) * (px - bx) + (py - ay) * (py - by);
  return d <= 1e-12;
}

}  // namespace

bool point_in_polygon(double lat, double lon, const std::vector<LatLon>& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  // Boundary counts as inside.
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % n];
    if (on_segment(lon, lat, a.lon, a.lat, b.lon, b.lat)) return true;
  }
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const double xi = poly[i].lon, yi = poly[i].lat;
    const double xj = poly[j].lon, yj = poly[j].lat;
    const bool crosses = (yi > lat) != (yj > lat);
    if (crosses && lon < (xj - xi) * (lat - yi) / (yj - yi) + xi) inside = !inside;
  }
  return inside;
}

}  // namespace tarmac::geo
