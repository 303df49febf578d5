// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "tarmac/common.hpp"
#include "tarmac/geometry.hpp"

using namespace tarmac;
using namespace tarmac::geo;

TEST_CASE("project_local maps the datum to the origin") {
  const LatLon datum{40.5, -80.2};
  const auto p = project_local(datum.lat, datum.lon, datum);
  CHECK(p.x == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(p.y == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("project_local: 0.01 deg north is about 1111.95 m") {
  const LatLon datum{40.0, -80.0};
  const auto p = project_local(40.01, -80.0, datum);
  // R * dlat with R = 6371 km
  CHECK(p.x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(p.y == doctest::Approx(1111.9492664).epsilon(1e-6));
}

TEST_CASE("projection round-trips within 1e-9 deg out to 10 km") {
  const LatLon datum{61.17, -149.99};
  Rng rng(42);
  for (int i = 0; i < 200; ++i) {
    const double ang = rng.uniform(0.0, 2.0 * kPi);
    const double r = rng.uniform(0.0, 10000.0);
    const auto ll = unproject_local(r * std::cos(ang), r * std::sin(ang), datum);
    const auto xy = project_local(ll.lat, ll.lon, datum);
    const auto back = unproject_local(xy.x, xy.y, datum);
    CHECK(std::abs(back.lat - ll.lat) < 1e-9);
    CHECK(std::abs(back.lon - ll.lon) < 1e-9);
  }
}

TEST_CASE("projection is a first-order isometry within 5 km") {
  // Mid-latitude datums; the single-cosine linearization loses the 0.1%
  // bound above ~52 degrees.
  Rng rng(7);
  for (const double lat0 : {33.94, 40.64, 47.45}) {
    const LatLon datum{lat0, -100.0};
    for (int i = 0; i < 100; ++i) {
      const auto a = unproject_local(rng.uniform(-5000, 5000), rng.uniform(-5000, 5000), datum);
      const auto b = unproject_local(rng.uniform(-5000, 5000), rng.uniform(-5000, 5000), datum);
      const auto pa = project_local(a.lat, a.lon, datum);
      const auto pb = project_local(b.lat, b.lon, datum);
      const double planar = dist(pa, pb);
      const double sphere = great_circle_m(a, b);
      if (sphere < 100.0) continue;  // relative error unstable at tiny ranges
      CHECK(std::abs(planar - sphere) / sphere < 1e-3);
    }
  }
}

TEST_CASE("shortest-arc interpolation crosses the wrap") {
  // 350 deg -> 10 deg passes through 0, not 180.
  CHECK(lerp_angle_deg(350.0, 10.0, 0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(lerp_angle_deg(350.0, 10.0, 0.25) == doctest::Approx(355.0));
  // Oracle: unit-vector average at the midpoint.
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const double a = rng.uniform(0.0, 2.0 * kPi);
    const double b = geo::wrap_pi(a + rng.uniform(-3.0, 3.0));
    const double mid = lerp_angle_rad(a, b, 0.5);
    const double ux = std::cos(a) + std::cos(b);
    const double uy = std::sin(a) + std::sin(b);
    const double oracle = std::atan2(uy, ux);
    CHECK(std::abs(wrap_pi(mid - oracle)) < 1e-9);
  }
}

TEST_CASE("to_frame / from_frame invert each other") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const Pose2 f{rng.uniform(-100, 100), rng.uniform(-100, 100), rng.uniform(-kPi, kPi)};
    const Vec2 p{rng.uniform(-500, 500), rng.uniform(-500, 500)};
    const Vec2 q = from_frame(to_frame(p, f), f);
    CHECK(std::abs(q.x - p.x) < 1e-9);
    CHECK(std::abs(q.y - p.y) < 1e-9);
  }
}

TEST_CASE("point_in_polygon counts boundary as inside") {
  const std::vector<LatLon> square = {{0, 0}, {0, 10}, {10, 10}, {10, 0}};
  CHECK(point_in_polygon(5, 5, square));
  CHECK(point_in_polygon(0, 5, square));    // edge
  CHECK(point_in_polygon(10, 10, square));  // vertex
  CHECK(!point_in_polygon(10.0001, 5, square));
  CHECK(!point_in_polygon(-1, 5, square));
}
