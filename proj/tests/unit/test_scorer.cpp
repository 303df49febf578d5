// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "tarmac/common.hpp"
#include "tarmac/scorer.hpp"

using namespace tarmac;
using namespace tarmac::scorer;

namespace {

ObsWindow window_from(const std::vector<geo::Vec2>& pts, const std::string& id = "A") {
  ObsWindow w;
  w.agent_id = id;
  for (const auto& p : pts) {
    w.x.push_back(p.x);
    w.y.push_back(p.y);
    w.valid.push_back(1);
  }
  return w;
}

ObsWindow stationary_at(geo::Vec2 p, int steps, const std::string& id = "A") {
  return window_from(std::vector<geo::Vec2>(static_cast<std::size_t>(steps), p), id);
}

ObsWindow moving(geo::Vec2 start, geo::Vec2 vel, int steps, const std::string& id = "A") {
  std::vector<geo::Vec2> pts;
  for (int t = 0; t < steps; ++t) pts.push_back({start.x + vel.x * t, start.y + vel.y * t});
  return window_from(pts, id);
}

ConflictPoints pts_at(const std::vector<geo::Vec2>& conflicts,
                      const std::vector<geo::Vec2>& holds) {
  ConflictPoints p;
  p.pts = conflicts;
  p.hold_pts = holds;
  return p;
}

}  // namespace

TEST_CASE("stationary agent far from hold lines: only the waiting term fires") {
  const ScoreConfig cfg;
  const int H = 10;
  const auto w = stationary_at({0, 0}, H);
  const auto map = pts_at({}, {{500.0, 0.0}});
  const auto b = kinematic_score(w, map, cfg);
  CHECK(b.speed_term == 0.0);
  CHECK(b.accel_term == 0.0);
  CHECK(b.jerk_term == 0.0);
  // raw hold term H / (1 + 500), normalized by the cap
  CHECK(b.hold_wait_term == doctest::Approx((H / 501.0) / cfg.hold_cap).epsilon(1e-12));
}

TEST_CASE("constant-velocity agent has zero accel and jerk terms") {
  const ScoreConfig cfg;
  const auto w = moving({0, 0}, {10.0, 0.0}, 10);
  const auto b = kinematic_score(w, pts_at({}, {}), cfg);
  CHECK(b.speed_term == doctest::Approx(10.0 / cfg.speed_cap_mps));
  CHECK(b.accel_term == 0.0);
  CHECK(b.jerk_term == 0.0);
  CHECK(b.hold_wait_term == 0.0);
}

TEST_CASE("waiting close to a hold line scores higher than waiting far away") {
  const ScoreConfig cfg;
  const auto near = kinematic_score(stationary_at({1.0, 0.0}, 10), pts_at({}, {{0, 0}}), cfg);
  const auto far = kinematic_score(stationary_at({100.0, 0.0}, 10), pts_at({}, {{0, 0}}), cfg);
  CHECK(near.hold_wait_term > far.hold_wait_term);
}

TEST_CASE("kinematic score needs at least 3 valid samples") {
  CHECK_THROWS_AS(kinematic_score(stationary_at({0, 0}, 2), pts_at({}, {}), ScoreConfig{}),
                  WindowTooShort);
}

TEST_CASE("distant diverging agents score zero interaction") {
  const ScoreConfig cfg;
  const auto a = moving({0, 0}, {-5, 0}, 10, "A");
  const auto b = moving({10000, 0}, {5, 0}, 10, "B");
  const auto p = interaction_score(a, b, pts_at({{5000, 0}}, {}), cfg);
  CHECK(p.separation == 0.0);
  CHECK(p.time_to_conflict == 0.0);
}

TEST_CASE("co-located agents have maximal separation score") {
  const ScoreConfig cfg;
  const auto a = stationary_at({3, 4}, 10, "A");
  const auto b = stationary_at({3, 4}, 10, "B");
  const auto p = interaction_score(a, b, pts_at({}, {}), cfg);
  CHECK(p.separation == doctest::Approx(1.0));
}

TEST_CASE("time to conflict matches a 0.1 s time-stepped simulation") {
  const ScoreConfig cfg;
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    // Head-on pair crossing the same junction.
    const double speed_a = rng.uniform(3.0, 25.0);
    const double speed_b = rng.uniform(3.0, 25.0);
    const double gap_a = rng.uniform(60.0, 600.0);
    const double gap_b = rng.uniform(60.0, 600.0);
    const auto a = moving({-gap_a - 9.0 * speed_a, 0.0}, {speed_a, 0.0}, 10, "A");
    const auto b = moving({gap_b + 9.0 * speed_b, 0.0}, {-speed_b, 0.0}, 10, "B");
    const auto map = pts_at({{0.0, 0.0}}, {});
    const double tau = time_to_conflict_s(a, b, map, cfg);

    // brute-force simulation at 0.1 s steps
    double oracle = std::numeric_limits<double>::infinity();
    for (double t = 0.0; t <= cfg.lookahead_s; t += 0.1) {
      const double ax = -gap_a + speed_a * t;
      const double bx = gap_b - speed_b * t;
      if (std::abs(ax) <= cfg.r_conflict_m && std::abs(bx) <= cfg.r_conflict_m) {
        oracle = t;
        break;
      }
    }
    if (std::isinf(oracle)) {
      CHECK(std::isinf(tau));
    } else {
      CHECK(std::abs(tau - oracle) <= 1.0);
    }
  }
}

TEST_CASE("interaction is symmetric") {
  const ScoreConfig cfg;
  Rng rng(31);
  const auto map = pts_at({{0, 0}, {100, 50}}, {});
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = moving({rng.uniform(-300, 300), rng.uniform(-300, 300)},
                          {rng.uniform(-10, 10), rng.uniform(-10, 10)}, 10, "A");
    const auto b = moving({rng.uniform(-300, 300), rng.uniform(-300, 300)},
                          {rng.uniform(-10, 10), rng.uniform(-10, 10)}, 10, "B");
    const auto ab = interaction_score(a, b, map, cfg);
    const auto ba = interaction_score(b, a, map, cfg);
    CHECK(ab.separation == doctest::Approx(ba.separation).epsilon(1e-12));
    CHECK(ab.time_to_conflict == doctest::Approx(ba.time_to_conflict).epsilon(1e-12));
  }
}

TEST_CASE("scores are invariant under rigid transforms of scene and map") {
  const ScoreConfig cfg;
  const double ang = 0.7;
  const geo::Vec2 shift{123.0, -77.0};
  auto rot = [&](geo::Vec2 p) {
    return geo::Vec2{std::cos(ang) * p.x - std::sin(ang) * p.y + shift.x,
                     std::sin(ang) * p.x + std::cos(ang) * p.y + shift.y};
  };
  std::vector<ObsWindow> agents = {moving({0, 0}, {8, 1}, 10, "A"),
                                   moving({150, 40}, {-6, 0}, 10, "B"),
                                   stationary_at({30, 20}, 10, "C")};
  const auto map = pts_at({{60, 10}}, {{30, 18}});
  std::vector<ObsWindow> agents_t = agents;
  for (auto& w : agents_t)
    for (std::size_t i = 0; i < w.x.size(); ++i) {
      const auto p = rot({w.x[i], w.y[i]});
      w.x[i] = p.x;
      w.y[i] = p.y;
    }
  ConflictPoints map_t;
  for (const auto& p : map.pts) map_t.pts.push_back(rot(p));
  for (const auto& p : map.hold_pts) map_t.hold_pts.push_back(rot(p));

  const auto s0 = score_scene(agents, map, cfg);
  const auto s1 = score_scene(agents_t, map_t, cfg);
  REQUIRE(s0.size() == s1.size());
  for (std::size_t i = 0; i < s0.size(); ++i) {
    CHECK(s0[i].speed_term == doctest::Approx(s1[i].speed_term).epsilon(1e-9));
    CHECK(s0[i].hold_wait_term == doctest::Approx(s1[i].hold_wait_term).epsilon(1e-9));
    CHECK(s0[i].separation_term == doctest::Approx(s1[i].separation_term).epsilon(1e-9));
    CHECK(s0[i].total == doctest::Approx(s1[i].total).epsilon(1e-9));
  }
}

TEST_CASE("speed term is monotone in mean speed") {
  const ScoreConfig cfg;
  const auto map = pts_at({}, {});
  double prev = -1.0;
  for (double v : {0.0, 2.0, 5.0, 11.0, 19.0}) {
    const auto b = kinematic_score(moving({0, 0}, {v, 0}, 10), map, cfg);
    CHECK(b.speed_term >= prev);
    prev = b.speed_term;
  }
}

TEST_CASE("critical selection returns the K largest totals, ties by id") {
  const ScoreConfig cfg;
  const auto map = pts_at({}, {});
  std::vector<ObsWindow> agents;
  for (int i = 0; i < 8; ++i)
    agents.push_back(moving({0, double(200 * i)}, {2.0 * i, 0}, 10, "A" + std::to_string(i)));
  const auto sel = rank_and_select(agents, map, cfg, 5, Strategy::critical, 1);
  REQUIRE(sel.size() == 5);
  // fastest five are agents 7..3
  for (int i = 0; i < 5; ++i) CHECK(sel[static_cast<std::size_t>(i)] == 7 - i);

  const auto undersized = rank_and_select({agents[0], agents[1], agents[2]}, map, cfg, 5,
                                          Strategy::critical, 1);
  CHECK(undersized.size() == 3);
}

TEST_CASE("critical ranking is invariant to input permutation") {
  const ScoreConfig cfg;
  const auto map = pts_at({{50, 0}}, {{40, 0}});
  std::vector<ObsWindow> agents;
  for (int i = 0; i < 6; ++i)
    agents.push_back(moving({double(-100 + 35 * i), double(10 * i)}, {1.5 * i, 0.5}, 10,
                            "A" + std::to_string(i)));
  const auto base = rank_and_select(agents, map, cfg, 4, Strategy::critical, 9);
  std::vector<std::string> base_ids;
  for (int i : base) base_ids.push_back(agents[static_cast<std::size_t>(i)].agent_id);

  std::vector<ObsWindow> shuffled = {agents[3], agents[0], agents[5],
                                     agents[1], agents[4], agents[2]};
  const auto perm = rank_and_select(shuffled, map, cfg, 4, Strategy::critical, 9);
  std::vector<std::string> perm_ids;
  for (int i : perm) perm_ids.push_back(shuffled[static_cast<std::size_t>(i)].agent_id);
  CHECK(base_ids == perm_ids);
}

TEST_CASE("random selection is reproducible under a fixed seed") {
  const ScoreConfig cfg;
  const auto map = pts_at({}, {});
  std::vector<ObsWindow> agents;
  for (int i = 0; i < 9; ++i) agents.push_back(stationary_at({double(i), 0}, 10, "A" + std::to_string(i)));
  const auto a = rank_and_select(agents, map, cfg, 5, Strategy::random, 1234);
  const auto b = rank_and_select(agents, map, cfg, 5, Strategy::random, 1234);
  CHECK(a == b);
  const auto c = rank_and_select(agents, map, cfg, 5, Strategy::random, 4321);
  CHECK(a != c);  // overwhelmingly likely for 9 choose 5 orderings
}

TEST_CASE("selection stats: all-moving egos give zero stationary fraction") {
  const ScoreConfig cfg;
  const auto map = pts_at({{0, 0}}, {});
  std::vector<std::vector<ObsWindow>> scenes;
  for (int s = 0; s < 10; ++s)
    scenes.push_back({moving({double(s * 10), 0}, {6, 0}, 10, "A"),
                      moving({double(s * 10), 50}, {0, 7}, 10, "B")});
  const auto stats = selection_stats(scenes, map, cfg, 2, Strategy::random, 5);
  CHECK(stats.total_egos == 10);
  CHECK(stats.stationary_ego_fraction == 0.0);
  CHECK(stats.avg_closest_conflict_dist_all > 0.0);
}

TEST_CASE("selection stats averages match a naive recount") {
  const ScoreConfig cfg;
  const auto map = pts_at({{0, 0}, {200, 0}}, {});
  Rng rng(77);
  std::vector<std::vector<ObsWindow>> scenes;
  for (int s = 0; s < 12; ++s) {
    std::vector<ObsWindow> agents;
    for (int a = 0; a < 3; ++a)
      agents.push_back(moving({rng.uniform(-200, 400), rng.uniform(-100, 100)},
                              {rng.uniform(0, 9), 0}, 10, "A" + std::to_string(a)));
    scenes.push_back(agents);
  }
  // K = all agents, so every agent is selected; recompute the mean by hand.
  const auto stats = selection_stats(scenes, map, cfg, 3, Strategy::critical, 3);
  double sum = 0.0;
  int n = 0;
  for (const auto& scene : scenes)
    for (const auto& w : scene) {
      const geo::Vec2 p{w.x.back(), w.y.back()};
      double best = 1e300;
      for (const auto& c : map.pts) best = std::min(best, geo::dist(p, c));
      sum += best;
      ++n;
    }
  CHECK(stats.avg_closest_conflict_dist_all == doctest::Approx(sum / n).epsilon(1e-12));
}
