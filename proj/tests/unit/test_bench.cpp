// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>
#include <set>

#include "tarmac/bench.hpp"
#include "tarmac/common.hpp"

using namespace tarmac;
using namespace tarmac::bench;

namespace {

AgentModes straight_modes(int M, int F, double offset_step) {
  AgentModes am;
  am.M = M;
  am.F = F;
  am.xyz.assign(static_cast<std::size_t>(M) * F * 3, 0.0);
  for (int m = 0; m < M; ++m)
    for (int t = 0; t < F; ++t) {
      am.at(m, t, 0) = 5.0 * (t + 1);
      am.at(m, t, 1) = offset_step * m;  // mode m is offset_step*m away from gt
    }
  return am;
}

std::vector<double> straight_gt(int F) {
  std::vector<double> gt(static_cast<std::size_t>(F) * 3, 0.0);
  for (int t = 0; t < F; ++t) gt[static_cast<std::size_t>(t) * 3] = 5.0 * (t + 1);
  return gt;
}

}  // namespace

TEST_CASE("a perfect mode gives zero mADE and mFDE") {
  const int F = 10;
  const auto am = straight_modes(3, F, 4.0);  // mode 0 exact
  const auto gt = straight_gt(F);
  const std::vector<std::uint8_t> valid(static_cast<std::size_t>(F), 1);
  CHECK(min_ade(am, gt, valid, F) == 0.0);
  CHECK(min_fde(am, gt, valid, F) == 0.0);
}

TEST_CASE("constant offsets: min picks the smaller one") {
  const int F = 8;
  AgentModes am;
  am.M = 2;
  am.F = F;
  am.xyz.assign(2 * F * 3, 0.0);
  for (int t = 0; t < F; ++t) {
    am.at(0, t, 1) = 3.0;  // 3 m off everywhere
    am.at(1, t, 1) = -5.0; // 5 m off everywhere
  }
  std::vector<double> gt(static_cast<std::size_t>(F) * 3, 0.0);
  const std::vector<std::uint8_t> valid(static_cast<std::size_t>(F), 1);
  CHECK(min_ade(am, gt, valid, F) == doctest::Approx(3.0));
  CHECK(min_fde(am, gt, valid, F) == doctest::Approx(3.0));

  am.at(1, F - 1, 1) = 2.0;  // endpoint of mode 1 now closer
  CHECK(min_fde(am, gt, valid, F) == doctest::Approx(2.0));
}

TEST_CASE("metrics equal exhaustive brute force on random cases") {
  Rng rng(41);
  for (int trial = 0; trial < 300; ++trial) {
    const int M = 1 + static_cast<int>(rng.uniform_int(8));
    const int F = 4 + static_cast<int>(rng.uniform_int(12));
    const int F_eval = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(F)));
    AgentModes am;
    am.M = M;
    am.F = F;
    am.xyz.resize(static_cast<std::size_t>(M) * F * 3);
    for (auto& v : am.xyz) v = rng.uniform(-50, 50);
    std::vector<double> gt(static_cast<std::size_t>(F) * 3);
    for (auto& v : gt) v = rng.uniform(-50, 50);
    std::vector<std::uint8_t> valid(static_cast<std::size_t>(F), 0);
    bool any = false;
    for (int t = 0; t < F_eval; ++t) {
      valid[static_cast<std::size_t>(t)] = rng.uniform() < 0.8 ? 1 : 0;
      any = any || valid[static_cast<std::size_t>(t)];
    }
    if (!any) valid[0] = 1;

    // brute force
    double best_ade = 1e300, best_fde = 1e300;
    int final_t = -1;
    for (int t = F_eval - 1; t >= 0 && final_t < 0; --t)
      if (valid[static_cast<std::size_t>(t)]) final_t = t;
    for (int m = 0; m < M; ++m) {
      double sum = 0.0;
      int count = 0;
      for (int t = 0; t < F_eval; ++t) {
        if (!valid[static_cast<std::size_t>(t)]) continue;
        const double dx = am.at(m, t, 0) - gt[static_cast<std::size_t>(t) * 3];
        const double dy = am.at(m, t, 1) - gt[static_cast<std::size_t>(t) * 3 + 1];
        sum += std::sqrt(dx * dx + dy * dy);
        ++count;
      }
      best_ade = std::min(best_ade, sum / count);
      const double fx = am.at(m, final_t, 0) - gt[static_cast<std::size_t>(final_t) * 3];
      const double fy = am.at(m, final_t, 1) - gt[static_cast<std::size_t>(final_t) * 3 + 1];
      best_fde = std::min(best_fde, std::sqrt(fx * fx + fy * fy));
    }
    CHECK(min_ade(am, gt, valid, F_eval) == best_ade);
    CHECK(min_fde(am, gt, valid, F_eval) == best_fde);
  }
}

TEST_CASE("adding a mode never increases mADE or mFDE") {
  Rng rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    const int F = 6;
    AgentModes base;
    base.M = 2;
    base.F = F;
    base.xyz.resize(static_cast<std::size_t>(2) * F * 3);
    for (auto& v : base.xyz) v = rng.uniform(-20, 20);
    AgentModes more = base;
    more.M = 3;
    more.xyz.resize(static_cast<std::size_t>(3) * F * 3);
    for (std::size_t i = base.xyz.size(); i < more.xyz.size(); ++i)
      more.xyz[i] = rng.uniform(-20, 20);
    std::vector<double> gt(static_cast<std::size_t>(F) * 3);
    for (auto& v : gt) v = rng.uniform(-20, 20);
    const std::vector<std::uint8_t> valid(static_cast<std::size_t>(F), 1);
    CHECK(min_ade(more, gt, valid, F) <= min_ade(base, gt, valid, F));
    CHECK(min_fde(more, gt, valid, F) <= min_fde(base, gt, valid, F));
  }
}

TEST_CASE("metrics are invariant under joint rigid transforms") {
  Rng rng(44);
  const int F = 8;
  AgentModes am;
  am.M = 3;
  am.F = F;
  am.xyz.resize(static_cast<std::size_t>(3) * F * 3);
  for (auto& v : am.xyz) v = rng.uniform(-100, 100);
  std::vector<double> gt(static_cast<std::size_t>(F) * 3);
  for (auto& v : gt) v = rng.uniform(-100, 100);
  const std::vector<std::uint8_t> valid(static_cast<std::size_t>(F), 1);

  const double ang = 1.1;
  const double tx = 31.0, ty = -17.0;
  auto rotate = [&](double x, double y) {
    return std::pair<double, double>{std::cos(ang) * x - std::sin(ang) * y + tx,
                                     std::sin(ang) * x + std::cos(ang) * y + ty};
  };
  AgentModes am2 = am;
  std::vector<double> gt2 = gt;
  for (int m = 0; m < 3; ++m)
    for (int t = 0; t < F; ++t) {
      const auto [x, y] = rotate(am.at(m, t, 0), am.at(m, t, 1));
      am2.at(m, t, 0) = x;
      am2.at(m, t, 1) = y;
    }
  for (int t = 0; t < F; ++t) {
    const auto [x, y] = rotate(gt[static_cast<std::size_t>(t) * 3], gt[static_cast<std::size_t>(t) * 3 + 1]);
    gt2[static_cast<std::size_t>(t) * 3] = x;
    gt2[static_cast<std::size_t>(t) * 3 + 1] = y;
  }
  CHECK(std::abs(min_ade(am2, gt2, valid, F) - min_ade(am, gt, valid, F)) < 1e-9);
  CHECK(std::abs(min_fde(am2, gt2, valid, F) - min_fde(am, gt, valid, F)) < 1e-9);
}

TEST_CASE("split_days: 10 days -> 8/2, 2 days -> 1/1, disjoint and seeded") {
  std::map<std::string, std::vector<int>> days;
  days["A"] = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  days["B"] = {0, 1};
  const auto m1 = split_days(days, 0.8, 7);
  CHECK(m1.airports.at("A").first.size() == 8);
  CHECK(m1.airports.at("A").second.size() == 2);
  CHECK(m1.airports.at("B").first.size() == 1);
  CHECK(m1.airports.at("B").second.size() == 1);

  // partition property
  std::set<int> all;
  for (int d : m1.airports.at("A").first) all.insert(d);
  for (int d : m1.airports.at("A").second) {
    CHECK(all.count(d) == 0);
    all.insert(d);
  }
  CHECK(all.size() == 10);

  const auto m2 = split_days(days, 0.8, 7);
  CHECK(m1.to_json() == m2.to_json());
  const auto m3 = split_days(days, 0.8, 8);
  CHECK(m1.to_json() != m3.to_json());

  std::map<std::string, std::vector<int>> lone;
  lone["C"] = {0};
  CHECK_THROWS_AS(split_days(lone, 0.8, 1), TooFewDays);
}

namespace {

scenes::Scene make_scene(const std::function<void(int, int, scenes::AgentState&)>& fill, int K,
                         int H, int F) {
  scenes::Scene s;
  s.T = H + F;
  s.H = H;
  s.F = F;
  s.K = K;
  s.P = 4;
  s.agent_ids.assign(static_cast<std::size_t>(K), "a");
  s.agents.assign(static_cast<std::size_t>(K) * (H + F), scenes::AgentState{});
  s.t_o = H - 1;
  s.patches.assign(static_cast<std::size_t>(K) * 4 * 7, 0.0);
  s.patch_valid.assign(static_cast<std::size_t>(K) * 4, 1);
  for (int k = 0; k < K; ++k)
    for (int t = 0; t < H + F; ++t) {
      auto& st = s.at(k, t);
      st.valid = true;
      fill(k, t, st);
    }
  return s;
}

}  // namespace

TEST_CASE("constant-velocity baseline: stationary and linear motion are exact") {
  const auto stationary = make_scene(
      [](int k, int, scenes::AgentState& st) {
        st.x = 10.0 * k;
        st.y = -3.0;
      },
      2, 4, 6);
  const auto base = constant_velocity_baseline(stationary);
  for (int k = 0; k < 2; ++k)
    for (int t = 0; t < 6; ++t) {
      CHECK(base.at(k, t, 0) == doctest::Approx(10.0 * k));
      CHECK(base.at(k, t, 1) == doctest::Approx(-3.0));
    }

  const auto moving = make_scene(
      [](int k, int t, scenes::AgentState& st) {
        st.x = 2.5 * t + k;
        st.y = -1.5 * t;
      },
      2, 4, 6);
  const auto mb = constant_velocity_baseline(moving);
  const auto cv = cv_predictor()(moving);
  for (int k = 0; k < 2; ++k)
    for (int t = 0; t < 6; ++t) {
      CHECK(mb.at(k, t, 0) == doctest::Approx(2.5 * (4 + t) + k).epsilon(1e-12));
      CHECK(mb.at(k, t, 1) == doctest::Approx(-1.5 * (4 + t)).epsilon(1e-12));
      CHECK(cv[static_cast<std::size_t>(k)].at(0, t, 0) == mb.at(k, t, 0));
    }

  // perfect on constant-velocity ground truth
  const auto result = evaluate({moving}, cv_predictor(), 6);
  CHECK(result.made == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(result.mfde == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("constant-velocity baseline misses turning motion") {
  const auto turning = make_scene(
      [](int, int t, scenes::AgentState& st) {
        const double a = 0.15 * t;
        st.x = 40.0 * std::sin(a);
        st.y = 40.0 * (1.0 - std::cos(a));
      },
      1, 4, 6);
  const auto result = evaluate({turning}, cv_predictor(), 6);
  CHECK(result.made > 0.1);
}

TEST_CASE("experiment specs parse and render") {
  const auto single = ExperimentSpec::parse("single");
  CHECK(single.kind == ExperimentSpec::Kind::single);
  const auto multi = ExperimentSpec::parse("multi:seen=2of3");
  CHECK(multi.kind == ExperimentSpec::Kind::multi);
  CHECK(multi.seen == 2);
  CHECK(multi.total == 3);
  CHECK(multi.name() == "multi-seen2of3");
  CHECK_THROWS_AS(ExperimentSpec::parse("multi:seen=4of3"), Error);
  CHECK_THROWS_AS(ExperimentSpec::parse("nonsense"), Error);
}

TEST_CASE("report marks unseen airports and averages per-airport cells") {
  std::vector<BenchRecord> records = {
      {"multi-seen2of3", "AAA", 20, true, 4.0, 8.0, 10},
      {"multi-seen2of3", "BBB", 20, true, 6.0, 10.0, 10},
      {"multi-seen2of3", "CCC", 20, false, 10.0, 20.0, 10},
  };
  const auto md = render_report(records, "md");
  CHECK(md.find("(unseen)") != std::string::npos);
  CHECK(md.find("mADE / mFDE") != std::string::npos);
  // average column: mean of 4,6,10 and 8,10,20
  CHECK(md.find("6.67 / 12.67") != std::string::npos);
  const auto csv = render_report(records, "csv");
  CHECK(csv.find("6.67 / 12.67") != std::string::npos);
  CHECK_THROWS_AS(render_report(records, "html"), Error);

  // records round-trip through CSV storage
  const auto text = records_to_csv(records);
  const auto back = records_from_csv(text);
  REQUIRE(back.size() == records.size());
  CHECK(back[2].seen == false);
  CHECK(back[1].made == doctest::Approx(6.0));
}

TEST_CASE("synthetic airports pass the map invariants") {
  for (const auto size : {AirportSize::small, AirportSize::medium}) {
    const auto apt = synth_airport(3, size);
    CHECK(!apt.graph.edges.empty());
    CHECK(!apt.graph.hold_line_nodes().empty());
    int runway_edges = 0;
    for (const auto& e : apt.graph.edges) {
      const int cls = static_cast<int>(e.cls);
      CHECK(cls >= 0);
      CHECK(cls <= 2);
      runway_edges += e.cls == airmap::EdgeClass::runway ? 1 : 0;
      if (e.cls == airmap::EdgeClass::runway)
        CHECK(apt.graph.edge_length_m(e) <= apt.graph.spacing_m + 1e-9);
    }
    CHECK(runway_edges > 0);
    const auto pts = scorer::ConflictPoints::build(apt.graph);
    CHECK(!pts.pts.empty());
    CHECK(!pts.hold_pts.empty());
  }
}

TEST_CASE("the intersecting variant contains a runway-runway junction node") {
  const auto apt = synth_airport(5, AirportSize::medium);
  CHECK(apt.topology == "I");
  // a node with >= 3 incident runway edges exists (crossing + chain)
  std::map<airmap::NodeId, int> runway_deg;
  for (const auto& e : apt.graph.edges)
    if (e.cls == airmap::EdgeClass::runway) {
      ++runway_deg[e.a];
      ++runway_deg[e.b];
    }
  int max_deg = 0;
  for (const auto& [id, deg] : runway_deg) max_deg = std::max(max_deg, deg);
  CHECK(max_deg >= 3);
}

TEST_CASE("synthetic traffic covers the four behavior families") {
  const auto apt = synth_airport(4, AirportSize::small);
  TrafficConfig tc;
  tc.moving_agents = 40;
  tc.stationary_agents = 2;
  const auto tracks = synth_traffic(apt, tc, 11);
  CHECK(tracks.size() >= 40);

  bool saw_takeoff = false, saw_landing = false, saw_vacate = false, saw_taxi = false;
  for (const auto& t : tracks) {
    double max_speed = 0.0, max_y = -1e18;
    for (std::size_t i = 0; i < t.size(); ++i) {
      max_speed = std::max(max_speed, t.speed_mps(i));
      max_y = std::max(max_y, t.y_m(i));
    }
    const double v0 = t.speed_mps(0);
    const double v_end = t.speed_mps(t.size() - 1);
    if (v0 < 5.0 && max_speed > 50.0) saw_takeoff = true;             // hold then roll
    if (v0 > 40.0 && v_end < 15.0) saw_landing = true;                // fast in, slow out
    if (v0 > 40.0 && v_end < 15.0 && max_y > 300.0) saw_vacate = true;  // reached the spine
    if (max_speed > 1.0 && max_speed <= 15.0) saw_taxi = true;        // pure surface taxi
  }
  CHECK(saw_takeoff);
  CHECK(saw_landing);
  CHECK(saw_vacate);
  CHECK(saw_taxi);
}

TEST_CASE("synthetic traffic respects the kinematic caps") {
  const auto apt = synth_airport(6, AirportSize::small);
  TrafficConfig tc;
  tc.moving_agents = 25;
  tc.stationary_agents = 3;
  const auto tracks = synth_traffic(apt, tc, 13);

  auto near_runway = [&](double x, double y) {
    for (const auto& r : apt.runways) {
      // distance to the (extended) runway segment
      const geo::Vec2 a{r.a.x - 1852.0 * (r.b.x - r.a.x) / geo::dist(r.a, r.b),
                        r.a.y - 1852.0 * (r.b.y - r.a.y) / geo::dist(r.a, r.b)};
      const geo::Vec2 b{r.b.x + 1852.0 * (r.b.x - r.a.x) / geo::dist(r.a, r.b),
                        r.b.y + 1852.0 * (r.b.y - r.a.y) / geo::dist(r.a, r.b)};
      const geo::Vec2 ab = b - a;
      const double tt = std::clamp(geo::dot({x - a.x, y - a.y}, ab) / geo::dot(ab, ab), 0.0, 1.0);
      const geo::Vec2 proj = a + tt * ab;
      if (geo::dist(proj, {x, y}) < 30.0) return true;
    }
    return false;
  };

  for (const auto& t : tracks) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double v = t.speed_mps(i);
      CHECK(v <= tc.runway_speed_cap + 1e-9);
      if (!near_runway(t.x_m(i), t.y_m(i))) CHECK(v <= tc.taxi_speed_cap + 1e-9);
      if (i > 0) CHECK(std::abs(v - t.speed_mps(i - 1)) <= tc.accel_cap_mps2 + 1e-9);
    }
  }
}

TEST_CASE("run_benchmark marks seen/unseen and produces records per horizon") {
  BenchmarkConfig bc;
  bc.experiments = {ExperimentSpec::parse("multi:seen=2of3")};
  bc.airports = 3;
  bc.days = 2;
  bc.seed = 3;
  bc.train_steps = 2;  // bookkeeping test, not a training test
  bc.batch_size = 2;
  bc.scene_cfg.K = 3;
  bc.scene_cfg.P = 8;
  bc.model_cfg = model::ModelConfig::tiny();
  bc.horizons = {20};
  const auto records = run_benchmark(bc);
  REQUIRE(records.size() == 3);
  int unseen = 0;
  for (const auto& r : records) {
    CHECK(r.horizon == 20);
    CHECK(r.scene_count > 0);
    unseen += r.seen ? 0 : 1;
  }
  CHECK(unseen == 1);
}
