// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>

#include "tarmac/common.hpp"
#include "tarmac/pipeline.hpp"

using namespace tarmac;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  std::string path;
  explicit TempDir(const std::string& name) : path("/tmp/tarmac_test_" + name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("pipeline config round-trips through JSON with a stable hash") {
  cli::PipelineConfig cfg;
  cfg.seed = 12;
  cfg.scene.K = 3;
  cfg.train.steps = 17;
  const auto text = cfg.to_json();
  const auto back = cli::PipelineConfig::from_json(text);
  CHECK(back.seed == 12);
  CHECK(back.scene.K == 3);
  CHECK(back.train.steps == 17);
  CHECK(back.config_hash() == cfg.config_hash());

  cli::PipelineConfig other;
  CHECK(other.config_hash() != cfg.config_hash());  // scene config differs (K)
}

TEST_CASE("track file naming convention parses airport, day and hour") {
  TempDir dir("trackfiles");
  write_file(dir.path + "/SYNP3_d02_h07.csv", "x");
  write_file(dir.path + "/SYNP3_d10_h00.csv", "x");
  write_file(dir.path + "/notes.txt", "x");
  write_file(dir.path + "/badname.csv", "x");
  const auto files = cli::list_track_files(dir.path);
  REQUIRE(files.size() == 2);
  CHECK(files[0].airport_id == "SYNP3");
  CHECK(files[0].day == 2);
  CHECK(files[0].hour == 7);
  CHECK(files[1].day == 10);
}

TEST_CASE("mine -> train -> eval pipeline stages connect and validate hashes") {
  TempDir dir("pipeline");
  const std::string tracks = dir.path + "/tracks";
  const std::string shards = dir.path + "/shards";
  const std::string results = dir.path + "/results";
  fs::create_directories(tracks);
  fs::create_directories(results);

  cli::PipelineConfig cfg;
  cfg.seed = 5;
  cfg.scene.K = 3;
  cfg.scene.P = 12;
  cfg.model = model::ModelConfig::tiny();
  cfg.train.steps = 3;
  cfg.train.batch_size = 4;

  const auto apt = bench::synth_airport(5, bench::AirportSize::small, 25.0);
  write_file(dir.path + "/apt.json", apt.graph.to_json());
  for (int d = 0; d < 2; ++d) {
    bench::TrafficConfig tc;
    tc.moving_agents = 8;
    tc.stationary_agents = 2;
    tc.duration_s = 300;
    const auto day_tracks = bench::synth_traffic(apt, tc, 100 + d);
    std::vector<ingest::PositionReport> reports;
    for (const auto& t : day_tracks)
      for (const auto& s : t.samples) reports.push_back(s);
    char name[64];
    std::snprintf(name, sizeof(name), "/%s_d%02d_h00.csv", apt.airport_id.c_str(), d);
    write_file(tracks + name, ingest::write_track_csv(reports));
  }

  CHECK(cli::cmd_mine(tracks, dir.path + "/apt.json", shards, cfg.seed, "critical", cfg) == 0);
  const auto scenes = scenes::read_shard_dir(shards, cfg.config_hash());
  CHECK(!scenes.empty());

  // mismatched scene config must be refused
  cli::PipelineConfig wrong = cfg;
  wrong.scene.K = 2;
  CHECK_THROWS_AS(cli::cmd_train(shards, dir.path + "/m.ckpt", 5, wrong), Error);

  CHECK(cli::cmd_train(shards, dir.path + "/m.ckpt", 5, cfg) == 0);
  CHECK(cli::cmd_eval(dir.path + "/m.ckpt", shards, 20, results, cfg) == 0);
  CHECK(fs::exists(results + "/eval_records_f20.csv"));
  CHECK(cli::cmd_report(results, "md") == 0);
  CHECK(fs::exists(results + "/report.md"));

  // eval with a mismatching pipeline config is refused
  CHECK_THROWS_AS(cli::cmd_eval(dir.path + "/m.ckpt", shards, 20, results, wrong), Error);
}

TEST_CASE("score-stats emits both strategies with the table columns") {
  TempDir dir("stats");
  const std::string tracks = dir.path + "/tracks";
  fs::create_directories(tracks);
  cli::PipelineConfig cfg;
  cfg.scene.K = 3;
  cfg.scene.P = 8;

  const auto apt = bench::synth_airport(8, bench::AirportSize::small, 25.0);
  write_file(dir.path + "/apt.json", apt.graph.to_json());
  bench::TrafficConfig tc;
  tc.moving_agents = 8;
  tc.stationary_agents = 4;
  tc.duration_s = 300;
  const auto day_tracks = bench::synth_traffic(apt, tc, 77);
  std::vector<ingest::PositionReport> reports;
  for (const auto& t : day_tracks)
    for (const auto& s : t.samples) reports.push_back(s);
  write_file(tracks + "/" + apt.airport_id + "_d00_h00.csv", ingest::write_track_csv(reports));

  CHECK(cli::cmd_score_stats(tracks, dir.path + "/apt.json", "both", 3, dir.path, cfg) == 0);
  const auto csv = read_file(dir.path + "/selection_stats.csv");
  CHECK(csv.find("strategy,total_egos,stationary_ego_pct") == 0);
  CHECK(csv.find("random") != std::string::npos);
  CHECK(csv.find("critical") != std::string::npos);
  CHECK(fs::exists(dir.path + "/selection_stats.md"));
}

TEST_CASE("ingest command filters by fence and writes resampled CSVs") {
  TempDir dir("ingest");
  ingest::GeoFence fence;
  fence.polygon = {{39.9, -80.1}, {39.9, -79.9}, {40.1, -79.9}, {40.1, -80.1}};
  fence.ceiling_agl_ft = 2000.0;
  fence.ground_elevation_msl_ft = 0.0;
  write_file(dir.path + "/fence.json", fence.to_json());

  std::vector<ingest::PositionReport> reports;
  for (int i = 0; i < 10; i += 2) {  // 2 s cadence -> resampler inserts odd frames
    ingest::PositionReport r;
    r.frame = i;
    r.agent_id = "AA11";
    r.lat = 40.0;
    r.lon = -80.0;
    r.altitude_ft = 500.0;
    r.x_km = 0.001 * i;
    reports.push_back(r);
  }
  ingest::PositionReport outside = reports[0];
  outside.agent_id = "FAR1";
  outside.lat = 45.0;
  reports.push_back(outside);
  write_file(dir.path + "/in/APT_d00_h00.csv", ingest::write_track_csv(reports));

  CHECK(cli::cmd_ingest(dir.path + "/in", dir.path + "/fence.json", dir.path + "/out", 30) == 0);
  const auto cleaned = ingest::parse_track_csv(read_file(dir.path + "/out/APT_d00_h00.csv"));
  CHECK(cleaned.reports.size() == 9);  // frames 0..8 at 1 Hz, FAR1 dropped
  int interp = 0;
  for (const auto& r : cleaned.reports) {
    CHECK(r.agent_id == "AA11");
    interp += r.interp ? 1 : 0;
  }
  CHECK(interp == 4);
}

TEST_CASE("compile-map command compiles a raw graph file") {
  TempDir dir("compile");
  const auto apt = bench::synth_airport(9, bench::AirportSize::small, 25.0);
  write_file(dir.path + "/raw.json", apt.raw.to_json());
  CHECK(cli::cmd_compile_map(dir.path + "/raw.json", dir.path + "/apt.json", 10.0,
                             apt.datum.lat, apt.datum.lon, "") == 0);
  const auto g = airmap::AirportGraph::from_json(read_file(dir.path + "/apt.json"));
  CHECK(!g.edges.empty());
  CHECK(g.spacing_m == 10.0);
}

TEST_CASE("scene SVG rendering includes map, history, truth and predictions") {
  const auto apt = bench::synth_airport(10, bench::AirportSize::small, 50.0);
  cli::PipelineConfig cfg;
  cfg.scene.K = 2;
  cfg.scene.P = 8;
  cfg.model = model::ModelConfig::tiny();

  bench::TrafficConfig tc;
  tc.moving_agents = 6;
  tc.duration_s = 240;
  const auto tracks = bench::synth_traffic(apt, tc, 21);
  const auto raws = scenes::window_scenes(tracks, cfg.scene, apt.airport_id, 0);
  REQUIRE(!raws.empty());
  const auto index = airmap::PatchIndex::build(apt.graph);
  const auto pts = scorer::ConflictPoints::build(apt.graph);
  scenes::Scene scene;
  bool got = false;
  for (const auto& raw : raws) {
    try {
      scene = scenes::assemble_scene(raw, index, pts, cfg.score, cfg.scene,
                                     scorer::Strategy::critical, 3);
      got = true;
      break;
    } catch (const scenes::NoValidEgo&) {
    }
  }
  REQUIRE(got);
  const auto params = model::ModelParams::init(cfg.model, cfg.scene.F, 3);
  const auto pred = model::predict(params, cfg.model, scene);
  const auto svg = cli::render_scene_svg(apt.graph, scene, pred);
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("#e07b39") != std::string::npos);  // observed history
  CHECK(svg.find("#3f9e52") != std::string::npos);  // ground truth
  CHECK(svg.find("#4a6fb5") != std::string::npos);  // predicted modes
  CHECK(svg.find("<line") != std::string::npos);    // map edges
  // deterministic bytes
  CHECK(cli::render_scene_svg(apt.graph, scene, pred) == svg);
}
