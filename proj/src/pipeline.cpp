// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
#include "tarmac/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <thread>

#include <json.hpp>

namespace tarmac::cli {

namespace fs = std::filesystem;

PipelineConfig PipelineConfig::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  PipelineConfig c;
  const bool sectioned = j.contains("scene") || j.contains("model") || j.contains("score") ||
                         j.contains("loss") || j.contains("train") || j.contains("seed");
  if (!sectioned && (j.contains("hidden") || j.contains("heads"))) {
    // A bare model config is accepted as shorthand.
    c.model = model::ModelConfig::from_json(text);
    return c;
  }
  if (j.contains("scene")) c.scene = scenes::SceneConfig::from_json(j["scene"].dump());
  if (j.contains("model")) c.model = model::ModelConfig::from_json(j["model"].dump());
  if (j.contains("score")) c.score = scorer::ScoreConfig::from_json(j["score"].dump());
  if (j.contains("loss")) {
    c.loss.lambda_nll = j["loss"].value("lambda_nll", c.loss.lambda_nll);
    c.loss.lambda_ce = j["loss"].value("lambda_ce", c.loss.lambda_ce);
    c.loss.sigma_floor = j["loss"].value("sigma_floor", c.loss.sigma_floor);
  }
  if (j.contains("train")) {
    c.train.steps = j["train"].value("steps", c.train.steps);
    c.train.batch_size = j["train"].value("batch_size", c.train.batch_size);
    c.train.lr = j["train"].value("lr", c.train.lr);
  }
  c.seed = j.value("seed", c.seed);
  return c;
}

std::string PipelineConfig::to_json() const {
  nlohmann::json j;
  j["scene"] = nlohmann::json::parse(scene.to_json());
  j["model"] = nlohmann::json::parse(model.to_json());
  j["score"] = nlohmann::json::parse(score.to_json());
  j["loss"] = {{"lambda_nll", loss.lambda_nll},
               {"lambda_ce", loss.lambda_ce},
               {"sigma_floor", loss.sigma_floor}};
  j["train"] = {{"steps", train.steps}, {"batch_size", train.batch_size}, {"lr", train.lr}};
  j["seed"] = seed;
  return j.dump(2);
}

std::string PipelineConfig::config_hash() const { return scene.config_hash(); }

int thread_count() {
  const char* env = std::getenv("TARMAC_THREADS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return n > 0 ? n : 1;
}

std::vector<TrackFile> list_track_files(const std::string& dir) {
  std::vector<TrackFile> out;
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".csv") continue;
    const std::string stem = entry.path().stem().string();
    // <airport>_d<day>_h<hour>
    const auto parts = split(stem, '_');
    if (parts.size() != 3 || parts[1].empty() || parts[2].empty() || parts[1][0] != 'd' ||
        parts[2][0] != 'h')
      continue;
    TrackFile f;
    f.path = entry.path().string();
    f.airport_id = parts[0];
    f.day = std::atoi(parts[1].c_str() + 1);
    f.hour = std::atoi(parts[2].c_str() + 1);
    out.push_back(std::move(f));
  }
  std::sort(out.begin(), out.end(),
            [](const TrackFile& a, const TrackFile& b) { return a.path < b.path; });
  return out;
}

namespace {

std::vector<ingest::AgentTrack> load_day_tracks(const std::vector<TrackFile>& files,
                                                const ingest::ResampleConfig& rcfg) {
  std::vector<ingest::PositionReport> all;
  for (const auto& f : files) {
    auto parsed = ingest::parse_track_csv(read_file(f.path));
    for (auto& r : parsed.reports) all.push_back(std::move(r));
  }
  return ingest::tracks_from_reports(all, rcfg);
}

void run_parallel(int jobs, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || jobs <= 1) {
    for (int i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int t = 0; t < std::min(threads, jobs); ++t)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < jobs; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

int cmd_ingest(const std::string& in_path, const std::string& fence_path,
               const std::string& out_dir, int max_gap_s) {
  const auto fence = ingest::GeoFence::from_json(read_file(fence_path));
  std::vector<std::string> inputs;
  if (fs::is_directory(in_path)) {
    for (const auto& e : fs::directory_iterator(in_path))
      if (e.path().extension() == ".csv") inputs.push_back(e.path().string());
    std::sort(inputs.begin(), inputs.end());
  } else {
    inputs.push_back(in_path);
  }
  ingest::ResampleConfig rcfg;
  rcfg.max_gap_s = max_gap_s;
  std::int64_t kept = 0, dropped = 0, malformed = 0;
  for (const auto& path : inputs) {
    const auto parsed = ingest::parse_track_csv(read_file(path));
    malformed += static_cast<std::int64_t>(parsed.malformed.size());
    const auto inside = ingest::filter_airspace(parsed.reports, fence);
    kept += static_cast<std::int64_t>(inside.size());
    dropped += static_cast<std::int64_t>(parsed.reports.size() - inside.size());
    const auto tracks = ingest::tracks_from_reports(inside, rcfg);
    std::vector<ingest::PositionReport> resampled;
    for (const auto& t : tracks)
      for (const auto& s : t.samples) resampled.push_back(s);
    std::stable_sort(resampled.begin(), resampled.end(),
                     [](const auto& a, const auto& b) { return a.frame < b.frame; });
    const std::string name = fs::path(path).filename().string();
    write_file((fs::path(out_dir) / name).string(), ingest::write_track_csv(resampled));
  }
  std::cout << "ingest: kept " << kept << " reports, dropped " << dropped << ", malformed rows "
            << malformed << "\n";
  return 0;
}

int cmd_compile_map(const std::string& in_path, const std::string& out_path, double spacing_m,
                    double datum_lat, double datum_lon, const std::string& rules_path) {
  const auto raw = airmap::RoutingGraph::from_json(read_file(in_path));
  airmap::ClassifyRules rules;
  if (!rules_path.empty()) rules = airmap::ClassifyRules::from_json(read_file(rules_path));
  const auto graph =
      airmap::compile_graph(raw, rules, {datum_lat, datum_lon}, spacing_m);
  write_file(out_path, graph.to_json());
  std::cout << "compile-map: " << graph.nodes.size() << " nodes, " << graph.edges.size()
            << " edges, " << graph.hold_line_nodes().size() << " hold-line nodes\n";
  return 0;
}

namespace {

struct MineStats {
  int scenes = 0;
  int dropped_no_ego = 0;
};

MineStats mine_day(const std::vector<ingest::AgentTrack>& tracks, const std::string& airport_id,
                   int day, const airmap::PatchIndex& index, const scorer::ConflictPoints& pts,
                   const PipelineConfig& cfg, scorer::Strategy strategy, std::uint64_t seed,
                   const std::string& out_dir) {
  MineStats stats;
  const auto raws = scenes::window_scenes(tracks, cfg.scene, airport_id, day);
  char name[128];
  std::snprintf(name, sizeof(name), "%s_d%02d.shard", airport_id.c_str(), day);
  scenes::ShardWriter writer((fs::path(out_dir) / name).string(), cfg.config_hash(), seed);
  for (const auto& raw : raws) {
    const std::uint64_t scene_seed =
        fnv1a(airport_id, seed) ^ (static_cast<std::uint64_t>(day) << 40) ^
        static_cast<std::uint64_t>(raw.start_frame);
    try {
      writer.append(scenes::assemble_scene(raw, index, pts, cfg.score, cfg.scene, strategy,
                                           scene_seed));
      ++stats.scenes;
    } catch (const scenes::NoValidEgo&) {
      ++stats.dropped_no_ego;
    }
  }
  writer.finalize();
  return stats;
}

}  // namespace

int cmd_mine(const std::string& tracks_dir, const std::string& map_path,
             const std::string& out_dir, std::uint64_t seed, const std::string& strategy,
             const PipelineConfig& cfg) {
  const auto graph = airmap::AirportGraph::from_json(read_file(map_path));
  const auto index = airmap::PatchIndex::build(graph);
  const auto pts = scorer::ConflictPoints::build(graph);
  const auto strat = scorer::strategy_from_name(strategy);

  const auto files = list_track_files(tracks_dir);
  if (files.empty()) throw Error("no track files in " + tracks_dir);
  std::map<std::pair<std::string, int>, std::vector<TrackFile>> by_day;
  for (const auto& f : files) by_day[{f.airport_id, f.day}].push_back(f);

  std::vector<std::pair<std::pair<std::string, int>, std::vector<TrackFile>>> days(
      by_day.begin(), by_day.end());
  std::vector<MineStats> stats(days.size());
  run_parallel(static_cast<int>(days.size()), thread_count(), [&](int i) {
    const auto& [key, fls] = days[static_cast<std::size_t>(i)];
    const auto tracks = load_day_tracks(fls, {});
    stats[static_cast<std::size_t>(i)] =
        mine_day(tracks, key.first, key.second, index, pts, cfg, strat, seed, out_dir);
  });

  nlohmann::json meta;
  meta["config_hash"] = cfg.config_hash();
  meta["seed"] = seed;
  meta["strategy"] = strategy;
  int total = 0, dropped = 0;
  for (const auto& s : stats) {
    total += s.scenes;
    dropped += s.dropped_no_ego;
  }
  meta["scenes"] = total;
  meta["dropped_no_ego"] = dropped;
  write_file((fs::path(out_dir) / "mine.json").string(), meta.dump(2));
  std::cout << "mine: " << total << " scenes (" << dropped << " dropped, no valid ego)\n";
  return 0;
}

namespace {

std::string stats_csv(const std::vector<std::pair<std::string, scorer::SelectionStats>>& rows) {
  std::string out =
      "strategy,total_egos,stationary_ego_pct,avg_closest_conflict_dist_all_m,"
      "avg_closest_conflict_dist_stationary_m,avg_closest_conflict_dist_moving_m\n";
  for (const auto& [name, s] : rows)
    out += name + "," + std::to_string(s.total_egos) + "," +
           fmt_fixed(100.0 * s.stationary_ego_fraction, 2) + "," +
           fmt_fixed(s.avg_closest_conflict_dist_all, 2) + "," +
           fmt_fixed(s.avg_closest_conflict_dist_stationary, 2) + "," +
           fmt_fixed(s.avg_closest_conflict_dist_moving, 2) + "\n";
  return out;
}

std::string stats_md(const std::vector<std::pair<std::string, scorer::SelectionStats>>& rows) {
  std::string out =
      "| Strategy | Total Egos | Stationary Egos (%) | Avg Closest Dist, All (m) | "
      "Stationary (m) | Moving (m) |\n|---|---|---|---|---|---|\n";
  for (const auto& [name, s] : rows)
    out += "| " + name + " | " + std::to_string(s.total_egos) + " | " +
           fmt_fixed(100.0 * s.stationary_ego_fraction, 2) + " | " +
           fmt_fixed(s.avg_closest_conflict_dist_all, 2) + " | " +
           fmt_fixed(s.avg_closest_conflict_dist_stationary, 2) + " | " +
           fmt_fixed(s.avg_closest_conflict_dist_moving, 2) + " |\n";
  return out;
}

}  // namespace

int cmd_score_stats(const std::string& tracks_dir, const std::string& map_path,
                    const std::string& strategy, std::uint64_t seed, const std::string& out_dir,
                    const PipelineConfig& cfg) {
  const auto graph = airmap::AirportGraph::from_json(read_file(map_path));
  const auto pts = scorer::ConflictPoints::build(graph);
  const auto files = list_track_files(tracks_dir);
  if (files.empty()) throw Error("no track files in " + tracks_dir);
  std::map<std::pair<std::string, int>, std::vector<TrackFile>> by_day;
  for (const auto& f : files) by_day[{f.airport_id, f.day}].push_back(f);

  std::vector<std::vector<scorer::ObsWindow>> corpus;
  for (const auto& [key, fls] : by_day) {
    const auto tracks = load_day_tracks(fls, {});
    for (const auto& raw : scenes::window_scenes(tracks, cfg.scene, key.first, key.second))
      corpus.push_back(scenes::observed_windows(raw, cfg.scene));
  }

  std::vector<std::pair<std::string, scorer::SelectionStats>> rows;
  const auto run = [&](scorer::Strategy s) {
    rows.emplace_back(scorer::strategy_name(s),
                      scorer::selection_stats(corpus, pts, cfg.score, cfg.scene.K, s, seed));
  };
  if (strategy == "both") {
    run(scorer::Strategy::random);
    run(scorer::Strategy::critical);
  } else {
    run(scorer::strategy_from_name(strategy));
  }
  write_file((fs::path(out_dir) / "selection_stats.csv").string(), stats_csv(rows));
  write_file((fs::path(out_dir) / "selection_stats.md").string(), stats_md(rows));
  std::cout << stats_md(rows);
  return 0;
}

int cmd_train(const std::string& shards_dir, const std::string& out_ckpt, std::uint64_t seed,
              const PipelineConfig& cfg) {
  const auto all = scenes::read_shard_dir(shards_dir, cfg.config_hash());
  if (all.empty()) throw Error("no scenes under " + shards_dir);
  std::vector<model::SceneInput> inputs;
  inputs.reserve(all.size());
  for (const auto& s : all) inputs.push_back(model::SceneInput::from_scene(s));

  model::ModelParams params = model::ModelParams::init(cfg.model, cfg.scene.F, seed);
  nn::AdamConfig adam;
  adam.lr = cfg.train.lr;
  Rng rng(seed ^ 0x7a11ULL);
  for (int step = 0; step < cfg.train.steps; ++step) {
    std::vector<model::SceneInput> batch;
    if (cfg.train.batch_size >= static_cast<int>(inputs.size())) {
      batch = inputs;
    } else {
      for (int b = 0; b < cfg.train.batch_size; ++b)
        batch.push_back(inputs[rng.uniform_int(inputs.size())]);
    }
    const auto report = model::train_step(params, cfg.model, cfg.loss, batch, adam);
    if (step % 50 == 0 || step + 1 == cfg.train.steps)
      std::cout << "train: step " << step << " loss " << fmt_fixed(report.total, 4) << " (nll "
                << fmt_fixed(report.nll, 4) << ", ce " << fmt_fixed(report.ce, 4) << ")\n";
  }
  model::save_checkpoint(out_ckpt, params, cfg.model, cfg.config_hash(), seed);
  std::cout << "train: saved " << out_ckpt << " (" << params.param_count() << " parameters)\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& shards_dir, int horizon,
             const std::string& out_dir, const PipelineConfig& cfg) {
  const auto ck = model::load_checkpoint(ckpt_path);
  if (ck.scene_config_hash != cfg.config_hash())
    throw Error("checkpoint scene config hash mismatch: " + ck.scene_config_hash + " vs " +
                cfg.config_hash());
  const auto all = scenes::read_shard_dir(shards_dir, cfg.config_hash());
  if (all.empty()) throw Error("no scenes under " + shards_dir);

  const auto model_result =
      bench::evaluate(all, bench::model_predictor(ck.params, ck.cfg), horizon);
  const auto cv_result = bench::evaluate(all, bench::cv_predictor(), horizon);

  std::vector<bench::BenchRecord> records;
  const std::string apt = all.front().airport_id;
  records.push_back({"model", apt, horizon, true, model_result.made, model_result.mfde,
                     model_result.scene_count});
  records.push_back({"constant-velocity", apt, horizon, true, cv_result.made, cv_result.mfde,
                     cv_result.scene_count});
  char name[64];
  std::snprintf(name, sizeof(name), "eval_records_f%d.csv", horizon);
  write_file((fs::path(out_dir) / name).string(), bench::records_to_csv(records));
  std::cout << bench::render_report(records, "md");
  return 0;
}

int cmd_report(const std::string& in_dir, const std::string& format) {
  std::vector<bench::BenchRecord> records;
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(in_dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("eval_records", 0) == 0 && e.path().extension() == ".csv")
      files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error("no eval_records*.csv under " + in_dir);
  for (const auto& f : files) {
    const auto batch = bench::records_from_csv(read_file(f));
    records.insert(records.end(), batch.begin(), batch.end());
  }
  const std::string rendered = bench::render_report(records, format);
  const std::string out_name = format == "md" ? "report.md" : "report.csv";
  write_file((fs::path(in_dir) / out_name).string(), rendered);
  std::cout << rendered;
  return 0;
}

int cmd_bench(const std::string& experiments, const std::string& synthetic, std::uint64_t seed,
              const std::string& out_dir, const PipelineConfig& cfg) {
  bench::BenchmarkConfig bc;
  for (const auto& part : split(experiments, ','))
    if (!part.empty()) bc.experiments.push_back(bench::ExperimentSpec::parse(part));
  if (bc.experiments.empty()) throw Error("no experiments requested");
  bc.size = bench::airport_size_from_name(synthetic);
  bc.seed = seed;
  bc.scene_cfg = cfg.scene;
  bc.model_cfg = cfg.model;
  bc.loss_cfg = cfg.loss;
  bc.score_cfg = cfg.score;
  bc.train_steps = cfg.train.steps;
  bc.batch_size = cfg.train.batch_size;
  for (const auto& spec : bc.experiments)
    if (spec.kind == bench::ExperimentSpec::Kind::multi) bc.airports = spec.total;

  const auto records = bench::run_benchmark(bc);
  write_file((fs::path(out_dir) / "eval_records.csv").string(), bench::records_to_csv(records));
  write_file((fs::path(out_dir) / "report.md").string(), bench::render_report(records, "md"));
  write_file((fs::path(out_dir) / "report.csv").string(), bench::render_report(records, "csv"));
  std::cout << bench::render_report(records, "md");
  return 0;
}

std::string render_scene_svg(const airmap::AirportGraph& graph, const scenes::Scene& scene,
                             const model::Prediction& pred) {
  // World-frame bounds from the map.
  double x0 = 1e18, y0 = 1e18, x1 = -1e18, y1 = -1e18;
  for (const auto& [id, n] : graph.nodes) {
    x0 = std::min(x0, n.x_m);
    x1 = std::max(x1, n.x_m);
    y0 = std::min(y0, n.y_m);
    y1 = std::max(y1, n.y_m);
  }
  const double pad = 150.0;
  x0 -= pad;
  y0 -= pad;
  x1 += pad;
  y1 += pad;
  const double w = x1 - x0, h = y1 - y0;
  auto X = [&](double x) { return fmt_fixed(x - x0, 1); };
  auto Y = [&](double y) { return fmt_fixed(y1 - y, 1); };  // SVG y grows downward

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " + fmt_fixed(w, 1) +
                    " " + fmt_fixed(h, 1) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  for (const auto& e : graph.edges) {
    const auto& a = graph.nodes.at(e.a);
    const auto& b = graph.nodes.at(e.b);
    const char* color = e.cls == airmap::EdgeClass::runway
                            ? "#b8b8b8"
                            : (e.cls == airmap::EdgeClass::hold_line ? "#d9a54a" : "#d4d4d4");
    svg += "<line x1=\"" + X(a.x_m) + "\" y1=\"" + Y(a.y_m) + "\" x2=\"" + X(b.x_m) + "\" y2=\"" +
           Y(b.y_m) + "\" stroke=\"" + color + "\" stroke-width=\"3\"/>\n";
  }

  auto polyline = [&](const std::vector<geo::Vec2>& pts, const std::string& color, int width,
                      const std::string& dash) {
    if (pts.size() < 2) return;
    std::string points;
    for (const auto& p : pts) points += X(p.x) + "," + Y(p.y) + " ";
    svg += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" +
           std::to_string(width) + "\"" + (dash.empty() ? "" : " stroke-dasharray=\"" + dash + "\"") +
           " points=\"" + points + "\"/>\n";
  };

  for (int k = 0; k < scene.K; ++k) {
    std::vector<geo::Vec2> obs, fut;
    for (int t = 0; t < scene.H; ++t)
      if (scene.at(k, t).valid)
        obs.push_back(geo::from_frame({scene.at(k, t).x, scene.at(k, t).y},
                                      scene.frame_of_reference));
    for (int t = scene.H; t < scene.T; ++t)
      if (scene.at(k, t).valid)
        fut.push_back(geo::from_frame({scene.at(k, t).x, scene.at(k, t).y},
                                      scene.frame_of_reference));
    polyline(obs, "#e07b39", 4, "");        // observed history
    polyline(fut, "#3f9e52", 3, "");        // ground-truth future
    if (k < static_cast<int>(pred.agents.size())) {
      for (const auto& mode : pred.agents[static_cast<std::size_t>(k)]) {
        std::vector<geo::Vec2> traj;
        for (std::size_t t = 0; t < mode.world_xyz.size() / 3; ++t)
          traj.push_back({mode.world_xyz[t * 3], mode.world_xyz[t * 3 + 1]});
        polyline(traj, "#4a6fb5", 2, "6,4");  // predicted mode mean
      }
    }
    if (!obs.empty()) {
      const auto& p = obs.back();
      const char* fill = k == scene.ego_index ? "#2b4b8f" : "#e07b39";
      svg += "<circle cx=\"" + X(p.x) + "\" cy=\"" + Y(p.y) + "\" r=\"6\" fill=\"" + fill +
             "\"/>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

int run_demo(std::uint64_t seed, const std::string& out_dir) {
  std::string stage = "setup";
  try {
    PipelineConfig cfg;
    cfg.seed = seed;
    cfg.model.hidden = 32;
    cfg.model.heads = 4;
    cfg.model.tic_blocks = 1;
    cfg.model.modes = 4;
    cfg.train.steps = 220;
    cfg.train.batch_size = 8;
    write_file((fs::path(out_dir) / "pipeline.json").string(), cfg.to_json());

    stage = "synth-airport";
    const auto apt = bench::synth_airport(seed, bench::AirportSize::small);
    write_file((fs::path(out_dir) / "maps" / "raw.json").string(), apt.raw.to_json());
    const std::string map_path = (fs::path(out_dir) / "maps" / "apt.json").string();
    write_file(map_path, apt.graph.to_json());

    stage = "synth-traffic";
    const int days = 4;
    const std::string tracks_dir = (fs::path(out_dir) / "tracks").string();
    for (int d = 0; d < days; ++d) {
      bench::TrafficConfig tc;
      tc.moving_agents = 10;
      tc.stationary_agents = 3;
      tc.duration_s = 600;
      const auto tracks =
          bench::synth_traffic(apt, tc, seed ^ (static_cast<std::uint64_t>(d + 1) << 16));
      std::vector<ingest::PositionReport> reports;
      for (const auto& t : tracks)
        for (const auto& s : t.samples) reports.push_back(s);
      std::stable_sort(reports.begin(), reports.end(),
                       [](const auto& a, const auto& b) { return a.frame < b.frame; });
      char name[128];
      std::snprintf(name, sizeof(name), "%s_d%02d_h00.csv", apt.airport_id.c_str(), d);
      write_file((fs::path(tracks_dir) / name).string(), ingest::write_track_csv(reports));
    }

    stage = "mine";
    const std::string shards_dir = (fs::path(out_dir) / "shards").string();
    if (cmd_mine(tracks_dir, map_path, shards_dir, seed, "critical", cfg) != 0) return 1;

    stage = "score-stats";
    const std::string results_dir = (fs::path(out_dir) / "results").string();
    if (cmd_score_stats(tracks_dir, map_path, "both", seed, results_dir, cfg) != 0) return 1;

    stage = "split";
    std::map<std::string, std::vector<int>> day_lists;
    for (int d = 0; d < days; ++d) day_lists[apt.airport_id].push_back(d);
    const auto manifest = bench::split_days(day_lists, 0.8, seed);
    write_file((fs::path(out_dir) / "split.json").string(), manifest.to_json());
    const auto& [train_days, test_days] = manifest.airports.at(apt.airport_id);

    stage = "train";
    const auto all_scenes = scenes::read_shard_dir(shards_dir, cfg.config_hash());
    std::vector<model::SceneInput> train_inputs;
    std::vector<scenes::Scene> test_scenes;
    for (const auto& s : all_scenes) {
      const bool in_train =
          std::find(train_days.begin(), train_days.end(), s.day_id) != train_days.end();
      if (in_train)
        train_inputs.push_back(model::SceneInput::from_scene(s));
      else
        test_scenes.push_back(s);
    }
    if (train_inputs.empty() || test_scenes.empty())
      throw Error("demo produced an empty train or test split");
    model::ModelParams params = model::ModelParams::init(cfg.model, cfg.scene.F, seed);
    nn::AdamConfig adam;
    adam.lr = cfg.train.lr;
    Rng rng(seed ^ 0x7a11ULL);
    for (int step = 0; step < cfg.train.steps; ++step) {
      std::vector<model::SceneInput> batch;
      const int bs = std::min<int>(cfg.train.batch_size, static_cast<int>(train_inputs.size()));
      for (int b = 0; b < bs; ++b) batch.push_back(train_inputs[rng.uniform_int(train_inputs.size())]);
      model::train_step(params, cfg.model, cfg.loss, batch, adam);
    }
    const std::string ckpt = (fs::path(out_dir) / "model.ckpt").string();
    model::save_checkpoint(ckpt, params, cfg.model, cfg.config_hash(), seed);

    stage = "eval";
    std::vector<bench::BenchRecord> records;
    for (int hz : {20, 50}) {
      const auto mr =
          bench::evaluate(test_scenes, bench::model_predictor(params, cfg.model), hz);
      const auto cv = bench::evaluate(test_scenes, bench::cv_predictor(), hz);
      records.push_back({"model", apt.airport_id, hz, true, mr.made, mr.mfde, mr.scene_count});
      records.push_back({"constant-velocity", apt.airport_id, hz, true, cv.made, cv.mfde,
                         cv.scene_count});
    }
    write_file((fs::path(results_dir) / "eval_records.csv").string(),
               bench::records_to_csv(records));

    stage = "report";
    write_file((fs::path(results_dir) / "report.md").string(),
               bench::render_report(records, "md"));
    write_file((fs::path(results_dir) / "report.csv").string(),
               bench::render_report(records, "csv"));

    stage = "plots";
    const int n_plots = static_cast<int>(std::min<std::size_t>(3, test_scenes.size()));
    for (int i = 0; i < n_plots; ++i) {
      const auto pred = model::predict(params, cfg.model, test_scenes[static_cast<std::size_t>(i)]);
      char name[64];
      std::snprintf(name, sizeof(name), "scene_%02d.svg", i);
      write_file((fs::path(out_dir) / "plots" / name).string(),
                 render_scene_svg(apt.graph, test_scenes[static_cast<std::size_t>(i)], pred));
    }

    std::cout << "demo: complete, results under " << out_dir << "\n";
    std::cout << bench::render_report(records, "md");
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "demo failed at stage '" << stage << "': " << e.what() << "\n";
    return 1;
  }
}

}  // namespace tarmac::cli
