// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
//
// tarmac: airport surface-movement forecasting toolkit.
// Subcommands: ingest, compile-map, mine, score-stats, train, eval, report,
// bench, demo.
#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tarmac/pipeline.hpp"

namespace {

tarmac::cli::PipelineConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  return tarmac::cli::PipelineConfig::from_json(tarmac::read_file(path));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tarmac: airport surface-movement trajectory forecasting toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // --seed/--config may follow the subcommand

  std::string config_path;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "pipeline config JSON (full defaults when omitted)");
  app.add_option("--seed", seed, "global seed");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "filter raw track CSVs and resample to 1 Hz");
  std::string in_path, fence_path, out_dir = "tracks";
  int max_gap_s = 30;
  ingest->add_option("--in", in_path, "input CSV file or directory")->required();
  ingest->add_option("--fence", fence_path, "geofence JSON")->required();
  ingest->add_option("--out", out_dir, "output directory");
  ingest->add_option("--max-gap-s", max_gap_s, "gap length that splits a track");

  // compile-map
  auto* compile = app.add_subcommand("compile-map", "compile a raw routing graph");
  std::string map_in, map_out = "apt.json", datum_str, rules_path;
  double spacing_m = 10.0;
  compile->add_option("--in", map_in, "raw graph JSON")->required();
  compile->add_option("--out", map_out, "compiled graph JSON");
  compile->add_option("--spacing-m", spacing_m, "runway supersample spacing");
  compile->add_option("--datum", datum_str, "LAT,LON of the local origin")->required();
  compile->add_option("--rules", rules_path, "tag classification rules JSON");

  // mine
  auto* mine = app.add_subcommand("mine", "window tracks into scenes and write shards");
  std::string tracks_dir, map_path, shards_out = "shards";
  std::string strategy = "critical";
  mine->add_option("--tracks", tracks_dir, "track CSV directory")->required();
  mine->add_option("--map", map_path, "compiled airport graph")->required();
  mine->add_option("--out", shards_out, "shard output directory");
  mine->add_option("--strategy", strategy, "critical|random");

  // score-stats
  auto* stats = app.add_subcommand("score-stats", "selection statistics table");
  std::string stats_tracks, stats_map, stats_strategy = "both", stats_out = "results";
  stats->add_option("--tracks", stats_tracks, "track CSV directory")->required();
  stats->add_option("--map", stats_map, "compiled airport graph")->required();
  stats->add_option("--strategy", stats_strategy, "critical|random|both");
  stats->add_option("--out", stats_out, "output directory");

  // train
  auto* train = app.add_subcommand("train", "train the forecaster on mined shards");
  std::string train_shards, ckpt_out = "model.ckpt";
  int steps = -1;
  train->add_option("--shards", train_shards, "shard directory")->required();
  train->add_option("--out", ckpt_out, "checkpoint path");
  train->add_option("--steps", steps, "optimizer steps (overrides config)");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_shards, eval_out = "results";
  int horizon = 20;
  eval->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
  eval->add_option("--shards", eval_shards, "shard directory")->required();
  eval->add_option("--horizon", horizon, "evaluation horizon: 20 or 50")
      ->check(CLI::IsMember({20, 50}));
  eval->add_option("--out", eval_out, "output directory");

  // report
  auto* report = app.add_subcommand("report", "render result tables");
  std::string report_in = "results", format = "md";
  report->add_option("--in", report_in, "results directory");
  report->add_option("--format", format, "md|csv")->check(CLI::IsMember({"md", "csv"}));

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "synthetic benchmark sweep");
  std::string experiments = "single", synthetic = "small", bench_out = "results";
  bench_cmd->add_option("--experiments", experiments, "e.g. single,multi:seen=2of3");
  bench_cmd->add_option("--synthetic", synthetic, "small|medium");
  bench_cmd->add_option("--out", bench_out, "output directory");

  // demo
  auto* demo = app.add_subcommand("demo", "self-contained synthetic end-to-end run");
  std::string demo_out = "demo_out";
  demo->add_option("--out", demo_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = load_config(config_path);
    if (seed != 0) cfg.seed = seed;

    if (*ingest) return tarmac::cli::cmd_ingest(in_path, fence_path, out_dir, max_gap_s);
    if (*compile) {
      const auto parts = tarmac::split(datum_str, ',');
      if (parts.size() != 2) throw tarmac::Error("--datum expects LAT,LON");
      return tarmac::cli::cmd_compile_map(map_in, map_out, spacing_m, std::stod(parts[0]),
                                          std::stod(parts[1]), rules_path);
    }
    if (*mine) return tarmac::cli::cmd_mine(tracks_dir, map_path, shards_out, cfg.seed, strategy, cfg);
    if (*stats)
      return tarmac::cli::cmd_score_stats(stats_tracks, stats_map, stats_strategy, cfg.seed,
                                          stats_out, cfg);
    if (*train) {
      if (steps > 0) cfg.train.steps = steps;
      return tarmac::cli::cmd_train(train_shards, ckpt_out, cfg.seed, cfg);
    }
    if (*eval) return tarmac::cli::cmd_eval(eval_ckpt, eval_shards, horizon, eval_out, cfg);
    if (*report) return tarmac::cli::cmd_report(report_in, format);
    if (*bench_cmd)
      return tarmac::cli::cmd_bench(experiments, synthetic, cfg.seed, bench_out, cfg);
    if (*demo) return tarmac::cli::run_demo(cfg.seed, demo_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
