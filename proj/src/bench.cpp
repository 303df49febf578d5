// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
#include "tarmac/bench.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

namespace tarmac::bench {

namespace {

double displacement(const AgentModes& pred, int m, const std::vector<double>& gt, int t,
                    bool planar) {
  const double dx = pred.at(m, t, 0) - gt[static_cast<std::size_t>(t) * 3 + 0];
  const double dy = pred.at(m, t, 1) - gt[static_cast<std::size_t>(t) * 3 + 1];
  if (planar) return std::sqrt(dx * dx + dy * dy);
  const double dz = pred.at(m, t, 2) - gt[static_cast<std::size_t>(t) * 3 + 2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace

double min_ade(const AgentModes& pred, const std::vector<double>& gt_xyz,
               const std::vector<std::uint8_t>& gt_valid, int F_eval, bool planar) {
  if (F_eval < 1 || F_eval > pred.F) throw Error("min_ade: F_eval out of range");
  if (gt_xyz.size() < static_cast<std::size_t>(pred.F) * 3 ||
      gt_valid.size() < static_cast<std::size_t>(pred.F))
    throw Error("min_ade: ground-truth buffers too small");
  double best = 0.0;
  bool have = false;
  for (int m = 0; m < pred.M; ++m) {
    double sum = 0.0;
    int count = 0;
    for (int t = 0; t < F_eval; ++t) {
      if (!gt_valid[static_cast<std::size_t>(t)]) continue;
      sum += displacement(pred, m, gt_xyz, t, planar);
      ++count;
    }
    if (count == 0) throw NoValidSteps("no valid step within the evaluation horizon");
    const double ade = sum / count;
    if (!have || ade < best) {
      best = ade;
      have = true;
    }
  }
  if (!have) throw NoValidSteps("prediction has no modes");
  return best;
}

double min_fde(const AgentModes& pred, const std::vector<double>& gt_xyz,
               const std::vector<std::uint8_t>& gt_valid, int F_eval, bool planar) {
  if (F_eval < 1 || F_eval > pred.F) throw Error("min_fde: F_eval out of range");
  int final_t = -1;
  for (int t = F_eval - 1; t >= 0; --t)
    if (gt_valid[static_cast<std::size_t>(t)]) {
      final_t = t;
      break;
    }
  if (final_t < 0) throw NoValidSteps("no valid step within the evaluation horizon");
  double best = 0.0;
  for (int m = 0; m < pred.M; ++m) {
    const double fde = displacement(pred, m, gt_xyz, final_t, planar);
    if (m == 0 || fde < best) best = fde;
  }
  if (pred.M == 0) throw NoValidSteps("prediction has no modes");
  return best;
}

SplitManifest SplitManifest::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  SplitManifest m;
  for (const auto& [airport, v] : j.items()) {
    auto& entry = m.airports[airport];
    for (const auto& d : v.at("train_days")) entry.first.push_back(d.get<int>());
    for (const auto& d : v.at("test_days")) entry.second.push_back(d.get<int>());
  }
  return m;
}

std::string SplitManifest::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [airport, split] : airports) {
    j[airport]["train_days"] = split.first;
    j[airport]["test_days"] = split.second;
  }
  return j.dump(2);
}

SplitManifest split_days(const std::map<std::string, std::vector<int>>& days_per_airport,
                         double ratio, std::uint64_t seed) {
  SplitManifest manifest;
  for (const auto& [airport, days] : days_per_airport) {
    const int n = static_cast<int>(days.size());
    if (n < 2) throw TooFewDays("airport " + airport + " has fewer than 2 days");
    std::vector<int> shuffled = days;
    Rng rng(fnv1a(airport, seed ^ 0x5b117ULL));
    rng.shuffle(shuffled);
    const int train_n =
        std::min(static_cast<int>(std::ceil(ratio * n)), n - 1);  // keep >= 1 test day
    auto& entry = manifest.airports[airport];
    entry.first.assign(shuffled.begin(), shuffled.begin() + train_n);
    entry.second.assign(shuffled.begin() + train_n, shuffled.end());
    std::sort(entry.first.begin(), entry.first.end());
    std::sort(entry.second.begin(), entry.second.end());
  }
  return manifest;
}

BaselinePrediction constant_velocity_baseline(const scenes::Scene& scene) {
  BaselinePrediction out;
  out.K = scene.K;
  out.F = scene.F;
  out.xyz.assign(static_cast<std::size_t>(scene.K) * scene.F * 3, 0.0);
  for (int k = 0; k < scene.K; ++k) {
    // Last two valid observed samples give position and velocity.
    int last = -1, prev = -1;
    for (int t = scene.H - 1; t >= 0; --t) {
      if (!scene.at(k, t).valid) continue;
      if (last < 0) {
        last = t;
      } else {
        prev = t;
        break;
      }
    }
    double px = 0.0, py = 0.0, pz = 0.0, vx = 0.0, vy = 0.0, vz = 0.0;
    int t_ref = scene.H - 1;
    if (last >= 0) {
      const auto& s1 = scene.at(k, last);
      px = s1.x;
      py = s1.y;
      pz = s1.z;
      t_ref = last;
      if (prev >= 0) {  // InsufficientHistory -> zero-velocity hold
        const auto& s0 = scene.at(k, prev);
        const double dt = last - prev;
        vx = (s1.x - s0.x) / dt;
        vy = (s1.y - s0.y) / dt;
        vz = (s1.z - s0.z) / dt;
      }
    }
    for (int t = 0; t < scene.F; ++t) {
      const double dt = static_cast<double>(scene.H + t - t_ref);
      const std::size_t base = (static_cast<std::size_t>(k) * scene.F + t) * 3;
      out.xyz[base + 0] = px + vx * dt;
      out.xyz[base + 1] = py + vy * dt;
      out.xyz[base + 2] = pz + vz * dt;
    }
  }
  return out;
}

Predictor cv_predictor() {
  return [](const scenes::Scene& scene) {
    const auto base = constant_velocity_baseline(scene);
    std::vector<AgentModes> out(static_cast<std::size_t>(scene.K));
    for (int k = 0; k < scene.K; ++k) {
      AgentModes& am = out[static_cast<std::size_t>(k)];
      am.M = 1;
      am.F = scene.F;
      am.xyz.assign(static_cast<std::size_t>(scene.F) * 3, 0.0);
      for (int t = 0; t < scene.F; ++t)
        for (int c = 0; c < 3; ++c) am.at(0, t, c) = base.at(k, t, c);
    }
    return out;
  };
}

Predictor model_predictor(const model::ModelParams& params, const model::ModelConfig& cfg) {
  return [&params, &cfg](const scenes::Scene& scene) {
    const auto pred = model::predict(params, cfg, scene);
    std::vector<AgentModes> out(static_cast<std::size_t>(scene.K));
    for (int k = 0; k < scene.K; ++k) {
      AgentModes& am = out[static_cast<std::size_t>(k)];
      am.M = cfg.modes;
      am.F = scene.F;
      am.xyz.assign(static_cast<std::size_t>(cfg.modes) * scene.F * 3, 0.0);
      for (int m = 0; m < cfg.modes; ++m)
        for (int t = 0; t < scene.F; ++t)
          for (int c = 0; c < 3; ++c)
            am.at(m, t, c) =
                pred.agents[static_cast<std::size_t>(k)][static_cast<std::size_t>(m)]
                    .ego_xyz[static_cast<std::size_t>(t) * 3 + c];
    }
    return out;
  };
}

EvalResult evaluate(const std::vector<scenes::Scene>& scenes, const Predictor& predictor,
                    int F_eval, bool planar, const std::string& airport_id) {
  EvalResult result;
  result.airport_id = airport_id;
  result.horizon = F_eval;
  double ade_sum = 0.0, fde_sum = 0.0;
  std::int64_t agent_count = 0;

  for (const auto& scene : scenes) {
    const auto modes = predictor(scene);
    if (modes.empty()) continue;
    PerSceneRecord rec;
    rec.airport_id = scene.airport_id;
    rec.day_id = scene.day_id;
    rec.start_frame = scene.start_frame;
    double scene_ade = 0.0, scene_fde = 0.0;
    int scene_agents = 0;
    for (int k = 0; k < scene.K; ++k) {
      bool any_obs = false, any_future = false;
      std::vector<double> gt(static_cast<std::size_t>(scene.F) * 3, 0.0);
      std::vector<std::uint8_t> valid(static_cast<std::size_t>(scene.F), 0);
      for (int t = 0; t < scene.H; ++t) any_obs = any_obs || scene.at(k, t).valid;
      for (int t = 0; t < scene.F; ++t) {
        const auto& st = scene.at(k, scene.H + t);
        if (!st.valid) continue;
        any_future = true;
        valid[static_cast<std::size_t>(t)] = 1;
        gt[static_cast<std::size_t>(t) * 3 + 0] = st.x;
        gt[static_cast<std::size_t>(t) * 3 + 1] = st.y;
        gt[static_cast<std::size_t>(t) * 3 + 2] = st.z;
      }
      if (!any_obs || !any_future) continue;
      bool any_in_horizon = false;
      for (int t = 0; t < F_eval; ++t) any_in_horizon = any_in_horizon || valid[static_cast<std::size_t>(t)];
      if (!any_in_horizon) continue;
      const auto& am = modes[static_cast<std::size_t>(k)];
      const double ade = min_ade(am, gt, valid, F_eval, planar);
      const double fde = min_fde(am, gt, valid, F_eval, planar);
      ade_sum += ade;
      fde_sum += fde;
      scene_ade += ade;
      scene_fde += fde;
      ++agent_count;
      ++scene_agents;
    }
    if (scene_agents == 0) continue;
    rec.made = scene_ade / scene_agents;
    rec.mfde = scene_fde / scene_agents;
    rec.agents = scene_agents;
    result.records.push_back(rec);
    ++result.scene_count;
  }
  if (agent_count == 0) throw NoValidSteps("no evaluable agent in the scene set");
  result.made = ade_sum / static_cast<double>(agent_count);
  result.mfde = fde_sum / static_cast<double>(agent_count);
  return result;
}

ExperimentSpec ExperimentSpec::parse(const std::string& text) {
  ExperimentSpec spec;
  if (text == "single") {
    spec.kind = Kind::single;
    return spec;
  }
  if (text.rfind("multi:seen=", 0) == 0) {
    const std::string rest = text.substr(std::string("multi:seen=").size());
    const auto of = rest.find("of");
    if (of == std::string::npos) throw Error("bad experiment spec: " + text);
    spec.kind = Kind::multi;
    spec.seen = std::stoi(rest.substr(0, of));
    spec.total = std::stoi(rest.substr(of + 2));
    if (spec.seen < 1 || spec.seen > spec.total) throw Error("bad experiment spec: " + text);
    return spec;
  }
  throw Error("unknown experiment spec: " + text);
}

std::string ExperimentSpec::name() const {
  if (kind == Kind::single) return "single";
  return "multi-seen" + std::to_string(seen) + "of" + std::to_string(total);
}

std::string records_to_csv(const std::vector<BenchRecord>& records) {
  std::string out = "experiment,airport,horizon,seen,made,mfde,scene_count\n";
  for (const auto& r : records) {
    out += r.experiment + "," + r.airport_id + "," + std::to_string(r.horizon) + "," +
           (r.seen ? "1" : "0") + "," + fmt_fixed(r.made, 6) + "," + fmt_fixed(r.mfde, 6) + "," +
           std::to_string(r.scene_count) + "\n";
  }
  return out;
}

std::vector<BenchRecord> records_from_csv(const std::string& text) {
  std::vector<BenchRecord> out;
  const auto lines = split(text, '\n');
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split(lines[i], ',');
    if (f.size() != 7) throw Error("bad benchmark record line: " + lines[i]);
    BenchRecord r;
    r.experiment = f[0];
    r.airport_id = f[1];
    r.horizon = std::stoi(f[2]);
    r.seen = f[3] == "1";
    r.made = std::stod(f[4]);
    r.mfde = std::stod(f[5]);
    r.scene_count = std::stoll(f[6]);
    out.push_back(std::move(r));
  }
  return out;
}

std::string render_report(const std::vector<BenchRecord>& records, const std::string& format) {
  if (format != "md" && format != "csv") throw Error("report format must be md or csv");

  std::vector<int> horizons;
  std::vector<std::string> airports, experiments;
  for (const auto& r : records) {
    if (std::find(horizons.begin(), horizons.end(), r.horizon) == horizons.end())
      horizons.push_back(r.horizon);
    if (std::find(airports.begin(), airports.end(), r.airport_id) == airports.end())
      airports.push_back(r.airport_id);
    if (std::find(experiments.begin(), experiments.end(), r.experiment) == experiments.end())
      experiments.push_back(r.experiment);
  }
  std::sort(horizons.begin(), horizons.end());
  std::sort(airports.begin(), airports.end());

  auto find_record = [&](const std::string& exp, const std::string& apt,
                         int hz) -> const BenchRecord* {
    for (const auto& r : records)
      if (r.experiment == exp && r.airport_id == apt && r.horizon == hz) return &r;
    return nullptr;
  };

  std::string out;
  for (int hz : horizons) {
    if (format == "md") {
      out += "## Results, horizon F=" + std::to_string(hz) + " (mADE / mFDE, meters)\n\n";
      out += "| Experiment |";
      for (const auto& a : airports) out += " " + a + " |";
      out += " Average |\n|---|";
      for (std::size_t i = 0; i < airports.size() + 1; ++i) out += "---|";
      out += "\n";
    } else {
      out += "horizon=" + std::to_string(hz) + "\nexperiment";
      for (const auto& a : airports) out += "," + a;
      out += ",average\n";
    }
    for (const auto& exp : experiments) {
      std::string row = format == "md" ? "| " + exp + " |" : exp;
      double made_sum = 0.0, mfde_sum = 0.0;
      int n = 0;
      for (const auto& a : airports) {
        const BenchRecord* r = find_record(exp, a, hz);
        std::string cell = "-";
        if (r) {
          cell = fmt_fixed(r->made, 2) + " / " + fmt_fixed(r->mfde, 2);
          if (!r->seen) cell += " (unseen)";
          made_sum += r->made;
          mfde_sum += r->mfde;
          ++n;
        }
        row += format == "md" ? " " + cell + " |" : "," + cell;
      }
      std::string avg = "-";
      if (n > 0) avg = fmt_fixed(made_sum / n, 2) + " / " + fmt_fixed(mfde_sum / n, 2);
      row += format == "md" ? " " + avg + " |\n" : "," + avg + "\n";
      out += row;
    }
    out += "\n";
  }
  return out;
}

std::vector<BenchRecord> run_benchmark(const BenchmarkConfig& cfg) {
  if (cfg.airports < 1) throw Error("benchmark needs at least one airport");
  if (cfg.days < 2) throw TooFewDays("benchmark needs at least 2 days per airport");

  // Mine per-airport, per-day scene sets.
  struct AirportData {
    std::string id;
    std::map<int, std::vector<scenes::Scene>> by_day;
  };
  std::vector<AirportData> data;
  std::map<std::string, std::vector<int>> day_lists;
  for (int a = 0; a < cfg.airports; ++a) {
    const auto size = cfg.size;
    const SynthAirport apt =
        synth_airport(cfg.seed + static_cast<std::uint64_t>(a) * 1000003ULL, size);
    const auto index = airmap::PatchIndex::build(apt.graph);
    const auto pts = scorer::ConflictPoints::build(apt.graph);
    AirportData ad;
    ad.id = apt.airport_id;
    for (int d = 0; d < cfg.days; ++d) {
      TrafficConfig tc;
      tc.stationary_agents = 2;
      const auto tracks =
          synth_traffic(apt, tc, cfg.seed ^ fnv1a(ad.id) ^ (static_cast<std::uint64_t>(d) << 32));
      const auto raws = scenes::window_scenes(tracks, cfg.scene_cfg, ad.id, d);
      auto& day_scenes = ad.by_day[d];
      for (std::size_t i = 0; i < raws.size(); ++i) {
        const std::uint64_t scene_seed = fnv1a(&i, sizeof(i), cfg.seed ^ fnv1a(ad.id) ^ d);
        try {
          day_scenes.push_back(scenes::assemble_scene(raws[i], index, pts, cfg.score_cfg,
                                                      cfg.scene_cfg, scorer::Strategy::critical,
                                                      scene_seed));
        } catch (const scenes::NoValidEgo&) {
          // dropped and counted by the mining layer; rare here
        }
      }
      day_lists[ad.id].push_back(d);
    }
    data.push_back(std::move(ad));
  }

  const SplitManifest split = split_days(day_lists, 0.8, cfg.seed);
  auto gather = [&](const AirportData& ad, const std::vector<int>& days) {
    std::vector<scenes::Scene> out;
    for (int d : days)
      for (const auto& s : ad.by_day.at(d)) out.push_back(s);
    return out;
  };

  auto train_model = [&](const std::vector<scenes::Scene>& train_scenes,
                         std::uint64_t seed) -> model::ModelParams {
    model::ModelParams params = model::ModelParams::init(cfg.model_cfg, cfg.scene_cfg.F, seed);
    std::vector<model::SceneInput> inputs;
    inputs.reserve(train_scenes.size());
    for (const auto& s : train_scenes) inputs.push_back(model::SceneInput::from_scene(s));
    if (inputs.empty()) throw MissingShards("no training scenes");
    nn::AdamConfig adam;
    Rng rng(seed ^ 0x77a1ULL);
    for (int step = 0; step < cfg.train_steps; ++step) {
      std::vector<model::SceneInput> batch;
      if (cfg.batch_size >= static_cast<int>(inputs.size())) {
        batch = inputs;
      } else {
        for (int b = 0; b < cfg.batch_size; ++b)
          batch.push_back(inputs[rng.uniform_int(inputs.size())]);
      }
      model::train_step(params, cfg.model_cfg, cfg.loss_cfg, batch, adam);
    }
    return params;
  };

  std::vector<BenchRecord> records;
  for (const auto& spec : cfg.experiments) {
    if (spec.kind == ExperimentSpec::Kind::single) {
      for (const auto& ad : data) {
        const auto& days = split.airports.at(ad.id);
        const auto params = train_model(gather(ad, days.first), cfg.seed ^ fnv1a(ad.id));
        for (int hz : cfg.horizons) {
          const auto result =
              evaluate(gather(ad, days.second), model_predictor(params, cfg.model_cfg), hz, true,
                       ad.id);
          records.push_back({"single", ad.id, hz, true, result.made, result.mfde,
                             result.scene_count});
        }
      }
    } else {
      if (spec.total != cfg.airports)
        throw Error("experiment " + spec.name() + " expects " + std::to_string(spec.total) +
                    " airports, benchmark has " + std::to_string(cfg.airports));
      std::vector<scenes::Scene> train_scenes;
      std::set<std::string> seen_ids;
      for (int a = 0; a < spec.seen; ++a) {
        const auto& ad = data[static_cast<std::size_t>(a)];
        seen_ids.insert(ad.id);
        const auto scenes_a = gather(ad, split.airports.at(ad.id).first);
        train_scenes.insert(train_scenes.end(), scenes_a.begin(), scenes_a.end());
      }
      const auto params = train_model(train_scenes, cfg.seed ^ 0x3117ULL ^ spec.seen);
      for (const auto& ad : data) {
        for (int hz : cfg.horizons) {
          const auto result = evaluate(gather(ad, split.airports.at(ad.id).second),
                                       model_predictor(params, cfg.model_cfg), hz, true, ad.id);
          records.push_back({spec.name(), ad.id, hz, seen_ids.count(ad.id) > 0, result.made,
                             result.mfde, result.scene_count});
        }
      }
    }
  }
  return records;
}

}  // namespace tarmac::bench
