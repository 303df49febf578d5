// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
//
// Python bindings for the core pipeline: ingest, map compilation, scene
// mining, scoring, the forecaster, metrics, and the synthetic generators.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tarmac/bench.hpp"
#include "tarmac/common.hpp"
#include "tarmac/model.hpp"
#include "tarmac/pipeline.hpp"
#include "tarmac/scenes.hpp"

namespace py = pybind11;
using namespace tarmac;

namespace {

py::array_t<double> gmm_to_numpy(const model::GmmPrediction& p) {
  py::array_t<double> out({p.K, p.M, p.F, 7});
  std::copy(p.data.begin(), p.data.end(), out.mutable_data());
  return out;
}

bench::AgentModes modes_from_numpy(const py::array_t<double, py::array::c_style>& arr) {
  if (arr.ndim() != 3 || arr.shape(2) != 3)
    throw Error("expected an (M, F, 3) array of mode trajectories");
  bench::AgentModes am;
  am.M = static_cast<int>(arr.shape(0));
  am.F = static_cast<int>(arr.shape(1));
  am.xyz.assign(arr.data(), arr.data() + arr.size());
  return am;
}

std::vector<double> gt_from_numpy(const py::array_t<double, py::array::c_style>& arr) {
  if (arr.ndim() != 2 || arr.shape(1) != 3) throw Error("expected an (F, 3) ground-truth array");
  return {arr.data(), arr.data() + arr.size()};
}

}  // namespace

PYBIND11_MODULE(_tarmac, m) {
  m.doc() = "airport surface-movement trajectory forecasting toolkit";

  // ---- geometry -----------------------------------------------------------
  m.def(
      "project_local",
      [](double lat, double lon, double datum_lat, double datum_lon) {
        const auto p = geo::project_local(lat, lon, {datum_lat, datum_lon});
        return py::make_tuple(p.x, p.y);
      },
      py::arg("lat"), py::arg("lon"), py::arg("datum_lat"), py::arg("datum_lon"),
      "Small-area projection to local meters around the datum.");
  m.def(
      "unproject_local",
      [](double x_m, double y_m, double datum_lat, double datum_lon) {
        const auto ll = geo::unproject_local(x_m, y_m, {datum_lat, datum_lon});
        return py::make_tuple(ll.lat, ll.lon);
      },
      py::arg("x_m"), py::arg("y_m"), py::arg("datum_lat"), py::arg("datum_lon"));

  // ---- ingest --------------------------------------------------------------
  py::class_<ingest::PositionReport>(m, "PositionReport")
      .def(py::init<>())
      .def_readwrite("frame", &ingest::PositionReport::frame)
      .def_readwrite("agent_id", &ingest::PositionReport::agent_id)
      .def_readwrite("altitude_ft", &ingest::PositionReport::altitude_ft)
      .def_readwrite("range_km", &ingest::PositionReport::range_km)
      .def_readwrite("bearing_rad", &ingest::PositionReport::bearing_rad)
      .def_readwrite("lat", &ingest::PositionReport::lat)
      .def_readwrite("lon", &ingest::PositionReport::lon)
      .def_readwrite("speed_kt", &ingest::PositionReport::speed_kt)
      .def_readwrite("heading_deg", &ingest::PositionReport::heading_deg)
      .def_readwrite("x_km", &ingest::PositionReport::x_km)
      .def_readwrite("y_km", &ingest::PositionReport::y_km)
      .def_readwrite("interp", &ingest::PositionReport::interp)
      .def_property(
          "agent_type",
          [](const ingest::PositionReport& r) { return static_cast<int>(r.agent_type); },
          [](ingest::PositionReport& r, int v) { r.agent_type = static_cast<ingest::AgentType>(v); });

  py::class_<ingest::GeoFence>(m, "GeoFence")
      .def_static("from_json", &ingest::GeoFence::from_json)
      .def("to_json", &ingest::GeoFence::to_json)
      .def("contains", &ingest::GeoFence::contains);

  m.def(
      "parse_track_csv",
      [](const std::string& text) {
        auto result = ingest::parse_track_csv(text);
        py::list malformed;
        for (const auto& r : result.malformed)
          malformed.append(py::make_tuple(r.line, r.reason));
        return py::make_tuple(std::move(result.reports), malformed);
      },
      py::arg("text"), "Parse a track CSV; returns (reports, malformed_rows).");
  m.def("write_track_csv", &ingest::write_track_csv);
  m.def("filter_airspace", &ingest::filter_airspace, py::arg("reports"), py::arg("fence"));

  py::class_<ingest::AgentTrack>(m, "AgentTrack")
      .def_readonly("agent_id", &ingest::AgentTrack::agent_id)
      .def_readonly("samples", &ingest::AgentTrack::samples)
      .def("size", &ingest::AgentTrack::size)
      .def("first_frame", &ingest::AgentTrack::first_frame)
      .def("last_frame", &ingest::AgentTrack::last_frame);

  m.def(
      "resample_tracks",
      [](const std::vector<ingest::PositionReport>& reports, int max_gap_s) {
        return ingest::tracks_from_reports(reports, {max_gap_s});
      },
      py::arg("reports"), py::arg("max_gap_s") = 30,
      "Group by agent and resample to exactly 1 Hz.");

  // ---- airmap ---------------------------------------------------------------
  py::class_<airmap::RoutingGraph>(m, "RoutingGraph")
      .def_static("from_json", &airmap::RoutingGraph::from_json)
      .def("to_json", &airmap::RoutingGraph::to_json);

  py::class_<airmap::AirportGraph>(m, "AirportGraph")
      .def_static("from_json", &airmap::AirportGraph::from_json)
      .def("to_json", &airmap::AirportGraph::to_json)
      .def("hold_line_nodes", &airmap::AirportGraph::hold_line_nodes)
      .def_property_readonly("edge_count",
                             [](const airmap::AirportGraph& g) { return g.edges.size(); })
      .def_property_readonly("node_count",
                             [](const airmap::AirportGraph& g) { return g.nodes.size(); });

  m.def(
      "compile_graph",
      [](const airmap::RoutingGraph& raw, double datum_lat, double datum_lon, double spacing_m) {
        return airmap::compile_graph(raw, airmap::ClassifyRules{}, {datum_lat, datum_lon},
                                     spacing_m);
      },
      py::arg("raw"), py::arg("datum_lat"), py::arg("datum_lon"), py::arg("spacing_m") = 10.0,
      "Classify, extend runway ends by one nautical mile, and supersample.");

  m.def(
      "vectorize_graph",
      [](const airmap::AirportGraph& g, double datum_lat, double datum_lon) {
        const auto vecs = airmap::vectorize_graph(g, {datum_lat, datum_lon});
        py::array_t<double> out({static_cast<py::ssize_t>(vecs.size()), py::ssize_t(11)});
        double* ptr = out.mutable_data();
        for (const auto& v : vecs) {
          for (double d : v.d_s) *ptr++ = d;
          for (double d : v.d_e) *ptr++ = d;
          for (double d : v.a) *ptr++ = d;
        }
        return out;
      },
      py::arg("graph"), py::arg("datum_lat"), py::arg("datum_lon"),
      "Per-edge vectors [d_s(4), d_e(4), one-hot class(3)].");

  m.def(
      "local_patch",
      [](const airmap::AirportGraph& g, double x, double y, double theta, int P) {
        const auto index = airmap::PatchIndex::build(g);
        const auto patch = airmap::local_patch(index, geo::Pose2{x, y, theta}, P);
        py::array_t<double> rows({P, airmap::ContextPatch::kChannels});
        std::copy(patch.rows.begin(), patch.rows.end(), rows.mutable_data());
        py::array_t<bool> valid(P);
        for (int i = 0; i < P; ++i) valid.mutable_data()[i] = patch.valid[static_cast<std::size_t>(i)] != 0;
        return py::make_tuple(rows, valid);
      },
      py::arg("graph"), py::arg("x"), py::arg("y"), py::arg("theta"), py::arg("P") = 100,
      "P nearest map points in the reference frame, plus a validity mask.");

  // ---- scenes ----------------------------------------------------------------
  py::class_<scenes::SceneConfig>(m, "SceneConfig")
      .def(py::init<>())
      .def_readwrite("T", &scenes::SceneConfig::T)
      .def_readwrite("H", &scenes::SceneConfig::H)
      .def_readwrite("F", &scenes::SceneConfig::F)
      .def_readwrite("K", &scenes::SceneConfig::K)
      .def_readwrite("P", &scenes::SceneConfig::P)
      .def_readwrite("min_agents", &scenes::SceneConfig::min_agents)
      .def_readwrite("max_agents", &scenes::SceneConfig::max_agents)
      .def_readwrite("stride", &scenes::SceneConfig::stride)
      .def("config_hash", &scenes::SceneConfig::config_hash);

  py::class_<scenes::Scene>(m, "Scene")
      .def_readonly("airport_id", &scenes::Scene::airport_id)
      .def_readonly("day_id", &scenes::Scene::day_id)
      .def_readonly("ego_index", &scenes::Scene::ego_index)
      .def_readonly("t_o", &scenes::Scene::t_o)
      .def_readonly("agent_ids", &scenes::Scene::agent_ids)
      .def_property_readonly("states",
                             [](const scenes::Scene& s) {
                               py::array_t<double> out({s.K, s.T, 4});
                               double* p = out.mutable_data();
                               for (int k = 0; k < s.K; ++k)
                                 for (int t = 0; t < s.T; ++t) {
                                   const auto& st = s.at(k, t);
                                   *p++ = st.x;
                                   *p++ = st.y;
                                   *p++ = st.z;
                                   *p++ = st.theta;
                                 }
                               return out;
                             })
      .def_property_readonly("valid",
                             [](const scenes::Scene& s) {
                               py::array_t<bool> out({s.K, s.T});
                               bool* p = out.mutable_data();
                               for (int k = 0; k < s.K; ++k)
                                 for (int t = 0; t < s.T; ++t) *p++ = s.at(k, t).valid;
                               return out;
                             })
      .def("serialize", [](const scenes::Scene& s) { return py::bytes(scenes::serialize_scene(s)); });
  m.def("deserialize_scene",
        [](const py::bytes& b) { return scenes::deserialize_scene(std::string(b)); });

  m.def(
      "mine_scenes",
      [](const std::vector<ingest::AgentTrack>& tracks, const airmap::AirportGraph& graph,
         const scenes::SceneConfig& cfg, const std::string& strategy, std::uint64_t seed,
         const std::string& airport_id, int day_id) {
        const auto index = airmap::PatchIndex::build(graph);
        const auto pts = scorer::ConflictPoints::build(graph);
        const auto raws = scenes::window_scenes(tracks, cfg, airport_id, day_id);
        std::vector<scenes::Scene> out;
        int dropped = 0;
        for (std::size_t i = 0; i < raws.size(); ++i) {
          try {
            out.push_back(scenes::assemble_scene(
                raws[i], index, pts, scorer::ScoreConfig{}, cfg,
                scorer::strategy_from_name(strategy), seed ^ (i * 0x9e37ULL)));
          } catch (const scenes::NoValidEgo&) {
            ++dropped;
          }
        }
        return py::make_tuple(std::move(out), dropped);
      },
      py::arg("tracks"), py::arg("graph"), py::arg("cfg"), py::arg("strategy") = "critical",
      py::arg("seed") = 0, py::arg("airport_id") = "APT", py::arg("day_id") = 0,
      "Window, score, select and ego-transform; returns (scenes, dropped_no_ego).");

  // ---- model -----------------------------------------------------------------
  py::class_<model::ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_static("tiny", &model::ModelConfig::tiny)
      .def_readwrite("hidden", &model::ModelConfig::hidden)
      .def_readwrite("heads", &model::ModelConfig::heads)
      .def_readwrite("tic_blocks", &model::ModelConfig::tic_blocks)
      .def_readwrite("modes", &model::ModelConfig::modes)
      .def("to_json", &model::ModelConfig::to_json);

  py::class_<model::ModelParams>(m, "ModelParams")
      .def_static("init", &model::ModelParams::init, py::arg("cfg"), py::arg("future_steps"),
                  py::arg("seed"))
      .def("param_count", &model::ModelParams::param_count);
  m.def("expected_param_count", &model::expected_param_count);

  m.def(
      "train_on_scenes",
      [](model::ModelParams& params, const model::ModelConfig& cfg,
         const std::vector<scenes::Scene>& scene_list, int steps, int batch_size, double lr,
         std::uint64_t seed) {
        std::vector<model::SceneInput> inputs;
        for (const auto& s : scene_list) inputs.push_back(model::SceneInput::from_scene(s));
        if (inputs.empty()) throw Error("no scenes to train on");
        model::LossConfig lc;
        nn::AdamConfig adam;
        adam.lr = lr;
        Rng rng(seed);
        std::vector<double> losses;
        for (int step = 0; step < steps; ++step) {
          std::vector<model::SceneInput> batch;
          if (batch_size >= static_cast<int>(inputs.size())) {
            batch = inputs;  // full batch: fixed data each step
          } else {
            for (int b = 0; b < batch_size; ++b)
              batch.push_back(inputs[rng.uniform_int(inputs.size())]);
          }
          losses.push_back(model::train_step(params, cfg, lc, batch, adam).total);
        }
        return losses;
      },
      py::arg("params"), py::arg("cfg"), py::arg("scenes"), py::arg("steps") = 100,
      py::arg("batch_size") = 8, py::arg("lr") = 1e-4, py::arg("seed") = 0,
      "Adam training loop over assembled scenes; returns the loss per step.");

  m.def(
      "predict",
      [](const model::ModelParams& params, const model::ModelConfig& cfg,
         const scenes::Scene& scene) {
        const auto pred = model::predict(params, cfg, scene);
        py::array_t<double> world({static_cast<py::ssize_t>(scene.K),
                                   static_cast<py::ssize_t>(cfg.modes),
                                   static_cast<py::ssize_t>(scene.F), py::ssize_t(3)});
        double* p = world.mutable_data();
        for (const auto& agent : pred.agents)
          for (const auto& mode : agent)
            for (double v : mode.world_xyz) *p++ = v;
        return py::make_tuple(gmm_to_numpy(pred.gmm), world);
      },
      py::arg("params"), py::arg("cfg"), py::arg("scene"),
      "Returns (gmm [K,M,F,7] in the ego frame, world-frame mode means [K,M,F,3]).");

  m.def("save_checkpoint", &model::save_checkpoint, py::arg("path"), py::arg("params"),
        py::arg("cfg"), py::arg("scene_config_hash"), py::arg("seed"));

  // ---- bench -----------------------------------------------------------------
  m.def(
      "min_ade",
      [](const py::array_t<double, py::array::c_style>& pred,
         const py::array_t<double, py::array::c_style>& gt, const std::vector<bool>& valid,
         int F_eval, bool planar) {
        std::vector<std::uint8_t> mask(valid.begin(), valid.end());
        return bench::min_ade(modes_from_numpy(pred), gt_from_numpy(gt), mask, F_eval, planar);
      },
      py::arg("pred"), py::arg("gt"), py::arg("valid"), py::arg("F_eval"), py::arg("planar") = true);
  m.def(
      "min_fde",
      [](const py::array_t<double, py::array::c_style>& pred,
         const py::array_t<double, py::array::c_style>& gt, const std::vector<bool>& valid,
         int F_eval, bool planar) {
        std::vector<std::uint8_t> mask(valid.begin(), valid.end());
        return bench::min_fde(modes_from_numpy(pred), gt_from_numpy(gt), mask, F_eval, planar);
      },
      py::arg("pred"), py::arg("gt"), py::arg("valid"), py::arg("F_eval"), py::arg("planar") = true);

  m.def(
      "split_days",
      [](const std::map<std::string, std::vector<int>>& days, double ratio, std::uint64_t seed) {
        const auto manifest = bench::split_days(days, ratio, seed);
        py::dict out;
        for (const auto& [apt, split] : manifest.airports)
          out[py::str(apt)] = py::make_tuple(split.first, split.second);
        return out;
      },
      py::arg("days"), py::arg("ratio") = 0.8, py::arg("seed") = 0);

  py::class_<bench::SynthAirport>(m, "SynthAirport")
      .def_readonly("airport_id", &bench::SynthAirport::airport_id)
      .def_readonly("topology", &bench::SynthAirport::topology)
      .def_readonly("raw", &bench::SynthAirport::raw)
      .def_readonly("graph", &bench::SynthAirport::graph);

  m.def(
      "synth_airport",
      [](std::uint64_t seed, const std::string& size, double spacing_m) {
        return bench::synth_airport(seed, bench::airport_size_from_name(size), spacing_m);
      },
      py::arg("seed"), py::arg("size") = "small", py::arg("spacing_m") = 10.0);

  m.def(
      "synth_traffic",
      [](const bench::SynthAirport& apt, int moving, int stationary, int duration_s,
         std::uint64_t seed) {
        bench::TrafficConfig tc;
        tc.moving_agents = moving;
        tc.stationary_agents = stationary;
        tc.duration_s = duration_s;
        return bench::synth_traffic(apt, tc, seed);
      },
      py::arg("airport"), py::arg("moving") = 8, py::arg("stationary") = 0,
      py::arg("duration_s") = 600, py::arg("seed") = 0);

  m.def(
      "cv_baseline",
      [](const scenes::Scene& scene) {
        const auto base = bench::constant_velocity_baseline(scene);
        py::array_t<double> out({static_cast<py::ssize_t>(base.K),
                                 static_cast<py::ssize_t>(base.F), py::ssize_t(3)});
        std::copy(base.xyz.begin(), base.xyz.end(), out.mutable_data());
        return out;
      },
      py::arg("scene"), "Constant-velocity extrapolation, (K, F, 3).");

  // ---- pipeline ----------------------------------------------------------------
  m.def("run_demo", &cli::run_demo, py::arg("seed"), py::arg("out_dir"),
        "Self-contained synthetic end-to-end run; returns the exit status.");

  py::register_exception<Error>(m, "TarmacError");
}
