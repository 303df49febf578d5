# Copyright 2026 The Tarmac Authors
# SPDX-License-Identifier: Apache-2.0
"""End-to-end smoke tests for the python bindings."""

import math

import numpy as np
import pytest

import tarmac


def test_projection_round_trip():
    x, y = tarmac.project_local(40.01, -80.0, 40.0, -80.0)
    assert x == pytest.approx(0.0, abs=1e-9)
    assert y == pytest.approx(1111.9492664, abs=1e-3)
    lat, lon = tarmac.unproject_local(x, y, 40.0, -80.0)
    assert lat == pytest.approx(40.01, abs=1e-9)
    assert lon == pytest.approx(-80.0, abs=1e-9)


def test_csv_parse_and_resample():
    header = "Frame,ID,Altitude,Range,Bearing,Lat,Lon,Speed,Heading,x,y,Type,Interp\n"
    rows = "".join(
        f"{frame},AA1,100,1.0,0.5,40.0,-80.0,10,90,{0.001 * frame},0,0,0\n"
        for frame in (0, 2, 4)
    )
    reports, malformed = tarmac.parse_track_csv(header + rows)
    assert len(reports) == 3
    assert malformed == []
    tracks = tarmac.resample_tracks(reports)
    assert len(tracks) == 1
    assert tracks[0].size() == 5  # frames 0..4 at 1 Hz
    interp_flags = [s.interp for s in tracks[0].samples]
    assert interp_flags == [False, True, False, True, False]


def test_geofence_filtering():
    fence = tarmac.GeoFence.from_json(
        '{"polygon": [[39.9, -80.1], [39.9, -79.9], [40.1, -79.9], [40.1, -80.1]],'
        ' "ceiling_agl_ft": 2000.0, "ground_elevation_msl_ft": 0.0}'
    )
    inside = tarmac.PositionReport()
    inside.lat, inside.lon, inside.altitude_ft = 40.0, -80.0, 1000.0
    outside = tarmac.PositionReport()
    outside.lat, outside.lon, outside.altitude_ft = 41.0, -80.0, 1000.0
    kept = tarmac.filter_airspace([inside, outside], fence)
    assert len(kept) == 1


def test_map_compilation_and_patch():
    apt = tarmac.synth_airport(3, "small", 25.0)
    assert apt.topology == "P"
    assert apt.graph.edge_count > 0
    assert len(apt.graph.hold_line_nodes()) > 0
    vecs = tarmac.vectorize_graph(apt.graph, 40.0, -80.0)
    assert vecs.shape == (apt.graph.edge_count, 11)
    onehot = vecs[:, 8:]
    assert np.all(onehot.sum(axis=1) == 1.0)
    rows, valid = tarmac.local_patch(apt.graph, 0.0, 0.0, 0.0, P=16)
    assert rows.shape == (16, 7)
    assert valid.all()


def test_pipeline_mine_train_predict_metrics():
    apt = tarmac.synth_airport(4, "small", 25.0)
    tracks = tarmac.synth_traffic(apt, moving=8, stationary=2, duration_s=300, seed=9)
    assert len(tracks) >= 8

    cfg = tarmac.SceneConfig()
    cfg.K = 3
    cfg.P = 12
    scenes, dropped = tarmac.mine_scenes(tracks, apt.graph, cfg, "critical", 5,
                                         apt.airport_id, 0)
    assert dropped >= 0
    assert len(scenes) > 0
    scene = scenes[0]
    assert scene.states.shape == (cfg.K, cfg.T, 4)

    mcfg = tarmac.ModelConfig.tiny()
    params = tarmac.ModelParams.init(mcfg, cfg.F, 7)
    assert params.param_count() == tarmac.expected_param_count(mcfg, cfg.F)

    losses = tarmac.train_on_scenes(params, mcfg, scenes[:8], steps=10, batch_size=8, seed=3)
    assert len(losses) == 10
    assert losses[-1] < losses[0]  # loss moves downhill quickly from init

    gmm, world = tarmac.predict(params, mcfg, scene)
    assert gmm.shape == (cfg.K, mcfg.modes, cfg.F, 7)
    rho = gmm[:, :, 0, 6]
    assert np.allclose(rho.sum(axis=1), 1.0, atol=1e-6)
    assert np.all(gmm[:, :, :, 3:6] >= 0.01)
    assert world.shape == (cfg.K, mcfg.modes, cfg.F, 3)

    # metrics: the model's own mode means give a finite mADE against gt
    states = scene.states
    valid = scene.valid
    k = scene.ego_index
    gt = states[k, cfg.H:, :3].copy()
    mask = [bool(v) for v in valid[k, cfg.H:]]
    if any(mask):
        pred = gmm[k, :, :, 0:3].copy()
        ade = tarmac.min_ade(pred, gt, mask, 20)
        fde = tarmac.min_fde(pred, gt, mask, 20)
        assert math.isfinite(ade) and ade >= 0.0
        assert math.isfinite(fde) and fde >= 0.0
        # constant-velocity baseline evaluates through the same path
        cv = tarmac.cv_baseline(scene)
        cv_ade = tarmac.min_ade(cv[k][None, :, :].copy(), gt, mask, 20)
        assert math.isfinite(cv_ade)


def test_scene_serialization_round_trip():
    apt = tarmac.synth_airport(6, "small", 25.0)
    tracks = tarmac.synth_traffic(apt, moving=6, stationary=2, duration_s=240, seed=2)
    cfg = tarmac.SceneConfig()
    cfg.K = 2
    cfg.P = 8
    scenes, _ = tarmac.mine_scenes(tracks, apt.graph, cfg, "critical", 1, apt.airport_id, 0)
    assert scenes
    blob = scenes[0].serialize()
    back = tarmac.deserialize_scene(blob)
    assert back.serialize() == blob
    assert back.agent_ids == scenes[0].agent_ids


def test_split_days_partition():
    split = tarmac.split_days({"A": list(range(10))}, 0.8, 7)
    train, test = split["A"]
    assert len(train) == 8 and len(test) == 2
    assert not set(train) & set(test)
    again = tarmac.split_days({"A": list(range(10))}, 0.8, 7)
    assert again["A"] == split["A"]
