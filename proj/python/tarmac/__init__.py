# Copyright 2026 The Tarmac Authors
# SPDX-License-Identifier: Apache-2.0
"""Airport surface-movement trajectory forecasting toolkit."""

from _tarmac import (  # noqa: F401
    AgentTrack,
    AirportGraph,
    GeoFence,
    ModelConfig,
    ModelParams,
    PositionReport,
    RoutingGraph,
    Scene,
    SceneConfig,
    SynthAirport,
    TarmacError,
    compile_graph,
    cv_baseline,
    deserialize_scene,
    expected_param_count,
    filter_airspace,
    local_patch,
    min_ade,
    min_fde,
    mine_scenes,
    parse_track_csv,
    predict,
    project_local,
    resample_tracks,
    run_demo,
    save_checkpoint,
    split_days,
    synth_airport,
    synth_traffic,
    train_on_scenes,
    unproject_local,
    vectorize_graph,
    write_track_csv,
)

__version__ = "0.1.0"
