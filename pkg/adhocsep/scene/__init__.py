from .acoustics import (
    RirConfig,
    RirSet,
    calibrate_absorption,
    compute_rirs,
    energy_decay_curve,
    estimate_t60,
    t60_to_absorption,
)
from .corpus import list_corpus, select_sources, synthetic_sources
from .geometry import (
    GeometryConfig,
    NodePlacement,
    RoomSpec,
    SceneSpec,
    SourcePlacement,
    TableSpec,
    sample_scene,
    scene_id,
    scene_seed,
)
from .io import load_recording, load_rirs, load_scene, save_recording, save_rirs, save_scene
from .renderer import SceneRecording, render_scene

__all__ = [
    "RirConfig",
    "RirSet",
    "calibrate_absorption",
    "compute_rirs",
    "energy_decay_curve",
    "estimate_t60",
    "t60_to_absorption",
    "list_corpus",
    "select_sources",
    "synthetic_sources",
    "GeometryConfig",
    "NodePlacement",
    "RoomSpec",
    "SceneSpec",
    "SourcePlacement",
    "TableSpec",
    "sample_scene",
    "scene_id",
    "scene_seed",
    "load_recording",
    "load_rirs",
    "load_scene",
    "save_recording",
    "save_rirs",
    "save_scene",
    "SceneRecording",
    "render_scene",
]
