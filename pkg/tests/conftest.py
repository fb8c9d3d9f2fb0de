from collections.abc import Callable

import numpy as np
import pytest

from adhocsep.scene import (
    GeometryConfig,
    SceneRecording,
    compute_rirs,
    render_scene,
    sample_scene,
    synthetic_sources,
)

# Short reverberation keeps the simulated responses small.
FAST_GEOMETRY = GeometryConfig(t60_s=(0.2, 0.2))


def simulate(
    n_sources: int,
    n_nodes: int,
    seed: int = 0,
    duration_s: float = 1.0,
    geometry: GeometryConfig = FAST_GEOMETRY,
    absorption: float | None = None,
) -> SceneRecording:
    scene = sample_scene(seed, n_sources, n_nodes, geometry, f"n{n_sources}_k{n_nodes}_test")
    rirs = compute_rirs(scene, absorption=absorption)
    dry = synthetic_sources(n_sources, duration_s, scene.sample_rate_hz, seed)
    return render_scene(scene, rirs, dry)


@pytest.fixture(scope="session")
def make_recording() -> Callable[..., SceneRecording]:
    cache: dict[tuple, SceneRecording] = {}

    def make(n_sources: int, n_nodes: int, seed: int = 0, duration_s: float = 1.0) -> SceneRecording:
        key = (n_sources, n_nodes, seed, duration_s)
        if key not in cache:
            cache[key] = simulate(n_sources, n_nodes, seed, duration_s)
        return cache[key]

    return make


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
