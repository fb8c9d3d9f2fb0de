import itertools
import json
import math

import numpy as np
import pytest

from adhocsep.errors import FormatError, SceneSamplingError
from adhocsep.scene import (
    GeometryConfig,
    load_scene,
    sample_scene,
    save_scene,
    scene_id,
    scene_seed,
)
from adhocsep.scene.geometry import _free_azimuths, node_mic_positions


def test_sample_scene_is_deterministic() -> None:
    assert sample_scene(42, 3, 3) == sample_scene(42, 3, 3)
    assert sample_scene(42, 3, 3) != sample_scene(43, 3, 3)


def test_scene_seed() -> None:
    assert scene_seed(0, 2, 2, 5) == scene_seed(0, 2, 2, 5)
    seeds = {scene_seed(0, n, k, i) for n, k, i in itertools.product([2, 3], [2, 3], range(5))}
    assert len(seeds) == 20
    assert 0 <= scene_seed(7, 4, 4, 0) < 2**64
    assert scene_id(3, 2, 7) == "n3_k2_0007"


@pytest.mark.parametrize("n_sources,n_nodes", [(2, 2), (3, 3), (4, 4), (2, 4), (4, 2)])
def test_sampled_scenes_respect_ranges(n_sources: int, n_nodes: int) -> None:
    config = GeometryConfig()
    for index in range(20):
        scene = sample_scene(scene_seed(0, n_sources, n_nodes, index), n_sources, n_nodes)
        room = scene.room
        assert 3.0 <= room.length_m <= 9.0
        assert 3.0 <= room.width_m <= 7.0
        assert 2.5 <= room.height_m <= 3.0
        assert 0.3 <= room.t60_s <= 0.6
        assert 0.3 <= scene.table.radius_m <= 2.5

        cx, cy = scene.table.center_xy
        for source in scene.sources:
            assert room.contains(source.position_xyz)
            distance = math.hypot(source.position_xyz[0] - cx, source.position_xyz[1] - cy)
            assert scene.table.radius_m <= distance <= scene.table.radius_m + 0.5 + 1e-9
            assert 1.15 <= source.position_xyz[2] <= 1.80
        for node in scene.nodes:
            assert node.n_mics == config.mics_per_node
            for mic in node.mic_positions_xyz:
                assert room.contains(mic)
                assert mic[2] == scene.table.height_m
                assert math.hypot(mic[0] - cx, mic[1] - cy) < scene.table.radius_m


def test_sources_are_evenly_spread() -> None:
    scene = sample_scene(3, 4, 4)
    azimuths = sorted(s.azimuth_rad for s in scene.sources)
    gaps = np.diff(azimuths + [azimuths[0] + 2 * math.pi])
    np.testing.assert_allclose(gaps, math.pi / 2, atol=1e-12)
    for node, source in zip(scene.nodes, scene.sources):
        assert node.associated_source == source.source_id
        assert node.azimuth_rad == pytest.approx(source.azimuth_rad)


def test_more_nodes_than_sources() -> None:
    scene = sample_scene(11, 2, 4)
    assert scene.node_sources == (0, 1, None, None)
    occupied = {round(s.azimuth_rad % (2 * math.pi), 9) for s in scene.sources}
    for node in scene.nodes[2:]:
        assert round(node.azimuth_rad % (2 * math.pi), 9) not in occupied
    # two sources face each other, the extra nodes take the two free quarters
    azimuths = sorted(n.azimuth_rad % (2 * math.pi) for n in scene.nodes)
    np.testing.assert_allclose(np.diff(azimuths), math.pi / 2, atol=1e-9)


def test_fewer_nodes_than_sources() -> None:
    scene = sample_scene(11, 4, 2)
    assert scene.node_sources == (0, 1)
    assert scene.n_sources == 4


def test_free_azimuths() -> None:
    np.testing.assert_allclose(_free_azimuths([0.0], 2), [math.pi, math.pi / 2])
    np.testing.assert_allclose(_free_azimuths([0.0, math.pi], 2), [math.pi / 2, 3 * math.pi / 2])
    assert _free_azimuths([], 1) == [0.0]


def test_node_mics_form_a_square() -> None:
    mics = np.array(node_mic_positions((1.0, 1.0), 0.8, 0.3, 4, 0.05))
    sides = [np.linalg.norm(mics[m] - mics[(m + 1) % 4]) for m in range(4)]
    np.testing.assert_allclose(sides, 0.05)
    np.testing.assert_allclose(mics.mean(axis=0), [1.0, 1.0, 0.8])
    assert node_mic_positions((1.0, 1.0), 0.8, 0.0, 1, 0.05) == ((1.0, 1.0, 0.8),)


def test_infeasible_geometry() -> None:
    config = GeometryConfig(table_radius_m=(3.5, 4.0), max_retries=5)
    with pytest.raises(SceneSamplingError, match="5 draws"):
        sample_scene(0, 2, 2, config)
    with pytest.raises(SceneSamplingError):
        sample_scene(0, 0, 2)


def test_geometry_config_from_hydra() -> None:
    from omegaconf import OmegaConf

    cfg = OmegaConf.create({"t60_s": [0.2, 0.4], "mics_per_node": 2})
    config = GeometryConfig.from_config(cfg)
    assert config.t60_s == (0.2, 0.4)
    assert config.mics_per_node == 2
    assert config.room_length_m == (3.0, 9.0)


def test_scene_file_round_trip(tmp_path) -> None:
    scene = sample_scene(5, 3, 4, scene_id="n3_k4_0000")
    path = str(tmp_path / "scenes" / "n3_k4_0000.json")
    save_scene(scene, path)
    assert load_scene(path) == scene

    with open(path) as f:
        data = json.load(f)
    assert data["schema_version"] == 1
    data["schema_version"] = 2
    with open(path, "w") as f:
        json.dump(data, f)
    with pytest.raises(FormatError):
        load_scene(path)


if __name__ == "__main__":
    test_sample_scene_is_deterministic()
