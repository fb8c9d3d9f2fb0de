import logging
import math
from dataclasses import dataclass

import numpy as np
from omegaconf import DictConfig, OmegaConf

from adhocsep.errors import SceneSamplingError

logger = logging.getLogger(__name__)

Vector3 = tuple[float, float, float]


@dataclass(frozen=True)
class RoomSpec:
    length_m: float
    width_m: float
    height_m: float
    t60_s: float

    @property
    def volume(self) -> float:
        return self.length_m * self.width_m * self.height_m

    @property
    def surface(self) -> float:
        lx, ly, lz = self.length_m, self.width_m, self.height_m
        return 2.0 * (lx * ly + lx * lz + ly * lz)

    @property
    def dimensions(self) -> Vector3:
        return (self.length_m, self.width_m, self.height_m)

    def contains(self, point: Vector3) -> bool:
        """Whether `point` lies strictly inside the room."""
        return all(0.0 < c < d for c, d in zip(point, self.dimensions))


@dataclass(frozen=True)
class TableSpec:
    center_xy: tuple[float, float]
    radius_m: float
    height_m: float


@dataclass(frozen=True)
class SourcePlacement:
    source_id: int
    position_xyz: Vector3
    azimuth_rad: float


@dataclass(frozen=True)
class NodePlacement:
    node_id: int
    mic_positions_xyz: tuple[Vector3, ...]
    associated_source: int | None
    azimuth_rad: float = 0.0

    @property
    def n_mics(self) -> int:
        return len(self.mic_positions_xyz)


@dataclass(frozen=True)
class SceneSpec:
    """Geometric and acoustic description of one simulated meeting.

    Node `k` sits in front of source `k` when both exist; `scene_id` links the scene to the
    files produced from it.
    """

    room: RoomSpec
    table: TableSpec
    sources: tuple[SourcePlacement, ...]
    nodes: tuple[NodePlacement, ...]
    sample_rate_hz: int
    seed: int
    scene_id: str = ""
    speed_of_sound: float = 343.0

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def node_sources(self) -> tuple[int | None, ...]:
        return tuple(node.associated_source for node in self.nodes)

    def check_inside(self) -> None:
        for source in self.sources:
            if not self.room.contains(source.position_xyz):
                raise SceneSamplingError(f"Source {source.source_id} lies outside the room")
        for node in self.nodes:
            for m, mic in enumerate(node.mic_positions_xyz):
                if not self.room.contains(mic):
                    raise SceneSamplingError(f"Mic {m} of node {node.node_id} lies outside the room")


@dataclass(frozen=True)
class GeometryConfig:
    """Sampling ranges of the meeting scenes. Ranges are `(low, high)` in meters or seconds."""

    room_length_m: tuple[float, float] = (3.0, 9.0)
    room_width_m: tuple[float, float] = (3.0, 7.0)
    room_height_m: tuple[float, float] = (2.5, 3.0)
    t60_s: tuple[float, float] = (0.3, 0.6)
    table_radius_m: tuple[float, float] = (0.3, 2.5)
    table_height_m: tuple[float, float] = (0.8, 0.9)
    source_distance_m: tuple[float, float] = (0.0, 0.5)
    source_height_m: tuple[float, float] = (1.15, 1.80)
    mics_per_node: int = 4
    mic_spacing_m: float = 0.05
    node_inset_m: float = 0.05
    wall_margin_m: float = 0.1
    sample_rate_hz: int = 16000
    max_retries: int = 100

    @staticmethod
    def from_config(cfg: DictConfig | dict) -> "GeometryConfig":
        if isinstance(cfg, DictConfig):
            cfg = OmegaConf.to_container(cfg, resolve=True)  # type: ignore[assignment]
        kwargs = {
            key: tuple(value) if isinstance(value, list) else value
            for key, value in dict(cfg).items()
        }
        return GeometryConfig(**kwargs)


def scene_seed(seed_base: int, n_sources: int, n_nodes: int, index: int) -> int:
    """64-bit scene seed derived from the experiment seed and the scene coordinates."""
    sequence = np.random.SeedSequence([seed_base, n_sources, n_nodes, index])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def scene_id(n_sources: int, n_nodes: int, index: int) -> str:
    return f"n{n_sources}_k{n_nodes}_{index:04d}"


def _free_azimuths(occupied: list[float], count: int) -> list[float]:
    """Put `count` azimuths one by one in the middle of the largest free gap."""
    taken = sorted(a % (2 * math.pi) for a in occupied)
    placed: list[float] = []
    for _ in range(count):
        if not taken:
            taken = [0.0]
            placed.append(0.0)
            continue
        gaps = [
            ((taken[(i + 1) % len(taken)] - taken[i]) % (2 * math.pi) or 2 * math.pi, taken[i])
            for i in range(len(taken))
        ]
        # largest gap first, ties broken by the smallest start angle
        width, start = max(gaps, key=lambda g: (round(g[0], 12), -g[1]))
        azimuth = (start + width / 2) % (2 * math.pi)
        placed.append(azimuth)
        taken = sorted(taken + [azimuth])
    return placed


def node_mic_positions(
    center_xy: tuple[float, float], height: float, azimuth: float, n_mics: int, spacing: float
) -> tuple[Vector3, ...]:
    """Mic layout of one device lying on the table.

    Mics sit on a circle of radius `spacing / sqrt(2)` around the node center, rotated with
    the node azimuth; four mics form a square of side `spacing`. Mic 0 is the reference.
    """
    if n_mics == 1:
        return ((center_xy[0], center_xy[1], height),)
    radius = spacing / math.sqrt(2.0)
    positions = []
    for m in range(n_mics):
        angle = azimuth + math.pi / 4 + 2 * math.pi * m / n_mics
        positions.append(
            (
                center_xy[0] + radius * math.cos(angle),
                center_xy[1] + radius * math.sin(angle),
                height,
            )
        )
    return tuple(positions)


def sample_scene(
    seed: int,
    n_sources: int,
    n_nodes: int,
    config: GeometryConfig | None = None,
    scene_id: str = "",
) -> SceneSpec:
    """Sample a random meeting around a round table.

    Speakers are evenly spread around the table; node `k` lies on the table edge (inset by
    `node_inset_m`) at the azimuth of speaker `k`. Nodes without a speaker take the middle
    of the largest free azimuth gap.

    Args:
        seed (int): 64-bit seed; identical seed and counts give an identical scene.
        n_sources (int): Number of speakers N >= 1.
        n_nodes (int): Number of devices K >= 1.
        config (GeometryConfig | None, optional): Sampling ranges.
        scene_id (str, optional): Identifier stored with the scene.

    Returns:
        SceneSpec: The sampled scene.

    Raises:
        SceneSamplingError: No feasible geometry was found within `max_retries` draws.
    """
    if n_sources < 1 or n_nodes < 1:
        raise SceneSamplingError(
            f"A scene needs at least one source and one node, got N={n_sources}, K={n_nodes}"
        )
    config = config or GeometryConfig()
    rng = np.random.default_rng(seed)
    violation = ""
    for _ in range(config.max_retries):
        length = float(rng.uniform(*config.room_length_m))
        width = float(rng.uniform(*config.room_width_m))
        height = float(rng.uniform(*config.room_height_m))
        t60 = float(rng.uniform(*config.t60_s))
        radius = float(rng.uniform(*config.table_radius_m))
        table_height = float(rng.uniform(*config.table_height_m))
        distances = rng.uniform(*config.source_distance_m, size=n_sources)
        heights = rng.uniform(*config.source_height_m, size=n_sources)
        offset = float(rng.uniform(0.0, 2 * math.pi))

        reach = radius + float(distances.max()) + config.wall_margin_m
        if 2 * reach >= min(length, width):
            violation = (
                f"table of radius {radius:.2f} m with speakers up to "
                f"{float(distances.max()):.2f} m away does not fit in a {length:.2f} x {width:.2f} m room"
            )
            continue
        if float(heights.max()) >= height - config.wall_margin_m:
            violation = f"speaker height {float(heights.max()):.2f} m too close to the {height:.2f} m ceiling"
            continue
        if table_height >= height - config.wall_margin_m:
            violation = f"table height {table_height:.2f} m does not fit under the ceiling"
            continue

        cx = float(rng.uniform(reach, length - reach))
        cy = float(rng.uniform(reach, width - reach))
        room = RoomSpec(length, width, height, t60)
        table = TableSpec((cx, cy), radius, table_height)

        azimuths = [(offset + 2 * math.pi * n / n_sources) % (2 * math.pi) for n in range(n_sources)]
        sources = tuple(
            SourcePlacement(
                n,
                (
                    cx + (radius + float(distances[n])) * math.cos(azimuths[n]),
                    cy + (radius + float(distances[n])) * math.sin(azimuths[n]),
                    float(heights[n]),
                ),
                azimuths[n],
            )
            for n in range(n_sources)
        )

        node_azimuths = azimuths[: min(n_sources, n_nodes)]
        node_azimuths += _free_azimuths(azimuths, n_nodes - len(node_azimuths))
        node_radius = radius - config.node_inset_m
        nodes = tuple(
            NodePlacement(
                k,
                node_mic_positions(
                    (cx + node_radius * math.cos(az), cy + node_radius * math.sin(az)),
                    table_height,
                    az,
                    config.mics_per_node,
                    config.mic_spacing_m,
                ),
                k if k < n_sources else None,
                az,
            )
            for k, az in enumerate(node_azimuths)
        )
        scene = SceneSpec(room, table, sources, nodes, config.sample_rate_hz, int(seed), scene_id)
        scene.check_inside()
        return scene

    raise SceneSamplingError(
        f"No feasible scene after {config.max_retries} draws (seed={seed}): {violation}"
    )
