import logging
import math
import os
import time
from collections.abc import Callable
from dataclasses import asdict, dataclass, field
from multiprocessing.dummy import Pool as ThreadPool
from typing import Any, TypeVar

import numpy as np
from hydra.utils import instantiate
from omegaconf import DictConfig

from adhocsep.beamform import FilterBank
from adhocsep.errors import AdhocSepError, ConfigurationError, FormatError, ProtocolError
from adhocsep.masks import BaseMaskProvider, MaskProviderConfig, TfMask
from adhocsep.scene.io import read_multichannel, write_multichannel
from adhocsep.scene.renderer import SceneRecording
from adhocsep.signal import StftConfig, istft, stft
from adhocsep.utils import config_fingerprint, read_json, write_json

from .node import NodeState
from .protocol import exchange, fuse_step, local_step

logger = logging.getLogger(__name__)

METHODS = ("oracle-irm", "file-masks", "mwf-local-only")

T = TypeVar("T")


@dataclass(frozen=True)
class SeparationConfig:
    """Settings of one separation run.

    Args:
        method (str): `"oracle-irm"` and `"file-masks"` run both steps with an exchange;
            `"mwf-local-only"` stops after the local filter.
        stft (StftConfig): Framing shared by every node.
        first_step_masks (MaskProviderConfig): Mask source of the local filter.
        second_step_masks (MaskProviderConfig): Mask source of the fused filter.
        loading (float): Relative diagonal loading of the Wiener solves.
        silence_threshold_db (float): A compressed signal whose power relative to the
            node's input lies below this level is flagged silent.
        exclude_silent (bool): Leave flagged signals out of the receivers' stacks.
        jobs (int): Threads used to process the nodes of one round.
    """

    method: str = "oracle-irm"
    stft: StftConfig = field(default_factory=lambda: StftConfig(center=True))
    first_step_masks: MaskProviderConfig = field(default_factory=MaskProviderConfig)
    second_step_masks: MaskProviderConfig = field(default_factory=MaskProviderConfig)
    loading: float = 1e-9
    silence_threshold_db: float = -60.0
    exclude_silent: bool = False
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ConfigurationError(f"Unknown method {self.method!r}, expected one of {METHODS}")
        if not math.isfinite(self.loading) or self.loading < 0:
            raise ConfigurationError(f"loading must be finite and non-negative, got {self.loading}")
        if not math.isfinite(self.silence_threshold_db):
            raise ConfigurationError("silence_threshold_db must be finite")
        if self.jobs < 1:
            raise ConfigurationError(f"jobs must be >= 1, got {self.jobs}")
        kinds = {self.first_step_masks.kind, self.second_step_masks.kind}
        if self.method == "file-masks" and kinds != {"file"}:
            raise ConfigurationError("The file-masks method reads both steps from mask files")
        if self.method != "file-masks" and "file" in kinds:
            raise ConfigurationError(f"The {self.method} method does not read mask files")

    @property
    def exchanges(self) -> bool:
        return self.method != "mwf-local-only"

    @staticmethod
    def for_method(method: str, masks_dir: str | None = None, **kwargs: Any) -> "SeparationConfig":
        """Config with the mask providers the method implies."""
        if method == "file-masks":
            if masks_dir is None:
                raise ConfigurationError("The file-masks method needs a masks directory")
            masks = MaskProviderConfig(kind="file", file_path=masks_dir)
        else:
            masks = MaskProviderConfig(kind="oracle-irm")
        return SeparationConfig(method=method, first_step_masks=masks, second_step_masks=masks, **kwargs)

    @staticmethod
    def from_config(cfg: DictConfig) -> "SeparationConfig":
        return SeparationConfig(
            method=cfg.method,
            stft=StftConfig.from_config(cfg.stft),
            first_step_masks=instantiate(cfg.first_step_masks),
            second_step_masks=instantiate(cfg.second_step_masks),
            loading=float(cfg.loading),
            silence_threshold_db=float(cfg.silence_threshold_db),
            exclude_silent=bool(cfg.exclude_silent),
            jobs=int(cfg.get("jobs", 1)),
        )

    def to_dict(self) -> dict:
        """Plain form of the settings that influence the output; `jobs` is left out."""
        data = asdict(self)
        del data["jobs"]
        return data

    def fingerprint(self) -> str:
        return config_fingerprint(self.to_dict())


@dataclass(frozen=True, eq=False)
class NodeResult:
    node_id: int
    estimate: np.ndarray
    compressed: np.ndarray
    target_source: int | None
    mask_step1: TfMask | None
    mask_step2: TfMask | None
    w_local: FilterBank | None
    w_fused: FilterBank | None
    silence_flag: bool
    relative_power_db: float
    stacked_labels: list[str]
    dropped: list[int]


@dataclass(frozen=True, eq=False)
class SeparationOutput:
    """Result of a separation run: one estimate and one compressed signal per node."""

    nodes: list[NodeResult]
    sample_rate_hz: int
    method: str
    scene_id: str = ""
    scene_seed: int | None = None
    config_hash: str = ""
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def estimates(self) -> list[np.ndarray]:
        return [n.estimate for n in self.nodes]

    @property
    def compressed(self) -> list[np.ndarray]:
        return [n.compressed for n in self.nodes]

    @property
    def node_sources(self) -> tuple[int | None, ...]:
        return tuple(n.target_source for n in self.nodes)

    def silence_report(self) -> list[dict]:
        return [
            {
                "node_id": n.node_id,
                "silent": n.silence_flag,
                "relative_power_db": n.relative_power_db if math.isfinite(n.relative_power_db) else None,
                "dropped_senders": n.dropped,
            }
            for n in self.nodes
        ]

    def manifest(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "scene_seed": self.scene_seed,
            "method": self.method,
            "config_hash": self.config_hash,
            "sample_rate_hz": self.sample_rate_hz,
            "n_nodes": len(self.nodes),
            "node_sources": list(self.node_sources),
            "silence": self.silence_report(),
            "degeneracy": [
                {
                    "node_id": n.node_id,
                    "local": n.w_local.degeneracy.to_dict() if n.w_local else None,
                    "fused": n.w_fused.degeneracy.to_dict() if n.w_fused else None,
                }
                for n in self.nodes
            ],
            "stacked_channels": {str(n.node_id): n.stacked_labels for n in self.nodes},
        }


def _run_nodes(
    stage: str, fn: Callable[[NodeState], T], nodes: list[NodeState], jobs: int
) -> list[T]:
    """Apply `fn` to every node, tagging failures with the node and the stage."""

    def guarded(node: NodeState) -> T:
        try:
            return fn(node)
        except ProtocolError:
            raise
        except (AdhocSepError, np.linalg.LinAlgError) as e:
            raise ProtocolError(str(e), node.node_id, stage) from e

    if jobs > 1 and len(nodes) > 1:
        with ThreadPool(min(jobs, len(nodes))) as pool:
            return pool.map(guarded, nodes)
    return [guarded(node) for node in nodes]


def run_separation(recording: SceneRecording, config: SeparationConfig) -> SeparationOutput:
    """Run the two-step protocol on every node of a recording.

    Each node transforms its mixture, filters it locally and broadcasts the compressed
    signal; after the exchange each node filters its stack of local and received signals.
    With `mwf-local-only` the compressed signal is the estimate.

    Args:
        recording (SceneRecording): Mixtures (and, for oracle masks, images) of every node.
        config (SeparationConfig): Separation settings.

    Returns:
        SeparationOutput: One estimate per node, as long as the mixture.

    Raises:
        ProtocolError: Any failure, tagged with the node and the stage.
    """
    timings: dict[str, float] = {}
    start = time.perf_counter()
    stft_config = config.stft

    nodes = []
    for k, mixture in enumerate(recording.mixture):
        try:
            spec = stft(mixture, stft_config, recording.sample_rate_hz)
        except FormatError as e:
            raise ProtocolError(str(e), k, "stft") from e
        nodes.append(NodeState(k, spec, recording.n_samples, recording.node_sources[k]))
    shapes = {node.local_spec.data.shape[1:] for node in nodes}
    if len(shapes) != 1:
        raise ProtocolError(f"Nodes disagree on the frame grid: {sorted(shapes)}", stage="stft")
    timings["stft"] = time.perf_counter() - start

    try:
        first: BaseMaskProvider = config.first_step_masks.build(recording, stft_config)
        second = (
            first
            if config.second_step_masks == config.first_step_masks
            else config.second_step_masks.build(recording, stft_config)
        )
    except AdhocSepError as e:
        raise ProtocolError(str(e), stage="masks") from e

    t = time.perf_counter()
    messages = _run_nodes("local", lambda n: local_step(n, first, config), nodes, config.jobs)
    timings["local"] = time.perf_counter() - t

    compressed = []
    for node in nodes:
        assert node.compressed_out is not None
        compressed.append(istft(node.compressed_out, stft_config, recording.n_samples)[0])

    if config.exchanges:
        t = time.perf_counter()
        try:
            received = exchange(messages, [n.node_id for n in nodes])
        except AdhocSepError as e:
            raise ProtocolError(str(e), stage="exchange") from e
        for node in nodes:
            node.received = received[node.node_id]
        timings["exchange"] = time.perf_counter() - t

        t = time.perf_counter()
        estimates = _run_nodes("fuse", lambda n: fuse_step(n, second, config), nodes, config.jobs)
        timings["fuse"] = time.perf_counter() - t
    else:
        estimates = compressed
    timings["total"] = time.perf_counter() - start

    results = [
        NodeResult(
            node_id=node.node_id,
            estimate=estimates[k],
            compressed=compressed[k],
            target_source=node.target_source,
            mask_step1=node.mask_step1,
            mask_step2=node.mask_step2,
            w_local=node.w_local,
            w_fused=node.w_fused,
            silence_flag=node.silence_flag,
            relative_power_db=node.relative_power_db,
            stacked_labels=node.stacked_labels or list(node.local_spec.channel_labels),
            dropped=list(node.dropped),
        )
        for k, node in enumerate(nodes)
    ]
    logger.debug(f"Separated {recording.scene_id or 'recording'} in {timings['total']:.2f} s")
    return SeparationOutput(
        results,
        recording.sample_rate_hz,
        config.method,
        recording.scene_id,
        recording.seed,
        config.fingerprint(),
        timings,
    )


def save_separation_output(output: SeparationOutput, out_dir: str) -> None:
    """Write `node{k}_estimate.wav`, `node{k}_compressed.wav`, `manifest.json` and `timings.json`."""
    os.makedirs(out_dir, exist_ok=True)
    for node in output.nodes:
        write_multichannel(
            os.path.join(out_dir, f"node{node.node_id}_estimate.wav"),
            node.estimate[np.newaxis],
            output.sample_rate_hz,
            [{"node": node.node_id, "signal": "estimate"}],
        )
        write_multichannel(
            os.path.join(out_dir, f"node{node.node_id}_compressed.wav"),
            node.compressed[np.newaxis],
            output.sample_rate_hz,
            [{"node": node.node_id, "signal": "compressed"}],
        )
    write_json(os.path.join(out_dir, "manifest.json"), output.manifest())
    write_json(os.path.join(out_dir, "timings.json"), output.timings)


def load_estimates(out_dir: str) -> SeparationOutput:
    """Read back a saved run; masks and filters are not restored."""
    manifest_path = os.path.join(out_dir, "manifest.json")
    if not os.path.exists(manifest_path):
        raise FileNotFoundError(f"No separation manifest in {out_dir}")
    manifest = read_json(manifest_path)
    silence = {s["node_id"]: s for s in manifest["silence"]}
    nodes = []
    for k in range(manifest["n_nodes"]):
        estimate, _ = read_multichannel(os.path.join(out_dir, f"node{k}_estimate.wav"))
        compressed, _ = read_multichannel(os.path.join(out_dir, f"node{k}_compressed.wav"))
        level = silence[k]["relative_power_db"]
        nodes.append(
            NodeResult(
                node_id=k,
                estimate=estimate[0],
                compressed=compressed[0],
                target_source=manifest["node_sources"][k],
                mask_step1=None,
                mask_step2=None,
                w_local=None,
                w_fused=None,
                silence_flag=silence[k]["silent"],
                relative_power_db=-math.inf if level is None else level,
                stacked_labels=manifest["stacked_channels"][str(k)],
                dropped=silence[k]["dropped_senders"],
            )
        )
    timings_path = os.path.join(out_dir, "timings.json")
    timings = read_json(timings_path) if os.path.exists(timings_path) else {}
    return SeparationOutput(
        nodes,
        manifest["sample_rate_hz"],
        manifest["method"],
        manifest["scene_id"],
        manifest.get("scene_seed"),
        manifest["config_hash"],
        timings,
    )
