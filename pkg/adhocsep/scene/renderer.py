import logging
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from adhocsep.errors import ConfigurationError, FormatError

from .acoustics import RirSet
from .geometry import SceneSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SceneRecording:
    """Multichannel recordings of a scene at every node.

    Attributes:
        mixture (list[np.ndarray]): Per node, shape (mics, samples).
        images (list[np.ndarray]): Per node, the reverberant source images, shape
            (mics, sources, samples). They sum to the mixture over the source axis.
        dry_sources (np.ndarray): Power-normalized dry sources, shape (sources, samples).
        sample_rate_hz (int): Sampling rate.
        node_sources (tuple[int | None, ...]): Source associated with each node.
        scene_id (str): Identifier of the scene the recording was rendered from.
        seed (int | None): Seed of that scene.
        ref_mic (int): Reference mic index of every node.
    """

    mixture: list[np.ndarray]
    images: list[np.ndarray]
    dry_sources: np.ndarray
    sample_rate_hz: int
    node_sources: tuple[int | None, ...]
    scene_id: str = ""
    seed: int | None = None
    ref_mic: int = 0

    @property
    def n_nodes(self) -> int:
        return len(self.mixture)

    @property
    def n_sources(self) -> int:
        return int(self.dry_sources.shape[0])

    @property
    def n_samples(self) -> int:
        return int(self.dry_sources.shape[-1])

    def reference_image(self, node_id: int, source_id: int) -> np.ndarray:
        return self.images[node_id][self.ref_mic, source_id]

    def reference_mixture(self, node_id: int) -> np.ndarray:
        return self.mixture[node_id][self.ref_mic]


def normalize_power(signal: np.ndarray, power: float) -> np.ndarray:
    current = float(np.mean(np.square(signal)))
    if current <= 0:
        raise FormatError("Cannot normalize a silent source signal")
    return signal * np.sqrt(power / current)


def render_scene(
    scene: SceneSpec,
    rirs: RirSet,
    dry_sources: list[np.ndarray] | np.ndarray,
    source_power: float = 0.01,
    dry_sample_rate_hz: int | None = None,
) -> SceneRecording:
    """Convolve dry sources with the scene responses and mix them at every mic.

    Sources are cut to the shortest one and scaled to equal mean power before convolution;
    images are truncated to the dry length.

    Args:
        scene (SceneSpec): The scene the responses were simulated for.
        rirs (RirSet): Responses of shape (mics, sources, taps) per node.
        dry_sources (list[np.ndarray] | np.ndarray): One 1-D signal per source.
        source_power (float, optional): Mean power of every scaled dry source.
        dry_sample_rate_hz (int | None, optional): Rate of the dry signals if known; it
            must equal the scene rate.

    Returns:
        SceneRecording: Mixtures and images of all nodes.
    """
    if len(dry_sources) != scene.n_sources:
        raise ConfigurationError(
            f"Scene has {scene.n_sources} sources but {len(dry_sources)} dry signals were given"
        )
    if rirs.sample_rate_hz != scene.sample_rate_hz:
        raise FormatError(
            f"Responses at {rirs.sample_rate_hz} Hz do not match the scene rate {scene.sample_rate_hz} Hz"
        )
    if dry_sample_rate_hz is not None and dry_sample_rate_hz != scene.sample_rate_hz:
        raise FormatError(
            f"Dry sources at {dry_sample_rate_hz} Hz do not match the scene rate {scene.sample_rate_hz} Hz"
        )
    if rirs.n_nodes != scene.n_nodes or rirs.n_sources != scene.n_sources:
        raise FormatError("Response set does not match the scene layout")

    n_samples = min(len(x) for x in dry_sources)
    if n_samples == 0:
        raise FormatError("Dry sources are empty")
    dry = np.stack(
        [normalize_power(np.asarray(x[:n_samples], dtype=np.float64), source_power) for x in dry_sources]
    )

    mixture, images = [], []
    for k, node_rirs in enumerate(rirs.rirs):
        node_images = fftconvolve(dry[np.newaxis], node_rirs, axes=-1)[..., :n_samples]
        images.append(node_images)
        mixture.append(node_images.sum(axis=1))
        logger.debug(f"Rendered node {k}: {node_images.shape[0]} mics, {n_samples} samples")

    return SceneRecording(
        mixture, images, dry, scene.sample_rate_hz, scene.node_sources, scene.scene_id, scene.seed
    )
