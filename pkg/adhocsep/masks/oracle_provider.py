from __future__ import annotations

import logging
import os
from typing import TYPE_CHECKING

import numpy as np

from adhocsep.errors import FormatError
from adhocsep.signal import StftConfig, stft

from .base_provider import FIRST_STEP, SECOND_STEP, BaseMaskProvider, StepTag, TfMask
from .file_provider import save_mask

if TYPE_CHECKING:
    from adhocsep.danse.node import NodeState
    from adhocsep.scene.renderer import SceneRecording

logger = logging.getLogger(__name__)


def oracle_irm(
    target_mag: np.ndarray,
    interferer_mag: np.ndarray,
    epsilon: float = 1e-12,
    node_id: int | None = None,
    step_tag: StepTag = FIRST_STEP,
) -> TfMask:
    """Ideal ratio mask `|s| / (|s| + |n| + epsilon)`.

    Args:
        target_mag (np.ndarray): Magnitude spectrogram of the target image at the reference mic, (frames, bins).
        interferer_mag (np.ndarray): Magnitude spectrogram of the sum of the other images at the same mic.
        epsilon (float, optional): Guards the 0/0 case of silent bins. Defaults to 1e-12.
        node_id (int | None, optional): Node the mask belongs to.
        step_tag (StepTag, optional): Filtering step the mask drives.

    Returns:
        TfMask: The ideal ratio mask.

    Examples:
        >>> oracle_irm(np.ones((2, 3)), np.ones((2, 3)), epsilon=0.0).values
        array([[0.5, 0.5, 0.5],
               [0.5, 0.5, 0.5]])
    """
    target_mag = np.asarray(target_mag, dtype=np.float64)
    interferer_mag = np.asarray(interferer_mag, dtype=np.float64)
    if target_mag.shape != interferer_mag.shape:
        raise FormatError(
            f"Target {target_mag.shape} and interferer {interferer_mag.shape} magnitudes differ in shape"
        )
    if np.any(target_mag < 0) or np.any(interferer_mag < 0):
        raise FormatError("Magnitudes must be non-negative")
    denominator = target_mag + interferer_mag + epsilon
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(denominator > 0, target_mag / denominator, 0.0)
    return TfMask(np.clip(values, 0.0, 1.0), node_id, step_tag)


class OracleIRMProvider(BaseMaskProvider):
    """Ideal ratio masks computed from the reverberant source images.

    Node k targets the image of its associated source at its reference microphone; all other
    images at that microphone form the interference. A node without associated source gets a
    zero target, hence an all-zero mask. The second step reuses the first-step mask of the node,
    one common mask for the local and the compressed channels.

    Args:
        targets (list[np.ndarray | None]): Target image at the reference mic of each node.
        interferers (list[np.ndarray]): Sum of the other images at the reference mic of each node.
        stft_config (StftConfig): Framing used by the separation.
        epsilon (float, optional): Denominator guard. Defaults to 1e-12.
    """

    def __init__(
        self,
        targets: list[np.ndarray | None],
        interferers: list[np.ndarray],
        stft_config: StftConfig,
        epsilon: float = 1e-12,
    ) -> None:
        self.targets = targets
        self.interferers = interferers
        self.stft_config = stft_config
        self.epsilon = epsilon
        self._first_step: dict[int, TfMask] = {}

    @staticmethod
    def from_recording(
        recording: SceneRecording, stft_config: StftConfig, epsilon: float = 1e-12
    ) -> OracleIRMProvider:
        targets: list[np.ndarray | None] = []
        interferers: list[np.ndarray] = []
        for k, source in enumerate(recording.node_sources):
            ref_images = recording.images[k][recording.ref_mic]  # (sources, samples)
            if source is None:
                targets.append(None)
                interferers.append(ref_images.sum(axis=0))
            else:
                others = [n for n in range(ref_images.shape[0]) if n != source]
                targets.append(ref_images[source])
                interferers.append(
                    ref_images[others].sum(axis=0)
                    if others
                    else np.zeros(ref_images.shape[-1])
                )
        return OracleIRMProvider(targets, interferers, stft_config, epsilon)

    def node_mask(self, node_id: int) -> TfMask:
        if node_id not in self._first_step:
            interferer_mag = np.abs(stft(self.interferers[node_id], self.stft_config).data[0])
            target = self.targets[node_id]
            if target is None:
                target_mag = np.zeros_like(interferer_mag)
            else:
                target_mag = np.abs(stft(target, self.stft_config).data[0])
            self._first_step[node_id] = oracle_irm(
                target_mag, interferer_mag, self.epsilon, node_id, FIRST_STEP
            )
        return self._first_step[node_id]

    def __call__(self, node: NodeState, step: StepTag) -> TfMask:
        mask = self.node_mask(node.node_id)
        return mask if step == FIRST_STEP else mask.retag(SECOND_STEP)


def export_oracle_masks(
    recording: SceneRecording,
    stft_config: StftConfig,
    out_dir: str,
    epsilon: float = 1e-12,
    config_hash: str | None = None,
) -> list[str]:
    """Write the oracle masks of every node in the layout read by the file provider."""
    provider = OracleIRMProvider.from_recording(recording, stft_config, epsilon)
    paths = []
    for k in range(len(recording.node_sources)):
        mask = provider.node_mask(k)
        for step in (FIRST_STEP, SECOND_STEP):
            path = os.path.join(out_dir, f"node{k}_{step}.dstnsr")
            save_mask(mask.retag(step), path, config_hash=config_hash)
            paths.append(path)
    logger.info(f"Exported {len(paths)} oracle masks to {out_dir}")
    return paths
