from __future__ import annotations

import os
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import TYPE_CHECKING, Literal

import numpy as np

from adhocsep.errors import ConfigurationError, FormatError

if TYPE_CHECKING:
    from adhocsep.danse.node import NodeState
    from adhocsep.scene.renderer import SceneRecording
    from adhocsep.signal import SpectrogramTensor, StftConfig

StepTag = Literal["first-step", "second-step"]
FIRST_STEP: StepTag = "first-step"
SECOND_STEP: StepTag = "second-step"
STEP_TAGS = (FIRST_STEP, SECOND_STEP)

MaskKind = Literal["oracle-irm", "file", "unit"]
MASK_KINDS = ("oracle-irm", "file", "unit")


@dataclass(frozen=True, eq=False)
class TfMask:
    """Real-valued time-frequency mask in [0, 1].

    Attributes:
        values (np.ndarray): Mask of shape (frames, bins).
        node_id (int | None): Node the mask belongs to.
        step_tag (StepTag): Which filtering step the mask drives.
    """

    values: np.ndarray
    node_id: int | None = None
    step_tag: StepTag = FIRST_STEP

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise FormatError(f"Mask must be 2-D (frame, bin), got {self.values.shape}")
        if self.step_tag not in STEP_TAGS:
            raise FormatError(f"Unknown step tag {self.step_tag!r}")
        if self.values.size and (
            not np.all(np.isfinite(self.values))
            or self.values.min() < 0.0
            or self.values.max() > 1.0
        ):
            raise FormatError("Mask values must lie in [0, 1]")

    @property
    def shape(self) -> tuple[int, int]:
        return (int(self.values.shape[0]), int(self.values.shape[1]))

    def check_matches(self, spec: SpectrogramTensor) -> None:
        if self.shape != (spec.n_frames, spec.n_bins):
            raise FormatError(
                f"Mask of node {self.node_id} is {self.shape[0]}x{self.shape[1]}, "
                f"spectrogram is {spec.n_frames}x{spec.n_bins}"
            )

    def retag(self, step_tag: StepTag) -> TfMask:
        return TfMask(self.values, self.node_id, step_tag)


class BaseMaskProvider(ABC):
    """Produces the time-frequency mask of a node for one filtering step.

    At the first step a provider sees the node's local channels (`node.local_spec`);
    at the second step it also sees the stacked channels (`node.stacked`), i.e. the
    local signals together with the compressed signals of the other nodes.
    """

    @abstractmethod
    def __call__(self, node: NodeState, step: StepTag) -> TfMask:
        pass


@dataclass(frozen=True)
class MaskProviderConfig:
    """Which mask provider a filtering step uses.

    Args:
        kind (MaskKind): `"oracle-irm"`, `"file"` or `"unit"`.
        file_path (str | None): Directory holding the mask files (file kind only).
        epsilon (float): Denominator guard of the ideal ratio mask.
        pattern (str): File name pattern for the file kind.
        second_step (str): `"own"` reads the second-step files, `"first-step"` reuses the
            first-step file of the node (single-node variant).
    """

    kind: MaskKind = "oracle-irm"
    file_path: str | None = None
    epsilon: float = 1e-12
    pattern: str = "node{node_id}_{step}.dstnsr"
    second_step: Literal["own", "first-step"] = "own"

    def __post_init__(self) -> None:
        if self.kind not in MASK_KINDS:
            raise ConfigurationError(
                f"Unknown mask provider kind {self.kind!r}, expected one of {MASK_KINDS}"
            )
        if not np.isfinite(self.epsilon) or self.epsilon <= 0:
            raise ConfigurationError(f"epsilon must be a small positive float, got {self.epsilon}")
        if self.second_step not in ("own", "first-step"):
            raise ConfigurationError(f"Unknown second_step mode {self.second_step!r}")
        if self.kind == "file":
            if self.file_path is None:
                raise ConfigurationError("The file mask provider requires file_path")
            if not os.path.isdir(self.file_path):
                raise FileNotFoundError(f"Mask directory not found: {self.file_path}")
            if not os.access(self.file_path, os.R_OK):
                raise PermissionError(f"Mask directory is not readable: {self.file_path}")

    def build(
        self,
        recording: SceneRecording | None = None,
        stft_config: StftConfig | None = None,
    ) -> BaseMaskProvider:
        """Create the provider; the oracle kind needs the recording and the STFT config."""
        if self.kind == "oracle-irm":
            from .oracle_provider import OracleIRMProvider

            if recording is None or stft_config is None:
                raise ConfigurationError(
                    "The oracle IRM provider needs the source images of the recording"
                )
            return OracleIRMProvider.from_recording(recording, stft_config, self.epsilon)
        if self.kind == "file":
            from .file_provider import FileMaskProvider

            assert self.file_path is not None
            return FileMaskProvider(self.file_path, self.pattern, self.second_step)

        from .unit_provider import UnitMaskProvider

        return UnitMaskProvider()
