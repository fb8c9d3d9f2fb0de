from __future__ import annotations

import logging
import os
from typing import TYPE_CHECKING, Literal

import numpy as np

from adhocsep.errors import FormatError, MaskProviderError, MaskValidationError

from .base_provider import FIRST_STEP, SECOND_STEP, STEP_TAGS, BaseMaskProvider, StepTag, TfMask
from .tensor_file import read_tensor, read_tensor_metadata, write_tensor

if TYPE_CHECKING:
    from adhocsep.danse.node import NodeState

logger = logging.getLogger(__name__)

CLAMP_TOLERANCE = 1e-6


def save_mask(mask: TfMask, path: str, config_hash: str | None = None) -> None:
    write_tensor(
        path,
        mask.values.astype(np.float64),
        metadata={
            "kind": "mask",
            "node_id": mask.node_id,
            "step_tag": mask.step_tag,
            "config_hash": config_hash,
        },
    )


def load_mask(path: str) -> TfMask:
    """Read a mask written in the tensor container.

    Values further than 1e-6 outside [0, 1] are rejected; values within that tolerance
    are clamped. The dimensions are returned as stored, callers check them against their
    spectrogram with `TfMask.check_matches`.

    Args:
        path (str): Path of the `.dstnsr` file.

    Returns:
        TfMask: The mask, with node id and step tag taken from the sidecar if present.

    Raises:
        FormatError: The header is malformed or the tensor is not a real 2-D array.
        MaskValidationError: A value lies outside [0, 1] by more than the tolerance.
    """
    values = read_tensor(path)
    if values.ndim != 2 or np.iscomplexobj(values):
        raise FormatError(f"{path}: a mask must be a real 2-D tensor, got {values.dtype} {values.shape}")
    values = values.astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise MaskValidationError(f"{path}: mask contains non-finite values")
    if values.size and (
        values.min() < -CLAMP_TOLERANCE or values.max() > 1.0 + CLAMP_TOLERANCE
    ):
        raise MaskValidationError(
            f"{path}: mask values span [{values.min()}, {values.max()}], outside [0, 1]"
        )
    values = np.clip(values, 0.0, 1.0)

    metadata = read_tensor_metadata(path) or {}
    step_tag = metadata.get("step_tag", FIRST_STEP)
    if step_tag not in STEP_TAGS:
        raise FormatError(f"{path}: unknown step tag {step_tag!r}")
    return TfMask(values, metadata.get("node_id"), step_tag)


class FileMaskProvider(BaseMaskProvider):
    """Reads externally estimated masks, one file per node and step.

    This is the plug-in point for trained mask estimators: any model that writes its
    predictions in the tensor container can drive the filters.

    Args:
        masks_dir (str): Directory of the mask files.
        pattern (str, optional): File name pattern with `{node_id}` and `{step}` fields.
        second_step (str, optional): `"first-step"` makes the second step reuse the node's
            first-step file, as a single-node estimator that only sees local signals would.
    """

    def __init__(
        self,
        masks_dir: str,
        pattern: str = "node{node_id}_{step}.dstnsr",
        second_step: Literal["own", "first-step"] = "own",
    ) -> None:
        self.masks_dir = masks_dir
        self.pattern = pattern
        self.second_step = second_step

    def path_for(self, node_id: int, step: StepTag) -> str:
        if step == SECOND_STEP and self.second_step == "first-step":
            step = FIRST_STEP
        return os.path.join(self.masks_dir, self.pattern.format(node_id=node_id, step=step))

    def __call__(self, node: NodeState, step: StepTag) -> TfMask:
        path = self.path_for(node.node_id, step)
        if not os.path.exists(path):
            raise MaskProviderError(
                f"Mask file for node {node.node_id} ({step}) not found: {path}",
                node_id=node.node_id,
                path=path,
            )
        mask = load_mask(path)
        if mask.node_id is not None and mask.node_id != node.node_id:
            logger.warning(
                f"{path} declares node {mask.node_id}, used for node {node.node_id}"
            )
        mask = TfMask(mask.values, node.node_id, step)
        mask.check_matches(node.local_spec)
        return mask
