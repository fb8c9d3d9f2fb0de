from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from adhocsep.errors import FormatError

from .base_provider import FIRST_STEP, BaseMaskProvider, StepTag, TfMask

if TYPE_CHECKING:
    from adhocsep.danse.node import NodeState


def unit_mask(
    frames: int, bins: int, node_id: int | None = None, step_tag: StepTag = FIRST_STEP
) -> TfMask:
    """All-ones mask; with it the target covariance equals the mixture covariance."""
    if frames <= 0 or bins <= 0:
        raise FormatError(f"Mask dimensions must be positive, got {frames}x{bins}")
    return TfMask(np.ones((frames, bins)), node_id, step_tag)


class UnitMaskProvider(BaseMaskProvider):
    def __call__(self, node: NodeState, step: StepTag) -> TfMask:
        return unit_mask(node.local_spec.n_frames, node.local_spec.n_bins, node.node_id, step)
