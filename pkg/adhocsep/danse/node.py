from dataclasses import dataclass, field

import numpy as np

from adhocsep.beamform import FilterBank
from adhocsep.masks import TfMask
from adhocsep.signal import SpectrogramTensor


@dataclass(frozen=True, eq=False)
class CompressedMessage:
    """Single-channel signal a node broadcasts after its local filtering step.

    Attributes:
        sender_id (int): Node that produced the signal.
        payload (SpectrogramTensor): One channel with the sender's frame and bin counts.
        silence_flag (bool): The payload power is below the silence threshold relative to
            the sender's input power.
        relative_power_db (float): Payload power relative to the sender's input power.
    """

    sender_id: int
    payload: SpectrogramTensor
    silence_flag: bool = False
    relative_power_db: float = 0.0


@dataclass
class NodeState:
    """Everything a node knows during one run of the two-step protocol.

    The node starts with its local spectrogram only. `local_step` fills the first-step
    mask, the local filter and the compressed signal; `exchange` fills `received`;
    `fuse_step` fills the stack, the second-step mask, the fused filter and the estimate.
    """

    node_id: int
    local_spec: SpectrogramTensor
    n_samples: int
    target_source: int | None = None
    mask_step1: TfMask | None = None
    mask_step2: TfMask | None = None
    w_local: FilterBank | None = None
    compressed_out: SpectrogramTensor | None = None
    silence_flag: bool = False
    relative_power_db: float = 0.0
    received: list[CompressedMessage] = field(default_factory=list)
    dropped: list[int] = field(default_factory=list)
    stacked: SpectrogramTensor | None = None
    w_fused: FilterBank | None = None
    estimate: np.ndarray | None = None

    @property
    def n_mics(self) -> int:
        return self.local_spec.n_channels

    @property
    def stacked_labels(self) -> list[str]:
        return list(self.stacked.channel_labels) if self.stacked is not None else []
