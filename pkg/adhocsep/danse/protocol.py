"""The two filtering steps of a node and the broadcast between them.

Every node first filters its own microphones with a mask-driven Wiener filter and
broadcasts the single-channel result. Each node then stacks its microphones with the
signals received from the others (local channels first, then senders in ascending node
order) and filters that stack to estimate its target.
"""

from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING

import numpy as np

from adhocsep.beamform import apply_filterbank, compute_mwf, estimate_covariances
from adhocsep.errors import FormatError, ProtocolError
from adhocsep.masks import FIRST_STEP, SECOND_STEP, BaseMaskProvider
from adhocsep.signal import SpectrogramTensor, istft

from .node import CompressedMessage, NodeState

if TYPE_CHECKING:
    from .separator import SeparationConfig

logger = logging.getLogger(__name__)

REF_INDEX = 0


def relative_power_db(signal: SpectrogramTensor, reference: SpectrogramTensor) -> float:
    """Mean power of `signal` relative to the mean power of `reference`, in dB."""
    p_signal = float(np.mean(np.abs(signal.data) ** 2))
    p_reference = float(np.mean(np.abs(reference.data) ** 2))
    if p_signal <= 0 or p_reference <= 0:
        return -math.inf
    return 10 * math.log10(p_signal / p_reference)


def local_step(
    node: NodeState, provider: BaseMaskProvider, config: SeparationConfig
) -> CompressedMessage:
    """First step: local Wiener filter and compressed signal of one node.

    Args:
        node (NodeState): Node with its local spectrogram populated.
        provider (BaseMaskProvider): Source of the first-step mask.
        config (SeparationConfig): Loading and silence threshold.

    Returns:
        CompressedMessage: The signal to broadcast to the other nodes.

    Raises:
        ProtocolError: Every frequency bin of the local filter is degenerate.
    """
    mask = provider(node, FIRST_STEP)
    mask.check_matches(node.local_spec)
    node.mask_step1 = mask

    cov = estimate_covariances(node.local_spec, mask)
    fb = compute_mwf(cov, REF_INDEX, config.loading)
    if fb.degeneracy.count == node.local_spec.n_bins:
        raise ProtocolError(
            "All frequency bins of the local filter are degenerate", node.node_id, "local"
        )
    if fb.degeneracy.count:
        logger.warning(
            f"Node {node.node_id}: {fb.degeneracy.count} degenerate bins in the local filter"
        )
    node.w_local = fb
    z = apply_filterbank(fb, node.local_spec).relabel([f"z{node.node_id}"])
    node.compressed_out = z

    level = relative_power_db(z, node.local_spec)
    node.relative_power_db = level
    node.silence_flag = level < config.silence_threshold_db
    if node.silence_flag:
        logger.warning(f"Node {node.node_id} broadcasts a silent compressed signal ({level:.1f} dB)")
    return CompressedMessage(node.node_id, z, node.silence_flag, level)


def exchange(
    messages: list[CompressedMessage], node_ids: list[int] | None = None
) -> dict[int, list[CompressedMessage]]:
    """Deliver every compressed signal to every other node.

    Delivery is lossless and happens within the round. Node `k` receives the messages of
    all nodes `j != k` in ascending `j`.

    Args:
        messages (list[CompressedMessage]): One message per node.
        node_ids (list[int] | None, optional): The participating nodes. Defaults to
            `0..len(messages)-1`.

    Returns:
        dict[int, list[CompressedMessage]]: Received messages per node.

    Raises:
        ProtocolError: A node sent no message or more than one.
        FormatError: Payloads differ in their frame or bin counts.
    """
    expected = sorted(node_ids) if node_ids is not None else list(range(len(messages)))
    senders = sorted(m.sender_id for m in messages)
    if len(set(senders)) != len(senders):
        raise ProtocolError(f"Duplicate senders in round: {senders}", stage="exchange")
    missing = set(expected) - set(senders)
    if missing:
        raise ProtocolError(f"No message from node(s) {sorted(missing)}", stage="exchange")
    unexpected = set(senders) - set(expected)
    if unexpected:
        raise ProtocolError(f"Messages from unknown node(s) {sorted(unexpected)}", stage="exchange")

    by_sender = {m.sender_id: m for m in messages}
    for m in messages:
        if m.payload.n_channels != 1:
            raise FormatError(f"Node {m.sender_id} sent {m.payload.n_channels} channels")
        if m.payload.data.shape != messages[0].payload.data.shape:
            raise FormatError(
                f"Payload of node {m.sender_id} is {m.payload.data.shape[1:]}, "
                f"node {messages[0].sender_id} sent {messages[0].payload.data.shape[1:]}"
            )
    return {k: [by_sender[j] for j in expected if j != k] for k in expected}


def fuse_step(
    node: NodeState, provider: BaseMaskProvider, config: SeparationConfig
) -> np.ndarray:
    """Second step: Wiener filter over local mics and received signals.

    Args:
        node (NodeState): Node after the local step, with `received` filled.
        provider (BaseMaskProvider): Source of the second-step mask.
        config (SeparationConfig): Loading and silent-channel handling.

    Returns:
        np.ndarray: The estimate waveform, as long as the mixture.
    """
    if node.compressed_out is None:
        raise ProtocolError("Fusion requested before the local step", node.node_id, "fuse")

    kept = []
    node.dropped = []
    for message in node.received:
        if config.exclude_silent and message.silence_flag:
            node.dropped.append(message.sender_id)
            continue
        kept.append(message.payload)
    if node.dropped:
        logger.info(f"Node {node.node_id} ignores silent signals of node(s) {node.dropped}")
    node.stacked = SpectrogramTensor.concatenate([node.local_spec, *kept])

    mask = provider(node, SECOND_STEP)
    mask.check_matches(node.stacked)
    node.mask_step2 = mask

    cov = estimate_covariances(node.stacked, mask)
    node.w_fused = compute_mwf(cov, REF_INDEX, config.loading)
    if node.w_fused.degeneracy.count:
        logger.warning(
            f"Node {node.node_id}: {node.w_fused.degeneracy.count} degenerate bins in the fused filter"
        )
    out = apply_filterbank(node.w_fused, node.stacked)
    node.estimate = istft(out, out.config, node.n_samples)[0]
    return node.estimate
