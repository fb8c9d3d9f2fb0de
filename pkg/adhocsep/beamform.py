"""Mask-based spatial covariance estimation and the multichannel Wiener filter.

Shape convention: covariances are stored frequency first, `(bins, channels, channels)`,
filters as `(bins, channels)`, spectrograms as `(channels, frames, bins)`.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from adhocsep.errors import EstimationError, FormatError
from adhocsep.masks import TfMask
from adhocsep.masks.tensor_file import write_tensor
from adhocsep.signal import SpectrogramTensor

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CovarianceSet:
    """Per-frequency mixture and target covariance matrices.

    Attributes:
        r_y (np.ndarray): Mixture covariance, shape (bins, M, M).
        r_s (np.ndarray): Target covariance, shape (bins, M, M).
        frame_count (int): Number of frames averaged.
    """

    r_y: np.ndarray
    r_s: np.ndarray
    frame_count: int

    @property
    def n_channels(self) -> int:
        return int(self.r_y.shape[-1])

    @property
    def n_bins(self) -> int:
        return int(self.r_y.shape[0])


@dataclass(frozen=True)
class DegeneracyReport:
    """Bins where the Wiener solve could not be trusted and `e_ref` was used instead."""

    bins: tuple[int, ...] = ()
    reasons: tuple[str, ...] = ()

    @property
    def count(self) -> int:
        return len(self.bins)

    def to_dict(self) -> dict:
        return {"count": self.count, "bins": list(self.bins), "reasons": list(self.reasons)}


@dataclass(frozen=True, eq=False)
class FilterBank:
    """One complex weight vector per frequency bin.

    Attributes:
        weights (np.ndarray): Shape (bins, M).
        ref_index (int): Channel selected by `e_ref`.
        loading_used (float): Relative diagonal loading of the solve.
        degeneracy (DegeneracyReport): Bins that fell back to `e_ref`.
    """

    weights: np.ndarray
    ref_index: int = 0
    loading_used: float = 0.0
    degeneracy: DegeneracyReport = field(default_factory=DegeneracyReport)

    @property
    def n_channels(self) -> int:
        return int(self.weights.shape[-1])


def estimate_covariances(spec: SpectrogramTensor, mask: TfMask) -> CovarianceSet:
    """Estimate `R_y` and `R_s` over the whole utterance.

    `R_y(f) = 1/T sum_t y y^H` and `R_s(f) = 1/T sum_t s s^H` with `s = mask * y`, the same
    mask being applied to every channel.

    Args:
        spec (SpectrogramTensor): M-channel mixture spectrogram.
        mask (TfMask): Mask of shape (frames, bins).

    Returns:
        CovarianceSet: Covariances of shape (bins, M, M).
    """
    mask.check_matches(spec)
    n_frames = spec.n_frames
    if n_frames == 0:
        raise EstimationError("Cannot estimate covariances from zero frames")
    y = spec.data
    s = mask.values[np.newaxis] * y
    r_y = np.einsum("ctf,dtf->fcd", y, y.conj()) / n_frames
    r_s = np.einsum("ctf,dtf->fcd", s, s.conj()) / n_frames
    return CovarianceSet(r_y, r_s, n_frames)


def compute_mwf(
    cov: CovarianceSet, ref_index: int = 0, loading: float = 1e-9
) -> FilterBank:
    """Solve `(R_y + loading * tr(R_y) / M * I) w = R_s e_ref` in every bin.

    Bins whose system is empty, singular or yields non-finite weights fall back to
    `w = e_ref` and are listed in the degeneracy report.

    Args:
        cov (CovarianceSet): Covariances of shape (bins, M, M).
        ref_index (int, optional): Reference channel. Defaults to 0.
        loading (float, optional): Relative diagonal loading, >= 0. Defaults to 1e-9.

    Returns:
        FilterBank: Weights of shape (bins, M).
    """
    n_bins, m = cov.n_bins, cov.n_channels
    if cov.r_s.shape != cov.r_y.shape:
        raise FormatError(f"R_y {cov.r_y.shape} and R_s {cov.r_s.shape} differ in shape")
    if not 0 <= ref_index < m:
        raise FormatError(f"Reference index {ref_index} out of range for {m} channels")
    if loading < 0:
        raise FormatError(f"Diagonal loading must be non-negative, got {loading}")

    trace = np.real(np.trace(cov.r_y, axis1=-2, axis2=-1))
    a = cov.r_y + (loading * trace / m)[:, np.newaxis, np.newaxis] * np.eye(m)
    b = cov.r_s[:, :, ref_index]
    e_ref = np.zeros(m, dtype=np.complex128)
    e_ref[ref_index] = 1.0

    weights = np.tile(e_ref, (n_bins, 1))
    reasons: dict[int, str] = {}
    valid = (trace > 0) & np.all(np.isfinite(a), axis=(-2, -1))
    for f in np.flatnonzero(~valid):
        reasons[int(f)] = "empty" if trace[f] == 0 else "non-finite"

    candidates = np.flatnonzero(valid)
    if candidates.size:
        try:
            solved = np.linalg.solve(a[candidates], b[candidates][..., np.newaxis])[..., 0]
        except np.linalg.LinAlgError:
            solved = np.empty((candidates.size, m), dtype=np.complex128)
            for i, f in enumerate(candidates):
                try:
                    solved[i] = np.linalg.solve(a[f], b[f])
                except np.linalg.LinAlgError:
                    solved[i] = np.nan
        finite = np.all(np.isfinite(solved), axis=-1)
        weights[candidates[finite]] = solved[finite]
        for f in candidates[~finite]:
            reasons[int(f)] = "singular"

    degenerate = sorted(reasons)
    if degenerate:
        logger.debug(f"{len(degenerate)}/{n_bins} degenerate bins fell back to e_ref")
    report = DegeneracyReport(tuple(degenerate), tuple(reasons[f] for f in degenerate))
    return FilterBank(weights, ref_index, loading, report)


def apply_filterbank(fb: FilterBank, spec: SpectrogramTensor) -> SpectrogramTensor:
    """Single-channel output `w(f)^H y(f, t)`."""
    if spec.n_channels != fb.n_channels:
        raise FormatError(
            f"Filter has {fb.n_channels} channels, spectrogram has {spec.n_channels}"
        )
    if spec.n_bins != fb.weights.shape[0]:
        raise FormatError(f"Filter has {fb.weights.shape[0]} bins, spectrogram has {spec.n_bins}")
    out = np.einsum("fc,ctf->tf", fb.weights.conj(), spec.data)
    return SpectrogramTensor(out[np.newaxis], spec.config, ["out"])


def export_filterbank(fb: FilterBank, path: str) -> None:
    write_tensor(
        path,
        fb.weights,
        metadata={
            "kind": "filterbank",
            "ref_index": fb.ref_index,
            "loading_used": fb.loading_used,
            "degeneracy": fb.degeneracy.to_dict(),
        },
    )


def export_covariances(cov: CovarianceSet, path_prefix: str) -> None:
    meta = {"kind": "covariance", "frame_count": cov.frame_count}
    write_tensor(f"{path_prefix}_ry.dstnsr", cov.r_y, metadata=meta)
    write_tensor(f"{path_prefix}_rs.dstnsr", cov.r_s, metadata=meta)


