import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from omegaconf import DictConfig
from scipy import fft as sp_fft
from scipy.signal import get_window

from adhocsep.errors import FormatError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StftConfig:
    """Framing of the short-time Fourier transform.

    Args:
        sample_rate_hz (int, optional): Sampling frequency. Defaults to 16000.
        window_len (int, optional): Window and transform length in samples. Defaults to 512 (32 ms).
        hop (int, optional): Frame shift in samples. Defaults to 256 (16 ms).
        window (str, optional): Any window name understood by `scipy.signal.get_window`.
            The periodic variant is used. Defaults to "hann".
        center (bool, optional): Pad `window_len - hop` zeros in front and complete the
            last frame with zeros so every sample is covered by the same number of frames.
            Defaults to False.
    """

    sample_rate_hz: int = 16000
    window_len: int = 512
    hop: int = 256
    window: str = "hann"
    center: bool = False

    def __post_init__(self) -> None:
        if self.window_len <= 0 or self.hop <= 0 or self.hop > self.window_len:
            raise FormatError(
                f"Invalid framing: window_len={self.window_len}, hop={self.hop}"
            )

    @property
    def n_bins(self) -> int:
        return self.window_len // 2 + 1

    @property
    def pad_front(self) -> int:
        return self.window_len - self.hop if self.center else 0

    def analysis_window(self) -> np.ndarray:
        return get_window(self.window, self.window_len, fftbins=True).astype(np.float64)

    def n_frames(self, n_samples: int) -> int:
        total = n_samples + self.pad_front
        if total <= self.window_len:
            return 1
        if self.center:
            return math.ceil((total - self.window_len) / self.hop) + 1
        return (total - self.window_len) // self.hop + 1

    @staticmethod
    def from_config(cfg: DictConfig | dict) -> "StftConfig":
        return StftConfig(**dict(cfg))


@dataclass
class SpectrogramTensor:
    """Complex STFT data indexed `[channel, frame, frequency]`.

    Attributes:
        data (np.ndarray): Complex array of shape (channels, frames, bins).
        config (StftConfig): The framing the data was computed with.
        channel_labels (list[str]): One role tag per channel, e.g. `"mic0"` for a local
            microphone or `"z2"` for the compressed signal received from node 2.
    """

    data: np.ndarray
    config: StftConfig
    channel_labels: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.data.ndim != 3:
            raise FormatError(
                f"Spectrogram data must be 3-D (channel, frame, bin), got shape {self.data.shape}"
            )
        if not self.channel_labels:
            self.channel_labels = [f"mic{c}" for c in range(self.data.shape[0])]
        if len(self.channel_labels) != self.data.shape[0]:
            raise FormatError(
                f"{len(self.channel_labels)} labels for {self.data.shape[0]} channels"
            )

    @property
    def n_channels(self) -> int:
        return int(self.data.shape[0])

    @property
    def n_frames(self) -> int:
        return int(self.data.shape[1])

    @property
    def n_bins(self) -> int:
        return int(self.data.shape[2])

    def select(self, channels: list[int]) -> "SpectrogramTensor":
        return SpectrogramTensor(
            self.data[channels], self.config, [self.channel_labels[c] for c in channels]
        )

    @staticmethod
    def concatenate(tensors: list["SpectrogramTensor"]) -> "SpectrogramTensor":
        """Stack tensors along the channel axis, keeping the given order."""
        if not tensors:
            raise FormatError("Nothing to concatenate")
        first = tensors[0]
        for t in tensors[1:]:
            if t.config != first.config:
                raise FormatError("Cannot stack spectrograms with different STFT configs")
            if t.data.shape[1:] != first.data.shape[1:]:
                raise FormatError(
                    f"Frame/bin mismatch: {t.data.shape[1:]} vs {first.data.shape[1:]}"
                )
        labels = [label for t in tensors for label in t.channel_labels]
        return SpectrogramTensor(
            np.concatenate([t.data for t in tensors], axis=0), first.config, labels
        )

    def relabel(self, channel_labels: list[str]) -> "SpectrogramTensor":
        return replace(self, channel_labels=list(channel_labels))


def _as_2d(waveform: np.ndarray) -> np.ndarray:
    x = np.asarray(waveform, dtype=np.float64)
    if x.ndim == 1:
        x = x[np.newaxis]
    if x.ndim != 2:
        raise FormatError(f"Waveform must be 1-D or 2-D (channel, sample), got {x.shape}")
    return x


def stft(
    waveform: np.ndarray,
    config: StftConfig,
    sample_rate_hz: int | None = None,
    channel_labels: list[str] | None = None,
) -> SpectrogramTensor:
    """Compute the one-sided STFT of a (multichannel) waveform.

    Args:
        waveform (np.ndarray): Samples of shape (samples,) or (channels, samples).
        config (StftConfig): Framing parameters.
        sample_rate_hz (int | None, optional): Sample rate of the waveform, checked against the config.
        channel_labels (list[str] | None, optional): Role tags of the channels.

    Returns:
        SpectrogramTensor: Data of shape (channels, frames, window_len // 2 + 1).

    Examples:
        >>> spec = stft(np.zeros(16000), StftConfig())
        >>> spec.data.shape
        (1, 61, 257)
    """
    if sample_rate_hz is not None and sample_rate_hz != config.sample_rate_hz:
        raise FormatError(
            f"Sample rate {sample_rate_hz} Hz does not match STFT config {config.sample_rate_hz} Hz"
        )
    x = _as_2d(waveform)
    if x.shape[-1] == 0:
        raise FormatError("Cannot transform an empty waveform")

    n_frames = config.n_frames(x.shape[-1])
    needed = (n_frames - 1) * config.hop + config.window_len
    pad_back = max(0, needed - config.pad_front - x.shape[-1])
    x = np.pad(x, ((0, 0), (config.pad_front, pad_back)))[:, :needed]

    frames = np.lib.stride_tricks.sliding_window_view(x, config.window_len, axis=-1)
    frames = frames[:, :: config.hop][:, :n_frames]
    data = sp_fft.rfft(frames * config.analysis_window(), n=config.window_len, axis=-1)
    return SpectrogramTensor(data, config, list(channel_labels or []))


def istft(spec: SpectrogramTensor, config: StftConfig, out_len: int) -> np.ndarray:
    """Weighted overlap-add synthesis.

    Each inverse-transformed frame is weighted by the analysis window and the sum is
    normalized by the overlap-added squared window, which inverts `stft` wherever that
    envelope is non-zero.

    Args:
        spec (SpectrogramTensor): Spectrogram produced with `config`.
        config (StftConfig): Framing parameters.
        out_len (int): Length of the returned waveform; the signal is trimmed or zero-padded.

    Returns:
        np.ndarray: Waveform of shape (channels, out_len).
    """
    if spec.config != config:
        raise FormatError(f"Spectrogram was computed with {spec.config}, not {config}")
    if spec.n_bins != config.n_bins:
        raise FormatError(f"Expected {config.n_bins} bins, got {spec.n_bins}")

    window = config.analysis_window()
    frames = sp_fft.irfft(spec.data, n=config.window_len, axis=-1) * window
    n_frames = spec.n_frames
    total = (n_frames - 1) * config.hop + config.window_len
    y = np.zeros((spec.n_channels, total))
    envelope = np.zeros(total)
    w2 = window**2
    for i in range(n_frames):
        start = i * config.hop
        y[:, start : start + config.window_len] += frames[:, i]
        envelope[start : start + config.window_len] += w2

    nonzero = envelope > np.finfo(np.float64).tiny
    y[:, nonzero] /= envelope[nonzero]
    y[:, ~nonzero] = 0.0

    y = y[:, config.pad_front :]
    if y.shape[-1] >= out_len:
        return y[:, :out_len]
    return np.pad(y, ((0, 0), (0, out_len - y.shape[-1])))


def save_spectrogram(spec: SpectrogramTensor, path: str) -> None:
    from adhocsep.masks.tensor_file import write_tensor

    write_tensor(
        path,
        spec.data,
        metadata={
            "kind": "spectrogram",
            "channel_labels": spec.channel_labels,
            "stft": asdict(spec.config),
        },
    )


def load_spectrogram(path: str) -> SpectrogramTensor:
    from adhocsep.masks.tensor_file import read_tensor, read_tensor_metadata

    data = read_tensor(path)
    metadata = read_tensor_metadata(path)
    if metadata is None or "stft" not in metadata:
        raise FormatError(f"{path} has no STFT metadata sidecar")
    return SpectrogramTensor(
        data.astype(np.complex128),
        StftConfig(**metadata["stft"]),
        list(metadata.get("channel_labels", [])),
    )
