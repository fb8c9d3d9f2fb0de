"""Dry speech material: a directory of clean recordings or synthetic speech-like noise."""

import glob
import logging
import os

import numpy as np
import soundfile as sf
from scipy.signal import butter, sosfilt

from adhocsep.errors import CorpusError, FormatError

logger = logging.getLogger(__name__)

AUDIO_EXTENSIONS = (".wav", ".flac")


def list_corpus(corpus_dir: str, sample_rate_hz: int = 16000) -> list[str]:
    """Mono files of the right rate below `corpus_dir`, sorted by path."""
    if not os.path.isdir(corpus_dir):
        raise FileNotFoundError(f"Corpus directory not found: {corpus_dir}")
    files = []
    for path in sorted(glob.glob(os.path.join(corpus_dir, "**", "*"), recursive=True)):
        if not path.lower().endswith(AUDIO_EXTENSIONS):
            continue
        info = sf.info(path)
        if info.samplerate != sample_rate_hz or info.channels != 1:
            logger.warning(
                f"Skipping {path}: {info.channels} channel(s) at {info.samplerate} Hz"
            )
            continue
        files.append(path)
    if not files:
        raise CorpusError(f"No usable {sample_rate_hz} Hz mono files in {corpus_dir}")
    return files


def select_sources(
    files: list[str], n_sources: int, seed: int, duration_s: float, sample_rate_hz: int = 16000
) -> list[np.ndarray]:
    """Draw `n_sources` distinct files and cut or loop each to `duration_s`."""
    if n_sources > len(files):
        raise CorpusError(f"Need {n_sources} distinct files, corpus has {len(files)}")
    rng = np.random.default_rng(seed)
    n_samples = int(round(duration_s * sample_rate_hz))
    sources = []
    for index in rng.choice(len(files), size=n_sources, replace=False):
        data, rate = sf.read(files[index], dtype="float64")
        if rate != sample_rate_hz:
            raise FormatError(f"{files[index]} is sampled at {rate} Hz, expected {sample_rate_hz}")
        if data.ndim != 1 or data.size == 0:
            raise FormatError(f"{files[index]} is not a non-empty mono recording")
        sources.append(np.resize(data, n_samples))
    return sources


def synthetic_sources(
    n_sources: int, duration_s: float, sample_rate_hz: int = 16000, seed: int = 0
) -> list[np.ndarray]:
    """Speech-like test signals: band-limited noise gated by a slow random envelope.

    Every source gets its own pass band and syllable-rate envelope, so the sources are
    sparse and mostly disjoint in the time-frequency plane, like real talkers.
    """
    rng = np.random.default_rng(seed)
    n_samples = int(round(duration_s * sample_rate_hz))
    nyquist = sample_rate_hz / 2
    envelope_sos = butter(2, 4.0, btype="low", fs=sample_rate_hz, output="sos")
    sources = []
    for _ in range(n_sources):
        low = rng.uniform(80.0, 300.0)
        high = min(rng.uniform(3000.0, 6000.0), 0.9 * nyquist)
        band_sos = butter(4, [low, high], btype="band", fs=sample_rate_hz, output="sos")
        carrier = sosfilt(band_sos, rng.standard_normal(n_samples))
        envelope = sosfilt(envelope_sos, rng.standard_normal(n_samples))
        envelope = np.maximum(envelope / (np.std(envelope) + 1e-12), 0.0) ** 2
        signal = carrier * envelope
        sources.append(signal / np.sqrt(np.mean(signal**2) + 1e-20))
    return sources
