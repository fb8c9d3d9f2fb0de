"""Room impulse responses of a shoebox room with the image source method.

Images are enumerated per axis and combined by broadcasting; every image whose travel time
falls inside the response length contributes a windowed-sinc pulse at its fractional delay.
Delays are quantized to `1 / oversampling` of a sample so that all pulses of one response
can be accumulated in a small table and rendered with a single FFT convolution.
"""

import logging
import math
from dataclasses import dataclass
from multiprocessing.dummy import Pool as ThreadPool

import numpy as np
from omegaconf import DictConfig
from scipy import fft

from adhocsep.errors import EstimationError, InfeasibleAcousticsError

from .geometry import RoomSpec, SceneSpec, Vector3

logger = logging.getLogger(__name__)

SABINE_CONSTANT = 0.161


def t60_to_absorption(t60_s: float, room: RoomSpec) -> float:
    """Uniform wall absorption giving the target reverberation time with Sabine's formula.

    Args:
        t60_s (float): Target reverberation time in seconds.
        room (RoomSpec): The room; only its dimensions are used.

    Returns:
        float: Absorption coefficient in (0, 1).

    Raises:
        InfeasibleAcousticsError: The target time is non-positive or too short for the room.
    """
    if t60_s <= 0:
        raise InfeasibleAcousticsError(f"T60 must be positive, got {t60_s}")
    alpha = SABINE_CONSTANT * room.volume / (room.surface * t60_s)
    if alpha >= 1.0:
        raise InfeasibleAcousticsError(
            f"T60={t60_s:.3f} s is too short for a {room.length_m:.2f} x {room.width_m:.2f} x "
            f"{room.height_m:.2f} m room (absorption {alpha:.3f} >= 1)"
        )
    return alpha


@dataclass(frozen=True)
class RirConfig:
    """Impulse response settings.

    Attributes:
        length_factor (float): Response length as a multiple of T60.
        sinc_taps (int): Taps of the fractional delay filter.
        oversampling (int): Delay resolution is `1 / oversampling` of a sample.
        min_distance_m (float): Closest allowed source-to-mic distance.
        calibration_steps (int): Absorption updates made so that the Schroeder T60 of the
            first response meets the target. 0 keeps the Sabine absorption.
        calibration_tolerance (float): Relative T60 error at which calibration stops.
    """

    length_factor: float = 1.2
    sinc_taps: int = 81
    oversampling: int = 128
    min_distance_m: float = 1e-3
    calibration_steps: int = 8
    calibration_tolerance: float = 0.02

    @staticmethod
    def from_config(cfg: DictConfig | dict) -> "RirConfig":
        return RirConfig(**dict(cfg))

    def n_taps(self, t60_s: float, sample_rate_hz: int) -> int:
        return int(math.ceil(self.length_factor * t60_s * sample_rate_hz))


@dataclass(frozen=True, eq=False)
class RirSet:
    """Impulse responses from every source to every mic of every node.

    Attributes:
        rirs (list[np.ndarray]): One array per node, shape (mics, sources, taps).
        sample_rate_hz (int): Sampling rate of the responses.
        direct_delays (list[np.ndarray]): Direct-path delay in samples, one (mics, sources)
            array per node.
        absorption (float): Wall absorption used for the simulation.
    """

    rirs: list[np.ndarray]
    sample_rate_hz: int
    direct_delays: list[np.ndarray]
    absorption: float

    @property
    def n_nodes(self) -> int:
        return len(self.rirs)

    @property
    def n_sources(self) -> int:
        return int(self.rirs[0].shape[1])

    @property
    def n_taps(self) -> int:
        return int(self.rirs[0].shape[2])


def _fractional_delay_kernels(taps: int, oversampling: int) -> np.ndarray:
    """Hann-windowed sinc pulses delayed by `p / oversampling` samples, shape (oversampling, taps)."""
    half = taps // 2
    fraction = np.arange(oversampling)[:, np.newaxis] / oversampling
    return np.hanning(taps)[np.newaxis] * np.sinc(np.arange(taps)[np.newaxis] - half - fraction)


def _axis_images(
    coord: float, extent: float, max_distance: float, reflective: bool
) -> tuple[np.ndarray, np.ndarray]:
    """Image coordinates along one axis and their reflection counts."""
    if not reflective:
        return np.array([coord]), np.array([0])
    n_max = int(math.ceil(max_distance / (2.0 * extent))) + 1
    m = np.arange(-n_max, n_max + 1)
    coords = np.concatenate([coord + 2 * m * extent, -coord + 2 * m * extent])
    reflections = np.concatenate([2 * np.abs(m), np.abs(m - 1) + np.abs(m)])
    return coords, reflections


class _ImageSourceModel:
    def __init__(
        self, room: RoomSpec, absorption: float, sample_rate_hz: int, speed_of_sound: float, config: RirConfig
    ) -> None:
        self.room = room
        self.sample_rate_hz = sample_rate_hz
        self.speed_of_sound = speed_of_sound
        self.config = config
        self.beta = math.sqrt(1.0 - absorption)
        self.length = config.n_taps(room.t60_s, sample_rate_hz)
        self.max_distance = self.length / sample_rate_hz * speed_of_sound
        self.nfft = fft.next_fast_len(self.length + config.sinc_taps - 1, real=True)
        kernels = _fractional_delay_kernels(config.sinc_taps, config.oversampling)
        self.kernel_spectra = fft.rfft(kernels, self.nfft, axis=-1)

    def response(self, source: Vector3, mic: Vector3) -> tuple[np.ndarray, float]:
        """Impulse response from `source` to `mic` and the direct-path delay in samples."""
        fs, c, cfg = self.sample_rate_hz, self.speed_of_sound, self.config
        reflective = self.beta > 0
        axes = []
        for s, r, extent in zip(source, mic, self.room.dimensions):
            coords, reflections = _axis_images(s, extent, self.max_distance, reflective)
            offsets = coords - r
            keep = np.abs(offsets) <= self.max_distance
            axes.append((offsets[keep], reflections[keep]))
        (dx, rx), (dy, ry), (dz, rz) = axes

        dist = np.sqrt(
            dx[:, None, None] ** 2 + dy[None, :, None] ** 2 + dz[None, None, :] ** 2
        )
        order = rx[:, None, None] + ry[None, :, None] + rz[None, None, :]
        audible = dist <= self.max_distance
        dist, order = dist[audible], order[audible]

        direct = math.dist(source, mic)
        if direct < cfg.min_distance_m:
            raise InfeasibleAcousticsError(f"Source and mic coincide ({direct:.2e} m apart)")
        amplitude = self.beta ** order / (4 * math.pi * dist)

        delay = np.rint(dist / c * fs * cfg.oversampling).astype(np.int64)
        whole, fraction = np.divmod(delay, cfg.oversampling)
        inside = whole < self.length
        table = np.bincount(
            fraction[inside] * self.length + whole[inside],
            weights=amplitude[inside],
            minlength=cfg.oversampling * self.length,
        ).reshape(cfg.oversampling, self.length)

        spectrum = (fft.rfft(table, self.nfft, axis=-1) * self.kernel_spectra).sum(axis=0)
        half = cfg.sinc_taps // 2
        rir = fft.irfft(spectrum, self.nfft)[half : half + self.length]
        return rir, direct / c * fs


def calibrate_absorption(scene: SceneSpec, config: RirConfig | None = None) -> float:
    """Wall absorption whose simulated decay meets the scene T60.

    Starts from the Sabine absorption and rescales the per-reflection energy loss
    `-ln(1 - alpha)` by the ratio of the Schroeder T60 of the first (source, mic) response
    to the target, until the ratio is within `calibration_tolerance`.

    Args:
        scene (SceneSpec): Room, sources and node mics.
        config (RirConfig | None, optional): Response and calibration settings.

    Returns:
        float: Absorption coefficient in (0, 1).

    Raises:
        InfeasibleAcousticsError: The Sabine absorption is not in (0, 1).
    """
    config = config or RirConfig()
    target = scene.room.t60_s
    alpha = t60_to_absorption(target, scene.room)
    source = scene.sources[0].position_xyz
    mic = scene.nodes[0].mic_positions_xyz[0]
    for _ in range(config.calibration_steps):
        model = _ImageSourceModel(
            scene.room, alpha, scene.sample_rate_hz, scene.speed_of_sound, config
        )
        rir, _ = model.response(source, mic)
        try:
            estimated = estimate_t60(rir, scene.sample_rate_hz)
        except EstimationError as e:
            logger.warning(f"T60 calibration stopped at absorption {alpha:.4f}: {e}")
            break
        ratio = estimated / target
        if abs(ratio - 1.0) <= config.calibration_tolerance:
            break
        alpha = 1.0 - math.exp(math.log1p(-alpha) * ratio)
    else:
        if config.calibration_steps:
            logger.warning(
                f"T60 calibration did not converge for target {target:.3f} s (absorption {alpha:.4f})"
            )
    return alpha


def compute_rirs(
    scene: SceneSpec,
    config: RirConfig | None = None,
    absorption: float | None = None,
    jobs: int = 1,
) -> RirSet:
    """Simulate the impulse responses of a scene.

    Args:
        scene (SceneSpec): Room, sources and node mics.
        config (RirConfig | None, optional): Response length and interpolation settings.
        absorption (float | None, optional): Overrides the calibrated absorption of the
            scene T60. `1.0` keeps the direct path only.
        jobs (int, optional): Worker threads. The result does not depend on it.

    Returns:
        RirSet: One (mics, sources, taps) array per node.
    """
    config = config or RirConfig()
    if absorption is None:
        absorption = calibrate_absorption(scene, config)
    if not 0.0 <= absorption <= 1.0:
        raise InfeasibleAcousticsError(f"Absorption must lie in [0, 1], got {absorption}")
    model = _ImageSourceModel(
        scene.room, absorption, scene.sample_rate_hz, scene.speed_of_sound, config
    )
    pairs = [
        (k, m, n)
        for k, node in enumerate(scene.nodes)
        for m in range(node.n_mics)
        for n in range(scene.n_sources)
    ]

    def simulate(pair: tuple[int, int, int]) -> tuple[np.ndarray, float]:
        k, m, n = pair
        return model.response(scene.sources[n].position_xyz, scene.nodes[k].mic_positions_xyz[m])

    logger.debug(
        f"Simulating {len(pairs)} responses of {model.length} taps (absorption={absorption:.3f})"
    )
    if jobs > 1:
        with ThreadPool(jobs) as pool:
            results = pool.map(simulate, pairs)
    else:
        results = [simulate(pair) for pair in pairs]

    rirs = [np.zeros((node.n_mics, scene.n_sources, model.length)) for node in scene.nodes]
    delays = [np.zeros((node.n_mics, scene.n_sources)) for node in scene.nodes]
    for (k, m, n), (rir, delay) in zip(pairs, results):
        rirs[k][m, n] = rir
        delays[k][m, n] = delay
    return RirSet(rirs, scene.sample_rate_hz, delays, float(absorption))


def energy_decay_curve(rir: np.ndarray) -> np.ndarray:
    """Schroeder backward-integrated energy in dB relative to the total energy."""
    energy = np.asarray(rir, dtype=np.float64) ** 2
    edc = np.cumsum(energy[::-1])[::-1]
    if edc[0] <= 0:
        raise EstimationError("Cannot estimate T60 of an all-zero response")
    with np.errstate(divide="ignore"):
        return 10 * np.log10(edc / edc[0])


def estimate_t60(
    rir: np.ndarray, sample_rate_hz: int, fit_range_db: tuple[float, float] = (-5.0, -25.0)
) -> float:
    """Reverberation time from the Schroeder energy decay curve.

    A line is fitted to the decay curve between the two levels of `fit_range_db` and
    extrapolated to a 60 dB decay.
    """
    edc_db = energy_decay_curve(rir)
    upper, lower = fit_range_db
    start = int(np.argmax(edc_db <= upper))
    below = edc_db <= lower
    if not below.any():
        raise EstimationError(f"The decay curve never reaches {lower} dB")
    stop = int(np.argmax(below))
    if stop - start < 2:
        raise EstimationError("Too few samples in the decay fit range")
    t = np.arange(start, stop) / sample_rate_hz
    slope, _ = np.polyfit(t, edc_db[start:stop], 1)
    if slope >= 0:
        raise EstimationError("The decay curve does not decrease")
    return float(-60.0 / slope)
