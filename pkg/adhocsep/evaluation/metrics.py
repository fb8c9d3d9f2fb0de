import numpy as np

from adhocsep.errors import FormatError, MetricError

SI_SDR_CAP_DB = 100.0


def _unit(signal: np.ndarray) -> np.ndarray | None:
    """`signal` scaled to unit norm, or None when it is identically zero."""
    peak = float(np.max(np.abs(signal))) if signal.size else 0.0
    if peak == 0:
        return None
    scaled = signal / peak
    return scaled / np.linalg.norm(scaled)


def si_sdr(estimate: np.ndarray, reference: np.ndarray) -> float:
    """Scale-invariant signal-to-distortion ratio in dB.

    The reference is scaled by `alpha = <estimate, reference> / ||reference||^2`; the
    result is `10 log10(||alpha x||^2 / ||alpha x - estimate||^2)`. No mean is removed.
    Both signals are brought to unit norm first, so the value does not depend on their
    scale down to the smallest and up to the largest representable amplitudes.
    Values are limited to [-100, 100] dB. The upper bound is reached when the error
    vanishes, the lower one when the estimate is silent or orthogonal to the reference.

    Args:
        estimate (np.ndarray): Estimated signal, 1-D.
        reference (np.ndarray): Reference signal of the same length.

    Returns:
        float: SI-SDR in dB.

    Raises:
        FormatError: The signals differ in shape.
        MetricError: The reference is identically zero.

    Examples:
        >>> round(si_sdr(np.array([1.0, 1.0]), np.array([1.0, 0.0])), 6)
        0.0
    """
    x_hat = np.asarray(estimate, dtype=np.float64).ravel()
    x = np.asarray(reference, dtype=np.float64).ravel()
    if x_hat.shape != x.shape:
        raise FormatError(f"Estimate has {x_hat.size} samples, reference has {x.size}")
    x = _unit(x)
    if x is None:
        raise MetricError("SI-SDR is undefined for an all-zero reference")
    x_hat = _unit(x_hat)
    if x_hat is None:
        return -SI_SDR_CAP_DB

    rho = float(np.dot(x_hat, x))
    signal_power = rho * rho
    error = rho * x - x_hat
    error_power = float(np.dot(error, error))
    if signal_power == 0 or signal_power < 1e-10 * error_power:
        return -SI_SDR_CAP_DB
    if error_power == 0 or signal_power > 1e10 * error_power:
        return SI_SDR_CAP_DB
    return float(10 * np.log10(signal_power / error_power))


def si_sdr_matrix(estimates: list[np.ndarray], references: list[np.ndarray]) -> np.ndarray:
    """SI-SDR of every estimate (rows) against every reference (columns)."""
    return np.array([[si_sdr(e, r) for r in references] for e in estimates])
