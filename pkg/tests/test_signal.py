import numpy as np
import pytest

from adhocsep.errors import FormatError
from adhocsep.signal import (
    SpectrogramTensor,
    StftConfig,
    istft,
    load_spectrogram,
    save_spectrogram,
    stft,
)


def test_stft_shape() -> None:
    spec = stft(np.zeros((3, 16000)), StftConfig())
    assert spec.data.shape == (3, 61, 257)
    assert spec.channel_labels == ["mic0", "mic1", "mic2"]


def test_stft_of_sinusoid_peaks_at_its_bin() -> None:
    config = StftConfig()
    t = np.arange(16000) / 16000
    # bin 32 of a 512-point transform at 16 kHz
    spec = stft(np.sin(2 * np.pi * 1000.0 * t), config)
    peaks = np.argmax(np.abs(spec.data[0]), axis=-1)
    assert np.all(peaks == 32)


def test_istft_inverts_interior_without_padding(rng: np.random.Generator) -> None:
    config = StftConfig()
    x = rng.standard_normal((2, 16000))
    y = istft(stft(x, config), config, x.shape[-1])
    assert y.shape == x.shape
    interior = slice(config.window_len, 16000 - 2 * config.window_len)
    np.testing.assert_allclose(y[:, interior], x[:, interior], atol=1e-10)


@pytest.mark.parametrize("n_samples", [16000, 12345, 700])
def test_istft_inverts_whole_signal_with_padding(rng: np.random.Generator, n_samples: int) -> None:
    config = StftConfig(center=True)
    x = rng.standard_normal((1, n_samples))
    y = istft(stft(x, config), config, n_samples)
    np.testing.assert_allclose(y, x, atol=1e-10)


def test_stft_is_linear(rng: np.random.Generator) -> None:
    for config in (StftConfig(), StftConfig(center=True)):
        x, y = rng.standard_normal((2, 3, 5000))
        for a, b in ((0.7, -1.3), (1e3, 2.0), (-0.01, 0.0)):
            combined = stft(a * x + b * y, config).data
            separate = a * stft(x, config).data + b * stft(y, config).data
            assert np.max(np.abs(combined - separate)) <= 1e-12 * np.max(np.abs(separate))


def test_frame_energy_is_preserved(rng: np.random.Generator) -> None:
    config = StftConfig()
    x = rng.standard_normal(4000)
    spec = stft(x, config).data[0]
    window = config.analysis_window()
    n = config.window_len
    for t in range(spec.shape[0]):
        frame = x[t * config.hop : t * config.hop + n] * window
        bins = np.abs(spec[t]) ** 2
        # one-sided: every bin but DC and Nyquist stands for two
        spectral = (bins[0] + bins[-1] + 2 * np.sum(bins[1:-1])) / n
        assert spectral == pytest.approx(np.sum(frame**2), rel=1e-9)


def test_stft_rejects_rate_mismatch() -> None:
    with pytest.raises(FormatError):
        stft(np.zeros(16000), StftConfig(), sample_rate_hz=8000)


def test_stft_rejects_empty_and_3d_input() -> None:
    with pytest.raises(FormatError):
        stft(np.zeros(0), StftConfig())
    with pytest.raises(FormatError):
        stft(np.zeros((2, 2, 100)), StftConfig())


def test_invalid_framing() -> None:
    with pytest.raises(FormatError):
        StftConfig(window_len=256, hop=512)


def test_istft_rejects_other_config() -> None:
    spec = stft(np.zeros(4000), StftConfig())
    with pytest.raises(FormatError):
        istft(spec, StftConfig(center=True), 4000)


def test_concatenate_keeps_order_and_labels() -> None:
    config = StftConfig()
    a = stft(np.ones((2, 4000)), config)
    b = stft(np.zeros(4000), config, channel_labels=["z1"])
    stacked = SpectrogramTensor.concatenate([a, b])
    assert stacked.channel_labels == ["mic0", "mic1", "z1"]
    np.testing.assert_array_equal(stacked.data[:2], a.data)
    np.testing.assert_array_equal(stacked.data[2], b.data[0])

    with pytest.raises(FormatError):
        SpectrogramTensor.concatenate([a, stft(np.zeros(8000), config)])


def test_spectrogram_file(tmp_path, rng: np.random.Generator) -> None:
    config = StftConfig(center=True)
    spec = stft(rng.standard_normal((2, 3000)), config, channel_labels=["mic0", "z3"])
    path = str(tmp_path / "spec.dstnsr")
    save_spectrogram(spec, path)
    loaded = load_spectrogram(path)
    assert loaded.config == config
    assert loaded.channel_labels == ["mic0", "z3"]
    np.testing.assert_array_equal(loaded.data, spec.data)


if __name__ == "__main__":
    test_stft_shape()
