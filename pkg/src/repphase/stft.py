"""Short-time Fourier transform with a COLA-normalized Hann window.

The forward transform keeps the full band of ``F`` bins (``f = 0 .. F-1``)
because the phase model indexes frequencies linearly over the whole band.
The inverse is a weighted overlap-add: each frame is inverse transformed,
multiplied by the synthesis window and summed, then divided by the summed
squared window.  With the default scaling that envelope equals one on the
fully overlapped interior, so the division is a no-op there.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.io.wavfile

logger = logging.getLogger(__name__)

DEFAULT_SAMPLE_RATE = 11025
DEFAULT_WINDOW_LENGTH = 512
DEFAULT_HOP = 128


class InvalidInputError(ValueError):
    """Raised when an array or configuration does not satisfy a contract."""


@dataclass(frozen=True)
class StftConfig:
    window_length: int = DEFAULT_WINDOW_LENGTH
    hop: int = DEFAULT_HOP
    num_bins: int | None = None  # defaults to window_length
    sample_rate: float = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        if self.num_bins is None:
            object.__setattr__(self, "num_bins", self.window_length)
        if self.window_length < 2 or self.hop < 1:
            raise InvalidInputError("window_length must be >= 2 and hop >= 1")
        if self.window_length % self.hop:
            raise InvalidInputError(
                f"hop {self.hop} must divide window_length {self.window_length}")
        if self.num_bins != self.window_length:
            raise InvalidInputError("num_bins must equal window_length (no zero-padding)")
        if not self.sample_rate > 0:
            raise InvalidInputError("sample_rate must be positive")

    def num_frames(self, num_samples: int) -> int:
        if num_samples < self.window_length:
            return 0
        return (num_samples - self.window_length) // self.hop + 1

    def signal_length(self, num_frames: int) -> int:
        """Number of samples spanned by ``num_frames`` frames."""
        return (num_frames - 1) * self.hop + self.window_length


def hann_window(config: StftConfig) -> np.ndarray:
    """Periodic Hann window scaled so that shifted squared copies sum to one."""
    n = config.window_length
    w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)
    # sum_t w^2(n - tS) = 3/8 * N/S for a periodic Hann window
    return w / np.sqrt(0.375 * n / config.hop)


@dataclass
class ComplexSpectrogram:
    """Full-band complex STFT, ``data[f, t]``."""

    data: np.ndarray
    config: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.ndim != 2 or self.data.shape[0] != self.config.num_bins:
            raise InvalidInputError(
                f"expected a ({self.config.num_bins}, T) matrix, got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise InvalidInputError("spectrogram contains NaN or Inf")

    @property
    def num_frames(self) -> int:
        return self.data.shape[1]

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.data)


def stft(signal, config: StftConfig | None = None) -> ComplexSpectrogram:
    """Compute ``X(f, t) = sum_n x(n + tS) w(n) exp(-2i pi f n / F)``.

    Frames that would run past the end of the signal are dropped, there is
    no padding.
    """
    config = config or StftConfig()
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise InvalidInputError("signal must be one-dimensional")
    if len(x) < config.window_length:
        raise InvalidInputError(
            f"signal of {len(x)} samples is shorter than one window ({config.window_length})")
    T = config.num_frames(len(x))
    frames = np.lib.stride_tricks.sliding_window_view(x, config.window_length)[::config.hop][:T]
    data = np.fft.fft(frames * hann_window(config), n=config.num_bins, axis=1).T
    return ComplexSpectrogram(data, config)


def istft(spec: ComplexSpectrogram, length: int | None = None) -> np.ndarray:
    """Weighted overlap-add inverse of :func:`stft`.

    The output covers ``(T - 1) * S + N`` samples, then is cut or zero-padded
    to ``length`` when given.
    """
    config = spec.config
    data = np.asarray(spec.data)
    if data.ndim != 2 or data.shape[0] != config.num_bins:
        raise InvalidInputError(f"inconsistent spectrogram shape {data.shape}")
    T = data.shape[1]
    n_out = config.signal_length(T) if T else 0
    w = hann_window(config)
    frames = np.fft.ifft(data, axis=0).real[:config.window_length].T * w

    y = np.zeros(n_out)
    env = np.zeros(n_out)
    for t in range(T):
        sl = slice(t * config.hop, t * config.hop + config.window_length)
        y[sl] += frames[t]
        env[sl] += w**2
    nz = env > 1e-10
    y[nz] /= env[nz]

    if length is not None:
        y = y[:length] if length <= n_out else np.pad(y, (0, length - n_out))
    return y


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a WAV file as float samples in [-1, 1], mixing down to mono."""
    rate, data = scipy.io.wavfile.read(path)
    if data.dtype == np.int16:
        data = data.astype(float) / 32768.0
    elif data.dtype == np.int32:
        data = data.astype(float) / 2147483648.0
    elif data.dtype == np.uint8:
        data = (data.astype(float) - 128.0) / 128.0
    else:
        data = data.astype(float)
    if data.ndim > 1:
        logger.warning("%s has %d channels, mixing down to mono", path, data.shape[1])
        data = data.mean(axis=1)
    return data, rate


def write_wav(path, signal, sample_rate: int, subtype: str = "float") -> None:
    """Write a mono WAV file as 32-bit float (``subtype="float"``) or 16-bit PCM."""
    x = np.asarray(signal, dtype=float)
    if subtype == "float":
        out = x.astype(np.float32)
    elif subtype == "pcm16":
        out = np.clip(np.round(x * 32767.0), -32768, 32767).astype(np.int16)
    else:
        raise InvalidInputError(f"unknown WAV subtype {subtype!r}")
    scipy.io.wavfile.write(Path(path), int(sample_rate), out)
