"""Onset frame detection and onset-matrix extraction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from repphase.stft import ComplexSpectrogram, InvalidInputError, StftConfig


@dataclass
class OnsetMatrix:
    """Mixture STFT columns at the onset frames, ``Y[:, m] = X[:, onset_frames[m]]``."""

    Y: np.ndarray
    onset_frames: np.ndarray
    config: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=complex)
        self.onset_frames = np.asarray(self.onset_frames, dtype=int)
        if self.Y.ndim != 2 or self.Y.shape[1] != len(self.onset_frames):
            raise InvalidInputError(
                f"Y shape {self.Y.shape} does not match {len(self.onset_frames)} onset frames")
        if np.any(np.diff(self.onset_frames) <= 0):
            raise InvalidInputError("onset frames must be strictly increasing")

    @property
    def num_bins(self) -> int:
        return self.Y.shape[0]

    @property
    def num_onsets(self) -> int:
        return self.Y.shape[1]


def spectral_flux(spec: ComplexSpectrogram) -> np.ndarray:
    """Half-wave rectified magnitude flux per frame; frame 0 is compared to silence."""
    mag = spec.magnitude
    prev = np.concatenate([np.zeros((mag.shape[0], 1)), mag[:, :-1]], axis=1)
    return np.maximum(mag - prev, 0.0).sum(axis=0)


def detect_onsets(spec: ComplexSpectrogram, threshold: float = 0.3, min_gap: int = 4) -> list[int]:
    """Pick local maxima of the spectral flux above ``threshold * max(flux)``.

    Peaks closer than ``min_gap`` frames to a stronger retained peak are
    discarded.  Ties are broken towards the earlier frame so the output is
    deterministic.
    """
    flux = spectral_flux(spec)
    if flux.size == 0 or flux.max() <= 0:
        return []
    level = threshold * flux.max()
    padded = np.concatenate([[-np.inf], flux, [-np.inf]])
    is_peak = (padded[1:-1] > padded[:-2]) & (padded[1:-1] >= padded[2:]) & (flux >= level)
    candidates = np.flatnonzero(is_peak)
    # strongest first, earlier frame first among equal flux
    order = sorted(candidates, key=lambda t: (-flux[t], t))
    kept: list[int] = []
    for t in order:
        if all(abs(t - s) >= min_gap for s in kept):
            kept.append(int(t))
    return sorted(kept)


def extract_onset_matrix(spec: ComplexSpectrogram, onset_frames) -> OnsetMatrix:
    frames = np.asarray(onset_frames, dtype=int).reshape(-1)
    if frames.size and (frames.min() < 0 or frames.max() >= spec.num_frames):
        raise InvalidInputError(
            f"onset frame out of range [0, {spec.num_frames}): {frames.tolist()}")
    return OnsetMatrix(spec.data[:, frames].copy(), frames, spec.config)


def read_onsets(path) -> list[int]:
    """Read onset frame indices, one integer per line; blank lines and ``#`` comments are skipped."""
    frames = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                frames.append(int(line))
    return frames


def write_onsets(path, frames) -> None:
    with open(path, "w") as fh:
        fh.writelines(f"{int(t)}\n" for t in frames)
