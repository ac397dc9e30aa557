"""End-to-end procedures shared by the CLI and the acceptance tests.

Everything here uses oracle magnitudes: the per-source STFT magnitudes of
the ground-truth signals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from repphase.baseline import wiener_filter
from repphase.estimation import EstimationConfig, run_relaxed, run_strict
from repphase.metrics import SeparationScores, bss_scores, onset_estimation_error
from repphase.onset import OnsetMatrix, extract_onset_matrix
from repphase.stft import ComplexSpectrogram, StftConfig, istft, stft
from repphase.unwrap import hermitian_complete, unwrap_source

ACTIVITY_THRESHOLD_DB = -30.0


def half_band(onset: OnsetMatrix) -> OnsetMatrix:
    """Nonnegative-frequency rows of an onset matrix computed from a real signal."""
    H = onset.num_bins // 2 + 1
    return OnsetMatrix(onset.Y[:H], onset.onset_frames, onset.config)


def infer_activity(onset_magnitudes, threshold_db: float = ACTIVITY_THRESHOLD_DB) -> np.ndarray:
    """Source ``k`` counts as starting a note at onset ``m`` when its onset-column energy is
    within ``threshold_db`` of its loudest onset column."""
    energy = np.sum(np.asarray(onset_magnitudes) ** 2, axis=1)
    peak = energy.max(axis=1, keepdims=True)
    return energy >= peak * 10 ** (threshold_db / 10)


@dataclass
class SourceTruth:
    """Mixture with its reference sources and their spectrograms."""

    mixture: np.ndarray
    sources: np.ndarray
    onset_frames: np.ndarray
    config: StftConfig
    activity: np.ndarray | None = None

    def __post_init__(self):
        self.mix_spec = stft(self.mixture, self.config)
        self.source_specs = np.stack([stft(s, self.config).data for s in self.sources])
        self.onset_frames = np.asarray(self.onset_frames, dtype=int)
        self.onset = extract_onset_matrix(self.mix_spec, self.onset_frames)
        self.Y_k = self.source_specs[:, :, self.onset_frames]
        if self.activity is None:
            self.activity = infer_activity(np.abs(self.Y_k))
        self.activity = np.asarray(self.activity, dtype=bool)

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.source_specs)

    @property
    def onset_magnitudes(self) -> np.ndarray:
        return np.abs(self.Y_k)


def estimate_sources(onset: OnsetMatrix, A, method: str, sigma: float = 0.2,
                     num_iterations: int = 100, real_signal: bool = True):
    """Per-source onset estimates ``(K, F, M)`` from a mixture onset matrix and oracle magnitudes.

    For onset matrices taken from the STFT of a real signal
    (``real_signal=True``) strict and relaxed estimation run on the
    nonnegative-frequency bins and are completed by Hermitian symmetry.
    Wiener masking always runs on all bins.  Returns ``(Y_hat_k, result)``
    where ``result`` is the :class:`EstimationResult` (``None`` for Wiener).
    """
    A = np.asarray(A, dtype=float)
    if method == "wiener":
        return wiener_filter(onset.Y, A), None
    if method not in ("strict", "relaxed"):
        raise ValueError(f"unknown estimation method {method!r}")
    cfg = EstimationConfig(num_iterations=num_iterations, sigma=sigma)
    runner = run_strict if method == "strict" else run_relaxed
    if not real_signal:
        result = runner(onset, A, cfg=cfg)
        return result.synthesis.Y_hat_k, result
    H = onset.num_bins // 2 + 1
    result = runner(half_band(onset), A[:, :H], cfg=cfg)
    Y_hat_k = np.stack([hermitian_complete(y, onset.num_bins) for y in result.synthesis.Y_hat_k])
    return Y_hat_k, result


def estimate_onsets(truth: SourceTruth, method: str, sigma: float = 0.2,
                    num_iterations: int = 100):
    """:func:`estimate_sources` on the onset matrix of a mixture with known sources."""
    return estimate_sources(truth.onset, truth.onset_magnitudes, method, sigma, num_iterations)


def onset_error(truth: SourceTruth, method: str, sigma: float = 0.2,
                num_iterations: int = 100) -> float:
    Y_hat_k, _ = estimate_onsets(truth, method, sigma, num_iterations)
    return onset_estimation_error(truth.Y_k, Y_hat_k)


def repu_spectrograms(truth: SourceTruth, sigma: float = 0.2,
                      num_iterations: int = 100) -> list[ComplexSpectrogram]:
    """Relaxed onset-phase estimation followed by phase unwrapping, one spectrogram per source."""
    _, result = estimate_onsets(truth, "relaxed", sigma, num_iterations)
    phi = result.params.phi
    specs = []
    for k in range(len(truth.sources)):
        active = np.flatnonzero(truth.activity[k])
        if active.size == 0:
            specs.append(ComplexSpectrogram(np.zeros_like(truth.mix_spec.data), truth.config))
            continue
        specs.append(unwrap_source(phi[k][:, active], truth.magnitudes[k],
                                   truth.onset_frames[active], truth.config))
    return specs


def wiener_spectrograms(truth: SourceTruth, exponent: float = 2.0) -> list[ComplexSpectrogram]:
    est = wiener_filter(truth.mix_spec.data, truth.magnitudes, exponent)
    return [ComplexSpectrogram(e, truth.config) for e in est]


def separate(truth: SourceTruth, method: str, sigma: float = 0.2, num_iterations: int = 100,
             filter_length: int = 512) -> tuple[np.ndarray, SeparationScores]:
    """Resynthesized source estimates and their scores against the reference signals."""
    if method == "repu":
        specs = repu_spectrograms(truth, sigma, num_iterations)
    elif method == "wiener":
        specs = wiener_spectrograms(truth)
    else:
        raise ValueError(f"unknown separation method {method!r}")
    n = truth.sources.shape[1]
    signals = np.stack([istft(s, length=n) for s in specs])
    return signals, bss_scores(truth.sources, signals, filter_length)
