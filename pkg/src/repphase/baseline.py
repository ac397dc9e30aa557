"""Wiener-like soft masking of the mixture STFT."""

from __future__ import annotations

import numpy as np

from repphase.stft import ComplexSpectrogram, InvalidInputError


def wiener_masks(magnitudes, exponent: float = 2.0) -> np.ndarray:
    """Masks ``A_k^p / sum_l A_l^p``; bins where every source is silent get zero."""
    A = np.asarray(magnitudes, dtype=float)
    if np.any(A < 0):
        raise InvalidInputError("magnitudes must be nonnegative")
    power = A**exponent
    total = power.sum(axis=0)
    masks = np.zeros_like(power)
    np.divide(power, total, out=masks, where=total > 0)
    return masks


def wiener_filter(mixture, magnitudes, exponent: float = 2.0) -> np.ndarray:
    """Mask any complex array ``mixture[...]`` with per-source magnitudes ``magnitudes[k, ...]``."""
    X = np.asarray(mixture)
    A = np.asarray(magnitudes)
    if A.shape[1:] != X.shape:
        raise InvalidInputError(f"magnitudes {A.shape} do not match mixture {X.shape}")
    return wiener_masks(A, exponent) * X[None]


def wiener_separate(mixture: ComplexSpectrogram, magnitudes, exponent: float = 2.0
                    ) -> list[ComplexSpectrogram]:
    """Per-source spectrograms ``X * A_k^2 / sum_l A_l^2``."""
    estimates = wiener_filter(mixture.data, magnitudes, exponent)
    return [ComplexSpectrogram(e, mixture.config) for e in estimates]
