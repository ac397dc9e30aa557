"""Propagation of onset phases to the following frames.

Within a region that starts at one of the source's onset frames, each bin's
phase advances linearly by ``2 pi nu S / F`` per frame, where ``nu`` is the
instantaneous frequency (in bins) of the spectral peak governing that bin.  Peak
frequencies come from quadratic interpolation of the log-magnitude around
local maxima; every bin between two spectral minima follows the peak they
enclose.  Frames before the first onset are filled by running the same
recursion backwards.

Work is done on the nonnegative-frequency bins ``0 .. F/2``; the returned
spectrogram is completed by Hermitian symmetry.
"""

from __future__ import annotations

import numpy as np

from repphase.model import wrap
from repphase.stft import ComplexSpectrogram, InvalidInputError, StftConfig


def peak_frequencies(magnitude) -> np.ndarray:
    """Instantaneous frequency, in fractional bins, for each bin of one half-spectrum frame."""
    mag = np.asarray(magnitude, dtype=float)
    H = mag.size
    nu = np.arange(H, dtype=float)
    inner = mag[1:-1]
    peaks = np.flatnonzero((inner > mag[:-2]) & (inner >= mag[2:]) & (inner > 0)) + 1
    if peaks.size == 0:
        return nu
    with np.errstate(divide="ignore"):
        logm = np.log(np.maximum(mag, np.finfo(float).tiny))
    a, b, c = logm[peaks - 1], logm[peaks], logm[peaks + 1]
    denom = a - 2 * b + c
    offset = np.zeros(peaks.size)
    ok = denom < 0
    offset[ok] = 0.5 * (a[ok] - c[ok]) / denom[ok]
    centers = peaks + np.clip(offset, -0.5, 0.5)

    # split the axis at the minimum between consecutive peaks
    bounds = [0]
    for p, q in zip(peaks[:-1], peaks[1:]):
        bounds.append(p + int(np.argmin(mag[p:q + 1])))
    bounds.append(H)
    for i, center in enumerate(centers):
        nu[bounds[i]:bounds[i + 1]] = center
    return nu


def instantaneous_frequencies(magnitudes) -> np.ndarray:
    """Fractional-bin frequencies for an ``(F/2 + 1, T)`` magnitude array."""
    mag = np.asarray(magnitudes, dtype=float)
    return np.stack([peak_frequencies(mag[:, t]) for t in range(mag.shape[1])], axis=1)


def hermitian_complete(half, num_bins: int) -> np.ndarray:
    """Full-band spectrum from its ``num_bins // 2 + 1`` nonnegative-frequency rows.

    The DC bin (and the Nyquist bin for even ``num_bins``) keep only their
    real part, which is the closest Hermitian spectrum.
    """
    half = np.asarray(half)
    full = np.empty((num_bins,) + half.shape[1:], dtype=complex)
    H = num_bins // 2 + 1
    full[:H] = half[:H]
    full[0] = full[0].real
    if num_bins % 2 == 0:
        full[H - 1] = full[H - 1].real
    full[H:] = np.conj(half[1:num_bins - H + 1][::-1])
    return full


def window_phase(offset, config: StftConfig) -> np.ndarray:
    """Phase of the analysis window's transform at ``offset`` bins from a sinusoid.

    A stationary sinusoid of complex amplitude ``c`` at fractional bin ``nu``
    shows up at bin ``f`` as ``c * W(f - nu)``; this returns ``angle(W)``.
    """
    N = config.window_length
    x = np.asarray(offset, dtype=float)

    def dirichlet(u):
        num = np.sin(np.pi * u)
        den = np.sin(np.pi * u / N)
        safe = np.abs(den) > 1e-12
        ratio = np.where(safe, num / np.where(safe, den, 1.0), N * np.cos(np.pi * u) / np.cos(np.pi * u / N))
        return np.exp(-1j * np.pi * u * (N - 1) / N) * ratio

    W = 0.5 * dirichlet(x) - 0.25 * dirichlet(x - 1) - 0.25 * dirichlet(x + 1)
    return np.angle(W)


def unwrap_phases(onset_phases, magnitudes, onset_frames, config: StftConfig) -> np.ndarray:
    """Phase trajectories (half band) that match ``onset_phases`` at ``onset_frames``.

    Each bin tracks the phase of the sinusoid governing it: at the start of a
    region that phase is read off the onset phases at the governing peak,
    then it advances by ``2 pi nu S / F`` per frame.  Bins away from the peak
    get the window's phase response on top, so all bins of a peak move
    together.
    """
    A = np.asarray(magnitudes, dtype=float)
    H = config.num_bins // 2 + 1
    A = A[:H]
    T = A.shape[1]
    frames = np.asarray(onset_frames, dtype=int).reshape(-1)
    phases0 = np.asarray(onset_phases, dtype=float)
    if phases0.ndim == 1:
        phases0 = phases0[:, None]
    if frames.size == 0:
        raise InvalidInputError("at least one onset frame is required")
    if phases0.shape[1] != frames.size or phases0.shape[0] < H:
        raise InvalidInputError(
            f"onset phases {phases0.shape} do not cover {frames.size} onsets and {H} bins")
    if np.any(np.diff(frames) <= 0) or frames[0] < 0 or frames[-1] >= T:
        raise InvalidInputError("onset frames must be increasing and inside the spectrogram")

    nu = instantaneous_frequencies(A)
    bins = np.arange(H)
    shape = window_phase(bins[:, None] - nu, config)
    advance = 2 * np.pi * nu * config.hop / config.num_bins
    sinusoid = np.zeros((H, T))

    def sinusoid_phase_at_onset(m, t):
        # phase of the governing sinusoid, read at the peak bin nearest to nu
        peak = np.clip(np.rint(nu[:, t]).astype(int), 0, H - 1)
        return phases0[peak, m] - shape[peak, t]

    ends = list(frames[1:]) + [T]
    for m, (start, end) in enumerate(zip(frames, ends)):
        sinusoid[:, start] = sinusoid_phase_at_onset(m, start)
        for t in range(start + 1, end):
            sinusoid[:, t] = sinusoid[:, t - 1] + advance[:, t - 1]
    for t in range(frames[0] - 1, -1, -1):
        sinusoid[:, t] = sinusoid[:, t + 1] - advance[:, t + 1]
    out = wrap(sinusoid + shape)
    # onset frames keep the given phases exactly
    out[:, frames] = phases0[:H]
    return out


def unwrap_source(onset_phases, magnitudes, onset_frames,
                  config: StftConfig | None = None) -> ComplexSpectrogram:
    """Full complex STFT of one source from its onset phases and magnitudes.

    ``onset_phases`` has one column per entry of ``onset_frames`` (the onsets
    at which this source starts a note) and at least ``F/2 + 1`` rows.
    ``magnitudes`` is the source's ``(F, T)`` magnitude spectrogram.
    """
    config = config or StftConfig()
    A = np.asarray(magnitudes, dtype=float)
    if A.ndim != 2 or A.shape[0] != config.num_bins:
        raise InvalidInputError(f"magnitudes must be ({config.num_bins}, T), got {A.shape}")
    H = config.num_bins // 2 + 1
    phase = unwrap_phases(onset_phases, A, onset_frames, config)
    return ComplexSpectrogram(hermitian_complete(A[:H] * np.exp(1j * phase), config.num_bins),
                              config)
