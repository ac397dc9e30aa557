"""Onset-domain estimation error and energy-ratio separation scores.

The separation scores follow the usual BSS decomposition: an estimate is
split into a filtered version of its reference, interference from the other
references and an artifact residual, using least-squares projections onto
time-invariant FIR-filtered references.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from repphase.stft import InvalidInputError

SCORE_CAP_DB = 200.0


def onset_estimation_error(truth, estimates) -> float:
    """``(1/K) sum_k ||Y_k - Y_hat_k||_F``."""
    truth = np.asarray(truth)
    estimates = np.asarray(estimates)
    if truth.shape != estimates.shape:
        raise InvalidInputError(f"shape mismatch {truth.shape} vs {estimates.shape}")
    K = truth.shape[0]
    return float(sum(np.linalg.norm(truth[k] - estimates[k]) for k in range(K)) / K)


@dataclass
class SeparationScores:
    sdr: np.ndarray
    sir: np.ndarray
    sar: np.ndarray

    @property
    def mean(self) -> tuple[float, float, float]:
        return float(np.mean(self.sdr)), float(np.mean(self.sir)), float(np.mean(self.sar))

    def rows(self):
        for k in range(len(self.sdr)):
            yield k, float(self.sdr[k]), float(self.sir[k]), float(self.sar[k])


def _db(num, den):
    if den <= 0 or num / den > 10 ** (SCORE_CAP_DB / 10):
        return SCORE_CAP_DB
    return float(10 * np.log10(num / den))


class _Projector:
    """Least-squares projection onto delayed copies (0 .. L-1 samples) of reference signals."""

    def __init__(self, references, filter_length):
        self.refs = references
        self.L = filter_length
        K, n = references.shape
        self.n_fft = int(2 ** np.ceil(np.log2(n + filter_length - 1)))
        self.spectra = np.fft.rfft(references, n=self.n_fft)
        L = filter_length
        self.gram = np.zeros((K * L, K * L))
        for i in range(K):
            for j in range(i, K):
                xc = np.fft.irfft(self.spectra[i] * np.conj(self.spectra[j]), n=self.n_fft)
                block = toeplitz(np.concatenate([[xc[0]], xc[-1:-L:-1]]), xc[:L])
                self.gram[i * L:(i + 1) * L, j * L:(j + 1) * L] = block
                self.gram[j * L:(j + 1) * L, i * L:(i + 1) * L] = block.T

    def project(self, estimate, indices):
        L = self.L
        idx = np.concatenate([np.arange(k * L, (k + 1) * L) for k in indices])
        est_spec = np.fft.rfft(estimate, n=self.n_fft)
        rhs = np.zeros(len(indices) * L)
        for pos, k in enumerate(indices):
            xc = np.fft.irfft(self.spectra[k] * np.conj(est_spec), n=self.n_fft)
            rhs[pos * L:(pos + 1) * L] = np.concatenate([[xc[0]], xc[-1:-L:-1]])
        G = self.gram[np.ix_(idx, idx)]
        try:
            coeffs = np.linalg.solve(G, rhs)
        except np.linalg.LinAlgError:
            coeffs = np.linalg.lstsq(G, rhs, rcond=None)[0]
        n = self.refs.shape[1]
        out = np.zeros(n + L - 1)
        for pos, k in enumerate(indices):
            h = coeffs[pos * L:(pos + 1) * L]
            out += np.fft.irfft(np.fft.rfft(h, n=self.n_fft) * self.spectra[k], n=self.n_fft)[:n + L - 1]
        return out


def bss_scores(references, estimates, filter_length: int = 512) -> SeparationScores:
    """SDR, SIR and SAR in dB for each estimate against its own reference.

    Scores are capped at 200 dB, which is what a perfect estimate reports.
    """
    refs = np.atleast_2d(np.asarray(references, dtype=float))
    ests = np.atleast_2d(np.asarray(estimates, dtype=float))
    if refs.shape != ests.shape:
        raise InvalidInputError(f"references {refs.shape} and estimates {ests.shape} differ")
    if np.any(np.sum(refs**2, axis=1) == 0):
        raise InvalidInputError("references must not be silent")
    K, n = refs.shape
    proj = _Projector(refs, filter_length)
    pad = filter_length - 1
    sdr, sir, sar = np.empty(K), np.empty(K), np.empty(K)
    for j in range(K):
        est = ests[j]
        s_true = np.concatenate([refs[j], np.zeros(pad)])
        p_target = proj.project(est, [j])
        p_all = proj.project(est, list(range(K))) if K > 1 else p_target
        e_spat = p_target - s_true
        e_interf = p_all - p_target
        e_artif = np.concatenate([est, np.zeros(pad)]) - p_all
        s_filt = s_true + e_spat
        sdr[j] = _db(np.sum(s_filt**2), np.sum((e_interf + e_artif) ** 2))
        sir[j] = _db(np.sum(s_filt**2), np.sum(e_interf**2))
        sar[j] = _db(np.sum((s_filt + e_interf) ** 2), np.sum(e_artif**2))
    return SeparationScores(sdr, sir, sar)


def phase_difference_slope(first, second, grid_size: int = 4096) -> float:
    """Slope ``lam`` (radians per bin) of the best line ``lam * f`` through the phase
    difference between two spectra.

    Circular regression through the origin: ``lam`` maximizes
    ``Re sum_f |X1 X2| exp(i (angle(X2 conj X1) - lam f))``, searched on a grid
    over (-pi, pi] and refined with a bounded scalar search around the best node.
    """
    from scipy.optimize import minimize_scalar

    u = np.asarray(second) * np.conj(np.asarray(first))
    f = np.arange(u.size)

    def score(lam):
        return -float(np.real(np.sum(u * np.exp(-1j * lam * f))))

    grid = np.linspace(-np.pi, np.pi, grid_size, endpoint=False)
    coarse = np.real(np.exp(-1j * np.outer(grid, f)) @ u)
    best = grid[int(np.argmax(coarse))]
    step = grid[1] - grid[0]
    res = minimize_scalar(score, bounds=(best - step, best + step), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.x)


def phase_linearity_error(first, second) -> tuple[float, float]:
    """Relative residual of the phase difference between two onset spectra regressed on frequency.

    Both spectra are nonnegative-frequency halves.  The phase difference is
    unwrapped around the fitted line ``lam * f`` and bins are weighted by
    ``|X1| |X2|``.  Returns ``(relative_residual, lam)``.
    """
    first = np.asarray(first)
    second = np.asarray(second)
    lam = phase_difference_slope(first, second)
    f = np.arange(first.size)
    w = np.abs(first) * np.abs(second)
    resid = np.angle(second * np.conj(first) * np.exp(-1j * lam * f))
    observed = lam * f + resid
    den = np.sum(w * observed**2)
    if den == 0:
        raise InvalidInputError("phase difference is identically zero; relative residual undefined")
    return float(np.sqrt(np.sum(w * resid**2) / den)), lam
