"""Repeating-phase mixture model within onset frames.

Each source ``k`` has a reference phase ``psi[k, f]`` and one delay
``lam[k, m]`` per onset; its phase at onset ``m`` is modeled as
``psi[k, f] + lam[k, m] * f``.  The relaxed variant additionally carries
free onset phases ``phi[k, f, m]``.  Magnitudes ``A[k, f, m]`` are known
inputs, never estimated here.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from repphase.onset import OnsetMatrix
from repphase.stft import InvalidInputError


def wrap(phase):
    """Wrap angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(phase, dtype=float), 2 * np.pi)


def linear_phase(lam, num_bins: int) -> np.ndarray:
    """``exp(1j * lam[..., m] * f)`` laid out as ``[..., f, m]``."""
    lam = np.asarray(lam, dtype=float)
    f = np.arange(num_bins)
    return np.exp(1j * f[:, None] * lam[..., None, :])


@dataclass
class PhaseModelParams:
    psi: np.ndarray  # (K, F)
    lam: np.ndarray  # (K, M)
    phi: np.ndarray  # (K, F, M)
    A: np.ndarray    # (K, F, M)

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=float)
        self.lam = np.asarray(self.lam, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        self.A = np.asarray(self.A, dtype=float)
        K, F, M = self.A.shape
        if self.psi.shape != (K, F) or self.lam.shape != (K, M) or self.phi.shape != (K, F, M):
            raise InvalidInputError(
                f"inconsistent parameter shapes psi={self.psi.shape} lam={self.lam.shape} "
                f"phi={self.phi.shape} A={self.A.shape}")
        if np.any(self.A < 0) or not np.all(np.isfinite(self.A)):
            raise InvalidInputError("magnitudes must be finite and nonnegative")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.A.shape

    def copy(self) -> "PhaseModelParams":
        return PhaseModelParams(self.psi.copy(), self.lam.copy(), self.phi.copy(), self.A.copy())

    def model_phases(self) -> np.ndarray:
        """Constrained onset phases ``psi + lam * f``, shape (K, F, M), wrapped."""
        F = self.psi.shape[1]
        return wrap(self.psi[:, :, None] + np.arange(F)[None, :, None] * self.lam[:, None, :])

    @classmethod
    def zeros(cls, K: int, F: int, M: int, A=None) -> "PhaseModelParams":
        A = np.zeros((K, F, M)) if A is None else A
        return cls(np.zeros((K, F)), np.zeros((K, M)), np.zeros((K, F, M)), A)


@dataclass
class ModelSynthesis:
    Y_hat_k: np.ndarray  # (K, F, M)
    Y_hat: np.ndarray    # (F, M)
    B: np.ndarray        # (K, F, M)


def _check(params: PhaseModelParams, onset: OnsetMatrix):
    if params.A.shape[1:] != onset.Y.shape:
        raise InvalidInputError(
            f"parameters of shape {params.A.shape} do not match onset matrix {onset.Y.shape}")


def _assemble(Y_hat_k: np.ndarray, Y: np.ndarray) -> ModelSynthesis:
    Y_hat = Y_hat_k.sum(axis=0)
    return ModelSynthesis(Y_hat_k, Y_hat, Y[None] - Y_hat[None] + Y_hat_k)


def strict_components(params: PhaseModelParams) -> np.ndarray:
    F = params.psi.shape[1]
    return params.A * np.exp(1j * params.psi)[:, :, None] * linear_phase(params.lam, F)


def synthesize_strict(params: PhaseModelParams, onset: OnsetMatrix) -> ModelSynthesis:
    """Per-source models ``A * exp(i psi(f)) * exp(i lam(m) f)`` with their sum and residuals."""
    _check(params, onset)
    return _assemble(strict_components(params), onset.Y)


def synthesize_relaxed(params: PhaseModelParams, onset: OnsetMatrix) -> ModelSynthesis:
    """Per-source models ``A * exp(i phi)`` with their sum and residuals."""
    _check(params, onset)
    return _assemble(params.A * np.exp(1j * params.phi), onset.Y)


def strict_cost(params: PhaseModelParams, onset: OnsetMatrix) -> float:
    _check(params, onset)
    return float(np.sum(np.abs(onset.Y - strict_components(params).sum(axis=0)) ** 2))


def relaxed_cost(params: PhaseModelParams, onset: OnsetMatrix, sigma: float) -> float:
    _check(params, onset)
    if sigma < 0:
        raise InvalidInputError("sigma must be nonnegative")
    free = np.exp(1j * params.phi)
    fidelity = np.sum(np.abs(onset.Y - (params.A * free).sum(axis=0)) ** 2)
    F = params.psi.shape[1]
    constrained = np.exp(1j * params.psi)[:, :, None] * linear_phase(params.lam, F)
    penalty = np.sum(params.A**2 * np.abs(free - constrained) ** 2)
    return float(fidelity + sigma * penalty)


# Binary layout, little-endian: 8-byte magic, int32 K, F, M, then float64
# arrays psi (K*F), lam (K*M), phi (K*F*M), A (K*F*M), all row-major.
_MAGIC = b"REPPHS01"


def save_params(path, params: PhaseModelParams) -> None:
    K, F, M = params.shape
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<3i", K, F, M))
        for arr in (params.psi, params.lam, params.phi, params.A):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_params(path) -> PhaseModelParams:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != _MAGIC:
        raise InvalidInputError(f"{path} is not a parameter file")
    K, F, M = struct.unpack("<3i", raw[8:20])
    body = np.frombuffer(raw[20:], dtype="<f8")
    sizes = [K * F, K * M, K * F * M, K * F * M]
    if body.size != sum(sizes):
        raise InvalidInputError(f"{path}: expected {sum(sizes)} values, found {body.size}")
    parts = np.split(body, np.cumsum(sizes)[:-1])
    return PhaseModelParams(parts[0].reshape(K, F), parts[1].reshape(K, M),
                            parts[2].reshape(K, F, M), parts[3].reshape(K, F, M))
