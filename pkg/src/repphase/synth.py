"""Synthetic test material.

Two families of data are produced:

* model-built onset matrices, generated exactly from the repeating-phase
  mixture model with random magnitudes and phases;
* mixtures of repeated damped-sinusoid notes.  Dataset ``"A"`` gives the two
  sources disjoint partial bins, dataset ``"B"`` makes them share some bins,
  and dataset ``"C"`` is a three-source scene with seven activation events.

Partial frequencies are placed on bin centers.  A note re-occurrence keeps the
partials' initial phases and only changes its gain and its start position
inside the onset frame, which is what makes onset phases repeat up to a
frequency-linear offset.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from repphase.model import PhaseModelParams, linear_phase, wrap
from repphase.onset import OnsetMatrix
from repphase.stft import InvalidInputError, StftConfig, stft

T60_SECONDS = 0.5
ATTACK = 256        # raised-cosine fade-in length, in samples
# note start inside its onset frame: the attack midpoint falls on the centre
# of a 512-sample window, which is where the spectral flux peaks
ONSET_OFFSET = 256 - ATTACK // 2
MAX_DELAY = 32      # occurrences start up to this many samples later than ONSET_OFFSET


def decay_for_t60(t60: float, sample_rate: float) -> float:
    """Per-sample exponential amplitude decay reaching -60 dB after ``t60`` seconds."""
    return np.log(1000.0) / (t60 * sample_rate)


@dataclass
class DampedSinusoidSpec:
    """One source made of damped partials, re-triggered at ``onset_times``."""

    frequencies: list[float]
    amplitudes: list[float]
    phases: list[float]
    decay: float
    onset_times: list[int]
    gains: list[float]
    duration: int
    attack: int = ATTACK

    def __post_init__(self):
        if not (len(self.frequencies) == len(self.amplitudes) == len(self.phases)):
            raise InvalidInputError("frequencies, amplitudes and phases must have equal lengths")
        if len(self.onset_times) != len(self.gains):
            raise InvalidInputError("one gain per onset time is required")
        if self.decay <= 0:
            raise InvalidInputError("decay must be positive")
        if np.any(np.diff(self.onset_times) <= 0):
            raise InvalidInputError("onset times must be increasing")

    def render(self, sample_rate: float) -> np.ndarray:
        if max(self.frequencies, default=0.0) >= sample_rate / 2:
            raise InvalidInputError("partial frequencies must lie below Nyquist")
        x = np.zeros(self.duration)
        for onset, gain in zip(self.onset_times, self.gains):
            if gain == 0 or onset >= self.duration:
                continue
            n = np.arange(self.duration - onset)
            env = np.exp(-self.decay * n)
            if self.attack > 0:
                ramp = n < self.attack
                env[ramp] *= 0.5 - 0.5 * np.cos(np.pi * n[ramp] / self.attack)
            note = np.zeros_like(env)
            for f, a, th in zip(self.frequencies, self.amplitudes, self.phases):
                note += a * np.cos(2 * np.pi * f * n / sample_rate + th)
            x[onset:] += gain * env * note
        return x

    def to_dict(self) -> dict:
        return {k: (list(map(float, v)) if isinstance(v, (list, np.ndarray)) else v)
                for k, v in asdict(self).items()}


@dataclass
class Mixture:
    """A rendered mixture with its ground truth."""

    mixture: np.ndarray
    sources: np.ndarray          # (K, num_samples)
    onset_frames: list[int]
    activity: np.ndarray         # (K, M) booleans, source k sounds at onset m
    specs: list[DampedSinusoidSpec]
    config: StftConfig = field(default_factory=StftConfig)
    dataset: str = ""
    seed: int | None = None

    @property
    def num_sources(self) -> int:
        return self.sources.shape[0]

    def truth_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "seed": self.seed,
            "sample_rate": self.config.sample_rate,
            "window_length": self.config.window_length,
            "hop": self.config.hop,
            "num_samples": int(self.mixture.size),
            "onset_frames": [int(t) for t in self.onset_frames],
            "activity": self.activity.astype(int).tolist(),
            "sources": [s.to_dict() for s in self.specs],
        }


def make_model_built(K: int, F: int, M: int, seed=None, pattern: str = "solo-then-all"):
    """Onset matrix built exactly from the strict mixture model.

    Magnitudes repeat across onsets up to a gain, ``A[k, f, m] = rho[k, m] * a[k, f]``
    with ``a`` uniform on [0.1, 1] and ``rho`` uniform on [0.5, 1], as a
    re-triggered note would.  With ``pattern="solo-then-all"`` (requires
    ``M >= K + 1``) source ``k`` sounds alone at onset ``k`` and every source
    sounds at the remaining onsets, mirroring the activation protocol of the
    note mixtures.  With ``pattern="all"`` every source is active at every
    onset.

    Returns ``(onset, truth, Y_k)`` where ``Y_k[k]`` is the k-th source's
    contribution to ``onset.Y``.
    """
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.1, 1.0, (K, F))
    rho = rng.uniform(0.5, 1.0, (K, M))
    A = a[:, :, None] * rho[:, None, :]
    if pattern == "solo-then-all":
        if M < K + 1:
            raise InvalidInputError("solo-then-all needs at least K + 1 onsets")
        active = np.ones((K, M), dtype=bool)
        active[:, :K] = np.eye(K, dtype=bool)
        A *= active[:, None, :]
    elif pattern != "all":
        raise InvalidInputError(f"unknown activation pattern {pattern!r}")
    psi = wrap(rng.uniform(-np.pi, np.pi, (K, F)))
    lam = wrap(rng.uniform(-np.pi, np.pi, (K, M)))
    lam[:, 0] = 0.0
    Y_k = A * np.exp(1j * psi)[:, :, None] * linear_phase(lam, F)
    truth = PhaseModelParams(psi, lam, wrap(np.angle(Y_k)), A)
    onset = OnsetMatrix(Y_k.sum(axis=0), np.arange(M),
                        StftConfig(window_length=F, hop=1, num_bins=F))
    return onset, truth, Y_k


def _pick_bins(rng, count, low, high, min_sep, taken=()):
    chosen = list(taken)
    out = []
    for _ in range(10000):
        if len(out) == count:
            break
        b = int(rng.integers(low, high))
        if all(abs(b - c) >= min_sep for c in chosen):
            chosen.append(b)
            out.append(b)
    if len(out) < count:
        raise RuntimeError("could not place partials with the requested separation")
    return sorted(out)


PATTERNS = {
    "A": [(0,), (1,), (0, 1)],
    "B": [(0,), (1,), (0, 1)],
    "C": [(0,), (1,), (2,), (0, 1), (1, 2), (0, 2), (0, 1, 2)],
}


def make_dataset_mixture(dataset: str = "A", seed=None, config: StftConfig | None = None,
                         num_partials: int = 4, onset_spacing: int = 40,
                         first_onset: int = 8, t60: float = T60_SECONDS) -> Mixture:
    """Render one mixture of repeated damped-sinusoid notes.

    Sources are observed alone first, then together (see ``PATTERNS``).
    Dataset ``"A"`` keeps all partials at least 16 bins apart.  Dataset
    ``"B"`` places half of the second source's partials on bins of the first
    source (and, for ``"C"``, of earlier sources) so that they overlap in the
    time-frequency plane.
    """
    config = config or StftConfig()
    if dataset not in PATTERNS:
        raise InvalidInputError(f"unknown dataset {dataset!r}")
    rng = np.random.default_rng(seed)
    pattern = PATTERNS[dataset]
    K = max(max(p) for p in pattern) + 1
    M = len(pattern)
    F = config.num_bins
    onset_frames = [first_onset + m * onset_spacing for m in range(M)]
    T = onset_frames[-1] + onset_spacing + 2
    duration = config.signal_length(T)
    fs = config.sample_rate
    bin_hz = fs / F
    low, high = 6, F // 2 - 56

    bins_per_source = []
    taken: list[int] = []
    for k in range(K):
        if dataset == "A" or k == 0:
            bins = _pick_bins(rng, num_partials, low, high, 16, taken)
        else:
            shared_count = num_partials // 2
            pool = sorted(set(taken))
            shared = sorted(rng.choice(pool, size=shared_count, replace=False).tolist())
            own = _pick_bins(rng, num_partials - shared_count, low, high, 8, taken)
            bins = sorted(shared + own)
        taken += bins
        bins_per_source.append(bins)

    activity = np.zeros((K, M), dtype=bool)
    for m, members in enumerate(pattern):
        activity[list(members), m] = True

    specs = []
    for k in range(K):
        onset_times, gains = [], []
        for m in range(M):
            if activity[k, m]:
                delay = int(rng.integers(0, MAX_DELAY))
                onset_times.append(onset_frames[m] * config.hop + ONSET_OFFSET + delay)
                gains.append(float(rng.uniform(0.6, 1.0)))
        specs.append(DampedSinusoidSpec(
            frequencies=[b * bin_hz for b in bins_per_source[k]],
            amplitudes=rng.uniform(0.3, 1.0, num_partials).tolist(),
            phases=rng.uniform(-np.pi, np.pi, num_partials).tolist(),
            decay=decay_for_t60(t60 * rng.uniform(0.8, 1.2), fs),
            onset_times=onset_times,
            gains=gains,
            duration=duration,
        ))
    sources = np.stack([s.render(fs) for s in specs]) / (2.0 * num_partials)
    return Mixture(sources.sum(axis=0), sources, onset_frames, activity, specs,
                   config, dataset, seed)


def make_repeated_note(seed=None, config: StftConfig | None = None, delay: int | None = None,
                       num_partials: int = 4, t60: float = T60_SECONDS):
    """A single note played twice, the second time ``delay`` samples later in its frame.

    Returns ``(signal, onset_frames, delay)``.
    """
    config = config or StftConfig()
    rng = np.random.default_rng(seed)
    F = config.num_bins
    fs = config.sample_rate
    if delay is None:
        delay = int(rng.integers(1, MAX_DELAY))
    onset_frames = [8, 48]
    duration = config.signal_length(90)
    bins = _pick_bins(rng, num_partials, 6, F // 2 - 56, 16)
    spec = DampedSinusoidSpec(
        frequencies=[b * fs / F for b in bins],
        amplitudes=rng.uniform(0.3, 1.0, num_partials).tolist(),
        phases=rng.uniform(-np.pi, np.pi, num_partials).tolist(),
        decay=decay_for_t60(t60, fs),
        onset_times=[onset_frames[0] * config.hop + ONSET_OFFSET,
                     onset_frames[1] * config.hop + ONSET_OFFSET + delay],
        gains=[1.0, float(rng.uniform(0.5, 1.0))],
        duration=duration,
    )
    return spec.render(fs) / num_partials, onset_frames, delay


def source_onset_matrices(mix: Mixture):
    """Ground-truth per-source onset columns ``Y_k`` (K, F, M) and the mixture onset matrix."""
    spec = stft(mix.mixture, mix.config)
    Y_k = np.stack([stft(s, mix.config).data[:, mix.onset_frames] for s in mix.sources])
    return OnsetMatrix(spec.data[:, mix.onset_frames], mix.onset_frames, mix.config), Y_k
