"""On-disk experiment items.

Two kinds of item are written by ``repphase synth`` and read back by the other
commands.

Mixture items (datasets A, B and C)::

    <stem>.wav          mixture, mono 32-bit float
    <stem>.src<k>.wav   reference source k, mono 32-bit float
    <stem>.json         ground truth (see ``Mixture.truth_dict``) plus the
                        source file names under ``"source_files"``

Model-built items::

    <stem>.npz          arrays Y (F, M), A (K, F, M), Y_k (K, F, M),
                        psi (K, F), lam (K, M), onset_frames (M,)
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from repphase.model import PhaseModelParams, wrap
from repphase.onset import OnsetMatrix, detect_onsets, read_onsets
from repphase.pipeline import SourceTruth
from repphase.stft import InvalidInputError, StftConfig, read_wav, write_wav
from repphase.synth import Mixture

SIDECAR_FORMAT = "repphase-mixture/1"


class MissingTruthError(InvalidInputError):
    """The ground-truth sidecar of an item could not be found."""


def write_mixture(mix: Mixture, out_dir, stem: str) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rate = int(mix.config.sample_rate)
    paths = [out_dir / f"{stem}.wav"]
    write_wav(paths[0], mix.mixture, rate)
    source_files = []
    for k, s in enumerate(mix.sources):
        p = out_dir / f"{stem}.src{k}.wav"
        write_wav(p, s, rate)
        source_files.append(p.name)
        paths.append(p)
    truth = mix.truth_dict()
    truth.update(format=SIDECAR_FORMAT, overlap=mix.dataset != "A", source_files=source_files)
    sidecar = out_dir / f"{stem}.json"
    sidecar.write_text(json.dumps(truth, indent=1) + "\n")
    paths.append(sidecar)
    return paths


def write_model_item(path, onset: OnsetMatrix, truth: PhaseModelParams, Y_k) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, Y=onset.Y, A=truth.A, Y_k=Y_k, psi=truth.psi, lam=truth.lam,
             onset_frames=np.asarray(onset.onset_frames))
    return path


@dataclass
class OnsetProblem:
    """Everything needed to estimate and score one item's onset phases."""

    name: str
    onset: OnsetMatrix
    A: np.ndarray       # (K, F, M) oracle magnitudes
    Y_k: np.ndarray     # (K, F, M) reference source onset columns
    real_signal: bool   # True when the onset matrix comes from a real signal's STFT


@dataclass
class MixtureItem:
    path: Path
    truth: SourceTruth
    dataset: str
    sidecar: dict

    @property
    def name(self) -> str:
        return self.path.stem

    @property
    def num_sources(self) -> int:
        return self.truth.sources.shape[0]

    def with_onsets(self, onsets="truth") -> "MixtureItem":
        """The same item analysed at other onset frames.

        ``onsets`` is ``"truth"`` (frames from the sidecar), ``"auto"``
        (spectral-flux detection on the mixture), a path to a frame list, or a
        sequence of frame indices.  Activity is inferred from the source
        magnitudes unless the sidecar frames are used.
        """
        if isinstance(onsets, str) and onsets == "truth":
            return self
        if isinstance(onsets, str) and onsets == "auto":
            frames = detect_onsets(self.truth.mix_spec)
        elif isinstance(onsets, (str, Path)):
            frames = read_onsets(onsets)
        else:
            frames = [int(t) for t in onsets]
        if not frames:
            raise InvalidInputError(f"no onset frames for {self.path}")
        t = self.truth
        return MixtureItem(self.path, SourceTruth(t.mixture, t.sources, frames, t.config),
                           self.dataset, self.sidecar)

    def onset_problem(self) -> OnsetProblem:
        t = self.truth
        return OnsetProblem(self.name, t.onset, t.onset_magnitudes, t.Y_k, True)


@dataclass
class ModelItem:
    path: Path
    onset: OnsetMatrix
    truth: PhaseModelParams
    Y_k: np.ndarray

    @property
    def name(self) -> str:
        return self.path.stem

    @property
    def num_sources(self) -> int:
        return self.truth.A.shape[0]

    def onset_problem(self) -> OnsetProblem:
        return OnsetProblem(self.name, self.onset, self.truth.A, self.Y_k, False)


def load_mixture(path) -> MixtureItem:
    path = Path(path)
    sidecar_path = path.with_suffix(".json")
    if not sidecar_path.exists():
        raise MissingTruthError(f"ground-truth sidecar {sidecar_path} not found")
    meta = json.loads(sidecar_path.read_text())
    mixture, rate = read_wav(path)
    if rate != meta["sample_rate"]:
        raise InvalidInputError(f"{path}: sample rate {rate} differs from sidecar {meta['sample_rate']}")
    sources = []
    for name in meta["source_files"]:
        s, _ = read_wav(path.parent / name)
        if s.size != mixture.size:
            raise InvalidInputError(f"{name}: length {s.size} differs from mixture {mixture.size}")
        sources.append(s)
    config = StftConfig(window_length=meta["window_length"], hop=meta["hop"],
                        sample_rate=meta["sample_rate"])
    truth = SourceTruth(mixture, np.stack(sources), meta["onset_frames"], config,
                        activity=np.asarray(meta["activity"], dtype=bool))
    return MixtureItem(path, truth, meta.get("dataset", ""), meta)


def load_model_item(path) -> ModelItem:
    path = Path(path)
    with np.load(path) as z:
        Y, A, Y_k = z["Y"], z["A"], z["Y_k"]
        psi, lam, frames = z["psi"], z["lam"], z["onset_frames"]
    F = Y.shape[0]
    onset = OnsetMatrix(Y, frames, StftConfig(window_length=F, hop=1))
    truth = PhaseModelParams(psi, lam, wrap(np.angle(Y_k)), A)
    return ModelItem(path, onset, truth, Y_k)


def load_item(path):
    """Load a mixture item (``.wav``) or a model-built item (``.npz``)."""
    path = Path(path)
    if path.suffix == ".npz":
        return load_model_item(path)
    if path.suffix == ".wav":
        return load_mixture(path)
    raise InvalidInputError(f"unsupported item file {path}")


def list_items(directory) -> list[Path]:
    """Item files in ``directory``, sorted by name; source WAVs are skipped."""
    directory = Path(directory)
    if not directory.is_dir():
        raise InvalidInputError(f"{directory} is not a directory")
    found = [p for p in directory.iterdir()
             if p.suffix == ".npz" or (p.suffix == ".wav" and ".src" not in p.stem)]
    return sorted(found)
