"""Onset phase estimation from phase repetitions.

A source's phase at each of its onset frames is modeled as a reference phase
plus an offset linear in frequency.  The package estimates these parameters
from a mixture with known magnitudes (strict and relaxed coordinate descent),
propagates onset phases over the following frames, and compares the result
with Wiener masking.
"""

from repphase.baseline import wiener_filter, wiener_masks, wiener_separate
from repphase.estimation import EstimationConfig, EstimationResult, run_relaxed, run_strict
from repphase.metrics import SeparationScores, bss_scores, onset_estimation_error
from repphase.model import (
    ModelSynthesis,
    PhaseModelParams,
    relaxed_cost,
    strict_cost,
    synthesize_relaxed,
    synthesize_strict,
)
from repphase.onset import OnsetMatrix, detect_onsets, extract_onset_matrix
from repphase.pipeline import SourceTruth, estimate_sources, separate
from repphase.stft import ComplexSpectrogram, InvalidInputError, StftConfig, istft, stft
from repphase.synth import make_dataset_mixture, make_model_built, make_repeated_note
from repphase.unwrap import unwrap_source

__version__ = "0.1.0"
