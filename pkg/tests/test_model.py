import numpy as np
import pytest
from hypothesis import given, strategies as st

from repphase.model import (
    PhaseModelParams,
    load_params,
    relaxed_cost,
    save_params,
    strict_cost,
    synthesize_relaxed,
    synthesize_strict,
    wrap,
)
from repphase.onset import OnsetMatrix
from repphase.stft import InvalidInputError
from repphase.synth import make_model_built


def random_instance(seed, K=2, F=8, M=3):
    r = np.random.default_rng(seed)
    A = r.uniform(0, 1, (K, F, M))
    lam = r.uniform(-np.pi, np.pi, (K, M))
    lam[:, 0] = 0
    params = PhaseModelParams(r.uniform(-np.pi, np.pi, (K, F)), lam,
                              r.uniform(-np.pi, np.pi, (K, F, M)), A)
    Y = r.standard_normal((F, M)) + 1j * r.standard_normal((F, M))
    return params, OnsetMatrix(Y, np.arange(M))


def strict_cost_loops(p, Y):
    K, F, M = p.A.shape
    total = 0.0
    for f in range(F):
        for m in range(M):
            model = sum(p.A[k, f, m] * np.exp(1j * p.psi[k, f]) * np.exp(1j * p.lam[k, m] * f)
                        for k in range(K))
            total += abs(Y[f, m] - model) ** 2
    return total


def relaxed_cost_loops(p, Y, sigma):
    K, F, M = p.A.shape
    total = 0.0
    for f in range(F):
        for m in range(M):
            total += abs(Y[f, m] - sum(p.A[k, f, m] * np.exp(1j * p.phi[k, f, m])
                                       for k in range(K))) ** 2
            for k in range(K):
                d = np.exp(1j * p.phi[k, f, m]) - np.exp(1j * (p.psi[k, f] + p.lam[k, m] * f))
                total += sigma * p.A[k, f, m] ** 2 * abs(d) ** 2
    return total


def test_wrap_range():
    x = np.array([np.pi, -np.pi, 3 * np.pi, 0.0, -0.5, 7.0])
    w = wrap(x)
    assert np.all(w > -np.pi) and np.all(w <= np.pi)
    assert w[0] == np.pi and w[1] == np.pi
    assert np.allclose(np.exp(1j * w), np.exp(1j * x))


def test_single_source_zero_delay_repeats_phase():
    r = np.random.default_rng(1)
    A = r.uniform(0, 1, (1, 6, 3))
    psi = r.uniform(-np.pi, np.pi, (1, 6))
    p = PhaseModelParams(psi, np.zeros((1, 3)), np.zeros((1, 6, 3)), A)
    syn = synthesize_strict(p, OnsetMatrix(np.zeros((6, 3)), [0, 1, 2]))
    assert np.allclose(syn.Y_hat, A[0] * np.exp(1j * psi[0])[:, None])


def test_delay_shifts_phase_linearly():
    F, eta = 16, 3
    r = np.random.default_rng(2)
    A = r.uniform(0.5, 1, (1, F, 2))
    lam = np.array([[0.0, 2 * np.pi * eta / F]])
    p = PhaseModelParams(r.uniform(-np.pi, np.pi, (1, F)), lam, np.zeros((1, F, 2)), A)
    Y_hat = synthesize_strict(p, OnsetMatrix(np.zeros((F, 2)), [0, 1])).Y_hat
    f = np.arange(F)
    assert np.allclose(np.abs(Y_hat), A[0])
    assert np.allclose(Y_hat[:, 1] / np.abs(Y_hat[:, 1]),
                       Y_hat[:, 0] / np.abs(Y_hat[:, 0]) * np.exp(2j * np.pi * eta * f / F))


@pytest.mark.parametrize("synth", [synthesize_strict, synthesize_relaxed])
def test_residual_identity(synth):
    p, onset = random_instance(3)
    syn = synth(p, onset)
    assert np.allclose(syn.Y_hat, syn.Y_hat_k.sum(axis=0))
    for k in range(2):
        assert np.allclose(syn.B[k], onset.Y - syn.Y_hat + syn.Y_hat_k[k])


def test_relaxed_with_model_phases_equals_strict():
    p, onset = random_instance(4)
    p.phi = p.model_phases()
    assert np.allclose(synthesize_relaxed(p, onset).Y_hat_k, synthesize_strict(p, onset).Y_hat_k)


def test_relaxed_reproduces_single_source_data():
    r = np.random.default_rng(5)
    Y = r.standard_normal((8, 3)) + 1j * r.standard_normal((8, 3))
    p = PhaseModelParams(np.zeros((1, 8)), np.zeros((1, 3)), np.angle(Y)[None], np.abs(Y)[None])
    assert np.allclose(synthesize_relaxed(p, OnsetMatrix(Y, [0, 1, 2])).Y_hat, Y)


def test_strict_cost_zero_on_model_built():
    onset, truth, _ = make_model_built(2, 16, 3, seed=0)
    assert strict_cost(truth, onset) <= 1e-20


def test_strict_cost_of_zero_data():
    F, M = 5, 4
    p = PhaseModelParams(np.random.default_rng(6).uniform(-3, 3, (1, F)), np.zeros((1, M)),
                         np.zeros((1, F, M)), np.ones((1, F, M)))
    assert strict_cost(p, OnsetMatrix(np.zeros((F, M)), range(M))) == pytest.approx(F * M)


@pytest.mark.parametrize("seed", range(5))
def test_costs_match_scalar_evaluation(seed):
    p, onset = random_instance(seed)
    assert strict_cost(p, onset) == pytest.approx(strict_cost_loops(p, onset.Y), rel=1e-12)
    assert relaxed_cost(p, onset, 0.7) == pytest.approx(relaxed_cost_loops(p, onset.Y, 0.7),
                                                        rel=1e-12)


def test_relaxed_cost_limits():
    p, onset = random_instance(7)
    fidelity = np.sum(np.abs(onset.Y - (p.A * np.exp(1j * p.phi)).sum(axis=0)) ** 2)
    assert relaxed_cost(p, onset, 0.0) == pytest.approx(fidelity)
    p.phi = p.model_phases()
    assert relaxed_cost(p, onset, 5.0) == pytest.approx(relaxed_cost(p, onset, 0.0))


@given(seed=st.integers(0, 2**31), c=st.floats(-np.pi, np.pi))
def test_gauge_invariance(seed, c):
    p, onset = random_instance(seed)
    q = p.copy()
    q.psi = q.psi + c * np.arange(q.psi.shape[1])
    q.lam = q.lam - c
    assert strict_cost(q, onset) == pytest.approx(strict_cost(p, onset), rel=1e-9, abs=1e-9)
    assert relaxed_cost(q, onset, 0.3) == pytest.approx(relaxed_cost(p, onset, 0.3),
                                                        rel=1e-9, abs=1e-9)


@given(seed=st.integers(0, 2**31), s1=st.floats(0, 10), s2=st.floats(0, 10))
def test_relaxed_cost_nondecreasing_in_sigma(seed, s1, s2):
    p, onset = random_instance(seed)
    lo, hi = sorted((s1, s2))
    assert relaxed_cost(p, onset, lo) <= relaxed_cost(p, onset, hi) + 1e-12


def test_dimension_mismatch():
    p, _ = random_instance(8)
    with pytest.raises(InvalidInputError):
        strict_cost(p, OnsetMatrix(np.zeros((9, 3)), [0, 1, 2]))
    with pytest.raises(InvalidInputError):
        PhaseModelParams(np.zeros((2, 8)), np.zeros((2, 4)), np.zeros((2, 8, 3)), np.ones((2, 8, 3)))
    with pytest.raises(InvalidInputError):
        PhaseModelParams(np.zeros((1, 2)), np.zeros((1, 1)), np.zeros((1, 2, 1)), -np.ones((1, 2, 1)))


def test_params_file_roundtrip(tmp_path):
    p, _ = random_instance(9)
    save_params(tmp_path / "p.bin", p)
    raw = (tmp_path / "p.bin").read_bytes()
    assert raw[:8] == b"REPPHS01" and len(raw) == 8 + 12 + 8 * (16 + 6 + 48 + 48)
    q = load_params(tmp_path / "p.bin")
    for a, b in [(p.psi, q.psi), (p.lam, q.lam), (p.phi, q.phi), (p.A, q.A)]:
        assert np.array_equal(a, b)
    (tmp_path / "bad.bin").write_bytes(b"nonsense" + raw[8:])
    with pytest.raises(InvalidInputError):
        load_params(tmp_path / "bad.bin")
