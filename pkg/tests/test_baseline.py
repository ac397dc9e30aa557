import numpy as np
import pytest
from hypothesis import given, strategies as st

from repphase.baseline import wiener_filter, wiener_masks, wiener_separate
from repphase.stft import ComplexSpectrogram, InvalidInputError


def complex_noise(r, shape):
    return r.standard_normal(shape) + 1j * r.standard_normal(shape)


def test_single_source_mask_is_one_where_active(rng):
    X = complex_noise(rng, (512, 5))
    A = np.abs(complex_noise(rng, (1, 512, 5)))
    A[0, :10] = 0
    est = wiener_separate(ComplexSpectrogram(X), A)[0].data
    assert np.allclose(est[10:], X[10:])
    assert not np.any(est[:10])


def test_disjoint_supports_recover_sources(rng):
    S = complex_noise(rng, (2, 512, 4))
    S[0, ::2] = 0
    S[1, 1::2] = 0
    est = wiener_filter(S.sum(axis=0), np.abs(S))
    assert np.allclose(est, S)


def test_equal_magnitudes_split_in_half(rng):
    X = complex_noise(rng, (8, 3))
    est = wiener_filter(X, np.ones((2, 8, 3)))
    assert np.allclose(est, X / 2)


@given(seed=st.integers(0, 2**31), K=st.integers(1, 4), p=st.sampled_from([1.0, 2.0]))
def test_masks_partition_active_bins(seed, K, p):
    r = np.random.default_rng(seed)
    A = np.abs(r.standard_normal((K, 6, 5))) * (r.random((K, 6, 5)) < 0.7)
    masks = wiener_masks(A, p)
    active = A.sum(axis=0) > 0
    assert np.all((masks >= 0) & (masks <= 1))
    assert np.allclose(masks.sum(axis=0)[active], 1.0)
    assert np.all(masks.sum(axis=0)[~active] == 0)
    X = complex_noise(r, (6, 5))
    assert np.allclose(wiener_filter(X, A, p).sum(axis=0)[active], X[active])


def test_rejects_bad_inputs():
    with pytest.raises(InvalidInputError):
        wiener_masks(-np.ones((2, 3, 3)))
    with pytest.raises(InvalidInputError):
        wiener_filter(np.zeros((4, 3)), np.ones((2, 4, 2)))
