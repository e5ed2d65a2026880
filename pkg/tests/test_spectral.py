import numpy as np
import pytest

from tubal_traffic.spectral import (
    ConsistencyError, SpectralSlices, forward, forward_full, half_weights, inverse,
    inverse_full, n_half, self_conjugate, spectral_norm_identity_check,
)
from tubal_traffic.tensor_core import identity_tensor
from oracles import naive_dft


@pytest.mark.parametrize("m3", [1, 2, 3, 4, 7, 8])
def test_forward_matches_naive_dft(rng, m3):
    t = rng.standard_normal((3, 2, m3))
    ref = naive_dft(t)
    got = forward_full(t)
    assert np.linalg.norm(got - ref) <= 1e-12 * np.linalg.norm(ref)
    assert forward(t).half.shape == (n_half(m3), 3, 2)


def test_constant_slices_concentrate_in_first():
    A = np.arange(6.0).reshape(2, 3)
    t = np.repeat(A[:, :, None], 5, axis=2)
    s = forward(t)
    np.testing.assert_allclose(s.half[0], 5 * A, atol=1e-12)
    np.testing.assert_allclose(s.half[1:], 0, atol=1e-12)
    back = np.zeros((3, 2, 3), dtype=complex)
    back[0] = 5 * A
    np.testing.assert_allclose(inverse(SpectralSlices((2, 3, 5), back)), t, atol=1e-12)


def test_m3_one_is_identity(rng):
    t = rng.standard_normal((3, 4, 1))
    np.testing.assert_array_equal(forward(t).half[0].real, t[:, :, 0])


def test_roundtrip(rng):
    t = rng.standard_normal((5, 4, 6)) * 1e6
    back = inverse(forward(t))
    assert np.linalg.norm(back - t) <= 1e-10 * np.linalg.norm(t)


def test_mirror_access_and_full(rng):
    t = rng.standard_normal((2, 3, 6))
    s = forward(t)
    full = s.full()
    assert full.shape == (6, 2, 3)
    for k in range(1, 6):
        np.testing.assert_array_equal(s[k], np.conj(s[6 - k]) if k > 3 else s.half[k])
        np.testing.assert_array_equal(full[k], np.conj(full[6 - k]))
    with pytest.raises(IndexError):
        s[6]


def test_symmetric_spectral_data_gives_real_tensor(rng):
    m3 = 7
    half = rng.standard_normal((n_half(m3), 3, 3)) + 1j * rng.standard_normal((n_half(m3), 3, 3))
    half[0] = half[0].real
    s = SpectralSlices((3, 3, m3), half)
    full = s.full()
    t = inverse_full(full)
    np.testing.assert_allclose(inverse(s), t, atol=1e-12)


def test_symmetry_violation_raises(rng):
    half = np.zeros((3, 2, 2), dtype=complex)
    half[0] = 1j
    with pytest.raises(ConsistencyError):
        inverse(SpectralSlices((2, 2, 4), half))
    half = np.zeros((3, 2, 2), dtype=complex)
    half[2] = 1 + 1j  # Nyquist slice of an even transform
    with pytest.raises(ConsistencyError):
        inverse(SpectralSlices((2, 2, 4), half))
    with pytest.raises(ConsistencyError):
        inverse_full(rng.standard_normal((4, 2, 2)) + 1j * rng.standard_normal((4, 2, 2)))


def test_shape_validation():
    with pytest.raises(ValueError):
        SpectralSlices((2, 2, 4), np.zeros((2, 2, 2), dtype=complex))


def test_half_weights_and_self_conjugate():
    np.testing.assert_array_equal(half_weights(1), [1])
    np.testing.assert_array_equal(half_weights(4), [1, 2, 1])
    np.testing.assert_array_equal(half_weights(5), [1, 2, 2])
    assert self_conjugate(4) == (0, 2) and self_conjugate(5) == (0,)
    for m3 in range(1, 10):
        assert half_weights(m3).sum() == m3


def test_norm_identity_examples(rng):
    assert spectral_norm_identity_check(np.zeros((2, 2, 3))) == (0.0, 0.0)
    lhs, rhs = spectral_norm_identity_check(identity_tensor(2, 3))
    assert lhs == pytest.approx(2) and rhs == pytest.approx(2)
    lhs, rhs = spectral_norm_identity_check(rng.standard_normal((4, 3, 6)))
    assert abs(lhs - rhs) < 1e-9 * lhs


def test_linearity(rng):
    a, b = rng.standard_normal((2, 3, 2, 5))
    np.testing.assert_allclose(forward(2 * a - 3 * b).half,
                               2 * forward(a).half - 3 * forward(b).half, atol=1e-12)


def test_self_conjugate_slices_are_real(rng):
    s = forward(rng.standard_normal((3, 3, 8)))
    assert s.symmetry_residual() < 1e-15
