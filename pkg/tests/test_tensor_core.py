import numpy as np
import pytest

from tubal_traffic.tensor_core import (
    as_tensor, bcirc, bvec, bvfold, fold, frobenius_norm, from_flat, frontal_slice,
    frontal_slices, identity_tensor, stack_slices, unfold,
)
from oracles import bcirc_loop


@pytest.fixture
def t8():
    return from_flat(np.arange(1, 9), (2, 2, 2))


def test_as_tensor_rejects_bad_input():
    with pytest.raises(ValueError):
        as_tensor(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        as_tensor(np.array([[[np.nan]]]))
    with pytest.raises(ValueError):
        as_tensor(np.full((1, 1, 2), np.inf))
    with pytest.raises(TypeError):
        as_tensor(np.zeros((1, 1, 1), dtype=complex))


def test_layout_is_slice_major_column_major(t8):
    assert t8.flags.f_contiguous
    np.testing.assert_array_equal(frontal_slice(t8, 1), [[5, 7], [6, 8]])
    assert frontal_slice(t8, 1).flags.f_contiguous


def test_frontal_slice_of_zero_and_identity():
    np.testing.assert_array_equal(frontal_slice(np.zeros((3, 4, 2)), 0), np.zeros((3, 4)))
    ident = identity_tensor(3, 4)
    np.testing.assert_array_equal(frontal_slice(ident, 0), np.eye(3))
    np.testing.assert_array_equal(frontal_slice(ident, 1), np.zeros((3, 3)))


def test_frontal_slice_range_and_readonly(t8):
    with pytest.raises(IndexError):
        frontal_slice(t8, 2)
    with pytest.raises(IndexError):
        frontal_slice(t8, -1)
    view = frontal_slice(t8, 0)
    with pytest.raises(ValueError):
        view[0, 0] = 3.0
    assert t8.flags.writeable


def test_slices_tile_tensor(rng):
    t = as_tensor(rng.standard_normal((3, 4, 5)))
    np.testing.assert_array_equal(stack_slices([frontal_slice(t, k) for k in range(5)]), t)
    np.testing.assert_array_equal(stack_slices(frontal_slices(t)), t)


def test_unfold_examples(t8):
    np.testing.assert_array_equal(unfold(np.ones((2, 2, 2)), 1), np.ones((2, 4)))
    np.testing.assert_array_equal(unfold(t8, 1), [[1, 3, 5, 7], [2, 4, 6, 8]])
    np.testing.assert_array_equal(unfold(t8, 2), np.hstack([t8[:, :, 0].T, t8[:, :, 1].T]))


@pytest.mark.parametrize("mode", [1, 2])
def test_fold_unfold_roundtrip(rng, mode):
    t = rng.standard_normal((4, 3, 5))
    np.testing.assert_array_equal(fold(unfold(t, mode), mode, t.shape), t)


def test_unfold_bad_mode(t8):
    with pytest.raises(ValueError):
        unfold(t8, 3)
    with pytest.raises(ValueError):
        fold(np.zeros((2, 4)), 0, (2, 2, 2))


def test_bcirc_small_cases(rng):
    a = rng.standard_normal((2, 3, 1))
    np.testing.assert_array_equal(bcirc(a), a[:, :, 0])
    t = rng.standard_normal((2, 3, 2))
    A1, A2 = t[:, :, 0], t[:, :, 1]
    np.testing.assert_array_equal(bcirc(t), np.block([[A1, A2], [A2, A1]]))
    t = rng.standard_normal((3, 2, 5))
    np.testing.assert_array_equal(bcirc(t), bcirc_loop(t))


def test_bcirc_norm_identity(rng):
    t = rng.standard_normal((4, 3, 5))
    lhs = np.linalg.norm(bcirc(t)) ** 2
    assert abs(lhs - 5 * frobenius_norm(t) ** 2) <= 1e-10 * lhs


def test_bvec_roundtrip(rng):
    t = rng.standard_normal((3, 2, 4))
    assert bvec(t).shape == (12, 2)
    np.testing.assert_array_equal(bvfold(bvec(t), 4), t)
    with pytest.raises(ValueError):
        bvfold(np.zeros((5, 2)), 2)


def test_frobenius_norm(rng):
    assert frobenius_norm(np.zeros((2, 3, 4))) == 0.0
    assert frobenius_norm(identity_tensor(3, 4)) == pytest.approx(np.sqrt(3), rel=1e-15)
    t = rng.standard_normal((3, 4, 2))
    acc = 0.0
    for i in range(3):
        for j in range(4):
            for k in range(2):
                acc += t[i, j, k] ** 2
    assert frobenius_norm(t) == pytest.approx(np.sqrt(acc), rel=1e-14)


def test_from_flat_size_check():
    with pytest.raises(ValueError):
        from_flat(np.arange(7), (2, 2, 2))
