"""Dense third-order tensors: validation, slicing, unfolding and the
block-circulant reference construction.

Tensors are plain ``numpy.ndarray`` objects of shape ``(m1, m2, m3)`` stored in
Fortran order, so that every frontal slice ``t[:, :, k]`` is a contiguous,
column-major block.  Slice indices are 0-based throughout the package.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "as_tensor",
    "from_flat",
    "identity_tensor",
    "frontal_slice",
    "frontal_slices",
    "stack_slices",
    "unfold",
    "fold",
    "bcirc",
    "bvec",
    "bvfold",
    "frobenius_norm",
]


def as_tensor(a, copy: bool = True) -> np.ndarray:
    """Validate ``a`` as a real third-order tensor.

    Returns a float64 array in Fortran order.  Non-finite entries are rejected
    because every downstream factorization is undefined on them.
    """
    arr = np.asarray(a)
    if arr.ndim != 3:
        raise ValueError(f"expected a third-order array, got ndim={arr.ndim}")
    if np.iscomplexobj(arr):
        raise TypeError("traffic tensors are real; got a complex array")
    arr = np.array(arr, dtype=np.float64, order="F", copy=copy)
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor contains NaN or Inf entries")
    return arr


def from_flat(data, dims) -> np.ndarray:
    """Build a tensor from a flat buffer in slice-major, column-major order."""
    m1, m2, m3 = dims
    flat = np.asarray(data, dtype=np.float64).ravel()
    if flat.size != m1 * m2 * m3:
        raise ValueError(f"buffer has {flat.size} entries, dims need {m1 * m2 * m3}")
    return as_tensor(flat.reshape((m1, m2, m3), order="F"), copy=False)


def identity_tensor(m: int, m3: int) -> np.ndarray:
    """Identity for the t-product: first slice ``I_m``, remaining slices zero."""
    out = np.zeros((m, m, m3), order="F")
    out[:, :, 0] = np.eye(m)
    return out


def frontal_slice(t: np.ndarray, k: int) -> np.ndarray:
    """Return the ``k``-th frontal slice (0-based) as a read-only view."""
    m3 = t.shape[2]
    if not 0 <= k < m3:
        raise IndexError(f"slice index {k} out of range for m3={m3}")
    view = t[:, :, k]
    view.flags.writeable = False
    return view


def frontal_slices(t: np.ndarray) -> np.ndarray:
    """All frontal slices as a ``(m3, m1, m2)`` stack."""
    return np.moveaxis(np.asarray(t), 2, 0)


def stack_slices(slices) -> np.ndarray:
    """Inverse of :func:`frontal_slices`."""
    return np.asfortranarray(np.moveaxis(np.asarray(slices), 0, 2))


def unfold(t: np.ndarray, mode: int) -> np.ndarray:
    """Mode-1 or mode-2 matricization.

    Mode 1 gives ``[A_1, ..., A_m3]`` (``m1 x m2*m3``); mode 2 gives
    ``[A_1^T, ..., A_m3^T]`` (``m2 x m1*m3``).
    """
    t = np.asarray(t)
    m1, m2, m3 = t.shape
    if mode == 1:
        return t.reshape((m1, m2 * m3), order="F")
    if mode == 2:
        return np.transpose(t, (1, 0, 2)).reshape((m2, m1 * m3), order="F")
    raise ValueError(f"unsupported unfolding mode {mode!r}; expected 1 or 2")


def fold(mat: np.ndarray, mode: int, dims) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    m1, m2, m3 = dims
    mat = np.asarray(mat)
    if mode == 1:
        return np.asfortranarray(mat.reshape((m1, m2, m3), order="F"))
    if mode == 2:
        return np.asfortranarray(np.transpose(mat.reshape((m2, m1, m3), order="F"), (1, 0, 2)))
    raise ValueError(f"unsupported unfolding mode {mode!r}; expected 1 or 2")


def bcirc(t: np.ndarray) -> np.ndarray:
    """Block-circulant matrix of the frontal slices.

    Block ``(i, j)`` holds slice ``(i - j) mod m3``.  Memory is
    ``O(m1 m2 m3^2)``, so this is only meant as a reference for tests.
    """
    t = np.asarray(t)
    m1, m2, m3 = t.shape
    out = np.empty((m1 * m3, m2 * m3), dtype=t.dtype)
    for i in range(m3):
        for j in range(m3):
            out[i * m1:(i + 1) * m1, j * m2:(j + 1) * m2] = t[:, :, (i - j) % m3]
    return out


def bvec(t: np.ndarray) -> np.ndarray:
    """Stack the frontal slices vertically into an ``m1*m3 x m2`` matrix."""
    t = np.asarray(t)
    return np.concatenate([t[:, :, k] for k in range(t.shape[2])], axis=0)


def bvfold(mat: np.ndarray, m3: int) -> np.ndarray:
    """Inverse of :func:`bvec`."""
    mat = np.asarray(mat)
    if mat.shape[0] % m3:
        raise ValueError(f"{mat.shape[0]} rows do not split into {m3} slices")
    return stack_slices(np.split(mat, m3, axis=0))


def frobenius_norm(t) -> float:
    return float(np.sqrt(np.vdot(t, t).real))
