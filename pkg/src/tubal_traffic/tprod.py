"""t-product algebra computed slice-wise in the Fourier domain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import SpectralSlices, forward, inverse, self_conjugate

__all__ = ["TSVDResult", "tproduct", "conj_transpose", "tsvd", "tubal_rank", "spectral_singular_values"]


@dataclass
class TSVDResult:
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return tproduct(tproduct(self.U, self.S), conj_transpose(self.V))


def tproduct(a, b) -> np.ndarray:
    """t-product of ``a`` (m1 x p x m3) and ``b`` (p x m2 x m3)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 3 or b.ndim != 3:
        raise ValueError("t-product needs two third-order tensors")
    if a.shape[1] != b.shape[0] or a.shape[2] != b.shape[2]:
        raise ValueError(f"cannot t-multiply shapes {a.shape} and {b.shape}")
    sa, sb = forward(a), forward(b)
    dims = (a.shape[0], b.shape[1], a.shape[2])
    return inverse(SpectralSlices(dims, sa.half @ sb.half))


def conj_transpose(a) -> np.ndarray:
    """Transpose every frontal slice, then reverse the order of slices 2..m3."""
    a = np.asarray(a)
    order = [0] + list(range(a.shape[2] - 1, 0, -1))
    return np.asfortranarray(np.transpose(a, (1, 0, 2))[:, :, order])


def _real_if_self_conjugate(k: int, m3: int, mat: np.ndarray) -> np.ndarray:
    return mat.real if k in self_conjugate(m3) else mat


def tsvd(a) -> TSVDResult:
    """Full t-SVD ``a = U * S * V^*`` via per-slice SVDs of the half spectrum."""
    a = np.asarray(a, dtype=np.float64)
    m1, m2, m3 = a.shape
    sa = forward(a)
    h = sa.half.shape[0]
    U = np.zeros((h, m1, m1), dtype=complex)
    S = np.zeros((h, m1, m2), dtype=complex)
    V = np.zeros((h, m2, m2), dtype=complex)
    n = min(m1, m2)
    for k in range(h):
        # Self-conjugate slices are real; a real SVD keeps their factors real.
        mat = _real_if_self_conjugate(k, m3, sa.half[k])
        try:
            u, s, vh = np.linalg.svd(mat)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(f"SVD failed on spectral slice {k}") from exc
        U[k] = u
        S[k, np.arange(n), np.arange(n)] = s
        V[k] = vh.conj().T
    return TSVDResult(
        U=inverse(SpectralSlices((m1, m1, m3), U)),
        S=inverse(SpectralSlices((m1, m2, m3), S)),
        V=inverse(SpectralSlices((m2, m2, m3), V)),
    )


def spectral_singular_values(a) -> np.ndarray:
    """Singular values of each stored spectral slice, shape ``(h, min(m1, m2))``."""
    sa = forward(a)
    return np.linalg.svd(sa.half, compute_uv=False)


def tubal_rank(a, tol: float = 1e-10) -> int:
    """Largest per-slice count of spectral singular values above ``tol * sigma_max``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    sv = spectral_singular_values(a)
    if sv.size == 0:
        return 0
    smax = sv.max()
    if smax == 0:
        return 0
    return int(np.max(np.sum(sv > tol * smax, axis=1)))
