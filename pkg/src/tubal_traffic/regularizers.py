"""First-difference operators and their shifted Gram matrices.

``D`` is the ``(m-1) x m`` matrix with ones on the diagonal and minus ones on
the first superdiagonal.  The solver needs ``c I + rho D^T D`` for two choices
of shift: ``(1, rho1)`` along the time-slot axis and ``(1 + mu, rho2)`` along
the day axis.  ``D^T D`` is the path-graph Laplacian, so the Gram operator is
tridiagonal and factors cheaply as a banded Cholesky.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

__all__ = ["DifferenceOperator", "ShiftedGram", "make_toeplitz", "shifted_gram", "DENSE_CUTOFF"]

# Above this size the Gram operator is applied with the tridiagonal stencil.
DENSE_CUTOFF = 64


class DifferenceOperator:
    """Forward-difference matrix of size ``(m-1) x m``."""

    def __init__(self, m: int):
        if m < 2:
            raise ValueError(f"difference operator needs m >= 2, got {m}")
        self.m = m

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m - 1, self.m)

    def todense(self) -> np.ndarray:
        return np.eye(self.m - 1, self.m) - np.eye(self.m - 1, self.m, k=1)

    def __matmul__(self, x):
        x = np.asarray(x)
        if x.shape[0] != self.m:
            raise ValueError(f"operand has {x.shape[0]} rows, operator needs {self.m}")
        return x[:-1] - x[1:]

    def __array__(self, dtype=None, copy=None):
        return self.todense() if dtype is None else self.todense().astype(dtype)


def make_toeplitz(m: int) -> DifferenceOperator:
    return DifferenceOperator(m)


def _laplacian_bands(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of ``D^T D``; all zero when ``m == 1``."""
    if m == 1:
        return np.zeros(1), np.zeros(0)
    diag = np.full(m, 2.0)
    diag[0] = diag[-1] = 1.0
    return diag, -np.ones(m - 1)


class ShiftedGram:
    """The SPD operator ``c I + rho D^T D`` with a cached banded Cholesky factor.

    For ``m == 1`` the difference operator is empty and the operator reduces
    to ``c``.
    """

    def __init__(self, m: int, c: float, rho: float):
        if m < 1:
            raise ValueError("m must be positive")
        if c <= 0:
            raise ValueError(f"shift c must be positive, got {c}")
        if rho < 0:
            raise ValueError(f"rho must be nonnegative, got {rho}")
        self.m, self.c, self.rho = int(m), float(c), float(rho)
        d, e = _laplacian_bands(self.m)
        self.diag = self.c + self.rho * d
        self.offdiag = self.rho * e
        ab = np.zeros((2, self.m))
        ab[0] = self.diag
        ab[1, :-1] = self.offdiag
        self._chol = cholesky_banded(ab, lower=True)

    def todense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def _check(self, x: np.ndarray, axis_len: int):
        if axis_len != self.m:
            raise ValueError(f"operand dimension {axis_len} does not match operator size {self.m}")

    def apply(self, x, side: str = "left") -> np.ndarray:
        """``G @ x`` (``side='left'``) or ``x @ G`` (``side='right'``)."""
        x = np.asarray(x)
        if side == "right":
            return self.apply(x.T).T
        self._check(x, x.shape[0])
        if self.m <= DENSE_CUTOFF:
            return self.todense() @ x
        diag = self.diag.reshape((-1,) + (1,) * (x.ndim - 1))
        off = self.offdiag.reshape((-1,) + (1,) * (x.ndim - 1))
        out = diag * x
        out[:-1] += off * x[1:]
        out[1:] += off * x[:-1]
        return out

    def solve(self, b, side: str = "left") -> np.ndarray:
        """``G^{-1} b`` (``side='left'``) or ``b G^{-1}`` (``side='right'``)."""
        b = np.asarray(b)
        if side == "right":
            return self.solve(b.T).T
        self._check(b, b.shape[0])
        if np.iscomplexobj(b):
            return (cho_solve_banded((self._chol, True), b.real)
                    + 1j * cho_solve_banded((self._chol, True), b.imag))
        return cho_solve_banded((self._chol, True), b)

    def spectral_bounds(self) -> tuple[float, float]:
        """Analytic eigenvalue envelope ``(c, c + 4 rho)``."""
        return self.c, self.c + 4.0 * self.rho

    def norm2(self) -> float:
        """Exact spectral norm: the path Laplacian has eigenvalues ``2 - 2 cos(pi j / m)``."""
        lam = 2.0 - 2.0 * np.cos(np.pi * (self.m - 1) / self.m) if self.m > 1 else 0.0
        return self.c + self.rho * lam


@lru_cache(maxsize=64)
def shifted_gram(m: int, c: float, rho: float) -> ShiftedGram:
    """Cached constructor; the solver reuses one factorization per ``(m, c, rho)``."""
    return ShiftedGram(m, c, rho)
