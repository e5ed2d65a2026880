"""Exact minimizer of the W-subproblem.

For each frontal slice ``k`` and fixed ``Z_k``

    min_W  1/2 (||Z_k - W||_F^2 + rho2 ||W K^T||_F^2 + mu ||W||_F^2)
    s.t.   W = G_k on the observed entries,

where ``K`` is the first-difference matrix along the day axis.  The objective
separates over rows.  Splitting row ``i`` into observed columns ``o`` and
missing columns ``c`` and setting the gradient to zero on ``c`` gives

    ((1 + mu) I + rho2 K_c^T K_c) w_c = z_c - rho2 K_c^T K_o g_o.

The system matrix only depends on the missing pattern, so rows sharing a
pattern (within and across slices) share one Cholesky factorization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

__all__ = [
    "RowPartition",
    "WSolver",
    "build_partitions",
    "solve_w_row",
    "solve_w_slice",
    "w_kkt_residual",
    "day_difference",
]


def day_difference(m2: int) -> np.ndarray:
    """Dense ``(m2-1) x m2`` difference matrix; empty when ``m2 == 1``."""
    return np.eye(m2 - 1, m2) - np.eye(m2 - 1, m2, k=1) if m2 > 1 else np.zeros((0, 1))


@dataclass
class RowPartition:
    """Cached data for every row that shares one observed/missing split."""

    observed: np.ndarray
    missing: np.ndarray
    K1: np.ndarray
    K2: np.ndarray
    mu: float
    rho2: float
    rows: list = field(default_factory=list)

    def __post_init__(self):
        n = self.missing.size
        A = (1.0 + self.mu) * np.eye(n) + self.rho2 * (self.K2.T @ self.K2)
        self.factor = cho_factor(A, lower=True)
        self.coupling = self.rho2 * (self.K2.T @ self.K1)

    @property
    def m2(self) -> int:
        return self.observed.size + self.missing.size


def _check_params(mu: float, rho2: float):
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if rho2 < 0:
        raise ValueError(f"rho2 must be nonnegative, got {rho2}")


def _make_partition(pattern: np.ndarray, K: np.ndarray, mu: float, rho2: float) -> RowPartition:
    observed = np.flatnonzero(pattern)
    missing = np.flatnonzero(~pattern)
    return RowPartition(observed, missing, K[:, observed], K[:, missing], mu, rho2)


def _rows(t: np.ndarray) -> np.ndarray:
    """``(m1, m2, m3)`` -> ``(m1*m3, m2)`` with row ``i*m3 + k`` holding ``t[i, :, k]``."""
    return np.transpose(t, (0, 2, 1)).reshape(-1, t.shape[1])


def _unrows(r: np.ndarray, dims) -> np.ndarray:
    m1, m2, m3 = dims
    return np.asfortranarray(np.transpose(r.reshape(m1, m3, m2), (0, 2, 1)))


def build_partitions(mask: np.ndarray, mu: float, rho2: float) -> list[RowPartition]:
    """One :class:`RowPartition` per distinct row pattern that has missing entries.

    ``mask`` is a boolean ``(m1, m2, m3)`` array of observed positions.  Each
    partition lists its rows as ``(i, k)`` pairs.
    """
    _check_params(mu, rho2)
    mask = np.asarray(mask, dtype=bool)
    m1, m2, m3 = mask.shape
    K = day_difference(m2)
    patterns, inv = np.unique(_rows(mask), axis=0, return_inverse=True)
    inv = inv.ravel()
    parts = []
    for u, pattern in enumerate(patterns):
        if pattern.all():
            continue
        p = _make_partition(pattern, K, mu, rho2)
        p.rows = [divmod(int(r), m3) for r in np.flatnonzero(inv == u)]
        parts.append(p)
    return parts


def _solve_block(p: RowPartition, z_missing: np.ndarray, g_observed: np.ndarray) -> np.ndarray:
    rhs = z_missing - g_observed @ p.coupling.T
    return cho_solve(p.factor, rhs.T).T


def solve_w_row(p: RowPartition, z_row, g_row_observed) -> np.ndarray:
    """Full optimal row: observed entries copied, missing ones from the SPD solve."""
    z_row = np.asarray(z_row, dtype=np.float64)
    g_obs = np.asarray(g_row_observed, dtype=np.float64)
    if z_row.shape != (p.m2,) or g_obs.shape != (p.observed.size,):
        raise ValueError("row lengths do not match the partition")
    if not (np.all(np.isfinite(z_row)) and np.all(np.isfinite(g_obs))):
        raise FloatingPointError("non-finite input to the W row solve")
    w = np.empty(p.m2)
    w[p.observed] = g_obs
    w[p.missing] = _solve_block(p, z_row[p.missing][None, :], g_obs[None, :])[0]
    return w


class WSolver:
    """W-update for a whole tensor with factorizations built once per mask.

    For short rows each pattern's solve is expanded into two dense
    ``m2 x m2`` maps (from ``z`` and from ``g``) so that all rows are updated
    by one batched product; longer rows fall back to per-pattern solves.
    """

    dense_limit = 32

    def __init__(self, mask: np.ndarray, mu: float, rho2: float):
        mask = np.asarray(mask, dtype=bool)
        self.mask = mask
        self.dims = mask.shape
        self.mu, self.rho2 = float(mu), float(rho2)
        m1, m2, m3 = self.dims
        self.partitions = build_partitions(mask, mu, rho2)
        self._row_index = [np.array([i * m3 + k for i, k in p.rows], dtype=np.intp)
                           for p in self.partitions]
        self._obs_rows = _rows(mask)
        self._dense = m2 <= self.dense_limit
        if self._dense and self.partitions:
            n = len(self.partitions)
            Tz = np.zeros((n, m2, m2))
            Tg = np.zeros((n, m2, m2))
            for u, p in enumerate(self.partitions):
                inv = cho_solve(p.factor, np.eye(p.missing.size))
                Tz[u][np.ix_(p.missing, p.missing)] = inv
                Tg[u][np.ix_(p.missing, p.observed)] = -inv @ p.coupling
            self._active = np.concatenate(self._row_index)
            pid = np.concatenate([np.full(idx.size, u) for u, idx in enumerate(self._row_index)])
            self._Tz, self._Tg = Tz[pid], Tg[pid]

    def solve(self, Z: np.ndarray, G: np.ndarray) -> np.ndarray:
        if Z.shape != self.dims or G.shape != self.dims:
            raise ValueError("Z and G must match the mask dimensions")
        if not np.all(np.isfinite(Z)):
            raise FloatingPointError("non-finite Z passed to the W solve")
        ZR, GR = _rows(Z), _rows(G)
        WR = GR.copy()
        if self._dense:
            if self.partitions:
                a = self._active
                upd = (self._Tz @ ZR[a][:, :, None] + self._Tg @ GR[a][:, :, None])[:, :, 0]
                WR[a] = np.where(self._obs_rows[a], GR[a], upd)
        else:
            for p, idx in zip(self.partitions, self._row_index):
                zc = ZR[np.ix_(idx, p.missing)]
                go = GR[np.ix_(idx, p.observed)]
                WR[np.ix_(idx, p.missing)] = _solve_block(p, zc, go)
        return _unrows(WR, self.dims)

    def kkt_residual(self, W: np.ndarray, Z: np.ndarray) -> float:
        return w_kkt_residual(W, Z, self.mask, self.mu, self.rho2)


def solve_w_slice(Z_k, G_k, mask_k, mu: float, rho2: float) -> np.ndarray:
    """Solve the W-subproblem for a single ``m1 x m2`` slice."""
    Z_k = np.asarray(Z_k, dtype=np.float64)
    G_k = np.asarray(G_k, dtype=np.float64)
    mask_k = np.asarray(mask_k, dtype=bool)
    if not (Z_k.shape == G_k.shape == mask_k.shape) or Z_k.ndim != 2:
        raise ValueError("Z_k, G_k and mask_k must be matrices of equal shape")
    solver = WSolver(mask_k[:, :, None], mu, rho2)
    return solver.solve(Z_k[:, :, None], G_k[:, :, None])[:, :, 0]


def w_kkt_residual(W, Z, mask, mu: float, rho2: float) -> float:
    """Max-abs of ``W K_{mu,rho2} - Z`` over missing entries, rows times operator."""
    W, Z = np.asarray(W), np.asarray(Z)
    mask = np.asarray(mask, dtype=bool)
    m2 = W.shape[1]
    K = day_difference(m2)
    Kmu = (1.0 + mu) * np.eye(m2) + rho2 * (K.T @ K)
    R = _rows(W) @ Kmu - _rows(Z)
    miss = ~_rows(mask)
    return float(np.max(np.abs(R[miss]))) if miss.any() else 0.0
