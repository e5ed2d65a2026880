"""Low-tubal-rank completion with temporal-stability and periodicity penalties.

The model is

    min  1/2 ||X * Y - W||^2 + mu/2 ||W||^2
         + rho1/2 ||H unfold(X * Y, 1)||^2 + rho2/2 ||K unfold(W, 2)||^2
    s.t. W = G on the observed set,

with ``*`` the t-product and ``H``, ``K`` first-difference matrices along the
time-slot and day axes.  After the mode-3 DFT the factor part splits into
independent complex problems

    h_k(X, Y) = 1/2 (||X Y - W~_k||^2 + rho1 ||H X Y||^2),

which are updated by one preconditioned gradient step each (X first, then Y
with the new X), while the W part is solved exactly in the real domain.
Only the first ``m3 // 2 + 1`` spectral slices are ever touched; the rest are
their complex conjugates.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .regularizers import ShiftedGram, shifted_gram
from .spectral import SpectralSlices, forward, half_weights, inverse, self_conjugate
from .wsolve import WSolver, day_difference

__all__ = [
    "DivergenceError",
    "ObservationMask",
    "SolverConfig",
    "SolverState",
    "SolverResult",
    "SliceStep",
    "KKTResiduals",
    "default_rank",
    "pinv_svd",
    "h_value",
    "grad_h",
    "descent_directions",
    "step_factors",
    "objective",
    "kkt_residuals",
    "initial_state",
    "run",
]

log = logging.getLogger(__name__)


class DivergenceError(ArithmeticError):
    def __init__(self, iteration: int, message: str = "objective became non-finite"):
        super().__init__(f"{message} at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class ObservationMask:
    """Boolean tensor of observed positions with per-slice and per-row views."""

    observed: np.ndarray

    def __post_init__(self):
        obs = np.asarray(self.observed, dtype=bool)
        if obs.ndim != 3:
            raise ValueError("mask must be a third-order boolean array")
        object.__setattr__(self, "observed", obs)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.observed.shape

    @property
    def count(self) -> int:
        return int(self.observed.sum())

    def slice_set(self, k: int) -> np.ndarray:
        """Observed ``(i, j)`` pairs of slice ``k``."""
        return np.argwhere(self.observed[:, :, k])

    def row_set(self, i: int, k: int) -> np.ndarray:
        """Observed columns ``j`` of row ``i`` in slice ``k``."""
        return np.flatnonzero(self.observed[i, :, k])

    def project(self, t: np.ndarray) -> np.ndarray:
        """Keep observed entries, zero elsewhere."""
        return np.asfortranarray(np.where(self.observed, t, 0.0))


def default_rank(m1: int, m2: int) -> int:
    return max(1, min(10, -(-min(m1, m2) // 4)))


@dataclass
class SolverConfig:
    rank: int | None = None
    rho1: float = 0.01
    rho2: float = 0.01
    mu: float = 1e-4
    alpha: float = 0.5
    beta: float = 0.5
    tol: float = 1e-6
    max_iters: int = 2000
    pinv_tol: float = 1e-10
    rank_adjust: str = "off"
    seed: int = 0
    max_halvings: int = 10
    step_rule: str = "exact"
    normalize: bool = True
    record_diagnostics: bool = False

    def __post_init__(self):
        if self.rank is not None and self.rank < 1:
            raise ValueError("rank must be at least 1")
        if self.rho1 < 0 or self.rho2 < 0:
            raise ValueError("rho1 and rho2 must be nonnegative")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("step sizes must be nonnegative")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.pinv_tol < 1:
            raise ValueError("pinv_tol must lie in (0, 1)")
        if self.step_rule not in ("exact", "constant"):
            raise ValueError(f"unknown step_rule {self.step_rule!r}")
        if self.rank_adjust not in ("off", "decrease-on-plateau"):
            raise ValueError(f"unknown rank_adjust mode {self.rank_adjust!r}")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")

    def resolved_rank(self, dims) -> int:
        return self.rank if self.rank is not None else default_rank(dims[0], dims[1])

    def to_dict(self) -> dict:
        return asdict(self)


# -- per-slice algebra -------------------------------------------------------


def pinv_svd(a: np.ndarray, rtol: float):
    """Moore-Penrose inverse by SVD, dropping singular values <= ``rtol * s_max``.

    Returns ``(pinv, u_kept, s_kept, vh_kept)`` so callers can reuse the
    retained singular triplets.
    """
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    keep = s > rtol * s[0] if s.size and s[0] > 0 else np.zeros(s.shape, dtype=bool)
    u1, s1, vh1 = u[:, keep], s[keep], vh[keep]
    return (vh1.conj().T / s1) @ u1.conj().T, u1, s1, vh1


def _residual(X, Y, W, Hg: ShiftedGram):
    Z = X @ Y
    return Hg.apply(Z) - W


def h_value(X, Y, W, rho1: float) -> float:
    Z = X @ Y
    dz = Z[:-1] - Z[1:] if Z.shape[0] > 1 else np.zeros((0,) + Z.shape[1:])
    return 0.5 * float(np.linalg.norm(Z - W) ** 2 + rho1 * np.linalg.norm(dz) ** 2)


def grad_h(X, Y, W, rho1: float):
    """Partial derivatives of ``h`` in ``X`` and ``Y``.

    ``(X Y - W) Y^* + rho1 H^T H X Y Y^*`` and
    ``X^* (X Y - W) + rho1 X^* H^T H X Y``.  For real-valued ``h`` the first
    equals ``dh/dRe(X) + i dh/dIm(X)``.
    """
    R = _residual(X, Y, W, shifted_gram(X.shape[0], 1.0, float(rho1)))
    return R @ Y.conj().T, X.conj().T @ R


@dataclass
class SliceStep:
    """Diagnostics of one factor update on one spectral slice.

    ``alpha``/``beta`` are the effective step sizes in the ``step / L`` form,
    ``descent_*`` the inner products of direction and gradient and
    ``descent_bound_*`` the corresponding upper bounds from the singular
    values.  The ``h_*`` fields are only filled in when diagnostics are on.
    """

    k: int
    alpha: float
    beta: float
    L1: float
    L2: float
    kappa_x: float
    kappa_y: float
    halvings_x: int = 0
    halvings_y: int = 0
    descent_x: float = 0.0
    descent_y: float = 0.0
    descent_bound_x: float = 0.0
    descent_bound_y: float = 0.0
    proj_grad_x: float = 0.0
    proj_grad_y: float = 0.0
    dx_sq: float = 0.0
    dx_bound: float = 0.0
    h_before: float = float("nan")
    h_mid: float = float("nan")
    h_after: float = float("nan")

    @property
    def kappa(self) -> float:
        return min(self.kappa_x, self.kappa_y)


def _kappa(step: float, L: float, rho1: float, s_first: float, s_last: float) -> float:
    """Sufficient-decrease coefficient; positive means the step provably descends."""
    if L == 0 or s_last == 0:
        return -np.inf
    return (step / L) * (1.0 / ((1.0 + 4.0 * rho1) * s_first ** 2) - step / (2.0 * s_last ** 4))


def _halve_until_safe(step, L, rho1, s_first, s_last, max_halvings):
    kappa = _kappa(step, L, rho1, s_first, s_last)
    n = 0
    while kappa <= 0 and n < max_halvings:
        step *= 0.5
        n += 1
        kappa = _kappa(step, L, rho1, s_first, s_last)
    if kappa <= 0:
        step = 0.0
    return step, kappa, n


def _hnorm_sq(A, rho1: float) -> float:
    """``||A||^2 + rho1 ||H A||^2``: the curvature of ``h`` along a product ``A``."""
    dA = A[:-1] - A[1:]
    return float(np.vdot(A, A).real + rho1 * np.vdot(dA, dA).real)


def _kept_singular(a: np.ndarray, rtol: float):
    _, s, vh = np.linalg.svd(a, full_matrices=False)
    keep = s > rtol * s[0] if s.size and s[0] > 0 else np.zeros(s.shape, dtype=bool)
    return s[keep], vh[keep]


def _x_direction(X, Y, W, Hg: ShiftedGram, pinv_tol: float):
    gX, _ = grad_h(X, Y, W, Hg.rho)
    P, uY, s2Y, _ = pinv_svd(Y @ Y.conj().T, pinv_tol)
    L1 = Hg.norm2() * float(s2Y[0]) if s2Y.size else 0.0
    dX = -Hg.solve(gX @ P) if L1 > 0 else np.zeros_like(X)
    return gX, dX, L1, uY, s2Y


def _y_direction(X, Y, W, Hg: ShiftedGram, pinv_tol: float):
    _, gY = grad_h(X, Y, W, Hg.rho)
    M = X.conj().T @ Hg.apply(X)
    P2, _, sM, _ = pinv_svd(M, pinv_tol)
    L2 = float(sM[0]) if sM.size else 0.0
    dY = -(P2 @ gY) if L2 > 0 else np.zeros_like(Y)
    return gY, dY, L2


def descent_directions(X, Y, W, Hg: ShiftedGram, pinv_tol: float, X_next=None):
    """Preconditioned directions and their scaling constants.

    ``dX = -H_rho1^{-1} grad_X h(X, Y) (Y Y^*)^+`` with
    ``L1 = ||H_rho1|| ||Y Y^*||``, and ``dY = -(Xn^* H_rho1 Xn)^+ grad_Y h(Xn, Y)``
    with ``L2 = ||Xn^* H_rho1 Xn||``, where ``Xn`` is the already-updated X
    (``X_next``; defaults to ``X``).  Returns ``(dX, dY, L1, L2)``; a zero
    ``L`` comes with a zero direction.
    """
    _, dX, L1, _, _ = _x_direction(X, Y, W, Hg, pinv_tol)
    Xn = X if X_next is None else X_next
    _, dY, L2 = _y_direction(Xn, Y, W, Hg, pinv_tol)
    return dX, dY, L1, L2


def _update_slice(k, X, Y, W, Hg: ShiftedGram, cfg: SolverConfig, real: bool):
    """One Gauss-Seidel pass on slice ``k``: X step, then Y step at the new X.

    With ``step_rule='exact'`` the step along each direction minimizes ``h``
    exactly (``h`` is quadratic along the ray).  With ``'constant'`` the
    configured ``alpha``/``beta`` are halved until the decrease coefficient
    is positive, and dropped to zero after ``max_halvings``.
    """
    if real:
        X, Y, W = X.real, Y.real, W.real
    rho1 = Hg.rho
    diag = cfg.record_diagnostics
    h0 = h_value(X, Y, W, rho1) if diag else float("nan")

    gX, dX, L1, uY, s2Y = _x_direction(X, Y, W, Hg, cfg.pinv_tol)
    hx = 0
    if L1 > 0:
        sY1, sYt = np.sqrt(s2Y[0]), np.sqrt(s2Y[-1])
        if cfg.step_rule == "exact":
            curv = _hnorm_sq(dX @ Y, rho1)
            t = -float(np.vdot(gX, dX).real) / curv if curv > 0 else 0.0
            alpha = t * L1
            kx = _kappa(alpha, L1, rho1, sY1, sYt)
        else:
            alpha, kx, hx = _halve_until_safe(cfg.alpha, L1, rho1, sY1, sYt, cfg.max_halvings)
        stepX = (alpha / L1) * dX
    else:
        alpha, kx, stepX = 0.0, -np.inf, np.zeros_like(X)
    Xn = X + stepX
    h_mid = h_value(Xn, Y, W, rho1) if diag else float("nan")

    gY, dY, L2 = _y_direction(Xn, Y, W, Hg, cfg.pinv_tol)
    sX, vhX = _kept_singular(Xn, cfg.pinv_tol)
    hy = 0
    if L2 > 0 and sX.size:
        if cfg.step_rule == "exact":
            curv = _hnorm_sq(Xn @ dY, rho1)
            t = -float(np.vdot(gY, dY).real) / curv if curv > 0 else 0.0
            beta = t * L2
            ky = _kappa(beta, L2, rho1, sX[0], sX[-1])
        else:
            beta, ky, hy = _halve_until_safe(cfg.beta, L2, rho1, sX[0], sX[-1], cfg.max_halvings)
        Yn = Y + (beta / L2) * dY
    else:
        beta, ky, Yn = 0.0, -np.inf, Y

    info = SliceStep(k, alpha, beta, L1, L2, kx, ky, hx, hy)
    if diag:
        info.h_before, info.h_mid, info.h_after = h0, h_mid, h_value(Xn, Yn, W, rho1)
        info.descent_x = float(np.vdot(gX, dX).real)
        info.descent_y = float(np.vdot(gY, dY).real)
        info.proj_grad_x = float(np.linalg.norm(gX @ uY))
        info.proj_grad_y = float(np.linalg.norm(vhX @ gY))
        if s2Y.size:
            info.descent_bound_x = -info.proj_grad_x ** 2 / ((1 + 4 * rho1) * s2Y[0])
            if L1 > 0:
                info.dx_bound = alpha ** 2 / (L1 ** 2 * s2Y[-1] ** 2) * info.proj_grad_x ** 2
        if sX.size:
            info.descent_bound_y = -info.proj_grad_y ** 2 / ((1 + 4 * rho1) * sX[0] ** 2)
        info.dx_sq = float(np.vdot(stepX, stepX).real)
    return Xn, Yn, info


# -- state, objective, driver ------------------------------------------------


@dataclass
class SolverState:
    iteration: int
    X: list
    Y: list
    W: np.ndarray
    Wt: SpectralSlices
    trace: list = field(default_factory=list)
    delta_x: float = np.inf
    delta_y: float = np.inf
    delta_w: float = np.inf

    @property
    def dims(self):
        return self.W.shape

    def ranks(self) -> list[int]:
        return [x.shape[1] for x in self.X]

    def Z(self) -> np.ndarray:
        m1, m2, m3 = self.dims
        half = np.stack([x @ y for x, y in zip(self.X, self.Y)])
        return inverse(SpectralSlices((m1, m2, m3), half))


def objective(state: SolverState, cfg: SolverConfig) -> float:
    """Objective evaluated slice-wise in the Fourier domain."""
    m1, m2, m3 = state.dims
    w = half_weights(m3)
    K = day_difference(m2)
    total = 0.0
    for k, (X, Y) in enumerate(zip(state.X, state.Y)):
        Wk = state.Wt.half[k]
        Z = X @ Y
        dz = Z[:-1] - Z[1:]
        s = (np.linalg.norm(Z - Wk) ** 2 + cfg.rho1 * np.linalg.norm(dz) ** 2
             + cfg.rho2 * np.linalg.norm(Wk @ K.T) ** 2 + cfg.mu * np.linalg.norm(Wk) ** 2)
        total += w[k] * s
    return float(total / (2.0 * m3))


def step_factors(state: SolverState, cfg: SolverConfig):
    """Update every stored spectral slice once; returns ``(X, Y, infos)``."""
    m1, m2, m3 = state.dims
    Hg = shifted_gram(m1, 1.0, float(cfg.rho1))
    real = self_conjugate(m3)
    newX, newY, infos = [], [], []
    for k, (X, Y) in enumerate(zip(state.X, state.Y)):
        Xn, Yn, info = _update_slice(k, X, Y, state.Wt.half[k], Hg, cfg, k in real)
        if k in real:
            Xn, Yn = Xn.astype(complex), Yn.astype(complex)
        newX.append(Xn)
        newY.append(Yn)
        infos.append(info)
    return newX, newY, infos


@dataclass
class KKTResiduals:
    """Per-slice stationarity measures of the factor and W subproblems."""

    grad_x: np.ndarray
    grad_y: np.ndarray
    proj_grad_x: np.ndarray
    proj_grad_y: np.ndarray
    w_residual: float
    z_scale: float

    def total_proj_x(self, m3: int) -> float:
        return float(np.sqrt(np.dot(half_weights(m3), self.proj_grad_x ** 2)))

    def total_proj_y(self, m3: int) -> float:
        return float(np.sqrt(np.dot(half_weights(m3), self.proj_grad_y ** 2)))


def kkt_residuals(state: SolverState, cfg: SolverConfig, wsolver: WSolver | None = None,
                  mask=None) -> KKTResiduals:
    """Stationarity residuals at ``state``.

    ``grad_x[k] = ||H_rho1 X (Y Y^*) - W~ Y^*||`` and
    ``grad_y[k] = ||(X^* H_rho1 X) Y - X^* W~||``; the projected versions keep
    only the components along the retained singular vectors of ``Y`` and
    ``X``.  The W residual is the max-abs violation of the W optimality
    condition on the missing entries.
    """
    m1, m2, m3 = state.dims
    gx, gy, px, py = [], [], [], []
    for k, (X, Y) in enumerate(zip(state.X, state.Y)):
        Wk = state.Wt.half[k]
        GX, GY = grad_h(X, Y, Wk, cfg.rho1)
        _, uY, _, _ = pinv_svd(Y, cfg.pinv_tol)
        _, _, _, vhX = pinv_svd(X, cfg.pinv_tol)
        gx.append(np.linalg.norm(GX))
        gy.append(np.linalg.norm(GY))
        px.append(np.linalg.norm(GX @ uY))
        py.append(np.linalg.norm(vhX @ GY))
    Z = state.Z()
    if wsolver is None:
        if mask is None:
            raise ValueError("need a WSolver or a mask to evaluate the W residual")
        mask = mask.observed if isinstance(mask, ObservationMask) else mask
        wsolver = WSolver(mask, cfg.mu, cfg.rho2)
    wres = wsolver.kkt_residual(state.W, Z)
    return KKTResiduals(np.array(gx), np.array(gy), np.array(px), np.array(py),
                        wres, float(np.max(np.abs(Z))))


def initial_state(G0: np.ndarray, cfg: SolverConfig, wsolver: WSolver) -> SolverState:
    """Seeded real Gaussian factors, transformed; W from one exact W-solve."""
    m1, m2, m3 = G0.shape
    r = cfg.resolved_rank(G0.shape)
    rng = np.random.default_rng(cfg.seed)
    sd = 1.0 / np.sqrt(r)
    X0 = rng.normal(0.0, sd, size=(m1, r, m3))
    Y0 = rng.normal(0.0, sd, size=(r, m2, m3))
    Xt, Yt = forward(X0).half, forward(Y0).half
    X = [Xt[k] for k in range(Xt.shape[0])]
    Y = [Yt[k] for k in range(Yt.shape[0])]
    Z0 = inverse(SpectralSlices((m1, m2, m3), Xt @ Yt))
    W = wsolver.solve(Z0, G0)
    return SolverState(0, X, Y, W, forward(W))


def _truncate_ranks(X, Y, pinv_tol: float, real_slices):
    newX, newY, changed = [], [], False
    for k, (x, y) in enumerate(zip(X, Y)):
        Z = x @ y
        if k in real_slices:
            Z = Z.real
        u, s, vh = np.linalg.svd(Z, full_matrices=False)
        keep = max(1, int(np.sum(s > pinv_tol * s[0]))) if s[0] > 0 else 1
        if keep < x.shape[1]:
            changed = True
            root = np.sqrt(s[:keep])
            x = (u[:, :keep] * root).astype(complex)
            y = (root[:, None] * vh[:keep]).astype(complex)
        newX.append(x)
        newY.append(y)
    return newX, newY, changed


@dataclass
class SolverResult:
    """Output of :func:`run`.

    ``W``, ``X``, ``Y`` and ``trace`` are in the units of the input;
    ``state`` (final) and ``initial`` are the internal states, which are
    divided by ``scale``.
    """

    W: np.ndarray
    X: list
    Y: list
    trace: list
    iterations: int
    converged: bool
    wall_ms: float
    scale: float
    ranks: list
    kappa_log: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    state: SolverState | None = None
    initial: SolverState | None = None


def run(G, mask, cfg: SolverConfig | None = None, callback=None) -> SolverResult:
    """Complete ``G`` from the entries selected by ``mask``.

    ``G`` outside the mask is ignored.  When ``cfg.normalize`` is set, the
    problem is solved for ``G / s`` with ``s`` the RMS of the observed entries
    and the result is scaled back; the model is homogeneous, so only the step
    rule and the initialization see the difference.  The returned objective
    trace is in the units of ``G``.
    """
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    mask = mask if isinstance(mask, ObservationMask) else ObservationMask(mask)
    G = np.asarray(G, dtype=np.float64)
    if G.shape != mask.dims:
        raise ValueError(f"G has shape {G.shape}, mask has {mask.dims}")
    if mask.count == 0:
        raise ValueError("mask observes no entries")
    G0 = mask.project(G)
    if not np.all(np.isfinite(G0)):
        raise ValueError("observed entries must be finite")
    scale = 1.0
    if cfg.normalize:
        rms = float(np.sqrt(np.sum(G0 ** 2) / mask.count))
        scale = rms if rms > 0 else 1.0
        G0 = G0 / scale

    m1, m2, m3 = G0.shape
    wsolver = WSolver(mask.observed, cfg.mu, cfg.rho2)
    state = initial_state(G0, cfg, wsolver)
    state.trace.append(objective(state, cfg))
    initial = state
    real = self_conjugate(m3)
    kappa_log, steps = [], []
    converged = False
    last_rank_check = 0

    for it in range(1, cfg.max_iters + 1):
        newX, newY, infos = step_factors(state, cfg)
        kappa_log.append(min(i.kappa for i in infos))
        if cfg.record_diagnostics:
            steps.append(infos)
        Zt = np.stack([x @ y for x, y in zip(newX, newY)])
        Z = inverse(SpectralSlices((m1, m2, m3), Zt))
        W = wsolver.solve(Z, G0)

        rank_changed = False
        if cfg.rank_adjust == "decrease-on-plateau" and it - last_rank_check >= 10 and len(state.trace) > 10:
            old, new = state.trace[-11], state.trace[-1]
            if old - new <= 1e-4 * abs(old):
                newX, newY, rank_changed = _truncate_ranks(newX, newY, cfg.pinv_tol, real)
                last_rank_check = it

        if rank_changed:
            dx = dy = np.inf
        else:
            dx = max(float(np.max(np.abs(a - b))) for a, b in zip(newX, state.X))
            dy = max(float(np.max(np.abs(a - b))) for a, b in zip(newY, state.Y))
        dw = float(np.linalg.norm(W - state.W)) * scale
        state = SolverState(it, newX, newY, W, forward(W), state.trace,
                            dx * np.sqrt(scale), dy * np.sqrt(scale), dw)
        f = objective(state, cfg)
        if not np.isfinite(f):
            raise DivergenceError(it)
        state.trace.append(f)
        if callback is not None:
            callback(state)
        if state.delta_x <= cfg.tol and state.delta_y <= cfg.tol and state.delta_w <= cfg.tol:
            converged = True
            break

    W_out = np.asfortranarray(state.W * scale)
    # undo the normalization bit-exactly on the observed set
    W_out[mask.observed] = G[mask.observed]
    trace = [f * scale ** 2 for f in state.trace]
    log.debug("finished after %d iterations (converged=%s)", state.iteration, converged)
    return SolverResult(
        W=W_out,
        X=[x * np.sqrt(scale) for x in state.X],
        Y=[y * np.sqrt(scale) for y in state.Y],
        trace=trace,
        iterations=state.iteration,
        converged=converged,
        wall_ms=(time.perf_counter() - t0) * 1e3,
        scale=scale,
        ranks=state.ranks(),
        kappa_log=kappa_log,
        steps=steps,
        state=state,
        initial=initial,
    )
