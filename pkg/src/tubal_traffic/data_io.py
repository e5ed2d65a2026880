"""Traffic-matrix ingestion, tensor shaping, masks, NMAE and synthetic data.

A traffic matrix file holds one OD pair per row and one time slot per column.
With ``t`` slots per day it is reshaped to a ``t x d x o`` tensor whose entry
``(i, j, k)`` is the volume of OD pair ``k`` in slot ``i`` of day ``j``.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .tprod import tproduct

__all__ = [
    "DataError",
    "UndefinedMetricError",
    "TrafficMatrix",
    "MaskSpec",
    "RecoveryReport",
    "REPORT_SCHEMA",
    "NEGATIVE_POLICIES",
    "load_traffic_csv",
    "save_traffic_csv",
    "shape_tensor",
    "unshape_tensor",
    "generate_mask",
    "read_mask",
    "write_mask",
    "nmae",
    "synth_low_tubal_rank",
    "trial_seeds",
]

log = logging.getLogger(__name__)

REPORT_SCHEMA = 1


class DataError(ValueError):
    """Malformed input data (parse errors, bad shapes, bad masks)."""


class UndefinedMetricError(ArithmeticError):
    """NMAE denominator vanishes: all missing true values are zero."""


@dataclass(frozen=True)
class TrafficMatrix:
    """OD pairs by time slots, nonnegative volumes."""

    values: np.ndarray

    @property
    def n_pairs(self) -> int:
        return self.values.shape[0]

    @property
    def n_slots(self) -> int:
        return self.values.shape[1]


def _parse_cell(text: str, row: int, col: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"non-numeric cell {text!r} at row {row}, column {col}") from None
    if not np.isfinite(v):
        raise DataError(f"non-finite cell {text!r} at row {row}, column {col}")
    return v


NEGATIVE_POLICIES = ("reject", "clamp", "allow")


def load_traffic_csv(path, delimiter: str = ",", header: bool = False,
                     negative: str = "reject") -> TrafficMatrix:
    """Read a rectangular numeric CSV; rows and columns are reported 1-based.

    ``negative`` decides what happens to negative volumes: ``"reject"``
    raises, ``"clamp"`` sets them to zero with a warning, ``"allow"`` keeps
    them (signed synthetic fixtures).
    """
    if negative not in NEGATIVE_POLICIES:
        raise ValueError(f"negative must be one of {NEGATIVE_POLICIES}")
    rows = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for lineno, rec in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not rec or all(not c.strip() for c in rec):
                continue
            if width is None:
                width = len(rec)
            elif len(rec) != width:
                raise DataError(f"row {lineno} has {len(rec)} fields, expected {width}")
            rows.append([_parse_cell(c.strip(), lineno, j) for j, c in enumerate(rec, start=1)])
    if not rows:
        raise DataError(f"{path}: no data rows")
    values = np.array(rows, dtype=np.float64)
    neg = values < 0
    if neg.any() and negative != "allow":
        i, j = np.argwhere(neg)[0]
        if negative == "reject":
            raise DataError(f"negative volume {values[i, j]} at row {i + 1}, column {j + 1}")
        log.warning("clamping %d negative entries to zero", int(neg.sum()))
        values[neg] = 0.0
    return TrafficMatrix(values)


def save_traffic_csv(path, values, delimiter: str = ",") -> None:
    """Write with ``repr`` precision so the file reads back bit-exactly."""
    values = np.asarray(values, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        for row in values:
            w.writerow([repr(float(v)) for v in row])


def shape_tensor(m, slots_per_day: int) -> np.ndarray:
    """OD x time matrix to a ``t x d x o`` tensor, splitting each row day by day."""
    values = m.values if isinstance(m, TrafficMatrix) else np.asarray(m, dtype=np.float64)
    o, T = values.shape
    t = int(slots_per_day)
    if t < 1 or T % t:
        raise DataError(f"{T} time slots are not divisible by slots_per_day={t}")
    d = T // t
    # row k is [day 1 slots, day 2 slots, ...]; column j*t + i -> (i, j)
    return np.asfortranarray(values.reshape(o, d, t).transpose(2, 1, 0))


def unshape_tensor(t: np.ndarray) -> np.ndarray:
    """Inverse of :func:`shape_tensor`."""
    t = np.asarray(t)
    m1, m2, m3 = t.shape
    return np.ascontiguousarray(t.transpose(2, 1, 0).reshape(m3, m1 * m2))


@dataclass(frozen=True)
class MaskSpec:
    """Uniform random loss: each entry is missing independently with probability ``p``."""

    loss_probability: float
    seed: int = 0
    pattern: str = "uniform"

    def __post_init__(self):
        if not 0 <= self.loss_probability < 1:
            raise ValueError(f"loss probability must lie in [0, 1), got {self.loss_probability}")
        if self.pattern != "uniform":
            raise ValueError(f"unsupported mask pattern {self.pattern!r}")


def generate_mask(dims, spec: MaskSpec | float, seed: int | None = None) -> np.ndarray:
    """Seeded Bernoulli mask, ``True`` where observed.

    Draws are made in the tensor's column-major order, so the mask depends
    only on ``dims`` and the seed.
    """
    if not isinstance(spec, MaskSpec):
        spec = MaskSpec(float(spec), 0 if seed is None else seed)
    elif seed is not None:
        raise TypeError("seed is taken from the MaskSpec")
    dims = tuple(int(n) for n in dims)
    u = np.random.default_rng(spec.seed).random(int(np.prod(dims)))
    return np.asfortranarray((u >= spec.loss_probability).reshape(dims, order="F"))


def write_mask(path, mask) -> None:
    """``dims m1 m2 m3`` followed by one 1-based ``i j k`` line per observed entry."""
    mask = np.asarray(mask, dtype=bool)
    m1, m2, m3 = mask.shape
    idx = np.argwhere(mask) + 1
    with open(path, "w") as fh:
        fh.write(f"dims {m1} {m2} {m3}\n")
        for i, j, k in idx:
            fh.write(f"{i} {j} {k}\n")


def read_mask(path) -> np.ndarray:
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    if not lines or lines[0][0] != "dims" or len(lines[0]) != 4:
        raise DataError(f"{path}: first line must be 'dims m1 m2 m3'")
    try:
        dims = tuple(int(v) for v in lines[0][1:])
    except ValueError:
        raise DataError(f"{path}: bad dims line") from None
    if min(dims) < 1:
        raise DataError(f"{path}: dims must be positive")
    mask = np.zeros(dims, dtype=bool, order="F")
    for lineno, parts in enumerate(lines[1:], start=2):
        try:
            i, j, k = (int(v) for v in parts)
        except ValueError:
            raise DataError(f"{path}: line {lineno} is not 'i j k'") from None
        if not (1 <= i <= dims[0] and 1 <= j <= dims[1] and 1 <= k <= dims[2]):
            raise DataError(f"{path}: coordinate ({i}, {j}, {k}) on line {lineno} out of range")
        mask[i - 1, j - 1, k - 1] = True
    return mask


def nmae(original, recovered, mask) -> float:
    """Sum of absolute errors over missing entries over the sum of missing true magnitudes."""
    original = np.asarray(original, dtype=np.float64)
    recovered = np.asarray(recovered, dtype=np.float64)
    missing = ~np.asarray(mask, dtype=bool)
    if original.shape != recovered.shape or original.shape != missing.shape:
        raise ValueError("original, recovered and mask must have the same shape")
    den = np.abs(original[missing]).sum()
    if den == 0:
        raise UndefinedMetricError("no nonzero true values among the missing entries")
    return float(np.abs(original[missing] - recovered[missing]).sum() / den)


def synth_low_tubal_rank(dims, r0: int, seed: int = 0, noise_level: float = 0.0,
                         smoothness: float = 0.0) -> np.ndarray:
    """``C * H`` with Gaussian factors ``C`` (m1 x r0 x m3) and ``H`` (r0 x m2 x m3).

    ``smoothness > 0`` correlates the factors along the time-slot axis of ``C``
    and the day axis of ``H`` with a periodic Gaussian kernel of that width,
    which mimics the slow variation of real traffic.  Filtering acts on one
    side of each factor only, so the tubal rank is still at most ``r0``.
    Additive noise has standard deviation ``noise_level`` times the RMS of the
    clean tensor.
    """
    m1, m2, m3 = (int(n) for n in dims)
    if r0 < 0 or r0 > min(m1, m2):
        raise ValueError(f"r0 must lie in [0, {min(m1, m2)}], got {r0}")
    rng = np.random.default_rng(seed)
    if r0 == 0:
        return np.zeros((m1, m2, m3), order="F")
    C = rng.standard_normal((m1, r0, m3))
    H = rng.standard_normal((r0, m2, m3))
    if smoothness > 0:
        C = gaussian_filter1d(C, smoothness, axis=0, mode="wrap")
        H = gaussian_filter1d(H, smoothness, axis=1, mode="wrap")
    out = tproduct(C, H)
    if noise_level > 0:
        rms = np.sqrt(np.mean(out ** 2))
        out = out + noise_level * rms * rng.standard_normal(out.shape)
    return np.asfortranarray(out)


def trial_seeds(seed: int, trials: int) -> list[int]:
    """Seeds of a multi-trial run: ``seed, seed + 1, ...``."""
    return [seed + i for i in range(trials)]


@dataclass
class RecoveryReport:
    config: dict
    nmae_trials: list
    objective_trace: list
    iterations: list
    wall_ms: float | None = None
    schema: int = REPORT_SCHEMA
    extra: dict = field(default_factory=dict)

    @property
    def nmae_mean(self) -> float | None:
        vals = [v for v in self.nmae_trials if v is not None]
        return float(np.mean(vals)) if vals else None

    def to_dict(self) -> dict:
        d = {
            "schema": self.schema,
            "config": self.config,
            "nmae_mean": self.nmae_mean,
            "nmae_trials": list(self.nmae_trials),
            "objective_trace": list(self.objective_trace),
            "iterations": self.iterations,
            "wall_ms": self.wall_ms,
        }
        d.update(self.extra)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_json())
