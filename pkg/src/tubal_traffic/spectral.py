"""Mode-3 discrete Fourier transform that block-diagonalizes the t-product.

The transform used here is

    A~_k = sum_l  w^{(k)(l)} A_l,    w = exp(+2 pi i / m3),

i.e. the positive-exponent kernel (``m3 * ifft`` in numpy terms), and its
inverse ``A_k = (1/m3) sum_l conj(w)^{kl} A~_l``.  For a real tensor the slices
satisfy ``A~_k = conj(A~_{m3-k})`` (0-based), so only the first
``m3 // 2 + 1`` slices are stored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConsistencyError",
    "SpectralSlices",
    "n_half",
    "half_weights",
    "self_conjugate",
    "forward",
    "inverse",
    "forward_full",
    "inverse_full",
    "spectral_norm_identity_check",
]

SYMMETRY_RTOL = 1e-9


class ConsistencyError(ArithmeticError):
    """Spectral data violates conjugate symmetry, so it has no real preimage."""


def n_half(m3: int) -> int:
    return m3 // 2 + 1


def half_weights(m3: int) -> np.ndarray:
    """Multiplicity of each stored slice in a sum over the full spectrum."""
    w = np.full(n_half(m3), 2.0)
    w[0] = 1.0
    if m3 % 2 == 0:
        w[-1] = 1.0
    if m3 == 1:
        w[:] = 1.0
    return w


def self_conjugate(m3: int) -> tuple[int, ...]:
    """Stored slices that equal their own mirror and hence must be real."""
    if m3 % 2 == 0 and m3 > 1:
        return (0, m3 // 2)
    return (0,)


@dataclass
class SpectralSlices:
    """Half spectrum of a real ``m1 x m2 x m3`` tensor.

    ``half`` has shape ``(m3 // 2 + 1, m1, m2)``; the remaining slices are
    implied by conjugation.
    """

    dims: tuple[int, int, int]
    half: np.ndarray

    def __post_init__(self):
        m1, m2, m3 = self.dims
        expected = (n_half(m3), m1, m2)
        if self.half.shape != expected:
            raise ValueError(f"half spectrum has shape {self.half.shape}, expected {expected}")

    @property
    def m3(self) -> int:
        return self.dims[2]

    def __getitem__(self, k: int) -> np.ndarray:
        """Slice ``k`` of the full spectrum, mirrored by conjugation if needed."""
        m3 = self.m3
        if not 0 <= k < m3:
            raise IndexError(f"spectral slice {k} out of range for m3={m3}")
        h = self.half.shape[0]
        return self.half[k] if k < h else np.conj(self.half[m3 - k])

    def full(self) -> np.ndarray:
        """All ``m3`` slices as a ``(m3, m1, m2)`` complex stack."""
        m3 = self.m3
        h = self.half.shape[0]
        mirrored = np.conj(self.half[1:m3 - h + 1][::-1])
        return np.concatenate([self.half, mirrored], axis=0)

    def symmetry_residual(self) -> float:
        """Largest relative imaginary part over the self-conjugate slices."""
        worst = 0.0
        for k in self_conjugate(self.m3):
            s = self.half[k]
            scale = np.linalg.norm(s)
            if scale > 0:
                worst = max(worst, float(np.linalg.norm(s.imag) / scale))
        return worst

    def check_symmetry(self, rtol: float = SYMMETRY_RTOL) -> None:
        res = self.symmetry_residual()
        if res > rtol:
            raise ConsistencyError(
                f"self-conjugate spectral slice has relative imaginary part {res:.3e} > {rtol:g}"
            )


def forward(t) -> SpectralSlices:
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 3:
        raise ValueError(f"expected a third-order array, got ndim={t.ndim}")
    # rfft uses exp(-2 pi i ...); conjugating gives the positive-exponent kernel.
    spec = np.conj(np.fft.rfft(t, axis=2))
    return SpectralSlices(t.shape, np.ascontiguousarray(np.moveaxis(spec, 2, 0)))


def inverse(s: SpectralSlices, rtol: float = SYMMETRY_RTOL) -> np.ndarray:
    s.check_symmetry(rtol)
    spec = np.moveaxis(np.conj(s.half), 0, 2)
    return np.asfortranarray(np.fft.irfft(spec, n=s.m3, axis=2))


def forward_full(t) -> np.ndarray:
    """All ``m3`` transformed slices, shape ``(m3, m1, m2)``."""
    return forward(t).full()


def inverse_full(full: np.ndarray, rtol: float = SYMMETRY_RTOL) -> np.ndarray:
    """Inverse transform of an explicit full spectrum ``(m3, m1, m2)``.

    Raises :class:`ConsistencyError` when the result is not real to ``rtol``.
    """
    full = np.asarray(full)
    m3 = full.shape[0]
    out = np.fft.fft(full, axis=0) / m3
    scale = np.linalg.norm(out)
    if scale > 0 and np.linalg.norm(out.imag) > rtol * scale:
        raise ConsistencyError("spectral data does not map back to a real tensor")
    return np.asfortranarray(np.moveaxis(out.real, 0, 2))


def spectral_norm_identity_check(t) -> tuple[float, float]:
    """Return ``(||t||_F^2, (1/m3) sum_k ||A~_k||_F^2)``; equal by Parseval."""
    t = np.asarray(t, dtype=np.float64)
    m3 = t.shape[2]
    s = forward(t)
    w = half_weights(m3)
    per_slice = np.sum(np.abs(s.half) ** 2, axis=(1, 2))
    return float(np.sum(t * t)), float(np.dot(w, per_slice) / m3)
