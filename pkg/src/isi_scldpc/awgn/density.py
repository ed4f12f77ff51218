"""Quantized LLR densities and the discretized variable/check node updates.

Densities live on the uniform grid ``k * step`` for ``|k| <= K`` with
``K = round(lmax / step)``; the two end bins are saturation bins holding
all mass at or beyond ``+-lmax``.  Densities are those of the sign-corrected
LLR (the LLR multiplied by the transmitted symbol), so the error
probability is the mass below zero plus half the mass at zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np

DEFAULT_STEP = 0.05
DEFAULT_LMAX = 30.0
OVERFLOW_LIMIT = 0.5


class GridOverflow(RuntimeError):
    """More than half the channel density sits in the saturation bins."""


@dataclass(frozen=True)
class Quantizer:
    step: float = DEFAULT_STEP
    lmax: float = DEFAULT_LMAX

    def __post_init__(self):
        if self.step <= 0 or self.lmax <= self.step:
            raise ValueError("need 0 < step < lmax")

    @property
    def K(self) -> int:
        return int(round(self.lmax / self.step))

    @property
    def size(self) -> int:
        return 2 * self.K + 1

    @property
    def values(self) -> np.ndarray:
        return self.step * np.arange(-self.K, self.K + 1)

    def index(self, llr) -> np.ndarray:
        k = np.rint(np.asarray(llr, dtype=float) / self.step)
        return (np.clip(k, -self.K, self.K) + self.K).astype(np.int64)

    def refined(self) -> "Quantizer":
        return Quantizer(self.step / 2, self.lmax)


@dataclass
class LlrDensity:
    quantizer: Quantizer
    masses: np.ndarray

    @classmethod
    def point_mass(cls, llr: float, quantizer: Quantizer | None = None) -> "LlrDensity":
        q = quantizer or Quantizer()
        m = np.zeros(q.size)
        m[q.index(llr)] = 1.0
        return cls(q, m)

    @classmethod
    def erased(cls, quantizer: Quantizer | None = None) -> "LlrDensity":
        """No information: all mass at LLR 0."""
        return cls.point_mass(0.0, quantizer)

    @classmethod
    def perfect(cls, quantizer: Quantizer | None = None) -> "LlrDensity":
        q = quantizer or Quantizer()
        return cls.point_mass(q.lmax, q)

    @classmethod
    def from_samples(cls, llrs, quantizer: Quantizer | None = None) -> "LlrDensity":
        q = quantizer or Quantizer()
        counts = np.bincount(q.index(llrs), minlength=q.size).astype(float)
        return cls(q, counts / counts.sum())

    @property
    def values(self) -> np.ndarray:
        return self.quantizer.values

    def total(self) -> float:
        return float(self.masses.sum())

    def error_probability(self) -> float:
        K = self.quantizer.K
        return float(self.masses[:K].sum() + 0.5 * self.masses[K])

    def mean(self) -> float:
        return float(self.masses @ self.values)

    def saturation_mass(self) -> float:
        return float(self.masses[0] + self.masses[-1])

    def symmetry_error(self, floor: float = 1e-4) -> float:
        """Largest |m(-x) - e^{-x} m(x)| / m(x) over bins with m(x) > floor."""
        K = self.quantizer.K
        pos = self.masses[K + 1:-1]
        neg = self.masses[1:K][::-1]
        x = self.values[K + 1:-1]
        keep = pos > floor
        if not keep.any():
            return 0.0
        return float(np.max(np.abs(neg[keep] - np.exp(-x[keep]) * pos[keep]) / pos[keep]))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        cdf = np.cumsum(self.masses)
        idx = np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right")
        return self.values[np.minimum(idx, len(cdf) - 1)]

    def copy(self) -> "LlrDensity":
        return LlrDensity(self.quantizer, self.masses.copy())


def _fold(full: np.ndarray, offset: int, K: int) -> np.ndarray:
    """Map a mass array indexed from -offset onto [-K, K], saturating the tails."""
    full = np.clip(full, 0.0, None)
    lo = offset - K
    out = full[lo:lo + 2 * K + 1].copy()
    out[0] += full[:lo].sum()
    out[-1] += full[lo + 2 * K + 1:].sum()
    return out / out.sum()


def convolve(densities: list[LlrDensity]) -> LlrDensity:
    """Density of the sum of independent LLRs (one FFT product, then saturation)."""
    if not densities:
        raise ValueError("need at least one density")
    q = densities[0].quantizer
    if any(d.quantizer != q for d in densities):
        raise ValueError("densities must share a quantizer")
    if len(densities) == 1:
        return densities[0].copy()
    n_out = len(densities) * (q.size - 1) + 1
    nfft = 1 << (n_out - 1).bit_length()
    spec = np.ones(nfft // 2 + 1, dtype=complex)
    for d in densities:
        spec *= np.fft.rfft(d.masses, nfft)
    full = np.fft.irfft(spec, nfft)[:n_out]
    return LlrDensity(q, _fold(full, len(densities) * q.K, q.K))


def convolve_power(d: LlrDensity, n: int) -> LlrDensity:
    if n < 1:
        raise ValueError("power must be at least 1")
    return convolve([d] * n)


def quantized_vn_update(channel_density: LlrDensity, incoming: list[LlrDensity],
                        overflow_limit: float = OVERFLOW_LIMIT) -> LlrDensity:
    """Channel density convolved with the ``dv - 1`` incoming check densities."""
    if channel_density.saturation_mass() > overflow_limit:
        raise GridOverflow(
            f"channel density has {channel_density.saturation_mass():.3f} mass in the "
            f"saturation bins; increase lmax (now {channel_density.quantizer.lmax})")
    return convolve([channel_density, *incoming])


@lru_cache(maxsize=8)
def boxplus_table(q: Quantizer) -> np.ndarray:
    """Quantized |a [+] b| for grid magnitudes |a| = i step, |b| = j step."""
    a = np.tanh(0.5 * q.step * np.arange(q.K + 1))
    with np.errstate(divide="ignore"):
        mag = 2.0 * np.arctanh(np.minimum(np.outer(a, a), 1.0))
    return np.minimum(np.rint(mag / q.step), q.K).astype(np.int64)


@numba.njit(cache=True)
def _boxplus_kernel(p, r, table, K, floor):
    out = np.zeros(2 * K + 1)
    for i in range(2 * K + 1):
        pi = p[i]
        if pi <= floor:
            continue
        ai = abs(i - K)
        si = 1 if i > K else (-1 if i < K else 0)
        for j in range(2 * K + 1):
            w = pi * r[j]
            if w <= floor:
                continue
            aj = abs(j - K)
            sj = 1 if j > K else (-1 if j < K else 0)
            out[K + si * sj * table[ai, aj]] += w
    return out


def boxplus(p: LlrDensity, r: LlrDensity, floor: float = 1e-300) -> LlrDensity:
    """Density of the check-node combination of two independent LLRs."""
    if p.quantizer != r.quantizer:
        raise ValueError("densities must share a quantizer")
    q = p.quantizer
    out = _boxplus_kernel(p.masses, r.masses, boxplus_table(q), q.K, floor)
    return LlrDensity(q, out / out.sum())


def quantized_cn_update(incoming: list[LlrDensity]) -> LlrDensity:
    """Nested pairwise boxplus over the ``dc - 1`` incoming densities."""
    if not incoming:
        raise ValueError("need at least one density")
    acc = incoming[0].copy()
    for d in incoming[1:]:
        acc = boxplus(acc, d)
    return acc


def boxplus_power(d: LlrDensity, n: int) -> LlrDensity:
    """``n``-fold boxplus of one density by repeated squaring."""
    if n < 1:
        raise ValueError("power must be at least 1")
    result, base = None, d
    while n:
        if n & 1:
            result = base if result is None else boxplus(result, base)
        n >>= 1
        if n:
            base = boxplus(base, base)
    return result


def mixture(densities: list[LlrDensity], weights=None) -> LlrDensity:
    q = densities[0].quantizer
    w = np.full(len(densities), 1.0 / len(densities)) if weights is None else np.asarray(weights, float)
    return LlrDensity(q, np.tensordot(w, np.stack([d.masses for d in densities]), axes=1))
