"""Density evolution for (dv, dc)-regular SC-LDPC codes with joint detection
over ISI channels with erasures.

Positions outside ``[1, L]`` are perfectly known (termination), check nodes
live at positions ``1..L+m`` and edges are spread uniformly over ``m + 1``
positions.  One channel iteration applies the detector transfer function,
then ``Ic`` variable/check rounds, then forms the code-to-detector erasure
probability from all ``dv`` incoming check messages.

Two spreading models are available.  ``"edge"`` (default) lets every edge
pick its spatial offset independently, so incoming erasure probabilities
are averaged over the ``m + 1`` positions before a node combines them; this
is the standard uniformly coupled ensemble.  ``"node"`` averages the node
outputs instead, i.e. ``p_t = q_H,t * mean_j q_c,t+j ** (dv-1)`` and
``q_c,t = mean_j [1 - (1 - p_t-j) ** (dc-1)]``.  Both coincide for m = 0.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np

from .metric_chain import PRODUCT, TransferCurve
from .trellis import ChannelModel

log = logging.getLogger(__name__)

SUCCESS_TOL = 1e-12
FIXED_POINT_TOL = 1e-12
DEFAULT_MAX_ITER = 50_000
COUPLED_THRESHOLD_MAX_ITER = 1_000_000
DEFAULT_COUPLED_L = 200
EDGE = "edge"
NODE = "node"


class IterationCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class EnsembleConfig:
    dv: int = 3
    dc: int = 6
    m: int = 0
    L: int = 1
    Ic: int = 1
    N: int | None = None  # variable nodes per position; descriptive only
    M: int | None = None  # check nodes per position; descriptive only
    spreading: str = EDGE

    def __post_init__(self):
        if self.dv < 2:
            raise ValueError("dv must be at least 2")
        if self.dc <= self.dv:
            raise ValueError("dc must exceed dv")
        if self.m < 0 or self.L < 1 or self.Ic < 1:
            raise ValueError("need m >= 0, L >= 1 and Ic >= 1")
        if self.spreading not in (EDGE, NODE):
            raise ValueError(f"spreading must be {EDGE!r} or {NODE!r}")

    @property
    def rate(self) -> float:
        """Design rate of the uncoupled ensemble."""
        return 1.0 - self.dv / self.dc

    @property
    def coupled(self) -> bool:
        return self.m > 0

    @classmethod
    def uncoupled(cls, dv: int, dc: int, Ic: int = 1) -> "EnsembleConfig":
        return cls(dv, dc, 0, 1, Ic)

    @classmethod
    def coupled_chain(cls, dv: int, dc: int, m: int, L: int = DEFAULT_COUPLED_L, Ic: int = 1):
        return cls(dv, dc, m, L, Ic)

    def label(self) -> str:
        return f"({self.dv},{self.dc}) m={self.m} L={self.L}"


@dataclass
class DEState:
    p: np.ndarray  # VN -> CN, positions 1..L
    q_c: np.ndarray  # CN -> VN, positions 1..L+m
    q_H: np.ndarray  # detector -> VN, positions 1..L
    delta: np.ndarray  # VN -> detector, positions 1..L
    channel_iterations: int = 0
    inner_iterations: int = 0

    @classmethod
    def initial(cls, ens: EnsembleConfig) -> "DEState":
        L, m = ens.L, ens.m
        return cls(np.ones(L), np.ones(L + m), np.ones(L), np.ones(L))

    def copy(self) -> "DEState":
        return DEState(self.p.copy(), self.q_c.copy(), self.q_H.copy(), self.delta.copy(),
                       self.channel_iterations, self.inner_iterations)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.q_c, self.q_H, self.delta])


def _window_mean_ahead(v: np.ndarray, m: int) -> np.ndarray:
    """(1/(m+1)) sum_{j=0}^m v[t+j] for t = 1..len(v)-m."""
    return np.convolve(v, np.ones(m + 1), "valid") / (m + 1)


def _window_mean_behind(v: np.ndarray, m: int) -> np.ndarray:
    """(1/(m+1)) sum_{j=0}^m v[t-j] for t = 1..len(v)+m, zero outside the chain."""
    return np.convolve(v, np.ones(m + 1), "full") / (m + 1)


def de_channel_iteration(state: DEState, ens: EnsembleConfig, g: Callable) -> DEState:
    """One detector update followed by ``Ic`` decoding rounds; returns a new state."""
    s = state.copy()
    s.q_H = np.asarray(g(s.delta), dtype=float) * np.ones(ens.L)
    m, dv, dc = ens.m, ens.dv, ens.dc
    for _ in range(ens.Ic):
        if ens.spreading == EDGE:
            s.p = s.q_H * _window_mean_ahead(s.q_c, m) ** (dv - 1)
            s.q_c = 1.0 - (1.0 - _window_mean_behind(s.p, m)) ** (dc - 1)
        else:
            s.p = s.q_H * _window_mean_ahead(s.q_c ** (dv - 1), m)
            s.q_c = _window_mean_behind(1.0 - (1.0 - s.p) ** (dc - 1), m)
    if ens.spreading == EDGE:
        s.delta = _window_mean_ahead(s.q_c, m) ** dv
    else:
        s.delta = _window_mean_ahead(s.q_c ** dv, m)
    s.channel_iterations += 1
    s.inner_iterations += ens.Ic
    return s


@numba.njit(cache=True)
def _cheb_eval(coef, delta):
    x = 2.0 * delta - 1.0
    b1 = 0.0
    b2 = 0.0
    for k in range(coef.shape[0] - 1, 0, -1):
        b1, b2 = 2.0 * x * b1 - b2 + coef[k], b1
    v = x * b1 - b2 + coef[0]
    return min(max(v, 0.0), 1.0)


@numba.njit(cache=True)
def _de_kernel(coef, dv, dc, m, Ic, edge, p, qc, qH, delta, max_iter, success_tol, fp_tol):
    """Compiled version of repeated ``de_channel_iteration``; arrays updated in place.

    Returns (status, iterations) with status 1 = success, 0 = fixed point,
    -1 = cap reached.
    """
    L = p.shape[0]
    w = 1.0 / (m + 1)
    ahead = np.empty(L)
    behind = np.empty(L + m)
    for it in range(1, max_iter + 1):
        change = 0.0
        for t in range(L):
            v = _cheb_eval(coef, delta[t])
            change = max(change, abs(v - qH[t]))
            qH[t] = v
        for _ in range(Ic):
            for t in range(L):
                acc = 0.0
                for j in range(m + 1):
                    acc += qc[t + j] if edge else qc[t + j] ** (dv - 1)
                ahead[t] = acc * w
            pmax = 0.0
            for t in range(L):
                v = qH[t] * (ahead[t] ** (dv - 1) if edge else ahead[t])
                change = max(change, abs(v - p[t]))
                p[t] = v
                pmax = max(pmax, v)
            for t in range(L + m):
                acc = 0.0
                for j in range(m + 1):
                    k = t - j
                    if 0 <= k < L:
                        acc += p[k] if edge else 1.0 - (1.0 - p[k]) ** (dc - 1)
                behind[t] = acc * w
            for t in range(L + m):
                v = 1.0 - (1.0 - behind[t]) ** (dc - 1) if edge else behind[t]
                change = max(change, abs(v - qc[t]))
                qc[t] = v
        for t in range(L):
            acc = 0.0
            for j in range(m + 1):
                acc += qc[t + j] if edge else qc[t + j] ** dv
            v = (acc * w) ** dv if edge else acc * w
            change = max(change, abs(v - delta[t]))
            delta[t] = v
        if pmax < success_tol:
            return 1, it
        if change < fp_tol:
            return 0, it
    return -1, max_iter


@dataclass
class DEResult:
    converged: bool
    state: DEState
    iterations: int
    cap_exceeded: bool = False


class TraceWriter:
    """CSV trace: iteration, max p_t, and the p profile every ``every`` iterations."""

    def __init__(self, path, every: int = 100):
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh)
        self._w.writerow(["iteration", "max_p", "profile"])
        self.every = every

    def __call__(self, it: int, state: DEState):
        profile = " ".join(f"{v:.6e}" for v in state.p) if it % self.every == 0 else ""
        self._w.writerow([it, f"{state.p.max():.6e}", profile])

    def close(self):
        self._fh.close()


def run_de(
    ens: EnsembleConfig,
    channel: ChannelModel,
    eps: float,
    *,
    g: Callable | None = None,
    law: str = PRODUCT,
    max_iter: int = DEFAULT_MAX_ITER,
    success_tol: float = SUCCESS_TOL,
    fixed_point_tol: float = FIXED_POINT_TOL,
    init: DEState | None = None,
    trace: Callable | None = None,
    strict: bool = False,
) -> DEResult:
    """Iterate density evolution from the all-erased state until success or a fixed point."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    if g is None:
        g = TransferCurve(channel, eps, law)
    state = init.copy() if init is not None else DEState.initial(ens)
    if trace is None and isinstance(g, TransferCurve):
        status, it = _de_kernel(g.coef, ens.dv, ens.dc, ens.m, ens.Ic, ens.spreading == EDGE,
                                state.p, state.q_c, state.q_H, state.delta,
                                max_iter, success_tol, fixed_point_tol)
        state.channel_iterations += it
        state.inner_iterations += it * ens.Ic
        if status >= 0:
            return DEResult(bool(status), state, it)
    else:
        prev = state.vector()
        for it in range(1, max_iter + 1):
            state = de_channel_iteration(state, ens, g)
            if trace is not None:
                trace(it, state)
            if state.p.max() < success_tol:
                return DEResult(True, state, it)
            cur = state.vector()
            if np.abs(cur - prev).max() < fixed_point_tol:
                return DEResult(False, state, it)
            prev = cur
    msg = f"DE for {ens.label()} at eps={eps} hit the {max_iter} iteration cap"
    if strict:
        raise IterationCapExceeded(msg)
    log.warning(msg)
    return DEResult(False, state, max_iter, cap_exceeded=True)


@dataclass
class ThresholdResult:
    value: float
    lo: float
    hi: float
    probes: list[tuple[float, bool, int]] = field(default_factory=list)
    cap_hits: int = 0

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def rounded(self, digits: int = 4) -> float:
        return round(self.value, digits)


def bp_threshold(
    ens: EnsembleConfig,
    channel: ChannelModel,
    precision: float = 1e-6,
    *,
    law: str = PRODUCT,
    lo: float = 0.0,
    hi: float = 1.0,
    max_iter: int | None = None,
    strict: bool = False,
    warm_start: bool = True,
) -> ThresholdResult:
    """Largest channel erasure probability for which DE drives every p_t to zero.

    ``strict`` turns an iteration-cap hit into an exception instead of a
    recorded failure of that probe.  With ``warm_start`` each probe starts
    from the final state of the smallest failing probe so far.  That is
    exact: DE is monotone in eps and every iterate of a failing run at a
    larger eps dominates the all-erased trajectory at a smaller eps, so both
    starts reach the same largest fixed point.
    """
    if precision < 1e-9:
        raise ValueError("precision below 1e-9 is not meaningful with the DE tolerances")
    if max_iter is None:
        max_iter = COUPLED_THRESHOLD_MAX_ITER if ens.coupled else DEFAULT_MAX_ITER
    res = ThresholdResult(0.0, lo, hi)
    start: DEState | None = None
    while res.hi - res.lo > precision:
        mid = 0.5 * (res.lo + res.hi)
        out = run_de(ens, channel, mid, law=law, max_iter=max_iter, strict=strict, init=start)
        res.probes.append((mid, out.converged, out.iterations))
        res.cap_hits += out.cap_exceeded
        if out.converged:
            res.lo = mid
        else:
            res.hi = mid
            if warm_start:
                start = out.state
    res.value = 0.5 * (res.lo + res.hi)
    return res
