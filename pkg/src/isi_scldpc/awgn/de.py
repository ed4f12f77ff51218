"""Discretized density evolution for SC-LDPC codes over ISI-AWGN channels.

The schedule mirrors the erasure recursion with the default edge
spreading: detector update from the code-to-detector density, ``Ic``
variable/check rounds, and the code-to-detector density formed from all
``dv`` incoming check densities.  Detector densities come from Monte-Carlo
BCJR runs; within one channel iteration all positions share a seed, so
positions carrying bit-identical densities reuse one simulation.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..erasure_de import EnsembleConfig
from ..trellis import ChannelModel
from .density import LlrDensity, Quantizer, boxplus_power, convolve, convolve_power, mixture
from .detector import DEFAULT_SAMPLES, mc_detector_density
from .noise import sigma_from_gamma

log = logging.getLogger(__name__)

SUCCESS_PE = 1e-6
PERFECT_PE = 1e-12


class Inconclusive(RuntimeError):
    def __init__(self, msg: str, bracket: tuple[float, float]):
        super().__init__(msg)
        self.bracket = bracket


@dataclass(frozen=True)
class AwgnDEConfig:
    samples: int = DEFAULT_SAMPLES
    max_iter: int = 400
    success_pe: float = SUCCESS_PE
    patience: int = 30  # iterations over which the mean error probability must drop
    stall_tol: float = 5e-3  # ... by at least this relative amount
    quantizer: Quantizer = field(default_factory=Quantizer)
    seed: int = 0


@dataclass
class AwgnDEState:
    check: list[LlrDensity]  # CN -> VN, positions 1..L+m
    delta: list[LlrDensity]  # VN -> detector, positions 1..L
    channel: list[LlrDensity]  # detector -> VN, positions 1..L
    iterations: int = 0

    @classmethod
    def initial(cls, ens: EnsembleConfig, q: Quantizer) -> "AwgnDEState":
        e = LlrDensity.erased(q)
        return cls([e] * (ens.L + ens.m), [e] * ens.L, [e] * ens.L)

    def copy(self) -> "AwgnDEState":
        return AwgnDEState(list(self.check), list(self.delta), list(self.channel), self.iterations)


@dataclass
class AwgnDEResult:
    converged: bool
    state: AwgnDEState
    iterations: int
    pe: np.ndarray  # final per-position error probability of the APP density
    pe_history: list[float]
    cap_exceeded: bool = False


class _Memo:
    """Per-iteration cache keyed by the bytes of the input masses."""

    def __init__(self, fn):
        self.fn, self.store = fn, {}

    def __call__(self, d: LlrDensity, *args):
        key = (d.masses.tobytes(), args)
        if key not in self.store:
            self.store[key] = self.fn(d, *args)
        return self.store[key]


def _canonical(d: LlrDensity) -> LlrDensity:
    """Snap numerically perfect densities to the saturation point mass."""
    if d.error_probability() < PERFECT_PE and d.masses[-1] > 1.0 - PERFECT_PE:
        return LlrDensity.perfect(d.quantizer)
    return d


def de_iteration(state: AwgnDEState, ens: EnsembleConfig, channel: ChannelModel, sigma: float,
                 cfg: AwgnDEConfig) -> tuple[AwgnDEState, np.ndarray]:
    q = cfg.quantizer
    L, m = ens.L, ens.m
    it = state.iterations + 1
    perfect = LlrDensity.perfect(q)
    detector = _Memo(lambda d: mc_detector_density(channel, d, sigma, cfg.samples, seed=[cfg.seed, it]))
    cn_power = _Memo(boxplus_power)
    conv_power = _Memo(convolve_power)

    s = state.copy()
    s.channel = [detector(_canonical(d)) for d in s.delta]
    for _ in range(ens.Ic):
        cbar = [mixture(s.check[t:t + m + 1]) for t in range(L)]
        v = [convolve([s.channel[t], conv_power(cbar[t], ens.dv - 1)]) for t in range(L)]
        vbar = []
        for k in range(L + m):
            src = [v[k - j] if 0 <= k - j < L else perfect for j in range(m + 1)]
            vbar.append(_canonical(mixture(src)))
        s.check = [cn_power(d, ens.dc - 1) for d in vbar]
    cbar = [_canonical(mixture(s.check[t:t + m + 1])) for t in range(L)]
    s.delta = [conv_power(c, ens.dv) for c in cbar]
    pe = np.array([convolve([s.channel[t], s.delta[t]]).error_probability() for t in range(L)])
    s.iterations = it
    return s, pe


def run_awgn_de(ens: EnsembleConfig, channel: ChannelModel, gamma_db: float,
                cfg: AwgnDEConfig | None = None, *, init: AwgnDEState | None = None) -> AwgnDEResult:
    """Iterate until every position's error probability is below ``success_pe``
    or the mean error probability stops decreasing."""
    cfg = cfg or AwgnDEConfig()
    sigma = sigma_from_gamma(gamma_db, ens.rate)
    state = init.copy() if init is not None else AwgnDEState.initial(ens, cfg.quantizer)
    hist: list[float] = []
    pe = np.ones(ens.L)
    for k in range(cfg.max_iter):
        state, pe = de_iteration(state, ens, channel, sigma, cfg)
        hist.append(float(pe.mean()))
        if pe.max() < cfg.success_pe:
            return AwgnDEResult(True, state, k + 1, pe, hist)
        if len(hist) > cfg.patience:
            recent = min(hist[-cfg.patience:])
            before = min(hist[:-cfg.patience])
            if recent > (1.0 - cfg.stall_tol) * before:
                return AwgnDEResult(False, state, k + 1, pe, hist)
    log.warning("AWGN DE for %s at %.3f dB hit the %d iteration cap", ens.label(), gamma_db, cfg.max_iter)
    return AwgnDEResult(False, state, cfg.max_iter, pe, hist, cap_exceeded=True)


@dataclass
class AwgnThreshold:
    value: float
    lo: float  # failing Eb/N0
    hi: float  # succeeding Eb/N0
    probes: list[tuple[float, bool, int]] = field(default_factory=list)
    edge_votes: dict = field(default_factory=dict)


def awgn_bp_threshold(ens: EnsembleConfig, channel: ChannelModel, precision_db: float = 0.02, *,
                      cfg: AwgnDEConfig | None = None, lo: float = -2.0, hi: float = 12.0,
                      seeds: int = 3) -> AwgnThreshold:
    """Smallest Eb/N0 (dB) at which DE succeeds, by bisection.

    The final bracket edges are re-run with ``seeds`` seeds; a majority
    contradicting the bracket raises ``Inconclusive``.
    """
    if precision_db < 0.02:
        raise ValueError("precision below 0.02 dB is below the Monte-Carlo resolution")
    cfg = cfg or AwgnDEConfig()
    res = AwgnThreshold(0.0, lo, hi)
    while res.hi - res.lo > precision_db:
        mid = 0.5 * (res.lo + res.hi)
        out = run_awgn_de(ens, channel, mid, cfg)
        res.probes.append((mid, out.converged, out.iterations))
        if out.converged:
            res.hi = mid
        else:
            res.lo = mid
    for edge, want in ((res.lo, False), (res.hi, True)):
        votes = [run_awgn_de(ens, channel, edge, _with_seed(cfg, cfg.seed + k)).converged
                 for k in range(seeds)]
        res.edge_votes[edge] = votes
        if (sum(votes) * 2 > seeds) != want:
            raise Inconclusive(f"seed majority contradicts the bracket at {edge:.3f} dB: {votes}",
                               (res.lo, res.hi))
    res.value = 0.5 * (res.lo + res.hi)
    return res


def _with_seed(cfg: AwgnDEConfig, seed: int) -> AwgnDEConfig:
    return AwgnDEConfig(cfg.samples, cfg.max_iter, cfg.success_pe, cfg.patience, cfg.stall_tol,
                        cfg.quantizer, seed)
