"""Entropy quantities for ISI-AWGN: h = H(Z|Y), simulated SIR and the MAP bound.

The MAP bound integrates the BP GEXIT curve through the I-MMSE relation.
With snr s = 1/sigma**2, ``d H(X|Y) / ds = -(log2 e / 2) * mmse`` per
channel use, so the area condition reads
``int_0^{s_bar} (log2 e / 2) * mmse_BP(s) ds = R`` where mmse_BP is the
error of the detector's posterior-mean estimate of Z_i at the BP fixed
point (code prior of the current input included).  This is the same area
as the GEXIT curve in the h parameterization, by change of variables.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ..erasure_de import EnsembleConfig
from ..exit_entropy import NoRoot
from ..trellis import ChannelModel, build_trellis, output_alphabet
from .bcjr import _log2_py_kernel, channel_output
from .de import AwgnDEConfig, run_awgn_de
from .detector import bp_mmse
from .noise import gamma_from_sigma, sigma_from_gamma

LOG2E = math.log2(math.e)
DEFAULT_SIR_LENGTH = 1_000_000
SNR_STEP = 0.025
_HERMITE = np.polynomial.hermite_e.hermegauss(120)


def awgn_gexit_h(channel: ChannelModel, sigma: float) -> float:
    """h = H(Z) - I(Y;Z) in bits for Y = Z + N(0, sigma^2), Z on the output alphabet."""
    alph = output_alphabet(build_trellis(channel))
    z, p = alph.levels, alph.probs
    if sigma <= 0:
        return 0.0
    nodes, weights = _HERMITE
    weights = weights / weights.sum()
    # h(Y) = -sum_k p_k E[log2 f(z_k + sigma N)]
    hY = 0.0
    for zk, pk in zip(z, p):
        yv = zk + sigma * nodes
        d = (yv[:, None] - z[None, :]) / sigma
        f = (p[None, :] * np.exp(-0.5 * d * d)).sum(axis=1) / math.sqrt(2 * math.pi * sigma * sigma)
        hY -= pk * float(weights @ np.log2(f))
    I = hY - 0.5 * math.log2(2 * math.pi * math.e * sigma * sigma)
    return max(alph.entropy - I, 0.0)


def _sir_sample(channel: ChannelModel, length: int, seed):
    rng = np.random.default_rng(seed)
    nu = channel.memory
    bits = rng.integers(0, 2, size=length + nu)
    z = channel_output(channel, bits[nu:], bits[:nu])
    return z, rng.standard_normal(length)


def awgn_sir(channel: ChannelModel, sigma: float, length: int = DEFAULT_SIR_LENGTH, seed=0) -> float:
    """I(X;Y) estimate from -(1/n) log2 p(y) of one simulated block."""
    z, w = _sir_sample(channel, length, seed)
    tr = build_trellis(channel)
    hY = _log2_py_kernel(tr.next_state, tr.output, z + sigma * w, sigma) / length
    return hY - 0.5 * math.log2(2 * math.pi * math.e * sigma * sigma)


def awgn_sir_threshold(channel: ChannelModel, rate: float, *, length: int = DEFAULT_SIR_LENGTH,
                       seed=0, tol_db: float = 1e-3) -> float:
    """Eb/N0 (dB) at which the simulated SIR equals ``rate``.

    One bit/noise realization is reused for every probe, so the estimate is
    a smooth function of the noise level and bisection is well defined.
    """
    if not 0.0 < rate < 1.0:
        raise ValueError("rate must lie in (0, 1)")
    z, w = _sir_sample(channel, length, seed)
    tr = build_trellis(channel)

    def excess(gamma_db):
        s = sigma_from_gamma(gamma_db, rate)
        hY = _log2_py_kernel(tr.next_state, tr.output, z + s * w, s) / length
        return hY - 0.5 * math.log2(2 * math.pi * math.e * s * s) - rate

    return float(brentq(excess, -10.0, 20.0, xtol=tol_db))


@dataclass
class AwgnGexitCurve:
    channel: ChannelModel
    ensemble: EnsembleConfig
    snr: np.ndarray  # increasing
    mmse: np.ndarray
    stderr: np.ndarray
    converged_at: float | None = None  # first snr at which DE succeeded
    points: list = field(default_factory=list)

    def gamma_db(self) -> np.ndarray:
        return np.array([gamma_from_sigma(1.0 / math.sqrt(s), self.ensemble.rate) for s in self.snr])


def awgn_gexit_curve(ens: EnsembleConfig, channel: ChannelModel, snr_grid, *,
                     cfg: AwgnDEConfig | None = None, samples: int = 200_000) -> AwgnGexitCurve:
    """mmse_BP along the BP fixed points, sweeping snr upward with warm starts.

    The sweep stops at the first snr where DE succeeds; mmse is zero beyond.
    """
    cfg = cfg or AwgnDEConfig()
    snr = np.asarray(snr_grid, dtype=float)
    if np.any(np.diff(snr) <= 0):
        raise ValueError("snr grid must be increasing")
    out_s, out_m, out_e = [], [], []
    state = None
    stop = None
    for k, s in enumerate(snr):
        sigma = 1.0 / math.sqrt(s) if s > 0 else math.inf
        if s == 0:
            out_s.append(0.0)
            out_m.append(float(build_trellis(channel).output.var()))  # E[Z^2] with zero mean
            out_e.append(0.0)
            continue
        gamma = gamma_from_sigma(sigma, ens.rate)
        res = run_awgn_de(ens, channel, gamma, cfg, init=state)
        if res.converged:
            stop = float(s)
            out_s.append(float(s))
            out_m.append(0.0)
            out_e.append(0.0)
            break
        state = res.state
        m, e = bp_mmse(channel, state.delta[0], sigma, samples, seed=[cfg.seed, k])
        out_s.append(float(s))
        out_m.append(m)
        out_e.append(e)
    return AwgnGexitCurve(channel, ens, np.array(out_s), np.array(out_m), np.array(out_e), stop)


def awgn_map_bound(ens: EnsembleConfig, channel: ChannelModel, *, cfg: AwgnDEConfig | None = None,
                   snr_grid=None, samples: int = 200_000,
                   curve: AwgnGexitCurve | None = None) -> float:
    """Eb/N0 (dB) solving int_0^{s_bar} (log2 e / 2) mmse_BP(s) ds = R."""
    if ens.coupled:
        raise ValueError("the MAP bound is computed for uncoupled ensembles")
    if curve is None:
        if snr_grid is None:
            snr_grid = np.arange(0.0, 2 * ens.rate * 10 ** (12.0 / 10), SNR_STEP)
        curve = awgn_gexit_curve(ens, channel, snr_grid, cfg=cfg, samples=samples)
    s, g = curve.snr, 0.5 * LOG2E * curve.mmse
    area = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(s))])
    R = ens.rate
    k = int(np.searchsorted(area, R))
    if k >= len(area) or k == 0:
        raise NoRoot(f"GEXIT area {area[-1]:.4f} never reaches R={R}")
    s0, s1, g0, g1 = s[k - 1], s[k], g[k - 1], g[k]
    need = R - area[k - 1]
    slope = (g1 - g0) / (s1 - s0)

    def excess(x):
        return 0.5 * (g0 + g0 + slope * (x - s0)) * (x - s0) - need

    s_bar = brentq(excess, s0, s1, xtol=1e-12)
    return gamma_from_sigma(1.0 / math.sqrt(s_bar), R)
