"""Log-domain BCJR detector and forward-sum entropy estimator for ISI-AWGN.

LLRs are log P(x=+1)/P(x=-1), i.e. positive values favour bit 0.
"""
from __future__ import annotations

import math

import numba
import numpy as np

from ..trellis import ChannelModel, build_trellis

NEG_INF = -np.inf


@numba.njit(cache=True)
def _lae(a, b):
    if a < b:
        a, b = b, a
    if b == NEG_INF:
        return a
    return a + math.log1p(math.exp(b - a))


@numba.njit(cache=True)
def _bcjr_kernel(nxt, out, y, prior, inv_2s2, start_state, want_mean):
    """Extrinsic LLRs and, optionally, posterior means of the branch output.

    ``start_state < 0`` means the initial state is unknown (uniform); the
    final state is always treated as unknown.  Forward metrics are
    max-normalised at every step.
    """
    n = y.shape[0]
    S = nxt.shape[0]
    la = np.empty((n + 1, S))
    if start_state < 0:
        la[0, :] = 0.0
    else:
        la[0, :] = NEG_INF
        la[0, start_state] = 0.0
    row = np.empty(S)
    for t in range(n):
        row[:] = NEG_INF
        half = 0.5 * prior[t]
        for s in range(S):
            a = la[t, s]
            if a == NEG_INF:
                continue
            for b in range(2):
                d = y[t] - out[s, b]
                g = a - d * d * inv_2s2 + (half if b == 0 else -half)
                s2 = nxt[s, b]
                row[s2] = _lae(row[s2], g)
        mx = row.max()
        for s in range(S):
            la[t + 1, s] = row[s] - mx

    ext = np.empty(n)
    zhat = np.zeros(n)
    lb = np.zeros(S)
    lb_new = np.empty(S)
    w = np.empty((S, 2))
    for t in range(n - 1, -1, -1):
        half = 0.5 * prior[t]
        num0 = NEG_INF
        num1 = NEG_INF
        for s in range(S):
            for b in range(2):
                d = y[t] - out[s, b]
                c = la[t, s] - d * d * inv_2s2 + lb[nxt[s, b]]
                w[s, b] = c + (half if b == 0 else -half)
                if b == 0:
                    num0 = _lae(num0, c)
                else:
                    num1 = _lae(num1, c)
        ext[t] = num0 - num1
        if want_mean:
            mx = w.max()
            tot = 0.0
            acc = 0.0
            for s in range(S):
                for b in range(2):
                    e = math.exp(w[s, b] - mx)
                    tot += e
                    acc += e * out[s, b]
            zhat[t] = acc / tot
        for s in range(S):
            v = NEG_INF
            for b in range(2):
                d = y[t] - out[s, b]
                v = _lae(v, -d * d * inv_2s2 + (half if b == 0 else -half) + lb[nxt[s, b]])
            lb_new[s] = v
        mx = lb_new.max()
        for s in range(S):
            lb[s] = lb_new[s] - mx
    return ext, zhat


@numba.njit(cache=True)
def _log2_py_kernel(nxt, out, y, sigma):
    """-log2 p(y) summed over the block, uniform initial state, i.u.d. inputs."""
    n = y.shape[0]
    S = nxt.shape[0]
    alpha = np.full(S, 1.0 / S)
    new = np.empty(S)
    norm = 1.0 / math.sqrt(2.0 * math.pi * sigma * sigma)
    inv_2s2 = 1.0 / (2.0 * sigma * sigma)
    total = 0.0
    for t in range(n):
        new[:] = 0.0
        for s in range(S):
            a = alpha[s]
            for b in range(2):
                d = y[t] - out[s, b]
                new[nxt[s, b]] += a * 0.5 * norm * math.exp(-d * d * inv_2s2)
        c = new.sum()
        total -= math.log2(c)
        for s in range(S):
            alpha[s] = new[s] / c
    return total


def channel_output(channel: ChannelModel, bits: np.ndarray, history: np.ndarray | None = None) -> np.ndarray:
    """Noiseless filter output for ``bits``; ``history`` holds the nu bits before them."""
    nu = channel.memory
    x = 1.0 - 2.0 * np.asarray(bits, dtype=float)
    past = np.ones(nu) if history is None else 1.0 - 2.0 * np.asarray(history, dtype=float)
    full = np.concatenate([past, x])
    return np.convolve(full, np.asarray(channel.taps), "full")[nu:nu + len(x)]


def state_of(history: np.ndarray) -> int:
    """Trellis state for the nu most recent bits (oldest first)."""
    s = 0
    for b in history:
        s = (s << 1) | int(b)
    return s


def bcjr_awgn(channel: ChannelModel, priors, observations, sigma: float, *,
              start_state: int | None = None, return_mean: bool = False):
    """Extrinsic bit LLRs of the BCJR detector (the current bit's prior excluded).

    ``start_state=None`` treats the initial state as unknown.  With
    ``return_mean`` the posterior mean of each branch output is returned as
    well (current prior included).
    """
    y = np.ascontiguousarray(observations, dtype=float)
    prior = np.ascontiguousarray(priors, dtype=float)
    if y.shape != prior.shape:
        raise ValueError("priors and observations must have equal length")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    tr = build_trellis(channel)
    ext, zhat = _bcjr_kernel(tr.next_state, tr.output, y, prior, 1.0 / (2.0 * sigma * sigma),
                             -1 if start_state is None else int(start_state), return_mean)
    return (ext, zhat) if return_mean else ext
