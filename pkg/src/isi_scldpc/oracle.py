"""Brute-force BCJR check of the detector transfer function.

Under erasures a BCJR metric is positive exactly on the states reachable
through consistent branches, so every extrinsic decision depends on metric
supports only.  Both modes below run that support recursion directly on
input sequences and never touch the metric chains.

* ``exhaustive``: sums over every input sequence, prior-erasure pattern and
  channel-erasure pattern of a length-``n`` block.  The sum is organised as
  a forward pass over prefixes and a backward pass over suffixes that meet
  at the target branch; configurations are merged only when they produce
  identical (true state, support) pairs, so the result is the exact
  probability-weighted enumeration.
* ``montecarlo``: samples long blocks and averages interior positions;
  the standard error comes from independent block means.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .metric_chain import class_weights
from .trellis import ChannelModel, Trellis, build_trellis

EXHAUSTIVE_MAX_N = 12
KNOWN = "known"
UNKNOWN = "unknown"


@dataclass
class OracleResult:
    rate: float
    stderr: float
    per_position: np.ndarray | None = None
    samples: int = 0


def _support_forward(trellis: Trellis, mask: int, prior_bit, level) -> int:
    out = 0
    for u in range(trellis.num_states):
        if not (mask >> u) & 1:
            continue
        for c in (0, 1):
            if prior_bit is not None and c != prior_bit:
                continue
            if level is not None and trellis.level[u, c] != level:
                continue
            out |= 1 << int(trellis.next_state[u, c])
    return out


def _support_backward(trellis: Trellis, mask: int, prior_bit, level) -> int:
    out = 0
    for u in range(trellis.num_states):
        for c in (0, 1):
            if prior_bit is not None and c != prior_bit:
                continue
            if level is not None and trellis.level[u, c] != level:
                continue
            if (mask >> int(trellis.next_state[u, c])) & 1:
                out |= 1 << u
                break
    return out


def _observations(b: int, level: int, w):
    """(prior bit or None, level or None, probability) for one true branch."""
    return ((b, level, w[0]), (b, None, w[1]), (None, level, w[2]), (None, None, w[3]))


def _extrinsic_erased(trellis: Trellis, amask: int, bmask: int, level) -> bool:
    found = [False, False]
    for u in range(trellis.num_states):
        if not (amask >> u) & 1:
            continue
        for c in (0, 1):
            if level is not None and trellis.level[u, c] != level:
                continue
            if (bmask >> int(trellis.next_state[u, c])) & 1:
                found[c] = True
    return found[0] and found[1]


def _exhaustive(trellis: Trellis, delta: float, eps: float, n: int, start: str, end: str):
    S = trellis.num_states
    full = (1 << S) - 1
    w = class_weights(delta, eps)

    # forward[k]: {(true state S_k, support of alpha_k): prob}, observations 1..k
    fwd = [dict() for _ in range(n + 1)]
    if start == KNOWN:
        fwd[0][(0, 1)] = 1.0
    else:
        for s in range(S):
            fwd[0][(s, full)] = 1.0 / S
    for k in range(n):
        nxt: dict = defaultdict(float)
        for (s, mask), p in fwd[k].items():
            for b in (0, 1):
                s2, lvl = int(trellis.next_state[s, b]), int(trellis.level[s, b])
                for pb, yl, wc in _observations(b, lvl, w):
                    if wc:
                        nxt[(s2, _support_forward(trellis, mask, pb, yl))] += 0.5 * p * wc
        fwd[k + 1] = dict(nxt)

    # backward[k][s]: {support of beta_k: prob | S_k = s}, observations k+1..n
    bwd = [None] * (n + 1)
    bwd[n] = [{(1 << s) if end == KNOWN else full: 1.0} for s in range(S)]
    for k in range(n, 0, -1):
        layer = []
        for s in range(S):
            acc: dict = defaultdict(float)
            for b in (0, 1):
                s2, lvl = int(trellis.next_state[s, b]), int(trellis.level[s, b])
                for mask, p in bwd[k][s2].items():
                    for pb, yl, wc in _observations(b, lvl, w):
                        if wc:
                            acc[_support_backward(trellis, mask, pb, yl)] += 0.5 * p * wc
            layer.append(dict(acc))
        bwd[k - 1] = layer

    # extrinsic erasure of branch k (S_{k-1} -> S_k), k = 1..n
    rates = np.zeros(n)
    for k in range(1, n + 1):
        tot = 0.0
        for (s, amask), p in fwd[k - 1].items():
            for b in (0, 1):
                s2, lvl = int(trellis.next_state[s, b]), int(trellis.level[s, b])
                for bmask, q in bwd[k][s2].items():
                    pq = 0.5 * p * q
                    if eps and _extrinsic_erased(trellis, amask, bmask, None):
                        tot += pq * eps
                    if eps < 1 and _extrinsic_erased(trellis, amask, bmask, lvl):
                        tot += pq * (1 - eps)
        rates[k - 1] = tot
    return rates


def _montecarlo(trellis: Trellis, delta: float, eps: float, n: int, blocks: int, edge: int,
                rng: np.random.Generator, batch: int = 256):
    S = trellis.num_states
    nxt, lvl_tab = trellis.next_state, trellis.level
    # one-hot map from (state, bit) pairs to next state, for support propagation
    route = np.zeros((2 * S, S))
    route[np.arange(2 * S), nxt.reshape(-1)] = 1.0
    block_means = []
    done = 0
    while done < blocks:
        B = min(batch, blocks - done)
        bits = rng.integers(0, 2, size=(B, n))
        prior_known = rng.random((B, n)) >= delta
        seen = rng.random((B, n)) >= eps
        states = np.zeros((B, n + 1), dtype=np.int64)
        for t in range(n):
            states[:, t + 1] = nxt[states[:, t], bits[:, t]]
        levels = lvl_tab[states[:, :-1], bits]

        def allowed(t):
            ok = np.ones((B, S, 2), dtype=bool)
            kb = prior_known[:, t]
            ok[kb, :, :] &= (np.arange(2)[None, :] == bits[kb, t][:, None])[:, None, :]
            sv = seen[:, t]
            ok[sv] &= lvl_tab[None, :, :] == levels[sv, t][:, None, None]
            return ok

        A = np.zeros((n + 1, B, S), dtype=bool)
        A[0, :, 0] = True
        masks = [allowed(t) for t in range(n)]
        for t in range(n):
            m = masks[t] & A[t][:, :, None]
            A[t + 1] = (m.reshape(B, 2 * S).astype(float) @ route) > 0
        Bk = np.ones((B, S), dtype=bool)
        erased = np.zeros((B, n), dtype=bool)
        for t in range(n - 1, -1, -1):
            reach = Bk[:, nxt]  # (B, S, 2): next state in beta support
            cand = A[t][:, :, None] & reach
            sv = seen[:, t]
            cand[sv] &= lvl_tab[None, :, :] == levels[sv, t][:, None, None]
            hit = cand.any(axis=1)
            erased[:, t] = hit[:, 0] & hit[:, 1]
            Bk = (masks[t] & reach).any(axis=2)
        block_means.extend(erased[:, edge:n - edge].mean(axis=1))
        done += B
    bm = np.asarray(block_means)
    return float(bm.mean()), float(bm.std(ddof=1) / np.sqrt(len(bm))) if len(bm) > 1 else float("nan")


def sequence_oracle(
    channel: ChannelModel,
    delta: float,
    eps: float,
    n: int,
    mode: str = "exhaustive",
    *,
    positions: slice | None = None,
    start: str = KNOWN,
    end: str = UNKNOWN,
    blocks: int = 400,
    edge: int | None = None,
    seed: int = 0,
) -> OracleResult:
    """Average extrinsic erasure rate of a full finite-trellis BCJR.

    Exhaustive mode averages the positions selected by ``positions``
    (default: the two central branches).  ``start``/``end`` choose whether
    the boundary states are known to the detector; known boundaries give a
    lower bound and unknown ones an upper bound on the steady-state rate.
    """
    trellis = build_trellis(channel)
    if mode == "exhaustive":
        if n > EXHAUSTIVE_MAX_N:
            raise ValueError(f"exhaustive mode supports n <= {EXHAUSTIVE_MAX_N}")
        rates = _exhaustive(trellis, delta, eps, n, start, end)
        sel = positions if positions is not None else slice((n - 1) // 2, n // 2 + 1)
        return OracleResult(float(rates[sel].mean()), 0.0, rates, samples=0)
    if mode == "montecarlo":
        edge = max(n // 10, 1) if edge is None else edge
        if 2 * edge >= n:
            raise ValueError("block too short for the requested edge discard")
        rate, se = _montecarlo(trellis, delta, eps, n, blocks, edge, np.random.default_rng(seed))
        return OracleResult(rate, se, None, samples=blocks * (n - 2 * edge))
    raise ValueError(f"unknown oracle mode {mode!r}")
