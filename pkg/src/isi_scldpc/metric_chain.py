"""Exact Markov chains of BCJR state metrics on ISI channels with erasures.

With erasure-type priors and observations every forward metric ``alpha_t``
and backward metric ``beta_t`` is a rational probability vector drawn from a
finite set.  We enumerate those sets exactly (integer vectors reduced by
their gcd), track the true trellis state jointly with the metric, and
average the detector's extrinsic erasure indicator over the stationary law.

Both metrics are posteriors of the true state under i.u.d. inputs: the
forward metric given the past, the normalised backward metric given the
future (the stationary state law is uniform).  Marginalising the joint
(state, metric) chain over the true state therefore weights state ``s`` by
``metric[s]``.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .trellis import ChannelModel, Trellis, bit_to_symbol, build_trellis

FORWARD = "forward"
BACKWARD = "backward"
DEFAULT_STATE_CAP = 10**6
DENSE_LIMIT = 10**4

# observation classes of a trellis section: (prior known?, output observed?)
# weights are 1-d)(1-e), (1-d)e, d(1-e), de
CLASSES = ((True, True), (True, False), (False, True), (False, False))


class InconsistentObservation(ValueError):
    pass


class StateExplosion(RuntimeError):
    pass


def class_weights(delta: float, eps: float) -> tuple[float, float, float, float]:
    return ((1 - delta) * (1 - eps), (1 - delta) * eps, delta * (1 - eps), delta * eps)


def _reduce(v) -> tuple[int, ...]:
    g = 0
    for a in v:
        g = math.gcd(g, a)
    if g == 0:
        raise InconsistentObservation("observation has zero probability under the metric")
    return tuple(a // g for a in v)


def _bits_allowed(xhat):
    if xhat is None:
        return (0, 1)
    return (0,) if xhat == 1 else (1,)


def forward_step(trellis: Trellis, metric, xhat, y):
    """One unnormalised BCJR forward step.

    ``xhat`` is +1, -1 or None (erased prior); ``y`` is an output-level index
    or None (erased observation).  Works for ints, Fractions or floats.
    """
    new = [0 * metric[0]] * trellis.num_states
    bits = _bits_allowed(xhat)
    for s, a in enumerate(metric):
        if not a:
            continue
        for b in bits:
            if y is not None and trellis.level[s, b] != y:
                continue
            new[trellis.next_state[s, b]] += a
    return new


def backward_step(trellis: Trellis, metric, xhat, y):
    """One unnormalised BCJR backward step, metric over S_{t+1} -> S_t."""
    new = [0 * metric[0]] * trellis.num_states
    bits = _bits_allowed(xhat)
    for s in range(trellis.num_states):
        acc = 0 * metric[0]
        for b in bits:
            if y is not None and trellis.level[s, b] != y:
                continue
            acc += metric[trellis.next_state[s, b]]
        new[s] = acc
    return new


def _normalise(v):
    total = sum(v)
    if not total:
        raise InconsistentObservation("observation has zero probability under the metric")
    return tuple(Fraction(a) / total for a in v) if isinstance(total, (int, Fraction)) else tuple(
        a / total for a in v
    )


def forward_update(trellis: Trellis, metric, xhat, y):
    """Normalised forward update; ``y`` may be a level index or a real output value."""
    return _normalise(forward_step(trellis, metric, xhat, _as_level(trellis, y)))


def backward_update(trellis: Trellis, metric, xhat, y):
    return _normalise(backward_step(trellis, metric, xhat, _as_level(trellis, y)))


def _as_level(trellis: Trellis, y):
    if y is None or isinstance(y, (int, np.integer)):
        return y
    idx = int(np.abs(trellis.levels - float(y)).argmin())
    if abs(trellis.levels[idx] - float(y)) > 1e-6:
        raise InconsistentObservation(f"{y} is not a channel output level")
    return idx


def true_branches(trellis: Trellis, direction: str, s: int):
    """Branches of the true state process from ``s`` as (prob, next_state, bit, level).

    Forward: next input uniform.  Backward: the branch into ``s`` carries the
    newest bit of ``s``; the dropped oldest bit of the predecessor is uniform.
    """
    if direction == FORWARD or trellis.memory == 0:
        return [(0.5, int(trellis.next_state[s, b]), b, int(trellis.level[s, b])) for b in (0, 1)]
    b = trellis.last_bit(s)
    out = []
    for old in (0, 1):
        sp = trellis.prev_state(s, old)
        out.append((0.5, sp, b, int(trellis.level[sp, b])))
    return out


@dataclass(frozen=True)
class JointChainState:
    """True trellis state paired with the detector's metric vector."""

    true_state: int
    metric: tuple

    def __post_init__(self):
        if not self.metric[self.true_state] > 0:
            raise ValueError("the metric excludes the true state")


def observation_distribution(trellis: Trellis, joint: JointChainState, delta: float, eps: float,
                             direction: str = FORWARD):
    """Observations of one trellis section as ``((xhat, y), prob, next joint state)``.

    The true input is uniform; the prior is erased with probability
    ``delta`` and the output with probability ``eps``.  Outcomes with the
    same observation and the same next true state are merged.
    """
    _check_unit("delta", delta)
    _check_unit("eps", eps)
    update = forward_update if direction == FORWARD else backward_update
    w = class_weights(delta, eps)
    acc: dict = {}
    for p, s_next, b, lvl in true_branches(trellis, direction, joint.true_state):
        x = bit_to_symbol(b)
        for c, (known_prior, seen) in enumerate(CLASSES):
            if not w[c]:
                continue
            obs = (x if known_prior else None, lvl if seen else None)
            key = (obs, s_next)
            acc[key] = acc.get(key, 0.0) + p * w[c]
    out = []
    for (obs, s_next), prob in acc.items():
        nxt = JointChainState(s_next, update(trellis, joint.metric, *obs))
        out.append((obs, prob, nxt))
    return out


@dataclass
class JointTransition:
    true_state: int
    metric: int
    obs_class: int
    xhat: int | None
    y: int | None
    prob: float
    next_true_state: int
    next_metric: int


@dataclass
class MetricChain:
    """Enumerated metric set with transitions split by observation class.

    ``metrics`` holds the reduced integer vectors; ``class_matrices[c]`` is
    the sparse matrix with entries ``sum_s metric_i(s) * P(branch)`` for
    transitions i -> j under class ``c``.  ``M = sum_c w_c(delta, eps) A_c``.
    """

    trellis: Trellis
    direction: str
    metrics: list[tuple[int, ...]]
    class_matrices: list[scipy.sparse.csr_matrix]
    joint: list[JointTransition]

    @property
    def size(self) -> int:
        return len(self.metrics)

    def probability_vectors(self) -> np.ndarray:
        a = np.array(self.metrics, dtype=float)
        return a / a.sum(axis=1, keepdims=True)

    def exact_vectors(self) -> list[tuple[Fraction, ...]]:
        out = []
        for m in self.metrics:
            tot = sum(m)
            out.append(tuple(Fraction(v, tot) for v in m))
        return out

    def transition_matrix(self, delta: float, eps: float):
        w = class_weights(delta, eps)
        M = w[0] * self.class_matrices[0]
        for c in range(1, 4):
            M = M + w[c] * self.class_matrices[c]
        return M.tocsr()

    def index_of(self, vector) -> int:
        key = _reduce(_integerise(vector))
        return self.metrics.index(key)


def _integerise(vector) -> list[int]:
    fr = [Fraction(v).limit_denominator(10**12) if isinstance(v, float) else Fraction(v) for v in vector]
    den = 1
    for f in fr:
        den = den * f.denominator // math.gcd(den, f.denominator)
    return [int(f * den) for f in fr]


def enumerate_chain(
    trellis: Trellis, direction: str = FORWARD, cap: int = DEFAULT_STATE_CAP, keep_joint: bool = False
) -> MetricChain:
    """Breadth-first closure of the metric set from the perfect-knowledge metrics."""
    if direction not in (FORWARD, BACKWARD):
        raise ValueError(f"direction must be {FORWARD!r} or {BACKWARD!r}")
    n = trellis.num_states
    step = forward_step if direction == FORWARD else backward_step

    index: dict[tuple[int, ...], int] = {}
    metrics: list[tuple[int, ...]] = []
    queue: deque[int] = deque()

    def lookup(vec) -> int:
        key = _reduce(vec)
        j = index.get(key)
        if j is None:
            if len(metrics) >= cap:
                raise StateExplosion(f"{direction} metric closure exceeded {cap} states")
            j = len(metrics)
            index[key] = j
            metrics.append(key)
            queue.append(j)
        return j

    for s in range(n):
        lookup([1 if k == s else 0 for k in range(n)])

    rows: list[list[int]] = [[], [], [], []]
    cols: list[list[int]] = [[], [], [], []]
    vals: list[list[float]] = [[], [], [], []]
    joint: list[JointTransition] = []

    while queue:
        i = queue.popleft()
        m = metrics[i]
        tot = sum(m)
        cache: dict[tuple, int] = {}
        for s in range(n):
            if m[s] == 0:
                continue
            ws = m[s] / tot
            for p, s_next, b, lvl in true_branches(trellis, direction, s):
                x = bit_to_symbol(b)
                for c, (known_prior, seen) in enumerate(CLASSES):
                    obs = (x if known_prior else None, lvl if seen else None)
                    j = cache.get(obs)
                    if j is None:
                        j = cache[obs] = lookup(step(trellis, m, *obs))
                    rows[c].append(i)
                    cols[c].append(j)
                    vals[c].append(ws * p)
                    if keep_joint:
                        joint.append(JointTransition(s, i, c, obs[0], obs[1], p, s_next, j))

    size = len(metrics)
    mats = [
        scipy.sparse.coo_matrix((vals[c], (rows[c], cols[c])), shape=(size, size)).tocsr()
        for c in range(4)
    ]
    return MetricChain(trellis, direction, metrics, mats, joint)


def stationary_distribution(M) -> np.ndarray:
    """Left Perron vector of a row-stochastic matrix (pi M = pi, sum pi = 1)."""
    n = M.shape[0]
    if n == 1:
        return np.ones(1)
    if n <= DENSE_LIMIT:
        A = (M.toarray() if scipy.sparse.issparse(M) else np.asarray(M)).T - np.eye(n)
        A[-1, :] = 1.0
        rhs = np.zeros(n)
        rhs[-1] = 1.0
        try:
            pi = scipy.linalg.solve(A, rhs)
        except scipy.linalg.LinAlgError:
            pi = np.linalg.lstsq(A, rhs, rcond=None)[0]
    else:
        pi = _power_iteration(scipy.sparse.csr_matrix(M))
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _power_iteration(M, tol: float = 1e-15, max_iter: int = 100000) -> np.ndarray:
    n = M.shape[0]
    pi = np.full(n, 1.0 / n)
    MT = M.T.tocsr()
    for _ in range(max_iter):
        nxt = MT @ pi
        nxt /= nxt.sum()
        if np.abs(nxt - pi).sum() < tol:
            return nxt
        pi = nxt
    return pi


# How the pair (alpha_t, beta_{t+1}) is weighted when averaging over the chains.
# "product": P(i, j) = pi_alpha(i) pi_beta(j) and per-pair quantities are
#   conditional on the pair, i.e. g = pi_alpha T pi_beta with T in [0, 1].
# "joint": the exact joint law pi_alpha(i) pi_beta(j) * pair_mass(i, j); this
#   is what a finite-trellis BCJR actually averages to.  Both coincide for
#   memory-1 channels and for CH-II; they differ for CH-III.
PRODUCT = "product"
JOINT = "joint"
LAWS = (PRODUCT, JOINT)


def _entropy_along0(P: np.ndarray) -> np.ndarray:
    s = P.sum(axis=0, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        q = np.where(s > 0, P / s, 0.0)
        t = np.where(q > 0, -q * np.log2(q), 0.0)
    return t.sum(axis=0)


@dataclass
class BranchTables:
    """(delta, eps)-independent pair tables over alpha_i x beta_j.

    The true branch (s', x) has posterior weight
    ``2**(nu-1) alpha_i(s') beta_j(next(s',x))`` relative to
    ``pi_alpha(i) pi_beta(j)``; ``pair_mass[i, j]`` is its total.  The
    ``erased_*`` tables hold the part of that mass on which the detector's
    extrinsic output is an erasure, for an erased / observed current output.
    ``h_open`` and ``h_prior`` are the conditional entropies (bits) of the
    branch output Z given the pair, without and with the decoder's prior on
    the current input.
    """

    pair_mass: np.ndarray
    erased_unseen: np.ndarray
    erased_seen: np.ndarray
    h_open: np.ndarray
    h_prior: np.ndarray

    def weighted(self, eps: float) -> np.ndarray:
        return eps * self.erased_unseen + (1 - eps) * self.erased_seen

    def conditional(self, eps: float) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.pair_mass > 0, self.weighted(eps) / self.pair_mass, 0.0)

    def pair_weights(self, law: str):
        if law == PRODUCT:
            return 1.0
        if law == JOINT:
            return self.pair_mass
        raise ValueError(f"law must be one of {LAWS}, got {law!r}")

    def erasure_kernel(self, eps: float, law: str = PRODUCT) -> np.ndarray:
        """Matrix E with g = pi_alpha E pi_beta."""
        return self.conditional(eps) * self.pair_weights(law)

    def entropy_kernel(self, delta: float, with_prior: bool = True, law: str = PRODUCT) -> np.ndarray:
        h = delta * self.h_open + (1 - delta) * self.h_prior if with_prior else self.h_open
        return h * self.pair_weights(law)


def branch_tables(trellis: Trellis, fwd: MetricChain, bwd: MetricChain) -> BranchTables:
    A = fwd.probability_vectors()
    B = bwd.probability_vectors()
    scale = 2.0 ** (trellis.memory - 1)
    n_lvl = trellis.num_levels
    # K[b, l] = A P_{b,l} B^T: pair mass of branches with input bit b and output level l
    K = np.zeros((2, n_lvl, A.shape[0], B.shape[0]))
    for b in (0, 1):
        for lvl in range(n_lvl):
            sel = np.nonzero(trellis.level[:, b] == lvl)[0]
            if len(sel):
                K[b, lvl] = scale * (A[:, sel] @ B[:, trellis.next_state[sel, b]].T)
    live = K > 1e-300
    Kb = K.sum(axis=1)
    pair_mass = Kb.sum(axis=0)
    erased_unseen = np.where(live.any(axis=1).all(axis=0), pair_mass, 0.0)
    erased_seen = np.where(live[::-1], K, 0.0).sum(axis=(0, 1))
    h_open = _entropy_along0(K.sum(axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        h_prior = sum(
            np.where(pair_mass > 0, Kb[b] / pair_mass, 0.0) * _entropy_along0(K[b]) for b in (0, 1)
        )
    return BranchTables(pair_mass, erased_unseen, erased_seen, h_open, h_prior)


@dataclass
class ChainSetup:
    trellis: Trellis
    forward: MetricChain
    backward: MetricChain
    tables: BranchTables

    def stationary(self, delta: float, eps: float) -> tuple[np.ndarray, np.ndarray]:
        pa = stationary_distribution(self.forward.transition_matrix(delta, eps))
        pb = stationary_distribution(self.backward.transition_matrix(delta, eps))
        return pa, pb


@lru_cache(maxsize=32)
def _cached_setup(taps: tuple[float, ...], cap: int) -> ChainSetup:
    trellis = build_trellis(ChannelModel(taps))
    fwd = enumerate_chain(trellis, FORWARD, cap)
    bwd = enumerate_chain(trellis, BACKWARD, cap)
    return ChainSetup(trellis, fwd, bwd, branch_tables(trellis, fwd, bwd))


def chain_setup(channel: ChannelModel, cap: int = DEFAULT_STATE_CAP) -> ChainSetup:
    """Trellis, forward/backward chains and pair tables, cached per tap vector."""
    return _cached_setup(tuple(channel.taps), cap)


@dataclass
class ChainSystem:
    channel: ChannelModel
    delta: float
    eps: float
    M_alpha: np.ndarray
    M_beta: np.ndarray
    pi_alpha: np.ndarray
    pi_beta: np.ndarray
    T: np.ndarray
    g: float
    alpha_metrics: np.ndarray
    beta_metrics: np.ndarray
    law: str = PRODUCT

    def as_dict(self) -> dict:
        return {
            "channel": list(self.channel.taps),
            "delta": self.delta,
            "eps": self.eps,
            "law": self.law,
            "alpha_metrics": self.alpha_metrics.tolist(),
            "beta_metrics": self.beta_metrics.tolist(),
            "M_alpha": self.M_alpha.tolist(),
            "M_beta": self.M_beta.tolist(),
            "pi_alpha": self.pi_alpha.tolist(),
            "pi_beta": self.pi_beta.tolist(),
            "T": self.T.tolist(),
            "g": self.g,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict())


def _check_unit(name: str, v: float):
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {v}")


def build_chain_system(channel: ChannelModel, delta: float, eps: float, law: str = PRODUCT) -> ChainSystem:
    _check_unit("delta", delta)
    _check_unit("eps", eps)
    setup = chain_setup(channel)
    Ma = setup.forward.transition_matrix(delta, eps)
    Mb = setup.backward.transition_matrix(delta, eps)
    pa = stationary_distribution(Ma)
    pb = stationary_distribution(Mb)
    g = float(pa @ setup.tables.erasure_kernel(eps, law) @ pb)
    return ChainSystem(
        channel, delta, eps, Ma.toarray(), Mb.toarray(), pa, pb,
        setup.tables.conditional(eps), min(max(g, 0.0), 1.0),
        setup.forward.probability_vectors(), setup.backward.probability_vectors(), law,
    )


def extrinsic_erasure_matrix(system: ChainSystem) -> np.ndarray:
    return system.T


def transfer_function(channel: ChannelModel, delta: float, eps: float, law: str = PRODUCT) -> float:
    """Extrinsic erasure probability g(delta, eps) of the BCJR detector."""
    _check_unit("delta", delta)
    _check_unit("eps", eps)
    setup = chain_setup(channel)
    pa, pb = setup.stationary(delta, eps)
    return min(max(float(pa @ setup.tables.erasure_kernel(eps, law) @ pb), 0.0), 1.0)


class TransferCurve:
    """g(., eps) on [0, 1] as a Chebyshev interpolant of exact chain solves.

    g is a rational function of delta without poles on [0, 1], so the
    interpolant converges geometrically; the degree is doubled until the
    check points agree with exact evaluation to ``tol``.
    """

    def __init__(self, channel: ChannelModel, eps: float, law: str = PRODUCT,
                 degree: int = 32, tol: float = 1e-13, max_degree: int = 512):
        _check_unit("eps", eps)
        self.channel, self.eps, self.law = channel, eps, law
        while True:
            self.coef = self._fit(degree)
            err = self.check_error()
            if err <= tol or degree >= max_degree:
                break
            degree *= 2
        self.degree, self.error = degree, err

    def _exact(self, delta: float) -> float:
        return transfer_function(self.channel, float(delta), self.eps, self.law)

    def _fit(self, degree: int) -> np.ndarray:
        x = np.cos(np.pi * (np.arange(degree + 1) + 0.5) / (degree + 1))
        vals = [self._exact((xi + 1) / 2) for xi in x]
        return np.polynomial.chebyshev.chebfit(x, vals, degree)

    def check_error(self) -> float:
        probe = np.array([0.0, 0.137, 0.5003, 0.861, 1.0])
        return float(max(abs(self(d) - self._exact(d)) for d in probe))

    def __call__(self, delta):
        v = np.polynomial.chebyshev.chebval(2 * np.asarray(delta, dtype=float) - 1, self.coef)
        return np.clip(v, 0.0, 1.0)
