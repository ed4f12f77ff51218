"""GB-EXIT curves, MAP-threshold upper bounds, entropy rates and the SIR.

All entropies are in bits.  The GB-EXIT function is evaluated along the BP
fixed-point family of an uncoupled ensemble: for every channel erasure
probability ``eps`` the code-to-detector erasure probability is the DE
fixed point ``delta*(eps)`` and

    G(eps) = sum_ij pi_alpha(i) H(Z | alpha_i, beta_j [, x_hat]) pi_beta(j)

with the stationary laws taken at ``(delta*, eps)``.  ``with_prior`` adds the
decoder's prior on the current input to the conditioning.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .erasure_de import DEState, EnsembleConfig, run_de
from .metric_chain import PRODUCT, TransferCurve, chain_setup, stationary_distribution
from .trellis import ChannelModel, output_alphabet

DEFAULT_STEP = 1e-3
SIR_TOL = 1e-9
_FP_MAX_ITER = 200_000


class NoRoot(RuntimeError):
    """The area under the BP GB-EXIT curve never reaches the design rate."""


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def output_entropy(channel: ChannelModel) -> float:
    """H(Z) of the noiseless filter output under i.u.d. inputs (h^max)."""
    return output_alphabet(chain_setup(channel).trellis).entropy


# ---------------------------------------------------------------------------
# GB-EXIT


def gbexit_point(channel: ChannelModel, eps: float, delta_star: float, *,
                 with_prior: bool = True, law: str = PRODUCT) -> float:
    """G at one point of the fixed-point family, in bits."""
    setup = chain_setup(channel)
    pa, pb = setup.stationary(delta_star, eps)
    G = float(pa @ setup.tables.entropy_kernel(delta_star, with_prior, law) @ pb)
    return max(G, 0.0)


@dataclass
class GexitCurve:
    channel: ChannelModel
    ensemble: EnsembleConfig
    eps: np.ndarray  # decreasing from 1
    delta: np.ndarray
    G: np.ndarray
    with_prior: bool = True
    law: str = PRODUCT

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.eps.tolist(), self.delta.tolist(), self.G.tolist()))

    @property
    def eps_low(self) -> float:
        """Smallest eps on the curve with a nontrivial fixed point."""
        live = self.delta > 0
        return float(self.eps[live].min()) if live.any() else 1.0

    def area_from(self) -> np.ndarray:
        """Cumulative trapezoid integral of G from 1 down to each grid point."""
        de = -np.diff(self.eps)
        return np.concatenate([[0.0], np.cumsum(0.5 * (self.G[1:] + self.G[:-1]) * de)])


def _fixed_point(ens: EnsembleConfig, channel: ChannelModel, eps: float, law: str,
                 init: DEState | None) -> DEState:
    g = TransferCurve(channel, eps, law)
    out = run_de(ens, channel, eps, g=g, law=law, init=init, max_iter=_FP_MAX_ITER,
                 fixed_point_tol=1e-14)
    return out.state


def gexit_curve(ens: EnsembleConfig, channel: ChannelModel, *, step: float = DEFAULT_STEP,
                with_prior: bool = True, law: str = PRODUCT, eps_stop: float = 0.0) -> GexitCurve:
    """Sweep eps downward from 1 along the BP fixed points until DE succeeds.

    Each fixed point warm-starts the next one.  This is exact because DE is
    monotone: the previous fixed point dominates the all-erased start's
    trajectory at the smaller eps from above, so both reach the same
    (largest) fixed point.
    """
    if ens.coupled:
        raise ValueError("the GB-EXIT sweep is defined for uncoupled ensembles")
    n = int(round((1.0 - eps_stop) / step))
    grid = 1.0 - step * np.arange(n + 1)
    eps_l, delta_l, G_l = [], [], []
    state = None
    for e in grid:
        e = float(max(e, 0.0))
        state = _fixed_point(ens, channel, e, law, state)
        d = float(state.delta.max())
        if state.p.max() < 1e-12:
            d = 0.0
        eps_l.append(e)
        delta_l.append(d)
        G_l.append(gbexit_point(channel, e, d, with_prior=with_prior, law=law) if d > 0 else 0.0)
        if d == 0.0:
            break
    return GexitCurve(channel, ens, np.array(eps_l), np.array(delta_l), np.array(G_l), with_prior, law)


def map_threshold_bound(ens: EnsembleConfig, channel: ChannelModel, *, step: float = DEFAULT_STEP,
                        with_prior: bool = True, law: str = PRODUCT,
                        curve: GexitCurve | None = None) -> float:
    """eps_bar with int_{eps_bar}^1 G_BP(eps) d eps = R.

    G is taken piecewise linear between grid points, so inside the bracketing
    cell the area is a quadratic in eps and solved in closed form.
    """
    if curve is None:
        curve = gexit_curve(ens, channel, step=step, with_prior=with_prior, law=law)
    R = ens.rate
    live = curve.delta > 0
    eps, G = curve.eps[live], curve.G[live]
    area = GexitCurve(channel, ens, eps, curve.delta[live], G).area_from()
    k = int(np.searchsorted(area, R))
    if k >= len(area):
        raise NoRoot(f"GB-EXIT area {area[-1]:.6f} at eps={eps[-1]:.4f} is below R={R}")
    # cell [eps[k], eps[k-1]] with G linear: area(x) = area[k-1] + int_x^{eps[k-1]} G
    e1, e0 = eps[k - 1], eps[k]
    g1, g0 = G[k - 1], G[k]
    need = R - area[k - 1]
    slope = (g1 - g0) / (e1 - e0)

    def excess(x):
        gx = g1 - slope * (e1 - x)
        return 0.5 * (g1 + gx) * (e1 - x) - need

    return float(brentq(excess, e0, e1, xtol=1e-14))


# ---------------------------------------------------------------------------
# Entropy rate and SIR


def _level_entropy_given_alpha(channel: ChannelModel) -> np.ndarray:
    """H(Z | alpha_i) for each forward metric, with a uniform new input bit."""
    setup = chain_setup(channel)
    tr = setup.trellis
    A = setup.forward.probability_vectors()
    # P(level l | state s) with the new input uniform
    P = np.zeros((tr.num_states, tr.num_levels))
    for b in (0, 1):
        np.add.at(P, (np.arange(tr.num_states), tr.level[:, b]), 0.5)
    Q = A @ P
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(Q > 0, -Q * np.log2(Q), 0.0)
    return t.sum(axis=1)


def sir(channel: ChannelModel, eps: float) -> float:
    """Symmetric information rate I(X;Y) per channel use, in bits."""
    if eps >= 1.0:
        return 0.0
    setup = chain_setup(channel)
    pi = stationary_distribution(setup.forward.transition_matrix(1.0, eps))
    return float((1.0 - eps) * (pi @ _level_entropy_given_alpha(channel)))


def entropy_rate_HY(channel: ChannelModel, eps: float) -> float:
    """Entropy rate H(Y) of the erased channel output, in bits."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    return binary_entropy(eps) + sir(channel, eps)


@dataclass
class SirCurve:
    channel: ChannelModel
    eps: np.ndarray
    HY: np.ndarray
    SIR: np.ndarray = field(init=False)

    def __post_init__(self):
        self.SIR = self.HY - np.array([binary_entropy(e) for e in self.eps])

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.eps.tolist(), self.HY.tolist(), self.SIR.tolist()))


def sir_curve(channel: ChannelModel, eps_grid) -> SirCurve:
    eps = np.asarray(eps_grid, dtype=float)
    return SirCurve(channel, eps, np.array([entropy_rate_HY(channel, e) for e in eps]))


def sir_threshold(channel: ChannelModel, rate: float, tol: float = SIR_TOL) -> float:
    """Largest eps with SIR(eps) >= rate, by bisection."""
    if not 0.0 < rate < 1.0:
        raise ValueError("rate must lie in (0, 1)")
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if sir(channel, mid) >= rate:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class EntropyPoint:
    h: float
    normalized: float


def entropy_at_threshold(channel: ChannelModel, eps: float) -> EntropyPoint:
    """h = eps H(Z): what is left of Z_i once y_i is seen (erased or exact)."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    hmax = output_entropy(channel)
    return EntropyPoint(eps * hmax, eps)


# ---------------------------------------------------------------------------
# export


def write_curves_csv(path, gexit: GexitCurve | None = None, sir_c: SirCurve | None = None):
    """One row per eps: eps, delta*, G, H(Y), SIR (blank where not computed)."""
    rows: dict[float, dict] = {}
    if gexit is not None:
        for e, d, g in gexit.points:
            rows.setdefault(round(e, 12), {}).update(delta=d, G=g)
    if sir_c is not None:
        for e, hy, s in sir_c.points:
            rows.setdefault(round(e, 12), {}).update(HY=hy, SIR=s)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "delta", "G", "HY", "SIR"])
        for e in sorted(rows):
            r = rows[e]
            w.writerow([f"{e:.6f}"] + [f"{r[k]:.10g}" if k in r else "" for k in ("delta", "G", "HY", "SIR")])
